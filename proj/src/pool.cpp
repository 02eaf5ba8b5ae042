#include "mfscale/pool.hpp"

#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/parallel.hpp"
#include "mfscale/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfscale {

std::ptrdiff_t SamplePool::index_of(int case_id) const {
  auto it = std::lower_bound(cases.begin(), cases.end(), case_id,
                             [](const FlowCase& c, int id) { return c.case_id < id; });
  if (it == cases.end() || it->case_id != case_id) return -1;
  return it - cases.begin();
}

const FieldSolution& SamplePool::solution(int case_id, Fidelity f) const {
  auto i = index_of(case_id);
  if (i < 0) throw ContractError("case_id " + std::to_string(case_id) + " not in pool");
  return f == Fidelity::Low ? low_solutions[i] : high_solutions[i];
}

std::vector<FlowCase> sample_cases(std::size_t n_cases, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FlowCase> out(n_cases);
  for (std::size_t i = 0; i < n_cases; ++i) {
    out[i].case_id = static_cast<int>(i);
    out[i].re_delta = std::pow(10.0, rng.uniform(std::log10(kMinReDelta), std::log10(kMaxReDelta)));
    out[i].beta_p = rng.uniform(kMinBetaP, kMaxBetaP);
  }
  return out;
}

CostModel realized_cost_model(const SamplePool& pool) {
  if (pool.size() == 0) throw PoolError("cost model of an empty pool");
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    lo += static_cast<double>(pool.low_solutions[i].work_units);
    hi += static_cast<double>(pool.high_solutions[i].work_units);
  }
  return {lo / static_cast<double>(pool.size()), hi / static_cast<double>(pool.size())};
}

SamplePool assemble_pool(std::vector<FieldSolution> low, std::vector<FieldSolution> high) {
  if (low.size() != high.size()) throw PoolError("unmatched fidelity solution counts");
  std::vector<std::size_t> order(low.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return low[a].flow_case.case_id < low[b].flow_case.case_id; });
  SamplePool pool;
  for (auto i : order) {
    if (low[i].flow_case.case_id != high[i].flow_case.case_id) throw PoolError("unmatched case ids in pair");
    if (!low[i].converged || !high[i].converged) {
      pool.dropped_case_ids.push_back(low[i].flow_case.case_id);
      continue;
    }
    pool.cases.push_back(low[i].flow_case);
    pool.low_solutions.push_back(std::move(low[i]));
    pool.high_solutions.push_back(std::move(high[i]));
  }
  if (pool.size() < 2)
    throw PoolError("only " + std::to_string(pool.size()) + " converged pairs; need at least 2");
  pool.cost_model = realized_cost_model(pool);
  return pool;
}

SamplePool generate_pool(std::size_t n_cases, std::uint64_t seed, const PoolOptions& opt) {
  if (n_cases < 2) throw PoolError("generate_pool needs n_cases >= 2");
  auto cases = sample_cases(n_cases, seed);
  std::vector<FieldSolution> low(n_cases), high(n_cases);
  // largest meshes first keeps the tail short when workers > 1
  std::vector<std::size_t> order(n_cases);
  for (std::size_t i = 0; i < n_cases; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cases[a].re_delta > cases[b].re_delta; });
  parallel_for(2 * n_cases, opt.workers, [&](std::size_t k) {
    std::size_t i = order[k / 2];
    if (k % 2 == 0)
      high[i] = solve_case(cases[i], Fidelity::High, opt.solver);
    else
      low[i] = solve_case(cases[i], Fidelity::Low, opt.solver);
  });
  return assemble_pool(std::move(low), std::move(high));
}

SamplePool subset(const SamplePool& pool, const std::vector<int>& case_ids) {
  std::vector<int> ids = case_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ContractError("subset: duplicate case ids");
  SamplePool out;
  for (int id : ids) {
    auto i = pool.index_of(id);
    if (i < 0) throw ContractError("subset: case_id " + std::to_string(id) + " not in pool");
    out.cases.push_back(pool.cases[i]);
    out.low_solutions.push_back(pool.low_solutions[i]);
    out.high_solutions.push_back(pool.high_solutions[i]);
  }
  if (out.size() > 0) out.cost_model = realized_cost_model(out);
  return out;
}

std::pair<SamplePool, SamplePool> split_pool(const SamplePool& pool, std::size_t n_test, std::uint64_t seed) {
  if (n_test >= pool.size())
    throw ConfigError("test size " + std::to_string(n_test) + " leaves no composition pairs out of " +
                      std::to_string(pool.size()));
  std::vector<int> ids;
  for (const auto& c : pool.cases) ids.push_back(c.case_id);
  Rng rng(seed);
  rng.shuffle(ids);
  std::vector<int> test(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> train(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  return {subset(pool, train), subset(pool, test)};
}

namespace {

std::string field_file_name(int case_id, Fidelity f) {
  return std::to_string(case_id) + "_" + std::string(to_string(f)) + ".csv";
}

std::string field_csv(const FieldSolution& s) {
  std::string out = "node_y,u,tau_w\n";
  const std::string tau = format_double(s.tau_w);
  for (Eigen::Index i = 0; i < s.u.size(); ++i) {
    out += format_double(s.mesh.node_y[i]);
    out += ',';
    out += format_double(s.u[i]);
    out += ',';
    out += tau;
    out += '\n';
  }
  return out;
}

FieldSolution read_field(const std::filesystem::path& path, const FlowCase& c, Fidelity f) {
  auto t = read_csv(path);
  auto cy = t.column("node_y"), cu = t.column("u"), ct = t.column("tau_w");
  FieldSolution s;
  s.flow_case = c;
  s.fidelity = f;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  if (n < 3) throw PoolError(path.string() + ": fewer than 3 nodes");
  s.mesh.node_y.resize(n);
  s.u.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.mesh.node_y[i] = parse_double(t.rows[i][cy], t.row_lines[i]);
    s.u[i] = parse_double(t.rows[i][cu], t.row_lines[i]);
  }
  s.tau_w = parse_double(t.rows[0][ct], t.row_lines[0]);
  s.mesh.stretching = (s.mesh.node_y[2] - s.mesh.node_y[1]) > 0 && n > 3
                          ? (s.mesh.node_y[3] - s.mesh.node_y[2]) / (s.mesh.node_y[2] - s.mesh.node_y[1])
                          : 1.0;
  s.friction_velocity = std::sqrt(std::abs(0.5 * s.tau_w));
  return s;
}

const char* kManifestHeader =
    "case_id,re_delta,beta_p,low_path,high_path,low_work_units,high_work_units,low_converged,high_converged,"
    "low_iterations,high_iterations,low_first_yplus,high_first_yplus";

}  // namespace

void save_pool(const SamplePool& pool, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "fields");
  std::ostringstream man;
  man << kManifestHeader << '\n';
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& c = pool.cases[i];
    const auto& lo = pool.low_solutions[i];
    const auto& hi = pool.high_solutions[i];
    auto lp = "fields/" + field_file_name(c.case_id, Fidelity::Low);
    auto hp = "fields/" + field_file_name(c.case_id, Fidelity::High);
    write_file_atomic(dir / lp, field_csv(lo));
    write_file_atomic(dir / hp, field_csv(hi));
    man << c.case_id << ',' << format_double(c.re_delta) << ',' << format_double(c.beta_p) << ',' << lp << ','
        << hp << ',' << lo.work_units << ',' << hi.work_units << ',' << (lo.converged ? 1 : 0) << ','
        << (hi.converged ? 1 : 0) << ',' << lo.iterations << ',' << hi.iterations << ','
        << format_double(lo.mesh.first_center_yplus) << ',' << format_double(hi.mesh.first_center_yplus) << '\n';
  }
  if (!pool.dropped_case_ids.empty()) {
    man << "# dropped";
    for (int id : pool.dropped_case_ids) man << ' ' << id;
    man << '\n';
  }
  write_file_atomic(dir / "manifest.csv", man.str());
}

SamplePool load_pool(const std::filesystem::path& dir) {
  auto t = read_csv(dir / "manifest.csv");
  std::vector<FieldSolution> low, high;
  auto col = [&](const char* name) { return t.column(name); };
  const auto c_id = col("case_id"), c_re = col("re_delta"), c_b = col("beta_p"), c_lp = col("low_path"),
             c_hp = col("high_path"), c_lw = col("low_work_units"), c_hw = col("high_work_units"),
             c_lc = col("low_converged"), c_hc = col("high_converged"), c_li = col("low_iterations"),
             c_hi = col("high_iterations"), c_ly = col("low_first_yplus"), c_hy = col("high_first_yplus");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long ln = t.row_lines[r];
    FlowCase c;
    c.case_id = static_cast<int>(parse_int(row[c_id], ln));
    c.re_delta = parse_double(row[c_re], ln);
    c.beta_p = parse_double(row[c_b], ln);
    auto lo = read_field(dir / row[c_lp], c, Fidelity::Low);
    auto hi = read_field(dir / row[c_hp], c, Fidelity::High);
    lo.work_units = parse_int(row[c_lw], ln);
    hi.work_units = parse_int(row[c_hw], ln);
    lo.converged = parse_int(row[c_lc], ln) != 0;
    hi.converged = parse_int(row[c_hc], ln) != 0;
    lo.status = lo.converged ? SolveStatus::Converged : SolveStatus::IterationCap;
    hi.status = hi.converged ? SolveStatus::Converged : SolveStatus::IterationCap;
    lo.iterations = static_cast<int>(parse_int(row[c_li], ln));
    hi.iterations = static_cast<int>(parse_int(row[c_hi], ln));
    lo.mesh.first_center_yplus = parse_double(row[c_ly], ln);
    hi.mesh.first_center_yplus = parse_double(row[c_hy], ln);
    low.push_back(std::move(lo));
    high.push_back(std::move(hi));
  }
  auto pool = assemble_pool(std::move(low), std::move(high));
  auto text = read_file(dir / "manifest.csv");
  auto pos = text.find("# dropped");
  if (pos != std::string::npos) {
    std::istringstream is(text.substr(pos + 9, text.find('\n', pos) - pos - 9));
    int id;
    while (is >> id) pool.dropped_case_ids.push_back(id);
  }
  return pool;
}

}  // namespace mfscale
