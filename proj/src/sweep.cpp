#include "mfscale/sweep.hpp"

#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/metrics.hpp"
#include "mfscale/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>

namespace mfscale {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_widths(const json& j, const char* key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  std::vector<long long> v;
  read(j, key, v);
  out.assign(v.begin(), v.end());
}

}  // namespace

void validate(const SweepConfig& c) {
  if (c.pool_size < 2) throw ConfigError("pool size must be >= 2");
  if (c.test_size < 1 || c.test_size >= c.pool_size) throw ConfigError("test_size must lie in [1, pool size)");
  auto ascending = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) return false;
    return true;
  };
  if (!c.budgets.empty()) {
    if (!ascending(c.budgets) || !(c.budgets.front() > 0.0)) throw ConfigError("budgets must be positive and ascending");
  } else {
    if (c.budget_fractions.empty()) throw ConfigError("need budgets or budget_fractions");
    if (!ascending(c.budget_fractions) || !(c.budget_fractions.front() > 0.0))
      throw ConfigError("budget_fractions must be positive and ascending");
  }
  if (c.compositions.empty() || !ascending(c.compositions) || c.compositions.front() < 0.0 ||
      c.compositions.back() > 1.0)
    throw ConfigError("compositions must be sorted, distinct and within [0, 1]");
  if (c.seeds.empty()) throw ConfigError("seeds must be nonempty");
  std::set<std::uint64_t> s(c.seeds.begin(), c.seeds.end());
  if (s.size() != c.seeds.size()) throw ConfigError("seeds must be distinct");
  validate(c.network);
  validate(c.training);
}

SweepConfig parse_sweep_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  SweepConfig c;
  check_keys(j,
             {"pool", "test_size", "budgets", "budget_fractions", "compositions", "seeds", "mode", "baseline",
              "network", "training", "output_dir", "workers"},
             "config");
  if (j.contains("pool")) {
    const auto& p = j["pool"];
    check_keys(p, {"size", "seed"}, "pool");
    read(p, "size", c.pool_size);
    read(p, "seed", c.pool_seed);
  }
  read(j, "test_size", c.test_size);
  read(j, "budgets", c.budgets);
  read(j, "budget_fractions", c.budget_fractions);
  read(j, "compositions", c.compositions);
  read(j, "seeds", c.seeds);
  if (j.contains("mode")) c.mode = parse_composition_mode(j["mode"].get<std::string>());
  read(j, "baseline", c.baseline);
  if (j.contains("network")) {
    const auto& n = j["network"];
    check_keys(n, {"field_hidden", "scalar_hidden", "activation", "fidelity_input", "seed"}, "network");
    read_widths(n, "field_hidden", c.network.field_hidden);
    read_widths(n, "scalar_hidden", c.network.scalar_hidden);
    if (n.contains("activation")) c.network.activation = parse_activation(n["activation"].get<std::string>());
    read(n, "fidelity_input", c.network.fidelity_input);
    read(n, "seed", c.network.seed);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t,
               {"epochs", "early_stop_patience", "warmup_epochs", "peak_lr", "weight_decay", "beta1", "beta2",
                "grad_clip_norm", "batch_size", "scalar_batch_size", "nodes_per_sample", "validation_fraction",
                "seed"},
               "training");
    auto& tc = c.training;
    read(t, "epochs", tc.epochs);
    read(t, "early_stop_patience", tc.early_stop_patience);
    read(t, "warmup_epochs", tc.warmup_epochs);
    read(t, "peak_lr", tc.peak_lr);
    read(t, "weight_decay", tc.weight_decay);
    read(t, "beta1", tc.beta1);
    read(t, "beta2", tc.beta2);
    read(t, "grad_clip_norm", tc.grad_clip_norm);
    read(t, "batch_size", tc.batch_size);
    read(t, "scalar_batch_size", tc.scalar_batch_size);
    read(t, "nodes_per_sample", tc.nodes_per_sample);
    read(t, "validation_fraction", tc.validation_fraction);
    read(t, "seed", tc.seed);
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  read(j, "workers", c.workers);
  validate(c);
  return c;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_sweep_config(text);
}

std::string sweep_config_json(const SweepConfig& c) {
  json j;
  j["pool"] = {{"size", c.pool_size}, {"seed", c.pool_seed}};
  j["test_size"] = c.test_size;
  if (!c.budgets.empty())
    j["budgets"] = c.budgets;
  else
    j["budget_fractions"] = c.budget_fractions;
  j["compositions"] = c.compositions;
  j["seeds"] = c.seeds;
  j["mode"] = std::string(to_string(c.mode));
  j["baseline"] = c.baseline;
  j["network"] = {{"field_hidden", c.network.field_hidden},
                  {"scalar_hidden", c.network.scalar_hidden},
                  {"activation", std::string(to_string(c.network.activation))},
                  {"fidelity_input", c.network.fidelity_input},
                  {"seed", c.network.seed}};
  const auto& t = c.training;
  j["training"] = {{"epochs", t.epochs},
                   {"early_stop_patience", t.early_stop_patience},
                   {"warmup_epochs", t.warmup_epochs},
                   {"peak_lr", t.peak_lr},
                   {"weight_decay", t.weight_decay},
                   {"beta1", t.beta1},
                   {"beta2", t.beta2},
                   {"grad_clip_norm", t.grad_clip_norm},
                   {"batch_size", t.batch_size},
                   {"scalar_batch_size", t.scalar_batch_size},
                   {"nodes_per_sample", t.nodes_per_sample},
                   {"validation_fraction", t.validation_fraction},
                   {"seed", t.seed}};
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  return j.dump(2) + "\n";
}

void apply_env_overrides(SweepConfig& c) {
  if (const char* out = std::getenv("MFSCALE_OUT_DIR"); out && *out) c.output_dir = out;
  if (const char* w = std::getenv("MFSCALE_WORKERS"); w && *w) {
    try {
      c.workers = static_cast<unsigned>(parse_int(w, 0));
    } catch (const ParseError&) {
      throw ConfigError(std::string("MFSCALE_WORKERS is not an integer: ") + w);
    }
  }
}

namespace {

std::string pool_fingerprint(const SweepConfig& c) {
  return "pool_size=" + std::to_string(c.pool_size) + "\npool_seed=" + std::to_string(c.pool_seed) + "\n";
}

}  // namespace

SamplePool prepare_pool(const SweepConfig& c) {
  const auto dir = c.output_dir / "pool";
  const auto stamp = dir / "params.txt";
  if (std::filesystem::exists(dir / "manifest.csv") && std::filesystem::exists(stamp) &&
      read_file(stamp) == pool_fingerprint(c))
    return load_pool(dir);
  PoolOptions opt;
  opt.solver = c.solver;
  opt.workers = c.workers;
  auto pool = generate_pool(c.pool_size, c.pool_seed, opt);
  save_pool(pool, dir);
  write_file_atomic(stamp, pool_fingerprint(c));
  // round-trip through disk so fresh and resumed sweeps see identical data
  return load_pool(dir);
}

SplitPools split_for_sweep(const SweepConfig& c, const SamplePool& pool) {
  if (c.test_size >= pool.size())
    throw ConfigError("only " + std::to_string(pool.size()) + " converged pairs for a test set of " +
                      std::to_string(c.test_size));
  auto [comp, test] = split_pool(pool, c.test_size, mix_seed(c.pool_seed, 0x7e57));
  return {std::move(comp), std::move(test)};
}

double full_high_cost(const SamplePool& pool) {
  double t = 0.0;
  for (const auto& s : pool.high_solutions) t += static_cast<double>(s.work_units);
  return t;
}

std::vector<double> resolve_budgets(const SweepConfig& c, const SamplePool& comp) {
  if (!c.budgets.empty()) return c.budgets;
  const double full = full_high_cost(comp);
  std::vector<double> out;
  // whole work units keep the results file readable
  for (double f : c.budget_fractions) out.push_back(std::round(f * full));
  return out;
}

std::string SweepTask::key() const {
  if (baseline) return "baseline_s" + std::to_string(seed);
  return "b" + format_double(budget) + "_dc" + format_double(composition) + "_s" + std::to_string(seed);
}

RunRecord run_cell(const SweepConfig& c, const SplitPools& pools, const SweepTask& task) {
  RunRecord r;
  r.budget_db = task.budget;
  r.composition_dc = task.composition;
  r.mode = task.baseline ? std::string(kBaselineMode) : std::string(to_string(c.mode));
  r.seed = task.seed;

  Selection sel;
  if (task.baseline) {
    for (const auto& cs : pools.composition.cases) sel.high_ids.push_back(cs.case_id);
    refresh_totals(sel, pool_samples(pools.composition), CompositionMode::BudgetShare);
  } else {
    DatasetBudgetSpec spec{task.budget, task.composition, c.mode};
    sel = compose_dataset(pools.composition, spec, mix_seed(task.seed, 5));
  }
  for (const auto* ids : {&sel.low_ids, &sel.high_ids})
    for (int id : *ids)
      if (pools.test.index_of(id) >= 0)
        throw std::logic_error("test case " + std::to_string(id) + " leaked into a training selection");
  if (sel.total_cost > task.budget) throw std::logic_error("selection exceeds its budget");

  NetworkConfig nc = c.network;
  nc.seed = mix_seed(c.network.seed, task.seed);
  TrainConfig tc = c.training;
  tc.seed = mix_seed(c.training.seed, task.seed);
  auto model = train(sel, pools.composition, nc, tc);
  auto rep = evaluate_model(model, pools.test);

  r.n_low = sel.low_ids.size();
  r.n_high = sel.high_ids.size();
  r.total_cost = sel.total_cost;
  r.mse_u = rep.mse_u;
  r.mse_tau = rep.mse_tau;
  r.epochs_run = model.epochs_run;
  r.status = "ok";
  return r;
}

SweepResult run_sweep(const SweepConfig& c, const std::function<void(const std::string&)>& log) {
  validate(c);
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };
  std::filesystem::create_directories(c.output_dir / "cells");
  write_file_atomic(c.output_dir / "config.json", sweep_config_json(c));

  say("pool: " + std::to_string(c.pool_size) + " cases, seed " + std::to_string(c.pool_seed));
  const auto pool = prepare_pool(c);
  const auto pools = split_for_sweep(c, pool);
  const auto budgets = resolve_budgets(c, pools.composition);

  std::vector<SweepTask> tasks;
  for (double b : budgets)
    for (double dc : c.compositions)
      for (auto s : c.seeds) tasks.push_back({b, dc, s, false});
  if (c.baseline) tasks.push_back({full_high_cost(pools.composition), 1.0, c.seeds.front(), true});

  std::vector<RunRecord> records(tasks.size());
  std::vector<char> resumed(tasks.size(), 0);
  std::mutex log_mutex;
  parallel_for(tasks.size(), c.workers, [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto cell_path = c.output_dir / "cells" / (t.key() + ".csv");
    if (std::filesystem::exists(cell_path)) {
      auto recs = parse_results(read_file(cell_path));
      if (recs.size() == 1 && recs[0].ok()) {
        records[i] = recs[0];
        resumed[i] = 1;
        return;
      }
    }
    try {
      records[i] = run_cell(c, pools, t);
      write_file_atomic(cell_path, results_csv({records[i]}));
    } catch (const std::exception& e) {
      RunRecord r;
      r.budget_db = t.budget;
      r.composition_dc = t.composition;
      r.mode = t.baseline ? std::string(kBaselineMode) : std::string(to_string(c.mode));
      r.seed = t.seed;
      r.status = std::string("failed: ") + e.what();
      records[i] = r;
    }
    std::lock_guard lock(log_mutex);
    say("cell " + t.key() + ": " + records[i].status);
  });

  SweepResult res;
  res.results_path = c.output_dir / "results.csv";
  write_file_atomic(res.results_path, results_csv(records));
  res.n_records = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    res.n_failed += !records[i].ok();
    res.n_resumed += resumed[i];
  }
  return res;
}

}  // namespace mfscale
