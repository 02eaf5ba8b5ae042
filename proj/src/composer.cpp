#include "mfscale/composer.hpp"

#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace mfscale {

std::string_view to_string(CompositionMode m) {
  return m == CompositionMode::BudgetShare ? "budget_share" : "count_share";
}

CompositionMode parse_composition_mode(std::string_view s) {
  if (s == "budget_share" || s == "BudgetShare" || s == "budget") return CompositionMode::BudgetShare;
  if (s == "count_share" || s == "CountShare" || s == "count") return CompositionMode::CountShare;
  throw ConfigError("unknown composition mode '" + std::string(s) + "'");
}

void validate(const DatasetBudgetSpec& spec) {
  if (!(spec.budget_db > 0.0) || !std::isfinite(spec.budget_db))
    throw ConfigError("budget_db must be positive and finite");
  if (!(spec.composition_dc >= 0.0 && spec.composition_dc <= 1.0))
    throw ConfigError("composition_dc must lie in [0, 1]");
}

std::vector<PoolSample> pool_samples(const SamplePool& pool) {
  std::vector<PoolSample> out;
  out.reserve(2 * pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    int id = pool.cases[i].case_id;
    out.push_back({id, Fidelity::Low, static_cast<double>(pool.low_solutions[i].work_units)});
    out.push_back({id, Fidelity::High, static_cast<double>(pool.high_solutions[i].work_units)});
  }
  return out;
}

CostModel average_costs(std::span<const PoolSample> samples) {
  double sum[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (const auto& s : samples) {
    int k = s.fidelity == Fidelity::High;
    sum[k] += s.cost;
    ++n[k];
  }
  if (n[0] == 0 || n[1] == 0) throw PoolError("cost model needs samples of both fidelities");
  return {sum[0] / static_cast<double>(n[0]), sum[1] / static_cast<double>(n[1])};
}

namespace {

// floor that forgives representation error, e.g. 67/13.4 -> 5
std::size_t count_floor(double x) {
  if (!(x > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(x * (1.0 + 1e-12)));
}

}  // namespace

SampleCounts estimate_counts(const DatasetBudgetSpec& spec, const CostModel& costs) {
  validate(spec);
  if (!(costs.avg_cost_low > 0.0) || !(costs.avg_cost_high > 0.0))
    throw ContractError("estimate_counts: costs must be positive");
  const double db = spec.budget_db, dc = spec.composition_dc;
  SampleCounts c;
  if (spec.mode == CompositionMode::BudgetShare) {
    c.n_high = count_floor(dc * db / costs.avg_cost_high);
    c.n_low = count_floor((1.0 - dc) * db / costs.avg_cost_low);
  } else {
    // n_high/(n_low+n_high) ~ dc; rounding n_high down only lowers the cost
    const double per_sample = dc * costs.avg_cost_high + (1.0 - dc) * costs.avg_cost_low;
    const std::size_t total = count_floor(db / per_sample);
    c.n_high = count_floor(dc * static_cast<double>(total));
    c.n_low = total - c.n_high;
  }
  return c;
}

namespace {

struct Working {
  std::span<const PoolSample> samples;
  std::vector<char> selected;
  CompositionMode mode;
  double cost[2] = {0, 0};
  std::size_t count[2] = {0, 0};

  double total() const { return cost[0] + cost[1]; }

  double high_share_with(double extra_cost_high, double extra_cost_low, long dn_high, long dn_low) const {
    if (mode == CompositionMode::BudgetShare) {
      double t = total() + extra_cost_high + extra_cost_low;
      return t > 0.0 ? (cost[1] + extra_cost_high) / t : 0.0;
    }
    double nh = static_cast<double>(count[1]) + static_cast<double>(dn_high);
    double nt = nh + static_cast<double>(count[0]) + static_cast<double>(dn_low);
    return nt > 0.0 ? nh / nt : 0.0;
  }

  void toggle(std::size_t i, bool on) {
    int k = samples[i].fidelity == Fidelity::High;
    selected[i] = on;
    double sign = on ? 1.0 : -1.0;
    cost[k] += sign * samples[i].cost;
    count[k] = on ? count[k] + 1 : count[k] - 1;
  }
};

bool eligible(const PoolSample& s, double dc) {
  if (s.fidelity == Fidelity::High) return dc > 0.0;
  return dc < 1.0;
}

std::vector<std::size_t> index_by_key(std::span<const PoolSample> samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].case_id != samples[b].case_id) return samples[a].case_id < samples[b].case_id;
    return samples[a].fidelity == Fidelity::Low && samples[b].fidelity == Fidelity::High;
  });
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (samples[idx[i]].case_id == samples[idx[i - 1]].case_id &&
        samples[idx[i]].fidelity == samples[idx[i - 1]].fidelity)
      throw ContractError("duplicate (case_id, fidelity) in pool samples");
  return idx;
}

Selection to_selection(const Working& w) {
  Selection s;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    if (!w.selected[i]) continue;
    (w.samples[i].fidelity == Fidelity::High ? s.high_ids : s.low_ids).push_back(w.samples[i].case_id);
  }
  std::sort(s.low_ids.begin(), s.low_ids.end());
  std::sort(s.high_ids.begin(), s.high_ids.end());
  refresh_totals(s, w.samples, w.mode);
  return s;
}

Working from_selection(const Selection& sel, std::span<const PoolSample> samples, CompositionMode mode) {
  Working w{samples, std::vector<char>(samples.size(), 0), mode};
  std::map<std::pair<int, int>, std::size_t> where;
  for (std::size_t i = 0; i < samples.size(); ++i)
    where[{samples[i].case_id, samples[i].fidelity == Fidelity::High}] = i;
  auto add = [&](int id, int k) {
    auto it = where.find({id, k});
    if (it == where.end())
      throw ContractError("selection id " + std::to_string(id) + " not in pool for " +
                          std::string(to_string(k ? Fidelity::High : Fidelity::Low)));
    if (w.selected[it->second]) throw ContractError("duplicate id " + std::to_string(id) + " in selection");
    w.toggle(it->second, true);
  };
  for (int id : sel.low_ids) add(id, 0);
  for (int id : sel.high_ids) add(id, 1);
  return w;
}

void repair_and_fill(Working& w, const DatasetBudgetSpec& spec) {
  const double db = spec.budget_db, dc = spec.composition_dc;
  const auto order = index_by_key(w.samples);

  // repair: drop samples until the budget holds
  while (w.total() > db) {
    double excess_high = w.high_share_with(0, 0, 0, 0) - dc;
    int k = excess_high >= 0.0 ? 1 : 0;
    if (w.count[k] == 0) k = 1 - k;
    std::ptrdiff_t restore = -1, largest = -1;
    for (auto i : order) {
      const auto& s = w.samples[i];
      if (!w.selected[i] || (s.fidelity == Fidelity::High) != (k == 1)) continue;
      if (w.total() - s.cost <= db && (restore < 0 || s.cost < w.samples[restore].cost))
        restore = static_cast<std::ptrdiff_t>(i);
      if (largest < 0 || s.cost > w.samples[largest].cost) largest = static_cast<std::ptrdiff_t>(i);
    }
    w.toggle(static_cast<std::size_t>(restore >= 0 ? restore : largest), false);
  }

  // fill: add whatever fits, steering achieved_dc towards dc
  while (true) {
    std::ptrdiff_t best = -1;
    double best_gap = 0.0;
    for (auto i : order) {
      const auto& s = w.samples[i];
      if (w.selected[i] || !eligible(s, dc) || w.total() + s.cost > db) continue;
      const bool hi = s.fidelity == Fidelity::High;
      double share = w.high_share_with(hi ? s.cost : 0.0, hi ? 0.0 : s.cost, hi, !hi);
      double gap = std::abs(share - dc);
      bool better = best < 0 || gap < best_gap - 1e-12 ||
                    (gap <= best_gap + 1e-12 && s.cost < w.samples[best].cost);
      // equal cost falls through to the key order: lower case_id, low first
      if (better) {
        best = static_cast<std::ptrdiff_t>(i);
        best_gap = gap;
      }
    }
    if (best < 0) break;
    w.toggle(static_cast<std::size_t>(best), true);
  }
}

}  // namespace

void refresh_totals(Selection& s, std::span<const PoolSample> samples, CompositionMode mode) {
  std::map<std::pair<int, int>, double> cost;
  for (const auto& p : samples) cost[{p.case_id, p.fidelity == Fidelity::High}] = p.cost;
  auto sum = [&](const std::vector<int>& ids, int k) {
    double t = 0.0;
    for (int id : ids) {
      auto it = cost.find({id, k});
      if (it == cost.end()) throw ContractError("selection id " + std::to_string(id) + " not in pool");
      t += it->second;
    }
    return t;
  };
  const double lo = sum(s.low_ids, 0), hi = sum(s.high_ids, 1);
  s.total_cost = lo + hi;
  if (mode == CompositionMode::BudgetShare)
    s.achieved_dc = s.total_cost > 0.0 ? hi / s.total_cost : 0.0;
  else
    s.achieved_dc = s.size() > 0 ? static_cast<double>(s.high_ids.size()) / static_cast<double>(s.size()) : 0.0;
}

Selection greedy_repair(Selection selection, std::span<const PoolSample> samples, const DatasetBudgetSpec& spec) {
  validate(spec);
  auto w = from_selection(selection, samples, spec.mode);
  repair_and_fill(w, spec);
  return to_selection(w);
}

Selection greedy_repair(Selection selection, const SamplePool& pool, const DatasetBudgetSpec& spec) {
  auto samples = pool_samples(pool);
  return greedy_repair(std::move(selection), samples, spec);
}

Selection compose_dataset(std::span<const PoolSample> samples, const DatasetBudgetSpec& spec, std::uint64_t seed) {
  validate(spec);
  if (samples.empty()) throw PoolError("compose_dataset: empty pool");
  const auto counts = estimate_counts(spec, average_costs(samples));
  const auto order = index_by_key(samples);

  Working w{samples, std::vector<char>(samples.size(), 0), spec.mode};
  Rng rng(seed);
  for (int k = 0; k < 2; ++k) {
    std::vector<std::size_t> candidates;
    for (auto i : order)
      if ((samples[i].fidelity == Fidelity::High) == (k == 1) && eligible(samples[i], spec.composition_dc))
        candidates.push_back(i);
    rng.shuffle(candidates);
    const std::size_t want = std::min(k ? counts.n_high : counts.n_low, candidates.size());
    for (std::size_t j = 0; j < want; ++j) w.toggle(candidates[j], true);
  }
  repair_and_fill(w, spec);
  if (w.count[0] + w.count[1] == 0)
    throw PoolError("no sample fits budget_db=" + format_double(spec.budget_db));
  return to_selection(w);
}

Selection compose_dataset(const SamplePool& pool, const DatasetBudgetSpec& spec, std::uint64_t seed) {
  auto samples = pool_samples(pool);
  return compose_dataset(samples, spec, seed);
}

std::string selection_csv(const Selection& s, std::span<const PoolSample> samples) {
  std::map<std::pair<int, int>, double> cost;
  for (const auto& p : samples) cost[{p.case_id, p.fidelity == Fidelity::High}] = p.cost;
  std::string out = "case_id,fidelity,cost\n";
  auto rows = [&](const std::vector<int>& ids, Fidelity f) {
    for (int id : ids) {
      out += std::to_string(id) + ',' + std::string(to_string(f)) + ',' +
             format_double(cost.at({id, f == Fidelity::High})) + '\n';
    }
  };
  rows(s.low_ids, Fidelity::Low);
  rows(s.high_ids, Fidelity::High);
  out += "#total_cost," + format_double(s.total_cost) + '\n';
  out += "#achieved_dc," + format_double(s.achieved_dc) + '\n';
  return out;
}

Selection parse_selection(std::string_view text, std::span<const PoolSample> samples, CompositionMode mode) {
  auto t = parse_csv(text);
  auto ci = t.column("case_id"), cf = t.column("fidelity");
  std::set<std::pair<int, int>> known;
  for (const auto& p : samples) known.insert({p.case_id, p.fidelity == Fidelity::High});
  Selection s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    int id = static_cast<int>(parse_int(t.rows[r][ci], t.row_lines[r]));
    Fidelity f;
    try {
      f = parse_fidelity(t.rows[r][cf]);
    } catch (const ContractError& e) {
      throw ParseError(e.what(), t.row_lines[r]);
    }
    if (!known.count({id, f == Fidelity::High}))
      throw ParseError("case " + std::to_string(id) + " (" + std::string(to_string(f)) + ") not in pool", t.row_lines[r]);
    (f == Fidelity::High ? s.high_ids : s.low_ids).push_back(id);
  }
  std::sort(s.low_ids.begin(), s.low_ids.end());
  std::sort(s.high_ids.begin(), s.high_ids.end());
  // validates ids against the pool as a side effect
  from_selection(s, samples, mode);
  refresh_totals(s, samples, mode);
  return s;
}

void save_selection(const Selection& s, const SamplePool& pool, const std::filesystem::path& path) {
  write_file_atomic(path, selection_csv(s, pool_samples(pool)));
}

Selection load_selection(const std::filesystem::path& path, const SamplePool& pool, CompositionMode mode) {
  return parse_selection(read_file(path), pool_samples(pool), mode);
}

}  // namespace mfscale
