#pragma once

#include "mfscale/cost_model.hpp"
#include "mfscale/flow.hpp"
#include "mfscale/pool.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mfscale {

enum class CompositionMode { BudgetShare, CountShare };

std::string_view to_string(CompositionMode m);
CompositionMode parse_composition_mode(std::string_view s);

struct DatasetBudgetSpec {
  double budget_db = 0.0;
  // high-fidelity share of the budget (BudgetShare) or of the sample count
  double composition_dc = 0.5;
  CompositionMode mode = CompositionMode::BudgetShare;
};

void validate(const DatasetBudgetSpec& spec);

// One selectable (case, fidelity) sample with its realized cost.
struct PoolSample {
  int case_id = 0;
  Fidelity fidelity = Fidelity::Low;
  double cost = 0.0;
};

std::vector<PoolSample> pool_samples(const SamplePool& pool);
CostModel average_costs(std::span<const PoolSample> samples);

struct Selection {
  std::vector<int> low_ids;   // ascending
  std::vector<int> high_ids;  // ascending
  double total_cost = 0.0;
  double achieved_dc = 0.0;

  std::size_t size() const { return low_ids.size() + high_ids.size(); }
  bool operator==(const Selection&) const = default;
};

struct SampleCounts {
  std::size_t n_low = 0;
  std::size_t n_high = 0;
};

SampleCounts estimate_counts(const DatasetBudgetSpec& spec, const CostModel& costs);

// Samples of a fidelity whose target share is zero (dc = 0 for high,
// dc = 1 for low) are never drawn or filled.
Selection compose_dataset(std::span<const PoolSample> samples, const DatasetBudgetSpec& spec, std::uint64_t seed);
Selection compose_dataset(const SamplePool& pool, const DatasetBudgetSpec& spec, std::uint64_t seed);

Selection greedy_repair(Selection selection, std::span<const PoolSample> samples, const DatasetBudgetSpec& spec);
Selection greedy_repair(Selection selection, const SamplePool& pool, const DatasetBudgetSpec& spec);

// Recomputes total_cost and achieved_dc from the ids.
void refresh_totals(Selection& s, std::span<const PoolSample> samples, CompositionMode mode);

// "case_id,fidelity,cost" rows, then "#total_cost,<x>" and "#achieved_dc,<x>".
std::string selection_csv(const Selection& s, std::span<const PoolSample> samples);
Selection parse_selection(std::string_view text, std::span<const PoolSample> samples, CompositionMode mode);
void save_selection(const Selection& s, const SamplePool& pool, const std::filesystem::path& path);
Selection load_selection(const std::filesystem::path& path, const SamplePool& pool,
                         CompositionMode mode = CompositionMode::BudgetShare);

}  // namespace mfscale
