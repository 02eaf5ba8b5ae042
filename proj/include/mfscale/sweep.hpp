#pragma once

#include "mfscale/composer.hpp"
#include "mfscale/pool.hpp"
#include "mfscale/scaling.hpp"
#include "mfscale/surrogate.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace mfscale {

struct SweepConfig {
  std::size_t pool_size = 611;
  std::uint64_t pool_seed = 0;
  // absolute budgets in work units; when empty, budget_fractions of the
  // composition pool's full high-fidelity cost are used
  std::vector<double> budgets;
  std::vector<double> budget_fractions = {0.1, 0.3, 0.6};
  std::vector<double> compositions = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  CompositionMode mode = CompositionMode::BudgetShare;
  std::size_t test_size = 120;
  bool baseline = true;
  NetworkConfig network;
  TrainConfig training;
  std::filesystem::path output_dir = "runs/sweep";
  unsigned workers = 0;  // 0 = hardware concurrency
  SolverSettings solver;
};

void validate(const SweepConfig& c);

SweepConfig parse_sweep_config(std::string_view json_text);
SweepConfig load_sweep_config(const std::filesystem::path& path);
std::string sweep_config_json(const SweepConfig& c);

// MFSCALE_OUT_DIR and MFSCALE_WORKERS; nothing else is read from the environment.
void apply_env_overrides(SweepConfig& c);

// Pool under <output_dir>/pool, regenerated when missing or made with other parameters.
SamplePool prepare_pool(const SweepConfig& c);

struct SplitPools {
  SamplePool composition;
  SamplePool test;
};

SplitPools split_for_sweep(const SweepConfig& c, const SamplePool& pool);
std::vector<double> resolve_budgets(const SweepConfig& c, const SamplePool& composition_pool);
double full_high_cost(const SamplePool& pool);

struct SweepTask {
  double budget = 0.0;
  double composition = 1.0;
  std::uint64_t seed = 0;
  bool baseline = false;

  std::string key() const;
};

// One compose -> train -> evaluate cell. Throws on failure.
RunRecord run_cell(const SweepConfig& c, const SplitPools& pools, const SweepTask& task);

struct SweepResult {
  std::filesystem::path results_path;
  std::size_t n_records = 0;
  std::size_t n_failed = 0;
  std::size_t n_resumed = 0;
};

// Writes <output_dir>/cells/<key>.csv per finished cell and the sorted
// <output_dir>/results.csv. Cells already on disk are reused.
SweepResult run_sweep(const SweepConfig& c, const std::function<void(const std::string&)>& log = {});

// One SVG per field into out_dir; returns the written paths.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_file,
                                              const std::filesystem::path& out_dir);
std::string plot_svg(std::span<const RunRecord> records, ErrorField f);

// Rows "field,budget,composition,mean,std,n_seeds" from an SVG's data comment.
std::vector<AggregateCell> parse_plot_data(std::string_view svg, ErrorField f);

}  // namespace mfscale
