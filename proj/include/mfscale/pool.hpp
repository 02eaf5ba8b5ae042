#pragma once

#include "mfscale/cost_model.hpp"
#include "mfscale/flow.hpp"
#include "mfscale/solver.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace mfscale {

// Matched low/high solutions; entry i of each vector belongs to cases[i].
// Cases are kept sorted by case_id.
struct SamplePool {
  std::vector<FlowCase> cases;
  std::vector<FieldSolution> low_solutions;
  std::vector<FieldSolution> high_solutions;
  CostModel cost_model;
  // case ids sampled but dropped because a solve did not converge
  std::vector<int> dropped_case_ids;

  std::size_t size() const { return cases.size(); }
  // position of case_id in cases, or -1
  std::ptrdiff_t index_of(int case_id) const;
  const FieldSolution& solution(int case_id, Fidelity f) const;
};

struct PoolOptions {
  SolverSettings solver;
  unsigned workers = 0;  // 0 = hardware concurrency
};

// re_delta log-uniform over [1e4, 1e6], beta_p uniform over [-0.2, 0.5].
std::vector<FlowCase> sample_cases(std::size_t n_cases, std::uint64_t seed);

// Mean realized work units per fidelity.
CostModel realized_cost_model(const SamplePool& pool);

SamplePool generate_pool(std::size_t n_cases, std::uint64_t seed, const PoolOptions& opt = {});
SamplePool assemble_pool(std::vector<FieldSolution> low, std::vector<FieldSolution> high);

// Seeded hold-out: returns {composition pool, test pool}.
std::pair<SamplePool, SamplePool> split_pool(const SamplePool& pool, std::size_t n_test, std::uint64_t seed);
SamplePool subset(const SamplePool& pool, const std::vector<int>& case_ids);

// <dir>/manifest.csv plus <dir>/fields/<case_id>_<fidelity>.csv
void save_pool(const SamplePool& pool, const std::filesystem::path& dir);
SamplePool load_pool(const std::filesystem::path& dir);

}  // namespace mfscale
