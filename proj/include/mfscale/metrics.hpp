#pragma once

#include "mfscale/flow.hpp"
#include "mfscale/pool.hpp"
#include "mfscale/surrogate.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace mfscale {

// source_y must be ascending. Ties go to the lower source index.
Eigen::VectorXd nearest_neighbor_interpolate(const Eigen::VectorXd& source_y, const Eigen::VectorXd& source_field,
                                             const Eigen::VectorXd& target_y);
Eigen::VectorXd nearest_neighbor_interpolate(const Mesh& source, const Eigen::VectorXd& source_field,
                                             const Mesh& target);

// sum|lf - hf| / sum|hf|; throws DomainError when hf is all zeros.
double nmae(const Eigen::VectorXd& lf_on_hf_mesh, const Eigen::VectorXd& hf);

struct FieldStats {
  double mean = 0.0;
  double std = 1.0;
};

// mean(((p - mean)/std - (r - mean)/std)^2)
double normalized_mse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& reference, const FieldStats& stats);

struct FieldErrorReport {
  double mse_u = 0.0;
  double mse_tau = 0.0;
  std::size_t n_test_samples = 0;
};

// Per-sample normalized MSE on the test pool's high-fidelity solutions,
// then averaged; stats are the model's output stats.
FieldErrorReport evaluate_model(const TrainedModel& model, const SamplePool& test_pool);

struct FidelityGapReport {
  double nmae_u = 0.0;
  double nmae_tau = 0.0;
  std::size_t n_pairs = 0;
  std::size_t excluded_u = 0;
  std::size_t excluded_tau = 0;
};

// Mean over pairs of nmae(low interpolated onto the high mesh, high).
// With case_ids, only those pairs are used (e.g. the test set).
FidelityGapReport fidelity_gap_report(const SamplePool& pool,
                                      const std::optional<std::vector<int>>& case_ids = std::nullopt);

// field,normalized_mse,n_test_samples
std::string field_error_csv(const FieldErrorReport& r);
// field,mean_nmae,n_pairs,n_excluded
std::string fidelity_gap_csv(const FidelityGapReport& r);

}  // namespace mfscale
