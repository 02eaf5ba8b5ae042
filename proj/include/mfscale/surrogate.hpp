#pragma once

#include "mfscale/composer.hpp"
#include "mfscale/flow.hpp"
#include "mfscale/mlp.hpp"
#include "mfscale/pool.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mfscale {

struct NetworkConfig {
  // hidden widths only; inputs and outputs follow from the net's role
  std::vector<Eigen::Index> field_hidden = {96, 96};
  std::vector<Eigen::Index> scalar_hidden = {32, 32};
  Activation activation = Activation::Gelu;
  // ablation: extra 0/1 input marking high-fidelity rows
  bool fidelity_input = false;
  std::uint64_t seed = 0;
};

void validate(const NetworkConfig& c);

struct TrainConfig {
  int epochs = 500;
  int early_stop_patience = 250;
  int warmup_epochs = 10;
  double peak_lr = 5e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip_norm = 1.0;
  int batch_size = 256;
  // the scalar net sees one row per sample, so it gets its own batch size
  int scalar_batch_size = 16;
  // node rows drawn from each field sample
  int nodes_per_sample = 64;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& c);

// lr(e) = peak*e/warmup for e < warmup, then cosine decay reaching 0 at e = epochs.
double learning_rate(int epoch, const TrainConfig& c);

// Per-feature z-score; a constant feature keeps std = 1, is flagged, and
// denormalizes to its mean.
struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<bool> constant;

  static NormalizationStats fit(const Eigen::MatrixXd& rows);  // features x samples
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& z) const;
};

struct NetReport {
  double best_val_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<double> val_history;  // one entry per epoch run
};

struct TrainedModel {
  Mlp<float> field_net;
  Mlp<float> scalar_net;
  NormalizationStats field_in, field_out, scalar_in, scalar_out;
  // input box of the training rows, for the extrapolation flag
  Eigen::VectorXd field_lo, field_hi, scalar_lo, scalar_hi;
  bool fidelity_input = false;
  double best_val_loss = 0.0;  // field + scalar
  int epochs_run = 0;          // max over the two nets
  NetReport field_report, scalar_report;
  bool no_validation = false;
  bool constant_targets = false;
};

// Field and scalar nets as train() initializes them.
std::pair<Mlp<float>, Mlp<float>> initial_nets(const NetworkConfig& nc);

TrainedModel train(const Selection& selection, const SamplePool& pool, const NetworkConfig& net_cfg,
                   const TrainConfig& train_cfg);

struct Prediction {
  Eigen::VectorXd u;
  double tau_w = 0.0;
  bool extrapolated = false;
};

Prediction predict(const TrainedModel& model, const FlowCase& c, const Mesh& query_mesh);

// Field net inputs for one case on a mesh (features x nodes), before normalization.
Eigen::MatrixXd field_features(const FlowCase& c, const Eigen::VectorXd& node_y, bool fidelity_input, bool high);
Eigen::VectorXd scalar_features(const FlowCase& c, bool fidelity_input, bool high);

void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace mfscale
