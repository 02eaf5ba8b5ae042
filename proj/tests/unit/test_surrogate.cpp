#include "doctest.h"

#include "common.hpp"
#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace mfscale;

namespace {

// Pool whose fields are given functions of (y, log10 re, beta).
template <typename U, typename T>
SamplePool synthetic_pool(int n, int nodes, U u_of, T tau_of, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<FieldSolution> low, high;
  for (int id = 0; id < n; ++id) {
    FlowCase c{std::pow(10.0, rng.uniform(4.0, 6.0)), rng.uniform(-0.2, 0.5), id};
    for (auto f : {Fidelity::Low, Fidelity::High}) {
      FieldSolution s;
      s.flow_case = c;
      s.fidelity = f;
      s.mesh.node_y = Eigen::VectorXd::LinSpaced(nodes, 1.0 / nodes, 1.0);
      s.u.resize(nodes);
      for (int i = 0; i < nodes; ++i) s.u[i] = u_of(s.mesh.node_y[i], std::log10(c.re_delta), c.beta_p);
      s.tau_w = tau_of(std::log10(c.re_delta), c.beta_p);
      s.work_units = (f == Fidelity::High ? 3.0 : 1.0) * nodes;
      s.iterations = 1;
      s.converged = true;
      (f == Fidelity::High ? high : low).push_back(std::move(s));
    }
  }
  return assemble_pool(std::move(low), std::move(high));
}

SamplePool linear_pool(int n = 24, int nodes = 16) {
  return synthetic_pool(
      n, nodes, [](double y, double lr, double b) { return 0.8 * y - 0.3 * lr + 1.7 * b + 0.5; },
      [](double lr, double b) { return 0.004 - 0.001 * lr + 0.002 * b; });
}

Selection all_high(const SamplePool& p) {
  Selection s;
  for (const auto& c : p.cases) s.high_ids.push_back(c.case_id);
  refresh_totals(s, pool_samples(p), CompositionMode::BudgetShare);
  return s;
}

TrainConfig quick_config() {
  TrainConfig tc;
  tc.epochs = 200;
  tc.early_stop_patience = 200;
  tc.warmup_epochs = 5;
  tc.peak_lr = 5e-3;
  tc.batch_size = 64;
  tc.scalar_batch_size = 4;
  tc.nodes_per_sample = 16;
  tc.seed = 3;
  return tc;
}

NetworkConfig small_net() {
  NetworkConfig nc;
  nc.field_hidden = {16, 16};
  nc.scalar_hidden = {8};
  nc.seed = 4;
  return nc;
}

}  // namespace

TEST_CASE("learning rate schedule values") {
  TrainConfig c;
  c.epochs = 110;
  c.warmup_epochs = 10;
  c.peak_lr = 5e-4;
  CHECK(learning_rate(0, c) == 0.0);
  CHECK(learning_rate(1, c) == 5e-4 * 1 / 10);
  CHECK(learning_rate(5, c) == 5e-4 * 5 / 10);
  CHECK(learning_rate(9, c) == 5e-4 * 9 / 10);
  CHECK(learning_rate(10, c) == 5e-4);
  for (int e = 10; e <= 110; e += 7) {
    const double expect = 0.5 * 5e-4 * (1.0 + std::cos(std::numbers::pi * (e - 10) / 100.0));
    CHECK(learning_rate(e, c) == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK(learning_rate(60, c) == doctest::Approx(2.5e-4).epsilon(1e-15));
  CHECK(learning_rate(110, c) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(std::abs(learning_rate(110, c)) < 1e-18);
  // monotone decay after the warmup
  for (int e = 11; e <= 110; ++e) CHECK(learning_rate(e, c) <= learning_rate(e - 1, c));
}

TEST_CASE("config validation") {
  TrainConfig t;
  t.warmup_epochs = t.epochs;
  CHECK_THROWS_AS(validate(t), ConfigError);
  t = TrainConfig{};
  t.peak_lr = 0.0;
  CHECK_THROWS_AS(validate(t), ConfigError);
  t = TrainConfig{};
  t.epochs = 0;
  CHECK_NOTHROW(validate(t));
  NetworkConfig n;
  n.field_hidden = {};
  CHECK_THROWS_AS(validate(n), ConfigError);
  n = NetworkConfig{};
  n.scalar_hidden = {4, 0};
  CHECK_THROWS_AS(validate(n), ConfigError);
}

TEST_CASE("normalization round trip and constant features") {
  Rng rng(1);
  Eigen::MatrixXd x(3, 50);
  for (auto& v : x.reshaped()) v = rng.uniform(-1e3, 1e3);
  x.row(2).setConstant(7.0);
  auto s = NormalizationStats::fit(x);
  CHECK((s.denormalize(s.normalize(x)) - x).cwiseAbs().maxCoeff() < 1e-12 * 1e3);
  CHECK_FALSE(s.constant[0]);
  CHECK(s.constant[2]);
  CHECK(s.std[2] == 1.0);
  Eigen::MatrixXd z = s.normalize(x);
  CHECK(std::abs(z.row(0).mean()) < 1e-12);
  CHECK(std::sqrt(z.row(0).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(s.normalize(Eigen::MatrixXd::Zero(2, 1)), ContractError);
}

TEST_CASE("train: linear targets are fit closely") {
  auto pool = linear_pool();
  auto tc = quick_config();
  tc.epochs = 400;
  tc.early_stop_patience = 400;
  auto m = train(all_high(pool), pool, small_net(), tc);
  // training MSE in normalized units
  double se_u = 0, se_t = 0;
  long n = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& s = pool.high_solutions[i];
    auto p = predict(m, s.flow_case, s.mesh);
    se_u += ((p.u - s.u) / m.field_out.std[0]).squaredNorm();
    n += s.u.size();
    se_t += std::pow((p.tau_w - s.tau_w) / m.scalar_out.std[0], 2);
  }
  CHECK(se_u / static_cast<double>(n) < 1e-3);
  CHECK(se_t / static_cast<double>(pool.size()) < 1e-3);
}

TEST_CASE("train: zero epochs returns the initialization") {
  auto pool = linear_pool(6);
  auto tc = quick_config();
  tc.epochs = 0;
  auto nc = small_net();
  auto m = train(all_high(pool), pool, nc, tc);
  auto [f0, s0] = initial_nets(nc);
  CHECK(m.field_net.flat() == f0.flat());
  CHECK(m.scalar_net.flat() == s0.flat());
  CHECK(m.epochs_run == 0);
}

TEST_CASE("train: deterministic") {
  auto pool = linear_pool(10);
  auto tc = quick_config();
  tc.epochs = 30;
  auto a = train(all_high(pool), pool, small_net(), tc);
  auto b = train(all_high(pool), pool, small_net(), tc);
  CHECK(a.best_val_loss == b.best_val_loss);
  CHECK(a.field_net.flat() == b.field_net.flat());
  CHECK(a.scalar_net.flat() == b.scalar_net.flat());
  tc.seed = 99;
  auto c = train(all_high(pool), pool, small_net(), tc);
  CHECK(c.best_val_loss != a.best_val_loss);
}

TEST_CASE("train: early stopping bound and validation improvement") {
  // noisy targets so the validation loss stalls
  Rng noise(5);
  auto pool = synthetic_pool(
      20, 12, [&](double, double, double) { return noise.normal(); }, [&](double, double) { return noise.normal(); });
  auto tc = quick_config();
  tc.epochs = 300;
  tc.early_stop_patience = 15;
  auto m = train(all_high(pool), pool, small_net(), tc);
  for (const auto* r : {&m.field_report, &m.scalar_report}) {
    CHECK(r->epochs_run <= r->best_epoch + tc.early_stop_patience);
    CHECK(r->val_history.size() == static_cast<std::size_t>(r->epochs_run));
    CHECK(r->best_val_loss <= r->val_history.front());
  }
  CHECK(m.epochs_run < 300);
  CHECK(m.best_val_loss == doctest::Approx(m.field_report.best_val_loss + m.scalar_report.best_val_loss));
}

TEST_CASE("train: validation split sizes") {
  auto pool = linear_pool(12);
  auto tc = quick_config();
  tc.epochs = 2;
  tc.warmup_epochs = 1;
  Selection one;
  one.high_ids = {pool.cases[0].case_id};
  auto m1 = train(one, pool, small_net(), tc);
  CHECK(m1.no_validation);
  auto m = train(all_high(pool), pool, small_net(), tc);
  CHECK_FALSE(m.no_validation);
  CHECK_THROWS_AS(train(Selection{}, pool, small_net(), tc), ContractError);
}

TEST_CASE("train: constant targets are flagged and reproduced") {
  auto pool = synthetic_pool(
      8, 10, [](double, double, double) { return 0.25; }, [](double, double) { return 0.003; });
  auto tc = quick_config();
  tc.epochs = 50;
  auto m = train(all_high(pool), pool, small_net(), tc);
  CHECK(m.constant_targets);
  auto p = predict(m, pool.cases[0], pool.high_solutions[0].mesh);
  CHECK((p.u.array() - 0.25).abs().maxCoeff() < 0.05);
  CHECK(p.tau_w == doctest::Approx(0.003).epsilon(0.05));
}

TEST_CASE("predict: shapes, determinism and extrapolation flag") {
  auto pool = linear_pool(10);
  auto tc = quick_config();
  tc.epochs = 20;
  auto m = train(all_high(pool), pool, small_net(), tc);
  const auto& s = pool.high_solutions[0];
  auto p = predict(m, s.flow_case, s.mesh);
  CHECK(p.u.size() == s.mesh.n_nodes());
  CHECK_FALSE(p.extrapolated);
  FlowCase twin = s.flow_case;
  twin.case_id = 1000;
  auto q = predict(m, twin, s.mesh);
  CHECK(q.u == p.u);
  CHECK(q.tau_w == p.tau_w);
  double lo = 1e9;
  for (const auto& c : pool.cases) lo = std::min(lo, c.re_delta);
  FlowCase outside{lo / 1.5, 0.0, 7};
  CHECK(predict(m, outside, s.mesh).extrapolated);
  Mesh bad = s.mesh;
  bad.node_y[0] = 0.0;
  CHECK_THROWS_AS(predict(m, s.flow_case, bad), ContractError);
}

TEST_CASE("predict: memorizes a tiny pool") {
  auto pool = synthetic_pool(
      4, 12, [](double y, double lr, double b) { return std::sqrt(y) * (1 + 0.1 * lr) - b; },
      [](double lr, double b) { return 0.01 / lr + 0.001 * b; });
  auto tc = quick_config();
  tc.epochs = 600;
  tc.early_stop_patience = 600;
  tc.validation_fraction = 0.0;
  auto m = train(all_high(pool), pool, small_net(), tc);
  const double train_loss = m.field_report.best_val_loss;  // training loss when there is no validation split
  const auto& s = pool.high_solutions[1];
  auto p = predict(m, s.flow_case, s.mesh);
  const double mse = ((p.u - s.u) / m.field_out.std[0]).squaredNorm() / static_cast<double>(s.u.size());
  CHECK(mse < 10 * train_loss + 1e-12);
}

TEST_CASE("train: fidelity input widens the nets") {
  auto pool = linear_pool(6);
  auto nc = small_net();
  nc.fidelity_input = true;
  auto tc = quick_config();
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  auto m = train(all_high(pool), pool, nc, tc);
  CHECK(m.field_net.n_inputs() == 4);
  CHECK(m.scalar_net.n_inputs() == 3);
  auto plain = train(all_high(pool), pool, small_net(), tc);
  CHECK(plain.field_net.n_inputs() == 3);
  CHECK(plain.scalar_net.n_inputs() == 2);
}

TEST_CASE("model file round trip") {
  auto pool = linear_pool(8);
  auto tc = quick_config();
  tc.epochs = 10;
  auto m = train(all_high(pool), pool, small_net(), tc);
  testutil::TempDir d("model");
  save_model(m, d.path / "m.bin");
  auto r = load_model(d.path / "m.bin");
  CHECK(r.field_net.flat() == m.field_net.flat());
  CHECK(r.scalar_net.flat() == m.scalar_net.flat());
  CHECK(r.field_in.mean == m.field_in.mean);
  CHECK(r.scalar_out.std == m.scalar_out.std);
  CHECK(r.best_val_loss == m.best_val_loss);
  CHECK(r.epochs_run == m.epochs_run);
  CHECK(r.field_report.val_history == m.field_report.val_history);
  const auto& s = pool.high_solutions[2];
  auto a = predict(m, s.flow_case, s.mesh), b = predict(r, s.flow_case, s.mesh);
  CHECK(a.u == b.u);
  CHECK(a.tau_w == b.tau_w);

  auto bytes = read_file(d.path / "m.bin");
  CHECK(bytes.substr(0, 4) == "MFSM");
  {
    std::ofstream os(d.path / "bad.bin", std::ios::binary);
    os << "NOPE" << bytes.substr(4);
  }
  CHECK_THROWS(load_model(d.path / "bad.bin"));
  {
    std::ofstream os(d.path / "short.bin", std::ios::binary);
    os << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS(load_model(d.path / "short.bin"));
}
