#include "doctest.h"

#include "mfscale/errors.hpp"
#include "mfscale/mesh.hpp"
#include "mfscale/rng.hpp"
#include "mfscale/solver.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace mfscale;

namespace {

void check_mesh_invariants(const Mesh& m) {
  const auto& y = m.node_y;
  REQUIRE(y.size() >= 8);
  CHECK(y[0] > 0.0);
  CHECK(y[y.size() - 1] == 1.0);
  for (Eigen::Index i = 1; i < y.size(); ++i) CHECK(y[i] > y[i - 1]);
  // spacing ratio away from the wall cell
  const double r = (y[3] - y[2]) / (y[2] - y[1]);
  for (Eigen::Index i = 2; i + 1 < y.size(); ++i) {
    const double ri = (y[i + 1] - y[i]) / (y[i] - y[i - 1]);
    CHECK(std::abs(ri - r) < 1e-9 * r + 1e-12 / (y[i] - y[i - 1]));
  }
}

double rel_gap(double re, double beta) {
  FlowCase c{re, beta, 0};
  auto h = solve_case(c, Fidelity::High);
  auto l = solve_case(c, Fidelity::Low);
  return std::abs(l.tau_w - h.tau_w) / h.tau_w;
}

}  // namespace

TEST_CASE("mesh: first-centre y+ regimes") {
  FlowCase c{1e5, 0.0, 0};
  auto h = build_mesh(c, Fidelity::High);
  auto l = build_mesh(c, Fidelity::Low);
  CHECK(h.first_center_yplus < 1.0);
  CHECK(l.first_center_yplus >= 30.0);
  CHECK(l.first_center_yplus <= 300.0);
  check_mesh_invariants(h);
  check_mesh_invariants(l);
  CHECK(static_cast<double>(h.n_nodes()) / static_cast<double>(l.n_nodes()) == doctest::Approx(1.9).epsilon(0.01));
}

TEST_CASE("mesh: invariants over the parameter box") {
  for (double re : {1e4, 3e4, 2e5, 1e6})
    for (double beta : {-0.2, 0.5}) {
      FlowCase c{re, beta, 1};
      for (auto f : {Fidelity::Low, Fidelity::High}) {
        auto m = build_mesh(c, f);
        check_mesh_invariants(m);
        if (f == Fidelity::High)
          CHECK(m.first_center_yplus < 1.0);
        else
          CHECK((m.first_center_yplus >= 30.0 && m.first_center_yplus <= 300.0));
      }
    }
}

TEST_CASE("mesh: rejected inputs") {
  CHECK_THROWS_AS(build_mesh(FlowCase{5e3, 0.0, 0}, Fidelity::High), DomainError);
  CHECK_THROWS_AS(build_mesh(FlowCase{1e5, 0.6, 0}, Fidelity::High), DomainError);
  CHECK_THROWS_AS(build_mesh(FlowCase{1e5, 0.0, 0}, Fidelity::High, 7), ConfigError);
  // far too few nodes to reach y+ < 1 without excessive stretching
  CHECK_THROWS_AS(build_mesh(FlowCase{1e6, 0.0, 0}, Fidelity::High, 20), ConfigError);
  try {
    build_mesh(FlowCase{1e6, 0.0, 0}, Fidelity::High, 20);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("max_stretching") != std::string::npos);
  }
}

TEST_CASE("solver: tridiagonal solve matches a dense LU") {
  Rng rng(7);
  for (int n : {1, 2, 5, 40}) {
    Eigen::VectorXd sub(n), diag(n), sup(n), rhs(n);
    for (int i = 0; i < n; ++i) {
      sub[i] = rng.uniform(-1, 1);
      sup[i] = rng.uniform(-1, 1);
      diag[i] = 3.0 + rng.uniform();
      rhs[i] = rng.uniform(-2, 2);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      a(i, i) = diag[i];
      if (i > 0) a(i, i - 1) = sub[i];
      if (i + 1 < n) a(i, i + 1) = sup[i];
    }
    Eigen::VectorXd ref = a.partialPivLu().solve(rhs);
    CHECK((solve_tridiagonal(sub, diag, sup, rhs) - ref).norm() < 1e-12 * (1 + ref.norm()));
  }
}

TEST_CASE("solver: solution invariants") {
  for (double beta : {-0.2, 0.0, 0.3, 0.5}) {
    FlowCase c{3e4, beta, 2};
    for (auto f : {Fidelity::Low, Fidelity::High}) {
      auto s = solve_case(c, f);
      CHECK(s.converged);
      CHECK(s.status == SolveStatus::Converged);
      CHECK(s.tau_w > 0.0);
      CHECK(s.work_units == doctest::Approx(static_cast<double>(s.mesh.n_nodes() * s.iterations)));
      CHECK(std::abs(s.u[s.u.size() - 1] - 1.0) < 1e-9);
      CHECK(s.u.size() == s.mesh.n_nodes());
      if (beta <= 0.0)
        for (Eigen::Index i = 1; i < s.u.size(); ++i) CHECK(s.u[i] >= s.u[i - 1]);
    }
  }
}

TEST_CASE("solver: deterministic") {
  FlowCase c{2e5, 0.25, 3};
  for (auto f : {Fidelity::Low, Fidelity::High}) {
    auto a = solve_case(c, f), b = solve_case(c, f);
    CHECK(a.tau_w == b.tau_w);
    CHECK(a.work_units == b.work_units);
    CHECK(a.u == b.u);
    CHECK(a.mesh.node_y == b.mesh.node_y);
  }
}

TEST_CASE("solver: fidelity gap at zero and adverse pressure gradient") {
  const double g0 = rel_gap(1e5, 0.0), g5 = rel_gap(1e5, 0.5);
  CHECK(g0 < 0.05);
  CHECK(g5 >= 3.0 * g0);
}

TEST_CASE("solver: high-fidelity profile reproduces the log layer") {
  FlowCase c{1e5, 0.0, 0};
  auto s = solve_case(c, Fidelity::High);
  const double ut = std::sqrt(0.5 * s.tau_w);
  CHECK(ut == doctest::Approx(s.friction_velocity).epsilon(1e-9));
  const double re_tau = c.re_delta * ut;
  int n = 0;
  for (Eigen::Index i = 0; i < s.u.size(); ++i) {
    const double yp = s.mesh.node_y[i] * re_tau;
    if (yp <= 30.0 || yp >= 0.3 * re_tau) continue;
    const double ref = law_of_the_wall(yp);
    CHECK(std::abs(s.u[i] / ut - ref) / ref < 0.05);
    ++n;
  }
  CHECK(n > 100);
}

TEST_CASE("solver: grid convergence of tau_w") {
  for (double beta : {0.0, 0.4}) {
    FlowCase c{1e5, beta, 0};
    auto m1 = build_mesh(c, Fidelity::High);
    auto m2 = build_mesh(c, Fidelity::High, 2 * m1.n_nodes());
    const double t1 = solve_on_mesh(c, Fidelity::High, m1).tau_w;
    const double t2 = solve_on_mesh(c, Fidelity::High, m2).tau_w;
    CHECK(std::abs(t2 - t1) / t1 < 0.01);
  }
}

TEST_CASE("solver: work units nondecreasing in node count") {
  FlowCase c{5e4, 0.1, 0};
  for (auto f : {Fidelity::Low, Fidelity::High}) {
    const auto n0 = default_node_count(c, f);
    double prev = 0.0;
    for (auto n : {n0, n0 + n0 / 2, 2 * n0, 4 * n0}) {
      auto s = solve_on_mesh(c, f, build_mesh(c, f, n));
      CHECK(s.work_units >= prev);
      prev = s.work_units;
    }
  }
}

TEST_CASE("solver: pressure gradient scales with beta") {
  CHECK(pressure_gradient(FlowCase{1e5, 0.0, 0}) == 0.0);
  const double g = pressure_gradient(FlowCase{1e5, 0.5, 0});
  const double ut = estimate_friction_velocity(1e5);
  CHECK(g == doctest::Approx(5.2 * 0.5 * ut * ut).epsilon(1e-12));
}
