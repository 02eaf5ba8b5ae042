#include "mfscale/mesh.hpp"

#include "mfscale/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace mfscale {

std::string_view to_string(Fidelity f) { return f == Fidelity::Low ? "low" : "high"; }

Fidelity parse_fidelity(std::string_view s) {
  if (s == "low" || s == "Low" || s == "L") return Fidelity::Low;
  if (s == "high" || s == "High" || s == "H") return Fidelity::High;
  throw ContractError("unknown fidelity '" + std::string(s) + "'");
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationCap: return "iteration_cap";
    case SolveStatus::Separated: return "separated";
  }
  return "?";
}

void validate(const FlowCase& c) {
  if (!(c.re_delta >= kMinReDelta && c.re_delta <= kMaxReDelta)) {
    std::ostringstream os;
    os << "re_delta=" << c.re_delta << " outside turbulent range [" << kMinReDelta << ", "
       << kMaxReDelta << "]";
    throw DomainError(os.str());
  }
  if (!(c.beta_p >= kMinBetaP && c.beta_p <= kMaxBetaP)) {
    std::ostringstream os;
    os << "beta_p=" << c.beta_p << " outside [" << kMinBetaP << ", " << kMaxBetaP << "]";
    throw DomainError(os.str());
  }
}

namespace {

double re_tau(const FlowCase& c, const MeshSettings& s) {
  return c.re_delta * estimate_friction_velocity(c.re_delta, s.wall);
}

// Position of the last node for stretching r.
double span(double start, double d1, Eigen::Index steps, double r) {
  if (r == 1.0) return start + d1 * static_cast<double>(steps);
  return start + d1 * (std::pow(r, static_cast<double>(steps)) - 1.0) / (r - 1.0);
}

}  // namespace

double first_center_height(const FlowCase& c, Fidelity f, const MeshSettings& s) {
  validate(c);
  const double rt = re_tau(c, s);
  if (f == Fidelity::High) return s.high_first_yplus / rt;
  return std::min(std::max(s.low_first_height, s.low_min_yplus / rt), s.low_max_yplus / rt);
}

Eigen::Index default_node_count(const FlowCase& c, Fidelity f, const MeshSettings& s) {
  validate(c);
  auto high = std::max<Eigen::Index>(
      s.min_high_nodes, static_cast<Eigen::Index>(std::llround(s.high_nodes_per_wall_unit * re_tau(c, s))));
  if (f == Fidelity::High) return high;
  return std::max<Eigen::Index>(kMinNodes,
                                static_cast<Eigen::Index>(std::llround(static_cast<double>(high) / s.node_ratio)));
}

Mesh build_mesh(const FlowCase& c, Fidelity f, const MeshSettings& s) {
  return build_mesh(c, f, default_node_count(c, f, s), s);
}

Mesh build_mesh(const FlowCase& c, Fidelity f, Eigen::Index n, const MeshSettings& s) {
  validate(c);
  if (n < kMinNodes) throw ConfigError("n_nodes=" + std::to_string(n) + " below minimum 8");
  const double rt = re_tau(c, s);
  const double y0 = first_center_height(c, f, s);
  const double y1 = 3.0 * y0;
  if (y1 >= 1.0)
    throw ConfigError("first cell height " + std::to_string(2.0 * y0) + " leaves no room for the outer mesh");

  const Eigen::Index steps = n - 2;  // spacings between node 1 and node n-1
  const double d1 = std::min(2.0 * y0, (1.0 - y1) / static_cast<double>(steps));
  double r = 1.0;
  if (span(y1, d1, steps, 1.0) < 1.0 - 1e-14) {
    double lo = 1.0, hi = 1.0 + 1e-3;
    while (span(y1, d1, steps, hi) < 1.0) hi = 1.0 + 2.0 * (hi - 1.0);
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
      double mid = 0.5 * (lo + hi);
      (span(y1, d1, steps, mid) < 1.0 ? lo : hi) = mid;
    }
    r = 0.5 * (lo + hi);
  }
  if (r > s.max_stretching) {
    std::ostringstream os;
    os << to_string(f) << " mesh with n_nodes=" << n << " needs stretching " << r
       << " above max_stretching " << s.max_stretching << " to keep first-centre y+ at "
       << y0 * rt;
    throw ConfigError(os.str());
  }

  Mesh m;
  m.node_y.resize(n);
  m.node_y[0] = y0;
  m.node_y[1] = y1;
  double d = d1;
  for (Eigen::Index i = 2; i < n; ++i) {
    m.node_y[i] = m.node_y[i - 1] + d;
    d *= r;
  }
  m.node_y[n - 1] = 1.0;
  m.first_center_yplus = y0 * rt;
  m.stretching = r;

  if (f == Fidelity::High && !(m.first_center_yplus < 1.0))
    throw ConfigError("high-fidelity first-centre y+ " + std::to_string(m.first_center_yplus) + " not below 1");
  if (f == Fidelity::Low && !(m.first_center_yplus >= 30.0 && m.first_center_yplus <= 300.0))
    throw ConfigError("low-fidelity first-centre y+ " + std::to_string(m.first_center_yplus) +
                      " outside [30, 300]");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(m.node_y[i] > m.node_y[i - 1]))
      throw ConfigError("mesh not strictly increasing; reduce n_nodes=" + std::to_string(n));
  return m;
}

}  // namespace mfscale
