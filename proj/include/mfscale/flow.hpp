#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>

namespace mfscale {

inline constexpr double kMinReDelta = 1e4;
inline constexpr double kMaxReDelta = 1e6;
inline constexpr double kMinBetaP = -0.2;
inline constexpr double kMaxBetaP = 0.5;

enum class Fidelity { Low, High };

std::string_view to_string(Fidelity f);
Fidelity parse_fidelity(std::string_view s);

// One boundary-layer slice: height 1, edge velocity 1, viscosity 1/re_delta.
struct FlowCase {
  double re_delta = 1e5;
  double beta_p = 0.0;
  int case_id = 0;
};

// Throws DomainError when the case is outside the turbulent parameter box.
void validate(const FlowCase& c);

struct Mesh {
  // Cell centres, ascending, node_y[0] > 0, node_y[last] == 1.
  Eigen::VectorXd node_y;
  double first_center_yplus = 0.0;
  // Spacing ratio (y[i+1]-y[i])/(y[i]-y[i-1]) above the wall cell.
  double stretching = 1.0;

  Eigen::Index n_nodes() const { return node_y.size(); }
};

enum class SolveStatus { Converged, IterationCap, Separated };

std::string_view to_string(SolveStatus s);

struct FieldSolution {
  FlowCase flow_case;
  Fidelity fidelity = Fidelity::High;
  Mesh mesh;
  Eigen::VectorXd u;
  // skin-friction coefficient 2*tau_w/(rho U_e^2)
  double tau_w = 0.0;
  std::int64_t work_units = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::IterationCap;
  int iterations = 0;
  double friction_velocity = 0.0;
};

}  // namespace mfscale
