#pragma once

#include "mfscale/flow.hpp"
#include "mfscale/mesh.hpp"

namespace mfscale {

struct SolverSettings {
  double van_driest_a_plus = 26.0;
  double relaxation = 0.5;
  double tolerance = 1e-8;
  int max_iterations = 10000;
  // dp/dx = pressure_gradient_scale * beta_p * u_tau_est^2
  double pressure_gradient_scale = 5.2;
  MeshSettings mesh;
};

double pressure_gradient(const FlowCase& c, const SolverSettings& s = {});

FieldSolution solve_case(const FlowCase& c, Fidelity f, const SolverSettings& s = {});
FieldSolution solve_on_mesh(const FlowCase& c, Fidelity f, const Mesh& mesh,
                            const SolverSettings& s = {});

// Thomas algorithm; sub[0] and super[n-1] are ignored.
Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& sub, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& super, const Eigen::VectorXd& rhs);

}  // namespace mfscale
