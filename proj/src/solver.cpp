#include "mfscale/solver.hpp"

#include "mfscale/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mfscale {

double pressure_gradient(const FlowCase& c, const SolverSettings& s) {
  const double ut = estimate_friction_velocity(c.re_delta, s.mesh.wall);
  return s.pressure_gradient_scale * c.beta_p * ut * ut;
}

Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& sub, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& super, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  if (sub.size() != n || super.size() != n || rhs.size() != n)
    throw ContractError("solve_tridiagonal: band sizes differ");
  Eigen::VectorXd c(n), x(n);
  double b = diag[0];
  c[0] = super[0] / b;
  x[0] = rhs[0] / b;
  for (Eigen::Index i = 1; i < n; ++i) {
    b = diag[i] - sub[i] * c[i - 1];
    c[i] = super[i] / b;
    x[i] = (rhs[i] - sub[i] * x[i - 1]) / b;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] -= c[i] * x[i + 1];
  return x;
}

FieldSolution solve_case(const FlowCase& c, Fidelity f, const SolverSettings& s) {
  return solve_on_mesh(c, f, build_mesh(c, f, s.mesh), s);
}

FieldSolution solve_on_mesh(const FlowCase& c, Fidelity f, const Mesh& mesh, const SolverSettings& s) {
  validate(c);
  const auto& wall = s.mesh.wall;
  const Eigen::VectorXd& y = mesh.node_y;
  const Eigen::Index n = y.size();
  if (n < kMinNodes) throw ContractError("solve_on_mesh: mesh has fewer than 8 nodes");
  const Eigen::Index m = n - 1;  // unknowns u_0 .. u_{n-2}; u_{n-1} = 1
  const bool high = f == Fidelity::High;

  const double nu = 1.0 / c.re_delta;
  const double ut0 = estimate_friction_velocity(c.re_delta, wall);
  const double G = pressure_gradient(c, s);
  const double kappa = wall.kappa;
  const double a_plus = s.van_driest_a_plus;

  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = std::min(1.0, ut0 * law_of_the_wall(y[i] * ut0 / nu, wall));
  u[n - 1] = 1.0;

  const Eigen::VectorXd dy = y.tail(m) - y.head(m);
  const Eigen::VectorXd yf = 0.5 * (y.tail(m) + y.head(m));
  Eigen::VectorXd width(m);
  width[0] = yf[0];
  width.tail(m - 1) = yf.tail(m - 1) - yf.head(m - 1);

  Eigen::VectorXd nut(m), cr(m), sub(m), diag(m), super(m), rhs(m);
  double ut = ut0;
  double tau = 0.0, tau_old = 0.0;
  int it = 0;
  SolveStatus status = SolveStatus::IterationCap;

  auto wall_velocity = [&](double u0, double guess) {
    return wall_function_friction_velocity(std::max(u0, 1e-12), y[0], nu, guess, wall);
  };

  while (it < s.max_iterations) {
    ++it;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double l = kappa * yf[i] * (1.0 - std::exp(-yf[i] * ut / (nu * a_plus)));
      if (it == 1) {
        // stress-based start: nu_t from tau(y) ~ tau_ref + G y
        const double ts = std::max(ut0 * ut0 + G * yf[i], 0.05 * ut0 * ut0);
        const double g = 2.0 * ts / (nu + std::sqrt(nu * nu + 4.0 * l * l * ts));
        nut[i] = l * l * g;
      } else {
        const double dudy = (u[i + 1] - u[i]) / dy[i];
        nut[i] = s.relaxation * nut[i] + (1.0 - s.relaxation) * l * l * std::abs(dudy);
      }
      cr[i] = (nu + nut[i]) / dy[i];
    }

    double mu_wall;
    if (high) {
      mu_wall = nu / y[0];
    } else {
      const double u0 = std::max(u[0], 1e-12);
      const double t = wall_velocity(u0, ut);
      mu_wall = t * t / u0;
    }

    diag[0] = -(cr[0] + mu_wall);
    for (Eigen::Index i = 1; i < m; ++i) diag[i] = -(cr[i - 1] + cr[i]);
    sub[0] = 0.0;
    sub.tail(m - 1) = cr.head(m - 1);
    super.head(m - 1) = cr.head(m - 1);
    super[m - 1] = 0.0;
    rhs = G * width;
    // the wall function knows nothing about dp/dx
    if (!high) rhs[0] = 0.0;
    rhs[m - 1] -= cr[m - 1];

    u.head(m) = solve_tridiagonal(sub, diag, super, rhs);

    if (high) {
      tau = nu * u[0] / y[0];
    } else {
      const double t = wall_velocity(u[0], ut);
      tau = t * t;
    }
    if (!std::isfinite(tau)) break;
    ut = std::sqrt(std::abs(tau));
    if (it > 1 && std::abs(tau - tau_old) < s.tolerance * std::abs(tau)) {
      status = SolveStatus::Converged;
      break;
    }
    tau_old = tau;
  }
  if (status == SolveStatus::Converged && !(tau > 0.0)) status = SolveStatus::Separated;

  FieldSolution out;
  out.flow_case = c;
  out.fidelity = f;
  out.mesh = mesh;
  out.mesh.first_center_yplus = y[0] * ut / nu;
  out.u = u;
  out.tau_w = 2.0 * tau;
  out.iterations = it;
  out.work_units = static_cast<std::int64_t>(n) * it;
  out.status = status;
  out.converged = status == SolveStatus::Converged;
  out.friction_velocity = ut;
  return out;
}

}  // namespace mfscale
