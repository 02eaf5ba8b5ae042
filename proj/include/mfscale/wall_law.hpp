#pragma once

namespace mfscale {

struct WallLawConstants {
  double kappa = 0.41;
  double intercept = 5.0;
};

// Reichardt blending of u+ = y+ and u+ = ln(y+)/kappa + B. The blending
// constant is chosen so the large-y+ asymptote has exactly intercept B.
double law_of_the_wall(double y_plus, const WallLawConstants& k = {});

// Friction velocity u_tau with u = u_tau * f(y u_tau / nu), found by the
// under-relaxed fixed point u_tau <- (1-w) u_tau + w u / f(y u_tau / nu).
double wall_function_friction_velocity(double u, double y, double nu, double initial,
                                       const WallLawConstants& k = {}, double relaxation = 0.5);

// Provisional u_tau for a slice at re_delta, from the log-law friction
// relation 1/u_tau = ln(re_delta u_tau)/kappa + B, iterated from the
// flat-plate correlation c_f = 0.026 Re^(-1/7).
double estimate_friction_velocity(double re_delta, const WallLawConstants& k = {});

}  // namespace mfscale
