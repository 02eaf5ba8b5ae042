#include "mfscale/wall_law.hpp"

#include "mfscale/errors.hpp"

#include <cmath>
#include <string>

namespace mfscale {

double law_of_the_wall(double y_plus, const WallLawConstants& k) {
  if (!std::isfinite(y_plus) || y_plus < 0.0)
    throw DomainError("law_of_the_wall: y_plus must be finite and >= 0, got " + std::to_string(y_plus));
  const double c = k.intercept - std::log(k.kappa) / k.kappa;
  const double a = y_plus / 11.0;
  return std::log1p(k.kappa * y_plus) / k.kappa +
         c * (1.0 - std::exp(-a) - a * std::exp(-y_plus / 3.0));
}

double wall_function_friction_velocity(double u, double y, double nu, double initial,
                                       const WallLawConstants& k, double relaxation) {
  double t = initial;
  for (int i = 0; i < 500; ++i) {
    double next = (1.0 - relaxation) * t + relaxation * u / law_of_the_wall(y * t / nu, k);
    if (std::abs(next - t) < 1e-13 * t) return next;
    t = next;
  }
  return t;
}

double estimate_friction_velocity(double re_delta, const WallLawConstants& k) {
  double t = std::sqrt(0.5 * 0.026 * std::pow(re_delta, -1.0 / 7.0));
  for (int i = 0; i < 200; ++i) {
    double next = 1.0 / (std::log(re_delta * t) / k.kappa + k.intercept);
    if (next == t) break;
    t = next;
  }
  return t;
}

}  // namespace mfscale
