#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "plrg/torus.hpp"

namespace plrg {

// Running parameters at step n. kappa, kappa_prime use the rough formulas as exact definitions.
struct FlowParams {
  int n = 0;
  int L = 3;
  double mu = 0.0;  // mu_n
  double v = 0.0;   // v_n = v0 / L^n
  double d = 1.0;
  double a = std::numeric_limits<double>::quiet_NaN();  // undefined at n = 0
  double kappa = 0.0;
  double kappa_prime = 0.0;
  double eps = 0.0;
  double mu0 = 0.0, v0 = 0.0;
  double mu_star = 0.0;
  std::vector<std::string> warnings;  // admissibility violations; never fatal
};

inline double a_coefficient(int n, int L) {
  if (n < 1) return std::numeric_limits<double>::quiet_NaN();
  const double q = 1.0 / (double(L) * L);
  return (1.0 - q) / (1.0 - std::pow(q, n));
}

// floor(0.4 log(1/v0) / log L)
inline int n_max(double v0, int L) {
  if (!(v0 > 0.0 && v0 < 1.0)) throw ConfigError("v0 must lie in (0, 1)");
  if (L < 3 || L % 2 == 0) throw ConfigError("L must be an odd integer >= 3");
  return int(std::floor(0.4 * std::log(1.0 / v0) / std::log(double(L))));
}

inline std::vector<std::string> admissibility_warnings(int n, double mu0, double v0, int L, double mu_star) {
  std::vector<std::string> w;
  const double lo = mu_star + std::pow(v0, 1.25), hi = std::pow(v0, 0.9);
  if (!(mu0 > lo)) w.push_back("mu0 below the admissible window (mu* + v0^(5/4))");
  if (!(mu0 < hi)) w.push_back("mu0 above the admissible window (v0^(9/10))");
  if (!(double(n) < 0.4 * std::log(1.0 / v0) / std::log(double(L)))) w.push_back("n beyond 0.4 log(1/v0)/log L");
  return w;
}

inline FlowParams flow_params_at(int n, double mu0, double v0, int L, double eps = 0.0,
                                 const std::function<double(int)>& d_schedule = {}, double mu_star = 0.0) {
  if (n < 0) throw ConfigError("n must be nonnegative");
  if (L < 3 || L % 2 == 0) throw ConfigError("L must be an odd integer >= 3");
  if (!(v0 > 0.0 && v0 < 1.0)) throw ConfigError("v0 must lie in (0, 1)");
  if (!std::isfinite(mu0)) throw ConfigError("mu0 must be finite");
  FlowParams f;
  f.n = n;
  f.L = L;
  f.mu0 = mu0;
  f.v0 = v0;
  f.eps = eps;
  f.mu_star = mu_star;
  f.mu = std::pow(double(L), 2.0 * n) * mu0;
  f.v = v0 / std::pow(double(L), double(n));
  f.d = d_schedule ? d_schedule(n) : 1.0;
  f.a = a_coefficient(n, L);
  const double base = std::pow(v0, -1.0 / 3.0 + eps);
  f.kappa = std::pow(double(L), 0.75 * n) * base;
  f.kappa_prime = std::pow(double(L), 0.375 * n) * base;
  f.warnings = admissibility_warnings(n, mu0, v0, L, mu_star);
  return f;
}

struct WellGeometry {
  double radius = 0.0;
  double depth = 0.0;
  bool per_site = true;
};

// Closed form: radius sqrt(mu_n / v_n), depth -(v_n/2) (mu_n/v_n)^2 per unit-lattice site,
// times |X_0| when a shape is given.
inline WellGeometry well_geometry(const FlowParams& f, std::optional<TorusShape> shape = std::nullopt) {
  if (!(f.mu > 0.0)) throw ConfigError("well geometry needs mu_n > 0");
  const double vn = f.v0 / std::pow(double(f.L), double(f.n));
  WellGeometry w;
  w.radius = std::sqrt(f.mu / vn);
  w.depth = -0.5 * f.mu * f.mu / vn;
  if (shape) {
    w.depth *= double(shape->unit().size());
    w.per_site = false;
  }
  return w;
}

}  // namespace plrg
