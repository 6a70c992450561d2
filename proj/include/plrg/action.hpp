#pragma once

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "plrg/background.hpp"
#include "plrg/params.hpp"

namespace plrg {

struct ActionValue {
  cplx block, heat, chem, quartic;
  cplx total() const { return block + heat + chem + quartic; }
};

// A_n = <psi_* - Q_n phi_*, psi - Q_n phi>_0 + <phi_*, D phi>_n - mu <phi_*, phi>_n
//       + (v/2) <phi_* phi, phi_* phi>_n, with a_n replaced by 1.
inline ActionValue eval_action(const FieldPair& psi, const FieldPair& phi, const ModelParams& p, const TorusShape& s,
                               AveragingProfile prof = {}) {
  require_grid(psi.plain, s.unit(), "eval_action psi");
  require_grid(psi.starred, s.unit(), "eval_action psi_*");
  require_grid(phi.plain, s.fine(), "eval_action phi");
  require_grid(phi.starred, s.fine(), "eval_action phi_*");
  ActionValue a;
  a.block = inner_product(psi.starred - average_Qn(phi.starred, s, prof), psi.plain - average_Qn(phi.plain, s, prof));
  a.heat = inner_product(phi.starred, heat_op(phi.plain, p.d));
  a.chem = -p.mu * inner_product(phi.starred, phi.plain);
  const Field q = pointwise(phi.starred, phi.plain);
  a.quartic = 0.5 * p.v * inner_product(q, q);
  return a;
}

// Central difference of A_n along (h_*, h) in (phi_*, phi).
inline cplx action_directional_derivative(const FieldPair& psi, const FieldPair& phi, const FieldPair& h,
                                          const ModelParams& p, const TorusShape& s, double t = 1e-4,
                                          AveragingProfile prof = {}) {
  auto at = [&](double x) {
    FieldPair q{phi.starred + cplx(x) * h.starred, phi.plain + cplx(x) * h.plain};
    return eval_action(psi, q, p, s, prof).total();
  };
  return (at(t) - at(-t)) / (2.0 * t);
}

// <a, S b>_0 for a unit-lattice operator S with symbol s(k): (1/|X_0|) sum_k a^(-k) s(k) b^(k).
inline cplx symbol_bilinear(const Field& a, const Field& b, const std::function<cplx(const Momentum&)>& sym) {
  const Grid& g = a.grid;
  const auto ah = dft(a), bh = dft(b);
  const auto ks = dual_lattice(g);
  cplx s = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) s += ah[negated_index(g, i)] * sym(ks[i]) * bh[i];
  return s / (g.cell_volume() * double(g.size()));
}

// <psi_*, (1 - Q_n S_n(mu) Q_n^*) psi>_0 (discrete symbols).
inline cplx quadratic_form_parabolic(const FieldPair& psi, const ModelParams& p, const TorusShape& s,
                                     AveragingProfile prof = {}) {
  const SymbolParams P = symbol_params(s, p.mu, p.d, TimeMode::discrete, prof.exponent);
  return symbol_bilinear(psi.starred, psi.plain, [&](const Momentum& k) { return symbol_one_minus_QSQ(k, P); });
}

// <[R;Theta], (1 - Q_n box^{-1} Q_n^*)[R;Theta]>_0 - (mu/2) <1,1>_n, the quadratic
// approximation to A_n / r^2 near the bottom of the well.
inline cplx quadratic_form_radial(const Field& R, const Field& Theta, const ModelParams& p, const TorusShape& s,
                                  TimeMode mode = TimeMode::discrete, AveragingProfile prof = {}) {
  const SymbolParams P = symbol_params(s, p.mu, p.d, mode, prof.exponent);
  const Grid& g = R.grid;
  const auto Rh = dft(R), Th = dft(Theta);
  const auto ks = dual_lattice(g);
  cplx sum = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const std::size_t j = negated_index(g, i);
    const Mat2 T = symbol_one_minus_Qbox(ks[i], P);
    sum += (Vec2(Rh[j], Th[j]).transpose() * T * Vec2(Rh[i], Th[i]))(0, 0);
  }
  return sum / double(g.size()) - 0.5 * p.mu * double(s.unit().size());
}

struct EffectivePotential {
  double closed_form;   // per site
  double from_action;   // per site, at the constant background nearest z
};

// Per-site effective potential at constant external field z for the running parameters f.
inline EffectivePotential effective_potential(cplx z, const FlowParams& f) {
  const double vn = f.v0 / std::pow(double(f.L), double(f.n));
  const double x = std::norm(z);
  EffectivePotential e;
  e.closed_form = 0.5 * vn * ((x - f.mu / vn) * (x - f.mu / vn) - (f.mu / vn) * (f.mu / vn));
  // constants see no lattice structure, so the unit lattice at n = 0 suffices; the phase of
  // the background follows the phase of z
  const ModelParams p = make_model(f.mu, vn, f.d);
  const double az = std::abs(z);
  const auto roots = solve_constant(az, p);
  double rho = roots.front();
  for (double r : roots)
    if (std::abs(r - az) < std::abs(rho - az)) rho = r;
  const TorusShape s = make_shape(0, f.L, 1, 1);
  const cplx ph = az > 0.0 ? z / az : cplx(1.0);
  FieldPair psi{Field(s.unit(), std::conj(z)), Field(s.unit(), z)};
  FieldPair phi{Field(s.fine(), rho * std::conj(ph)), Field(s.fine(), rho * ph)};
  e.from_action = eval_action(psi, phi, p, s).total().real();
  return e;
}

// Location of the minimum of the action route over |z| in [0, hi].
inline double effective_potential_minimizer(const FlowParams& f, double hi) {
  auto r = boost::math::tools::brent_find_minima(
      [&](double x) { return effective_potential(cplx(x), f).from_action; }, 0.0, hi, 40);
  return r.first;
}

struct SpectrumReport {
  std::size_t eigenvalue_count = 0;
  double min_distance = std::numeric_limits<double>::infinity();  // to (-inf, 0]
  cplx closest;
  double sqrt_residual = 0.0;  // max over fibers of |D^2 - K^{-1}| / |K^{-1}|
  double sqrt_min_real = std::numeric_limits<double>::infinity();
  std::size_t largest_block = 0;
  std::vector<cplx> eigenvalues;
};

inline double distance_to_negative_axis(cplx z) { return z.real() <= 0.0 ? std::abs(z.imag()) : std::abs(z); }

inline constexpr double deflation_threshold = 1e-13;
inline constexpr std::size_t spectrum_block_cap = 3000;

// Spectrum of K = Q_n^*Q_n + D_n - mu, fiber by fiber (discrete symbols). Offsets with
// |u| <= deflation_threshold decouple with eigenvalue D - mu; the rest is diagonalized densely.
// The principal square root of K^{-1} is formed and checked on each block.
inline SpectrumReport dominant_quadratic_spectrum(const ModelParams& p, const TorusShape& s, AveragingProfile prof = {},
                                                  bool keep_eigenvalues = false) {
  const SymbolParams P = symbol_params(s, p.mu, p.d, TimeMode::discrete, prof.exponent);
  SpectrumReport rep;
  auto record = [&](cplx z) {
    ++rep.eigenvalue_count;
    const double dist = distance_to_negative_axis(z);
    if (dist < rep.min_distance) {
      rep.min_distance = dist;
      rep.closest = z;
    }
    if (keep_eigenvalues) rep.eigenvalues.push_back(z);
  };
  for (const auto& k : dual_lattice(s.unit())) {
    const Fiber f = make_fiber(k, P);
    std::vector<std::size_t> live;
    for (std::size_t l = 0; l < f.pts.size(); ++l) {
      const cplx g = heat_symbol(f.pts[l].p, P) - p.mu;
      if (std::abs(f.pts[l].u) > deflation_threshold) {
        live.push_back(l);
        continue;
      }
      record(g);
      if (g == 0.0) throw NumericalError("spectrum: K has a zero eigenvalue");
      rep.sqrt_min_real = std::min(rep.sqrt_min_real, std::sqrt(1.0 / g).real());
    }
    if (live.empty()) continue;
    if (live.size() > spectrum_block_cap)
      throw ConfigError("spectrum: fiber block of " + std::to_string(live.size()) + " exceeds the dense cap");
    rep.largest_block = std::max(rep.largest_block, live.size());
    const Eigen::Index m = Eigen::Index(live.size());
    Eigen::MatrixXcd K(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) K(a, b) = f.pts[live[std::size_t(a)]].u * f.pts[live[std::size_t(b)]].u;
    for (Eigen::Index a = 0; a < m; ++a) K(a, a) += heat_symbol(f.pts[live[std::size_t(a)]].p, P) - p.mu;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(K, false);
    for (Eigen::Index a = 0; a < m; ++a) record(es.eigenvalues()(a));
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(K);
    if (!lu.isInvertible()) throw NumericalError("spectrum: K is singular on a fiber");
    const Eigen::MatrixXcd Kinv = lu.inverse();
    const Eigen::MatrixXcd D = Kinv.sqrt();
    rep.sqrt_residual = std::max(rep.sqrt_residual, (D * D - Kinv).norm() / Kinv.norm());
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ed(D, false);
    for (Eigen::Index a = 0; a < m; ++a) rep.sqrt_min_real = std::min(rep.sqrt_min_real, ed.eigenvalues()(a).real());
  }
  return rep;
}

}  // namespace plrg
