#pragma once

#include <sstream>

#include "plrg/fft.hpp"
#include "plrg/params.hpp"
#include "plrg/symbols.hpp"

namespace plrg {

// Translation-invariant quadratic action <psi_*, A psi>_0 on a unit lattice, stored as the
// symbol A^(k) (2 pi periodic in every component).
struct QuadraticAction {
  std::function<cplx(const Momentum&)> symbol;
  std::string provenance;
};

// The scale-n dominant part 1 - Q_n S_n(mu) Q_n^*.
inline QuadraticAction dominant_quadratic_action(const SymbolParams& P) {
  std::ostringstream os;
  os << "dominant(n=" << P.n << ", mu=" << P.mu << ")";
  return {[P](const Momentum& k) { return symbol_one_minus_QSQ(k, P); }, os.str()};
}

inline constexpr double negligible_u = 1e-13;

// Integrate out psi against exp(-(1/L^2) <theta_* - Q psi_*, theta - Q psi>_{-1}) and rescale
// back to the unit lattice. Per coarse momentum K the Schur complement over the fiber
// diag(A^) + L^-2 u u^T gives B^ = A0 / (L^2 A0 + u0^2 + A0 sum_{l != 0} u_l^2 / A_l), and the
// rescaled symbol is A'^(k) = L^2 B^(k0 / L^2, k / L).
inline QuadraticAction rg_step_quadratic(const QuadraticAction& A, int L, int exponent = 1) {
  if (L < 3 || L % 2 == 0) throw ConfigError("L must be an odd integer >= 3");
  const BlockSpec b = BlockSpec::unit_to_coarse(L, exponent);
  const double L2 = double(L) * L;
  auto sym = [A, b, L, L2](const Momentum& k) -> cplx {
    const Momentum K{k.k0 / L2, {k.k[0] / L, k.k[1] / L, k.k[2] / L}};
    const Fiber f = make_fiber(K, b);
    cplx aR = 0.0;
    for (std::size_t l = 0; l < f.pts.size(); ++l) {
      if (l == f.zero || std::abs(f.pts[l].u) <= negligible_u) continue;
      const cplx a = A.symbol(f.pts[l].p);
      if (a == 0.0) {
        std::ostringstream os;
        os << "rg_step_quadratic: input symbol vanishes on the fiber of k = (" << k.k0 << ", " << k.k[0] << ", "
           << k.k[1] << ", " << k.k[2] << ")";
        throw NumericalError(os.str());
      }
      aR += f.pts[l].u * f.pts[l].u / a;
    }
    const cplx a0 = A.symbol(f.pts[f.zero].p);
    const double u0 = f.pts[f.zero].u;
    const cplx den = L2 * a0 + u0 * u0 + a0 * aR;
    if (den == 0.0) {
      std::ostringstream os;
      os << "rg_step_quadratic: degenerate Gaussian at k = (" << k.k0 << ", " << k.k[0] << ", " << k.k[1] << ", "
         << k.k[2] << ")";
      throw NumericalError(os.str());
    }
    return L2 * a0 / den;
  };
  return {sym, "rg_step(" + A.provenance + ")"};
}

// Symbol values on the dual lattice of g, in DFT order.
inline std::vector<cplx> symbol_table(const QuadraticAction& A, const Grid& g) {
  std::vector<cplx> out;
  for (const auto& k : dual_lattice(g)) out.push_back(A.symbol(k));
  return out;
}

// Kernel k(z) with (K f)(x) = sum_z k(z) f(x + z), so that K^(p) = sum_z k(z) e^{i p z}.
inline Field kernel_from_symbol(const QuadraticAction& A, const Grid& g) {
  const auto tab = symbol_table(A, g);
  std::vector<cplx> flipped(tab.size());
  for (std::size_t i = 0; i < tab.size(); ++i) flipped[negated_index(g, i)] = tab[i];
  return inverse_dft(g, flipped);
}

inline Field apply_kernel(const Field& k, const Field& f) {
  if (!(k.grid == f.grid)) throw ConfigError("apply_kernel: kernel and field live on different lattices");
  const Grid& g = f.grid;
  Field r(g);
  for (std::size_t z = 0; z < k.size(); ++z) {
    if (k[z] == 0.0) continue;
    const Site dz = g.coords(z);
    for (std::size_t i = 0; i < f.size(); ++i) {
      Site x = g.coords(i);
      for (int a = 0; a < 4; ++a) x[a] += dz[a];
      r[i] += k[z] * f[g.index(x)];
    }
  }
  return r;
}

struct Localized {
  cplx scalar;                // K^(0), the kernel sum
  std::array<Field, 4> parts;  // K^nu, acting on the forward differences d_nu psi
};

// Discrete fundamental theorem of calculus: psi(x + z) - psi(x) is summed along the path
// that walks axis 0 first, then axes 1, 2, 3, using the symmetric representative of z.
// Then K psi = K^(0) psi + sum_nu K^nu (d_nu psi) exactly (unit spacing).
inline Localized localize_quadratic(const Field& k) {
  const Grid& g = k.grid;
  Localized out{0.0, {Field(g), Field(g), Field(g), Field(g)}};
  for (std::size_t z = 0; z < k.size(); ++z) {
    out.scalar += k[z];
    if (k[z] == 0.0) continue;
    Site c = g.coords(z);
    Site w{0, 0, 0, 0};
    for (int a = 0; a < 4; ++a) {
      const int step = symmetric_mode(c[a], g.ext[a]);
      if (step > 0)
        for (int s = 0; s < step; ++s) {
          Site q = w;
          q[a] += s;
          out.parts[a][g.index(q)] += k[z];
        }
      else
        for (int s = step; s < 0; ++s) {
          Site q = w;
          q[a] += s;
          out.parts[a][g.index(q)] -= k[z];
        }
      w[a] += step;
    }
  }
  return out;
}

inline Localized localize_quadratic(const QuadraticAction& A, const Grid& g) {
  return localize_quadratic(kernel_from_symbol(A, g));
}

struct RenormalizedMu {
  double mu = 0.0;
  int iterations = 0;
  double lipschitz = 0.0;  // sampled estimate of the correction's Lipschitz constant
  bool contraction = true;
};

// Fixed point of mu -> L^2 mu_n + K'(mu), started at L^2 mu_n. Plain iteration when the sampled
// Lipschitz constant is below 1; otherwise the flag is cleared and a secant solve takes over.
inline RenormalizedMu renormalize_mu(const FlowParams& f, const std::function<double(double)>& correction,
                                     double tol = 1e-13, int max_iter = 200) {
  const double c = double(f.L) * f.L * f.mu;
  RenormalizedMu out;
  const double w = std::max(0.5 * std::abs(c), 1e-6);
  double prev = correction(c - w);
  for (int i = 1; i <= 8; ++i) {
    const double x = c - w + 2.0 * w * i / 8.0;
    const double y = correction(x);
    out.lipschitz = std::max(out.lipschitz, std::abs(y - prev) / (2.0 * w / 8.0));
    prev = y;
  }
  out.contraction = out.lipschitz < 1.0;
  auto close = [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
  if (out.contraction) {
    double mu = c;
    for (int it = 1; it <= max_iter; ++it) {
      const double next = c + correction(mu);
      if (!std::isfinite(next)) throw NumericalError("renormalize_mu: iteration left the reals");
      out.iterations = it;
      if (close(mu, next)) {
        out.mu = next;
        return out;
      }
      mu = next;
    }
    throw NumericalError("renormalize_mu: no fixed point after " + std::to_string(max_iter) + " iterations");
  }
  auto g = [&](double mu) { return c + correction(mu) - mu; };
  double x0 = c, x1 = c + w, g0 = g(x0), g1 = g(x1);
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    if (g1 == g0) break;
    const double x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
    if (!std::isfinite(x2)) break;
    x0 = x1;
    g0 = g1;
    x1 = x2;
    g1 = g(x1);
    if (close(x0, x1) || g1 == 0.0) {
      out.mu = x1;
      return out;
    }
  }
  throw NumericalError("renormalize_mu: no fixed point after " + std::to_string(out.iterations) +
                       " secant steps (correction is not a contraction)");
}

// Quadratic-level K': the RG image of the scale-n dominant part at k = 0 is matched by the
// scale-(n+1) dominant part, whose zero-momentum value is -mu/(1 - mu). Writing the RG output
// as -m', the matching condition mu/(1 - mu) = m' reads mu = L^2 mu_n + K'(mu) with
// K'(mu) = m' (1 - mu) - L^2 mu_n.
inline std::function<double(double)> quadratic_level_correction(const FlowParams& f, int exponent = 1) {
  const SymbolParams P{f.n, f.L, f.mu, f.d, TimeMode::discrete, exponent};
  const cplx out = rg_step_quadratic(dominant_quadratic_action(P), f.L, exponent).symbol(Momentum{});
  const double m = -out.real();
  const double c = double(f.L) * f.L * f.mu;
  return [m, c](double mu) { return m * (1.0 - mu) - c; };
}

struct FlowRow {
  FlowParams params;         // closed-form running parameters, mu_n = L^{2n} mu0
  double mu_quadratic = 0.0;  // quadratic-level renormalized trace
  WellGeometry well;         // closed form from params; NaN when mu_n <= 0
  Regime regime = Regime::transitional;
  int classified_at = 0;     // scale used for the classifier
};

struct FlowOptions {
  double stop_mu = 0.5;
  double eps = 0.0;
  double mu_star = 0.0;
  int exponent = 1;
  double fit_window = 0.1;
  int max_classifier_scale = 1;  // fibers grow as L^{5n}; the fit runs at min(n, this)
  std::optional<int> steps;      // further cap on the last n
  std::function<double(int)> d_schedule;
};

struct FlowTrace {
  std::vector<FlowRow> rows;
  int n_max = 0;
  std::string stop_reason;
};

inline FlowTrace run_flow(double mu0, double v0, int L, const FlowOptions& o = {}) {
  FlowTrace tr;
  tr.n_max = n_max(v0, L);
  int last = tr.n_max;
  if (o.steps) last = std::min(last, *o.steps);
  tr.stop_reason = o.steps && *o.steps < tr.n_max ? "step cap" : "n_max";
  double muq = mu0;
  for (int n = 0; n <= last; ++n) {
    FlowRow r;
    r.params = flow_params_at(n, mu0, v0, L, o.eps, o.d_schedule, o.mu_star);
    r.mu_quadratic = muq;
    if (r.params.mu > 0.0) {
      r.well = well_geometry(r.params);
    } else {
      r.well.radius = r.well.depth = std::numeric_limits<double>::quiet_NaN();
    }
    r.classified_at = std::min(n, o.max_classifier_scale);
    const SymbolParams P{r.classified_at, L, muq, r.params.d, TimeMode::discrete, o.exponent};
    r.regime = classify_parameters(P, o.fit_window).regime;
    tr.rows.push_back(r);
    if (muq >= o.stop_mu) {
      tr.stop_reason = "mu threshold";
      break;
    }
    if (n < last) {
      FlowParams cur = r.params;
      cur.mu = muq;
      muq = renormalize_mu(cur, quadratic_level_correction(cur, o.exponent)).mu;
    }
  }
  return tr;
}

}  // namespace plrg
