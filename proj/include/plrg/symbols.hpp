#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "plrg/torus.hpp"

namespace plrg {

enum class TimeMode { discrete, continuum };

inline const char* to_string(TimeMode m) { return m == TimeMode::discrete ? "discrete" : "continuum"; }

// Parameters of the scale-n symbols; Q_n uses the profile with the given exponent.
struct SymbolParams {
  int n = 1;
  int L = 3;
  double mu = 0.0;
  double d = 1.0;
  TimeMode mode = TimeMode::continuum;
  int exponent = 1;

  long bt() const { return ipow(L, 2 * n); }
  long bx() const { return ipow(L, n); }
  double eps_t() const { return 1.0 / double(bt()); }
  double eps_x() const { return 1.0 / double(bx()); }
};

// sin(p/2) / (b sin(p/(2b))), b odd; periodic in p with period 2 pi b.
inline double sinc_ratio(double p, long b) {
  if (b == 1) return 1.0;
  const double r = std::remainder(p, 2.0 * pi * double(b));
  const double x = r / (2.0 * double(b));
  if (std::abs(x) < 1e-6) {
    const double h = r / 2.0;
    return 1.0 - h * h * (1.0 - 1.0 / (double(b) * double(b))) / 6.0;
  }
  return std::sin(r / 2.0) / (double(b) * std::sin(x));
}

// Averaging over blocks of bt x bx^3 fine sites whose block spacing is (ct, cx) in
// physical units. The fine momenta above a coarse momentum k are k + 2 pi j / c.
struct BlockSpec {
  long bt = 1, bx = 1;
  double ct = 1.0, cx = 1.0;
  int exponent = 1;

  static BlockSpec fine_to_unit(int n, int L, int exponent = 1) {
    return {ipow(L, 2 * n), ipow(L, n), 1.0, 1.0, exponent};
  }
  static BlockSpec unit_to_coarse(int L, int exponent = 1) {
    return {long(L) * L, L, double(L) * L, double(L), exponent};
  }

  double u(const Momentum& p) const {
    double r = sinc_ratio(p.k0 * ct, bt);
    for (int a = 0; a < 3; ++a) r *= sinc_ratio(p.k[a] * cx, bx);
    return std::pow(r, exponent);
  }
};

inline double u_n(const Momentum& p, int n, int L, int exponent = 1) {
  return BlockSpec::fine_to_unit(n, L, exponent).u(p);
}

struct FiberPoint {
  Momentum p;
  double u;
};

struct Fiber {
  std::vector<FiberPoint> pts;
  std::size_t zero = 0;  // index of the l = 0 point
};

inline Fiber make_fiber(const Momentum& k, const BlockSpec& b) {
  Fiber f;
  f.pts.reserve(std::size_t(b.bt * b.bx * b.bx * b.bx));
  for (const auto& j : block_offsets(b.bt, b.bx)) {
    if (j == Mode{0, 0, 0, 0}) f.zero = f.pts.size();
    Momentum l{2.0 * pi * j[0] / b.ct, {2.0 * pi * j[1] / b.cx, 2.0 * pi * j[2] / b.cx, 2.0 * pi * j[3] / b.cx}};
    Momentum p = k + l;
    f.pts.push_back({p, b.u(p)});
  }
  return f;
}

inline Fiber make_fiber(const Momentum& k, const SymbolParams& P) {
  return make_fiber(k, BlockSpec::fine_to_unit(P.n, P.L, P.exponent));
}

// Symbol of the forward time difference on the fine lattice.
inline cplx dt_symbol(const Momentum& p, const SymbolParams& P) {
  if (P.mode == TimeMode::continuum) return {0.0, p.k0};
  const double e = P.eps_t();
  return (std::polar(1.0, e * p.k0) - 1.0) / e;
}

// Symbol of -Delta.
inline double neg_laplacian_symbol(const Momentum& p, const SymbolParams& P) {
  if (P.mode == TimeMode::continuum) return p.spatial_sq();
  const double e = P.eps_x();
  double s = 0.0;
  for (double q : p.k) s += (2.0 - 2.0 * std::cos(e * q)) / (e * e);
  return s;
}

// D = -d d_0 - Delta and its bilinear adjoint D* = -d d_0^* - Delta.
inline cplx heat_symbol(const Momentum& p, const SymbolParams& P) {
  return -P.d * dt_symbol(p, P) + neg_laplacian_symbol(p, P);
}
inline cplx heat_adjoint_symbol(const Momentum& p, const SymbolParams& P) {
  return -P.d * dt_symbol(-p, P) + neg_laplacian_symbol(p, P);
}

using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

// Linearization of the background equations in (X, H):
// [[2 mu + (D+D*)/2, i(D-D*)/2], [(D-D*)/(2i), (D+D*)/2]]. In continuum mode this is
// [[2 mu + p^2, d p0], [-d p0, p^2]].
inline Mat2 box_symbol(const Momentum& p, const SymbolParams& P) {
  const cplx D = heat_symbol(p, P), Ds = heat_adjoint_symbol(p, P);
  const cplx I(0.0, 1.0);
  Mat2 m;
  m(0, 0) = 2.0 * P.mu + 0.5 * (D + Ds);
  m(0, 1) = 0.5 * I * (D - Ds);
  m(1, 0) = (D - Ds) / (2.0 * I);
  m(1, 1) = 0.5 * (D + Ds);
  return m;
}

// Block system (G + (u u^T) (x) 1_C) x = b over one fiber, with G block diagonal. Every
// block except the one at l = 0 must be invertible; the l = 0 block may be singular.
template <int C>
struct FiberSystem {
  using Blk = Eigen::Matrix<cplx, C, C>;
  using Vec = Eigen::Matrix<cplx, C, 1>;

  std::vector<double> u;
  std::vector<Blk> G;
  std::size_t zero = 0;

  std::vector<Blk> Ginv;
  Blk B;          // sum over l != 0 of u^2 G^{-1}
  Blk IplusBinv;  // (1 + B)^{-1}
  Eigen::FullPivLU<Blk> S0;

  FiberSystem(std::vector<double> u_, std::vector<Blk> G_, std::size_t zero_)
      : u(std::move(u_)), G(std::move(G_)), zero(zero_) {
    Ginv.resize(G.size());
    B.setZero();
    for (std::size_t l = 0; l < G.size(); ++l) {
      if (l == zero) continue;
      Eigen::FullPivLU<Blk> lu(G[l]);
      if (!lu.isInvertible())
        throw NumericalError("fiber block " + std::to_string(l) + " is singular");
      Ginv[l] = lu.inverse();
      B += u[l] * u[l] * Ginv[l];
    }
    Eigen::FullPivLU<Blk> lu(Blk::Identity() + B);
    if (!lu.isInvertible()) throw NumericalError("fiber: 1 + B is singular");
    IplusBinv = lu.inverse();
    S0.compute(G[zero] + u[zero] * u[zero] * IplusBinv);
    if (!S0.isInvertible()) throw NumericalError("fiber: zero-offset Schur complement is singular");
  }

  std::vector<Vec> apply(const std::vector<Vec>& x) const {
    Vec t = Vec::Zero();
    for (std::size_t l = 0; l < x.size(); ++l) t += u[l] * x[l];
    std::vector<Vec> y(x.size());
    for (std::size_t l = 0; l < x.size(); ++l) y[l] = G[l] * x[l] + u[l] * t;
    return y;
  }

  std::vector<Vec> solve(const std::vector<Vec>& b) const {
    const double u0 = u[zero];
    Vec t = Vec::Zero();
    for (std::size_t l = 0; l < b.size(); ++l)
      if (l != zero) t += u[l] * (Ginv[l] * b[l]);
    std::vector<Vec> x(b.size());
    x[zero] = S0.solve(b[zero] - u0 * (IplusBinv * t));
    Vec w = Vec::Zero();
    for (std::size_t l = 0; l < b.size(); ++l) {
      if (l == zero) continue;
      x[l] = Ginv[l] * (b[l] - u0 * u[l] * x[zero]);
      w += u[l] * x[l];
    }
    const Vec corr = IplusBinv * w;
    for (std::size_t l = 0; l < b.size(); ++l)
      if (l != zero) x[l] -= u[l] * (Ginv[l] * corr);
    return x;
  }

  // sum_{l,l'} u_l [M^{-1}]_{l l'} u_l', a C x C block.
  Blk sandwich() const {
    Blk out;
    for (int c = 0; c < C; ++c) {
      std::vector<Vec> b(u.size());
      for (std::size_t l = 0; l < u.size(); ++l) {
        b[l].setZero();
        b[l](c) = u[l];
      }
      auto x = solve(b);
      Vec s = Vec::Zero();
      for (std::size_t l = 0; l < u.size(); ++l) s += u[l] * x[l];
      out.col(c) = s;
    }
    return out;
  }
};

inline FiberSystem<1> scalar_fiber_system(const Fiber& f, const SymbolParams& P, bool adjoint = false) {
  std::vector<double> u;
  std::vector<Eigen::Matrix<cplx, 1, 1>> G;
  for (const auto& q : f.pts) {
    u.push_back(q.u);
    Eigen::Matrix<cplx, 1, 1> g;
    g(0, 0) = (adjoint ? heat_adjoint_symbol(q.p, P) : heat_symbol(q.p, P)) - P.mu;
    G.push_back(g);
  }
  return {std::move(u), std::move(G), f.zero};
}

inline FiberSystem<2> box_fiber_system(const Fiber& f, const SymbolParams& P) {
  std::vector<double> u;
  std::vector<Mat2> G;
  for (const auto& q : f.pts) {
    u.push_back(q.u);
    G.push_back(box_symbol(q.p, P));
  }
  return {std::move(u), std::move(G), f.zero};
}

// 1 - Q_n S_n(mu) Q_n^* with S_n(mu) = (Q_n^*Q_n - mu + D_n)^{-1}. At fixed k the fiber
// matrix is diag(g) + u u^T, so this equals 1/(1 + A) with A = sum u^2/g.
inline cplx symbol_one_minus_QSQ(const Momentum& k, const SymbolParams& P) {
  if (k.k0 == 0.0 && k.k[0] == 0.0 && k.k[1] == 0.0 && k.k[2] == 0.0) {
    // u_l(0) = 0 for every l != 0, u_0(0) = 1
    const cplx g0 = heat_symbol(k, P) - P.mu;
    if (g0 + 1.0 == 0.0) throw NumericalError("S_n(mu) is singular at this momentum");
    return g0 / (g0 + 1.0);
  }
  const Fiber f = make_fiber(k, P);
  cplx B = 0.0, g0 = 0.0;
  for (std::size_t l = 0; l < f.pts.size(); ++l) {
    const cplx g = heat_symbol(f.pts[l].p, P) - P.mu;
    if (l == f.zero) {
      g0 = g;
      continue;
    }
    if (f.pts[l].u == 0.0) continue;
    if (g == 0.0) throw NumericalError("S_n(mu) is singular: mu hits the spectrum at an l != 0 offset");
    B += f.pts[l].u * f.pts[l].u / g;
  }
  const double u0 = f.pts[f.zero].u;
  const cplx den = g0 + u0 * u0 + g0 * B;
  if (den == 0.0) throw NumericalError("S_n(mu) is singular at this momentum");
  return g0 / den;
}

struct DeltaIdentity {
  cplx lhs, rhs;
  double diff;
};

// Q_n S_n(0) Q_n^* (from a block solve of the fiber system) against
// Q_n D_n^{-1} Q_n^* Delta^(n), Delta^(n) = (1 + Q_n D_n^{-1} Q_n^*)^{-1} (from the l-sum).
inline DeltaIdentity check_Delta_identity(const Momentum& k, SymbolParams P) {
  P.mu = 0.0;
  const Fiber f = make_fiber(k, P);
  cplx A = 0.0;
  for (const auto& q : f.pts) {
    const cplx D = heat_symbol(q.p, P);
    if (D == 0.0) throw NumericalError("D_n vanishes on the fiber (k = 0 is excluded)");
    A += q.u * q.u / D;
  }
  const cplx Delta = 1.0 / (1.0 + A);
  const cplx rhs = A * Delta;
  const cplx lhs = scalar_fiber_system(f, P).sandwich()(0, 0);
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// Fourier transform of 1 - Q_n box^{-1} Q_n^*, which equals
// tilde D = (1 + Q_n D^{-1} Q_n^*)^{-1} = (G0 + u0^2 + G0 B)^{-1} G0.
inline Mat2 symbol_one_minus_Qbox(const Momentum& k, const SymbolParams& P) {
  const Fiber f = make_fiber(k, P);
  Mat2 B = Mat2::Zero();
  for (std::size_t l = 0; l < f.pts.size(); ++l) {
    if (l == f.zero || f.pts[l].u == 0.0) continue;
    Eigen::FullPivLU<Mat2> lu(box_symbol(f.pts[l].p, P));
    if (!lu.isInvertible()) throw NumericalError("box symbol singular at an l != 0 offset");
    B += f.pts[l].u * f.pts[l].u * lu.inverse();
  }
  const Mat2 G0 = box_symbol(k, P);
  const double u0 = f.pts[f.zero].u;
  Eigen::FullPivLU<Mat2> lu(G0 + u0 * u0 * Mat2::Identity() + G0 * B);
  if (!lu.isInvertible()) throw NumericalError("tilde D is singular at this momentum");
  return lu.solve(G0);
}

inline Mat2 symbol_Dtilde(const Momentum& k, const SymbolParams& P) { return symbol_one_minus_Qbox(k, P); }

// Dense fiber matrix G + (u u^T) (x) 1_C, the block-dense oracle path.
template <int C>
Eigen::MatrixXcd dense_fiber_matrix(const FiberSystem<C>& S) {
  const Eigen::Index N = Eigen::Index(S.u.size());
  if (std::size_t(N) * C > 5000) throw ConfigError("fiber too large for a dense matrix");
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(N * C, N * C);
  for (Eigen::Index l = 0; l < N; ++l) {
    M.block(l * C, l * C, C, C) = S.G[std::size_t(l)];
    for (Eigen::Index m = 0; m < N; ++m)
      for (int c = 0; c < C; ++c) M(l * C + c, m * C + c) += S.u[std::size_t(l)] * S.u[std::size_t(m)];
  }
  return M;
}

// ---- small-k fits ----

struct SmallKFit {
  cplx mass, ik0, k0sq, ksq;  // coefficients of 1, i k0, k0^2, |k|^2
  double residual = 0.0;      // RMS over the sample grid
  double window = 0.0;
  std::size_t samples = 0;
};

inline std::vector<Momentum> window_grid(double window, int points_per_axis) {
  std::vector<double> ax;
  for (int i = 0; i < points_per_axis; ++i)
    ax.push_back(points_per_axis == 1 ? 0.0 : -window + 2.0 * window * i / (points_per_axis - 1));
  std::vector<Momentum> ks;
  for (double a : ax)
    for (double b : ax)
      for (double c : ax)
        for (double e : ax) ks.push_back({a, {b, c, e}});
  return ks;
}

inline SmallKFit small_k_fit(const std::function<cplx(const Momentum&)>& f, double window,
                             int points_per_axis = 5) {
  if (!(window > 0.0) || window > pi) throw ConfigError("fit window must lie in (0, pi]");
  const auto ks = window_grid(window, points_per_axis);
  if (ks.size() < 4) throw ConfigError("small_k_fit: need at least 4 samples");
  Eigen::MatrixXcd A(Eigen::Index(ks.size()), 4);
  Eigen::VectorXcd y(Eigen::Index(ks.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& k = ks[i];
    const Eigen::Index r = Eigen::Index(i);
    A(r, 0) = 1.0;
    A(r, 1) = cplx(0.0, k.k0);
    A(r, 2) = k.k0 * k.k0;
    A(r, 3) = k.spatial_sq();
    y(r) = f(k);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
  if (qr.rank() < 4) throw NumericalError("small_k_fit: rank-deficient design");
  const Eigen::VectorXcd c = qr.solve(y);
  SmallKFit out{c(0), c(1), c(2), c(3), 0.0, window, ks.size()};
  out.residual = (A * c - y).norm() / std::sqrt(double(ks.size()));
  return out;
}

enum class Regime { parabolic, elliptic, transitional };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::parabolic: return "parabolic";
    case Regime::elliptic: return "elliptic";
    default: return "transitional";
  }
}

struct RegimeThresholds {
  double dominance = 3.0;   // factor by which the leading term must beat the competitor
  double mass_tol = 0.05;   // |mass| relative to the leading k-dependent term
  double radial_min = 0.2;  // radial mass required for the elliptic verdict
};

// Terms compared at the window scale w: |c_ik0| w, |c_k0^2| w^2, |c_k^2| w^2.
inline Regime classify_regime(const SmallKFit& fit, std::optional<double> radial_mass = std::nullopt,
                              const RegimeThresholds& T = {}) {
  const double w = fit.window;
  const double lin = std::abs(fit.ik0) * w;
  const double quad = std::abs(fit.k0sq) * w * w;
  const double kin = std::abs(fit.ksq) * w * w;
  const double m = std::abs(fit.mass);
  const bool radial_small = !radial_mass || std::abs(*radial_mass) <= T.mass_tol;
  const bool radial_big = !radial_mass || std::abs(*radial_mass) >= T.radial_min;
  if (lin > 0.0 && lin >= T.dominance * quad && m <= T.mass_tol * lin && radial_small)
    return Regime::parabolic;
  if (fit.k0sq.real() > 0.0 && fit.ksq.real() > 0.0 && quad >= T.dominance * lin &&
      kin >= T.dominance * lin && m <= T.mass_tol * std::max(quad, kin) && radial_big)
    return Regime::elliptic;
  return Regime::transitional;
}

struct RegimeReport {
  Regime regime;
  SmallKFit scalar_fit;      // 1 - Q_n S_n Q_n^*
  SmallKFit tangential_fit;  // (2,2) entry of 1 - Q_n box^{-1} Q_n^*
  double radial_mass;        // (1,1) entry at k = 0
};

// The scalar symbol decides the parabolic case; failing that the tangential/radial
// structure of the matrix symbol decides the elliptic one.
inline RegimeReport classify_parameters(const SymbolParams& P, double window, const RegimeThresholds& T = {}) {
  RegimeReport r;
  r.scalar_fit = small_k_fit([&](const Momentum& k) { return symbol_one_minus_QSQ(k, P); }, window);
  r.tangential_fit = small_k_fit([&](const Momentum& k) { return symbol_one_minus_Qbox(k, P)(1, 1); }, window);
  r.radial_mass = symbol_one_minus_Qbox(Momentum{}, P)(0, 0).real();
  if (classify_regime(r.scalar_fit, std::nullopt, T) == Regime::parabolic)
    r.regime = Regime::parabolic;
  else
    r.regime = classify_regime(r.tangential_fit, r.radial_mass, T);
  return r;
}

// ---- envelope ratios for the momentum-space bounds on D, tilde D ----

struct EnvelopeStat {
  char part;  // 'a'..'d'
  int row, col;
  double max_ratio;
};

struct EnvelopeReport {
  double d, mu;
  std::vector<EnvelopeStat> stats;
  double get(char part, int r, int c) const {
    for (const auto& s : stats)
      if (s.part == part && s.row == r && s.col == c) return s.max_ratio;
    return std::nan("");
  }
};

// Entrywise max over the grid of |computed| / envelope for
// (a) D^{-1}(k+l), (b) D^{-1}(k+l) D(k), (c) tilde D(k), (d) D^{-1}(k+l) tilde D(k), l != 0.
// Grid points with k = 0 are skipped.
inline EnvelopeReport verify_lemma_A2_bounds(const SymbolParams& P, const std::vector<Momentum>& grid) {
  const double d = P.d, mu = P.mu;
  const double d1 = 1.0 / d, d2 = d1 * d1, d3 = d2 * d1, d4 = d2 * d2;
  double mx[4][2][2] = {};
  auto upd = [&](int part, const Mat2& M, const double env[2][2]) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) mx[part][i][j] = std::max(mx[part][i][j], std::abs(M(i, j)) / env[i][j]);
  };
  for (const auto& k : grid) {
    const double K = k.norm();
    if (K == 0.0) continue;
    const Mat2 Dk = box_symbol(k, P);
    const Mat2 Dt = symbol_one_minus_Qbox(k, P);
    const double env_a[2][2] = {{d2, d1}, {d1, 1.0}};
    const double env_b[2][2] = {{d2 * mu + K, d1 * K}, {d1 * mu + d * K, K}};
    const double env_c[2][2] = {{d2 * mu + K * K, d1 * K}, {d1 * K, K * K}};
    const double env_d[2][2] = {{d4 * mu + d2 * K, d3 * K + d1 * K * K}, {d3 * mu + d1 * K, d2 * K + K * K}};
    upd(2, Dt, env_c);
    const Fiber f = make_fiber(k, P);
    for (std::size_t l = 0; l < f.pts.size(); ++l) {
      if (l == f.zero) continue;
      const Mat2 inv = box_symbol(f.pts[l].p, P).inverse();
      upd(0, inv, env_a);
      upd(1, inv * Dk, env_b);
      upd(3, inv * Dt, env_d);
    }
  }
  EnvelopeReport r{d, mu, {}};
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r.stats.push_back({char('a' + p), i, j, mx[p][i][j]});
  return r;
}

// ---- fine-lattice DFT arrays arranged by fiber ----

// For each unit momentum (in unit DFT order) the fine DFT indices of k + 2 pi j, with j in
// block_offsets order, so that entry l matches make_fiber(k, ...).pts[l].
struct FiberLayout {
  TorusShape shape;
  std::vector<Momentum> unit_k;
  std::size_t per_fiber = 0;
  std::vector<std::size_t> fine_index;  // unit_k.size() * per_fiber

  std::size_t at(std::size_t unit_i, std::size_t l) const { return fine_index[unit_i * per_fiber + l]; }
};

inline FiberLayout make_fiber_layout(const TorusShape& s) {
  FiberLayout out;
  out.shape = s;
  const Grid unit = s.unit(), fine = s.fine();
  const auto offs = block_offsets(s.block_t(), s.block_x());
  out.per_fiber = offs.size();
  const auto modes = dual_modes(unit);
  out.fine_index.reserve(modes.size() * offs.size());
  for (const auto& m : modes) {
    out.unit_k.push_back(momentum_of(m, unit));
    for (const auto& j : offs)
      out.fine_index.push_back(fine.index({m[0] + s.Nt * j[0], m[1] + s.Nx * j[1], m[2] + s.Nx * j[2], m[3] + s.Nx * j[3]}));
  }
  return out;
}

// DFT index of -k on the same grid.
inline std::size_t negated_index(const Grid& g, std::size_t i) {
  Site s = g.coords(i);
  for (auto& x : s) x = -x;
  return g.index(s);
}

inline SymbolParams symbol_params(const TorusShape& s, double mu, double d, TimeMode mode, int exponent = 1) {
  return {s.n, s.L, mu, d, mode, exponent};
}

}  // namespace plrg
