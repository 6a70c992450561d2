#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <optional>

#include "plrg/fft.hpp"
#include "plrg/lattice_ops.hpp"
#include "plrg/symbols.hpp"

namespace plrg {

struct ModelParams {
  double mu = 0.0;
  double v = 1.0;
  double d = 1.0;

  // Radius of the well, sqrt(mu/v); needs mu > 0.
  double r() const {
    if (!(mu > 0.0)) throw ConfigError("well radius needs mu > 0");
    return std::sqrt(mu / v);
  }
};

inline ModelParams make_model(double mu, double v, double d = 1.0) {
  if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("v must be a finite nonnegative number");
  if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("d must be positive");
  return {mu, v, d};
}

// Real roots of v phi^3 + (1 - mu) phi - psi = 0 (the constant-field equation, since
// Q_n^*Q_n = 1 and D_n = 0 on constants), ascending, each polished to residual <= 1e-12.
inline std::vector<double> solve_constant(double psi, const ModelParams& p) {
  const double a = p.v, c = 1.0 - p.mu, e = -psi;
  auto f = [&](double x) { return (a * x * x + c) * x + e; };
  auto fp = [&](double x) { return 3.0 * a * x * x + c; };
  std::vector<double> cand;
  if (a == 0.0) {
    if (c == 0.0) throw NumericalError("constant-field equation degenerate (v = 0, mu = 1)");
    cand.push_back(psi / c);
  } else {
    // roots of x^3 + (c/a) x + e/a via the companion matrix
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    M(1, 0) = 1.0;
    M(2, 1) = 1.0;
    M(0, 2) = -e / a;
    M(1, 2) = -c / a;
    M(2, 2) = 0.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(M, false);
    std::vector<cplx> ev(3);
    for (int i = 0; i < 3; ++i) ev[std::size_t(i)] = es.eigenvalues()(i);
    std::sort(ev.begin(), ev.end(), [](cplx x, cplx y) { return std::abs(x.imag()) < std::abs(y.imag()); });
    // discriminant of a x^3 + c x + e decides how many roots are real
    const double disc = -4.0 * a * c * c * c - 27.0 * a * a * e * e;
    const std::size_t nreal = disc > 0.0 ? 3 : 1;
    for (std::size_t i = 0; i < nreal; ++i) cand.push_back(ev[i].real());
  }
  for (double& x : cand)
    for (int it = 0; it < 50; ++it) {
      const double d = fp(x);
      if (d == 0.0) break;
      const double step = f(x) / d;
      x -= step;
      if (std::abs(step) <= 1e-17 * std::max(1.0, std::abs(x))) break;
    }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end(),
                         [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x)); }),
             cand.end());
  for (double x : cand)
    if (std::abs(f(x)) > 1e-12 * std::max(1.0, std::abs(psi)))
      throw NumericalError("constant-field root failed to polish");
  return cand;
}

struct BackgroundSolution {
  Field phi_star, phi;
  double residual_star = 0.0, residual = 0.0;  // sup norms of the two gradient equations
  int iterations = 0;
  bool converged = false;
};

// Gradient of the action in the fine inner product:
//   plain:   Q_n^*(Q_n phi - psi) + D phi + (v phi_* phi - mu) phi     (derivative in phi_*)
//   starred: Q_n^*(Q_n phi_* - psi_*) + D^* phi_* + (v phi_* phi - mu) phi_*
inline FieldPair background_gradient(const FieldPair& psi, const FieldPair& phi, const ModelParams& p,
                                     const TorusShape& s, AveragingProfile prof = {}) {
  Field g = average_Qn_adjoint(average_Qn(phi.plain, s, prof) - psi.plain, s, prof) + heat_op(phi.plain, p.d);
  Field gs = average_Qn_adjoint(average_Qn(phi.starred, s, prof) - psi.starred, s, prof) +
             heat_op_adjoint(phi.starred, p.d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx w = p.v * phi.starred[i] * phi.plain[i] - p.mu;
    g[i] += w * phi.plain[i];
    gs[i] += w * phi.starred[i];
  }
  return {gs, g};
}

namespace detail {

// x = M^{-1} (u b_unit) fiberwise, M = diag(D - mu) + u u^T (adjoint: D^*); b given on the
// fine lattice if `fine_rhs`, otherwise as the unit-lattice field to be lifted by Q_n^*.
inline Field resolvent_apply(const Field& rhs, bool fine_rhs, const ModelParams& p, const TorusShape& s,
                             AveragingProfile prof, bool adjoint) {
  const SymbolParams P = symbol_params(s, p.mu, p.d, TimeMode::discrete, prof.exponent);
  const FiberLayout lay = make_fiber_layout(s);
  const auto bhat = dft(rhs);
  std::vector<cplx> xhat(s.fine().size(), 0.0);
  for (std::size_t i = 0; i < lay.unit_k.size(); ++i) {
    const Fiber f = make_fiber(lay.unit_k[i], P);
    std::optional<FiberSystem<1>> S;
    try {
      S.emplace(scalar_fiber_system(f, P, adjoint));
    } catch (const NumericalError& e) {
      const auto& k = lay.unit_k[i];
      throw NumericalError(std::string("resolvent singular at k = (") + std::to_string(k.k0) + ", " +
                           std::to_string(k.k[0]) + ", " + std::to_string(k.k[1]) + ", " + std::to_string(k.k[2]) +
                           "): " + e.what());
    }
    std::vector<Eigen::Matrix<cplx, 1, 1>> b(lay.per_fiber);
    for (std::size_t l = 0; l < lay.per_fiber; ++l)
      b[l](0) = fine_rhs ? bhat[lay.at(i, l)] : f.pts[l].u * bhat[i];
    const auto x = S->solve(b);
    for (std::size_t l = 0; l < lay.per_fiber; ++l) xhat[lay.at(i, l)] = x[l](0);
  }
  return inverse_dft(s.fine(), xhat);
}

inline Field linear_part(const Field& f, const ModelParams& p, const TorusShape& s, AveragingProfile prof,
                         bool adjoint) {
  Field r = average_Qn_adjoint(average_Qn(f, s, prof), s, prof);
  r += adjoint ? heat_op_adjoint(f, p.d) : heat_op(f, p.d);
  r -= p.mu * f;
  return r;
}

}  // namespace detail

// phi = (Q_n^*Q_n - mu + D)^{-1} Q_n^* psi and the starred version with D^*, solved fiberwise in
// momentum space. residual fields hold the sup norm of the linear equations.
inline BackgroundSolution solve_linearized_parabolic(const FieldPair& psi, const ModelParams& p, const TorusShape& s,
                                                     AveragingProfile prof = {}) {
  require_grid(psi.plain, s.unit(), "solve_linearized_parabolic");
  require_grid(psi.starred, s.unit(), "solve_linearized_parabolic");
  BackgroundSolution out;
  out.phi = detail::resolvent_apply(psi.plain, false, p, s, prof, false);
  out.phi_star = detail::resolvent_apply(psi.starred, false, p, s, prof, true);
  out.residual = max_abs(detail::linear_part(out.phi, p, s, prof, false) - average_Qn_adjoint(psi.plain, s, prof));
  out.residual_star =
      max_abs(detail::linear_part(out.phi_star, p, s, prof, true) - average_Qn_adjoint(psi.starred, s, prof));
  const double scale = std::max({1.0, max_abs(psi.plain), max_abs(psi.starred)});
  out.converged = std::max(out.residual, out.residual_star) <= 1e-10 * scale;
  out.iterations = 1;
  return out;
}

// Direct-space box operator acting on (X, H):
// [[2 mu + (D + D^*)/2, i (D - D^*)/2], [(D - D^*)/(2i), (D + D^*)/2]] + Q_n^*Q_n.
inline std::pair<Field, Field> box_apply(const Field& X, const Field& H, const ModelParams& p, const TorusShape& s,
                                         AveragingProfile prof = {}) {
  const cplx I(0.0, 1.0);
  const Field DX = heat_op(X, p.d), DsX = heat_op_adjoint(X, p.d);
  const Field DH = heat_op(H, p.d), DsH = heat_op_adjoint(H, p.d);
  Field a = 0.5 * (DX + DsX) + (2.0 * p.mu) * X + (0.5 * I) * (DH - DsH);
  Field b = (-0.5 * I) * (DX - DsX) + 0.5 * (DH + DsH);
  a += average_Qn_adjoint(average_Qn(X, s, prof), s, prof);
  b += average_Qn_adjoint(average_Qn(H, s, prof), s, prof);
  return {a, b};
}

struct RadialTangential {
  Field X, H;
  double residual = 0.0;
};

// [X; H] = box^{-1} Q_n^* [R; Theta], fiberwise in momentum space. The residual is checked in
// direct space (discrete mode) or on the fibers (continuum mode, which has no stencil).
inline RadialTangential solve_radial_tangential(const Field& R, const Field& Theta, const ModelParams& p,
                                                const TorusShape& s, TimeMode mode = TimeMode::discrete,
                                                AveragingProfile prof = {}) {
  require_grid(R, s.unit(), "solve_radial_tangential");
  require_grid(Theta, s.unit(), "solve_radial_tangential");
  const SymbolParams P = symbol_params(s, p.mu, p.d, mode, prof.exponent);
  const FiberLayout lay = make_fiber_layout(s);
  const auto Rh = dft(R), Th = dft(Theta);
  std::vector<cplx> Xh(s.fine().size()), Hh(s.fine().size());
  double fiber_res = 0.0;
  for (std::size_t i = 0; i < lay.unit_k.size(); ++i) {
    const Fiber f = make_fiber(lay.unit_k[i], P);
    const auto S = box_fiber_system(f, P);
    std::vector<Vec2> b(lay.per_fiber);
    for (std::size_t l = 0; l < lay.per_fiber; ++l) b[l] = f.pts[l].u * Vec2(Rh[i], Th[i]);
    const auto x = S.solve(b);
    const auto back = S.apply(x);
    for (std::size_t l = 0; l < lay.per_fiber; ++l) {
      Xh[lay.at(i, l)] = x[l](0);
      Hh[lay.at(i, l)] = x[l](1);
      fiber_res = std::max(fiber_res, (back[l] - b[l]).cwiseAbs().maxCoeff());
    }
  }
  RadialTangential out{inverse_dft(s.fine(), Xh), inverse_dft(s.fine(), Hh), 0.0};
  if (mode == TimeMode::discrete) {
    auto [a, b] = box_apply(out.X, out.H, p, s, prof);
    out.residual = std::max(max_abs(a - average_Qn_adjoint(R, s, prof)), max_abs(b - average_Qn_adjoint(Theta, s, prof)));
  } else {
    out.residual = fiber_res;
  }
  return out;
}

namespace detail {
class Hessian;
}
}  // namespace plrg

namespace Eigen::internal {
template <>
struct traits<plrg::detail::Hessian> : public traits<Eigen::SparseMatrix<plrg::cplx>> {};
}  // namespace Eigen::internal

namespace plrg {

enum class SeedStrategy { linearized, radial_tangential, zero, given };
enum class SolveMethod { newton, fixed_point };

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 100;
  SeedStrategy seed = SeedStrategy::linearized;
  SolveMethod method = SolveMethod::newton;
  AveragingProfile profile{};
  std::optional<FieldPair> initial;  // used with SeedStrategy::given
};

namespace detail {

inline double sup_residual(const FieldPair& g) { return std::max(max_abs(g.plain), max_abs(g.starred)); }

inline FieldPair radial_tangential_seed(const FieldPair& psi, const ModelParams& p, const TorusShape& s,
                                        AveragingProfile prof) {
  const double r = p.r();
  Field R(s.unit()), T(s.unit());
  const cplx I(0.0, 1.0);
  for (std::size_t i = 0; i < R.size(); ++i) {
    const cplx lp = std::log(psi.plain[i] / r), ls = std::log(psi.starred[i] / r);
    R[i] = 0.5 * (lp + ls);
    T[i] = (lp - ls) / (2.0 * I);
  }
  const auto rt = solve_radial_tangential(R, T, p, s, TimeMode::discrete, prof);
  FieldPair phi{Field(s.fine()), Field(s.fine())};
  for (std::size_t i = 0; i < phi.plain.size(); ++i) {
    phi.plain[i] = r * std::exp(rt.X[i] + I * rt.H[i]);
    phi.starred[i] = r * std::exp(rt.X[i] - I * rt.H[i]);
  }
  return phi;
}

// Hessian of the action at (phi_*, phi), acting on (delta_*, delta); rows are the starred
// then the plain gradient equation.
class Hessian : public Eigen::EigenBase<Hessian> {
 public:
  using Scalar = cplx;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  Hessian(const FieldPair& phi, const ModelParams& p, const TorusShape& s, AveragingProfile prof)
      : phi_(phi), p_(p), s_(s), prof_(prof), n_(Eigen::Index(phi.plain.size())) {}

  Eigen::Index rows() const { return 2 * n_; }
  Eigen::Index cols() const { return 2 * n_; }

  template <class Rhs>
  Eigen::Product<Hessian, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<Hessian, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    const Grid g = s_.fine();
    Field ds(g), d(g);
    for (Eigen::Index i = 0; i < n_; ++i) {
      ds[std::size_t(i)] = x(i);
      d[std::size_t(i)] = x(n_ + i);
    }
    const Field a = linear_part(ds, p_, s_, prof_, true), b = linear_part(d, p_, s_, prof_, false);
    Eigen::VectorXcd y(2 * n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const std::size_t k = std::size_t(i);
      const cplx fs = phi_.starred[k], f = phi_.plain[k];
      y(i) = a[k] + 2.0 * p_.v * fs * f * ds[k] + p_.v * fs * fs * d[k];
      y(n_ + i) = b[k] + p_.v * f * f * ds[k] + 2.0 * p_.v * fs * f * d[k];
    }
    return y;
  }

 private:
  const FieldPair& phi_;
  ModelParams p_;
  TorusShape s_;
  AveragingProfile prof_;
  Eigen::Index n_;
};

// Exact inverse of the Hessian at the constant background with the same means of
// phi_* phi, phi_*^2 and phi^2; fiberwise 2x2 blocks plus (u u^T) (x) 1.
class MeanFieldPreconditioner {
 public:
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

  MeanFieldPreconditioner() = default;
  void setup(const FieldPair& phi, const ModelParams& p, const TorusShape& s, AveragingProfile prof) {
    s_ = s;
    lay_ = make_fiber_layout(s);
    const SymbolParams P = symbol_params(s, p.mu, p.d, TimeMode::discrete, prof.exponent);
    cplx m = 0.0, a2 = 0.0, b2 = 0.0;
    const std::size_t N = phi.plain.size();
    for (std::size_t i = 0; i < N; ++i) {
      m += phi.starred[i] * phi.plain[i];
      a2 += phi.starred[i] * phi.starred[i];
      b2 += phi.plain[i] * phi.plain[i];
    }
    m /= double(N);
    a2 /= double(N);
    b2 /= double(N);
    systems_.clear();
    for (const auto& k : lay_.unit_k) {
      const Fiber f = make_fiber(k, P);
      std::vector<double> u;
      std::vector<Mat2> G;
      for (const auto& q : f.pts) {
        u.push_back(q.u);
        Mat2 b;
        b << heat_adjoint_symbol(q.p, P) - p.mu + 2.0 * p.v * m, p.v * a2, p.v * b2,
            heat_symbol(q.p, P) - p.mu + 2.0 * p.v * m;
        G.push_back(b);
      }
      systems_.emplace_back(std::move(u), std::move(G), f.zero);
    }
  }

  template <class M>
  MeanFieldPreconditioner& analyzePattern(const M&) { return *this; }
  template <class M>
  MeanFieldPreconditioner& factorize(const M&) { return *this; }
  template <class M>
  MeanFieldPreconditioner& compute(const M&) { return *this; }
  Eigen::ComputationInfo info() { return Eigen::Success; }

  template <class Rhs>
  Eigen::VectorXcd solve(const Rhs& r) const {
    const Grid g = s_.fine();
    const Eigen::Index n = Eigen::Index(g.size());
    Field a(g), b(g);
    for (Eigen::Index i = 0; i < n; ++i) {
      a[std::size_t(i)] = r(i);
      b[std::size_t(i)] = r(n + i);
    }
    const auto ah = dft(a), bh = dft(b);
    std::vector<cplx> xa(g.size()), xb(g.size());
    for (std::size_t i = 0; i < lay_.unit_k.size(); ++i) {
      std::vector<Vec2> rhs(lay_.per_fiber);
      for (std::size_t l = 0; l < lay_.per_fiber; ++l) rhs[l] = Vec2(ah[lay_.at(i, l)], bh[lay_.at(i, l)]);
      const auto x = systems_[i].solve(rhs);
      for (std::size_t l = 0; l < lay_.per_fiber; ++l) {
        xa[lay_.at(i, l)] = x[l](0);
        xb[lay_.at(i, l)] = x[l](1);
      }
    }
    const Field fa = inverse_dft(g, xa), fb = inverse_dft(g, xb);
    Eigen::VectorXcd out(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i) = fa[std::size_t(i)];
      out(n + i) = fb[std::size_t(i)];
    }
    return out;
  }

 private:
  TorusShape s_;
  FiberLayout lay_;
  std::vector<FiberSystem<2>> systems_;
};

}  // namespace detail
}  // namespace plrg

namespace Eigen::internal {

template <class Rhs>
struct generic_product_impl<plrg::detail::Hessian, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<plrg::detail::Hessian, Rhs,
                                generic_product_impl<plrg::detail::Hessian, Rhs>> {
  using Scalar = typename Product<plrg::detail::Hessian, Rhs>::Scalar;
  template <class Dest>
  static void scaleAndAddTo(Dest& dst, const plrg::detail::Hessian& lhs, const Rhs& rhs, const Scalar& alpha) {
    dst.noalias() += alpha * lhs.apply(rhs);
  }
};

}  // namespace Eigen::internal

namespace plrg {

// Critical point of the action in (phi_*, phi). Newton's method with the exact Hessian,
// solved by BiCGSTAB preconditioned with the mean-field Hessian, step halving when the
// residual grows. SolveMethod::fixed_point iterates
// phi <- (Q_n^*Q_n - mu + D)^{-1}(Q_n^* psi - v phi_* phi^2) instead (small fields only).
inline BackgroundSolution solve_nonlinear(const FieldPair& psi, const ModelParams& p, const TorusShape& s,
                                          const SolveOptions& opt = {}) {
  require_grid(psi.plain, s.unit(), "solve_nonlinear");
  require_grid(psi.starred, s.unit(), "solve_nonlinear");
  if (!(opt.tol > 0.0)) throw ConfigError("solve_nonlinear: tol must be positive");
  if (opt.max_iter < 1) throw ConfigError("solve_nonlinear: max_iter must be positive");
  const Grid fine = s.fine();
  const auto prof = opt.profile;

  FieldPair phi;
  switch (opt.seed) {
    case SeedStrategy::linearized: {
      auto lin = solve_linearized_parabolic(psi, p, s, prof);
      phi = {lin.phi_star, lin.phi};
      break;
    }
    case SeedStrategy::radial_tangential: phi = detail::radial_tangential_seed(psi, p, s, prof); break;
    case SeedStrategy::zero: phi = {Field(fine), Field(fine)}; break;
    case SeedStrategy::given:
      if (!opt.initial) throw ConfigError("solve_nonlinear: seed 'given' needs an initial iterate");
      phi = *opt.initial;
      require_grid(phi.plain, fine, "solve_nonlinear seed");
      require_grid(phi.starred, fine, "solve_nonlinear seed");
      break;
  }

  const std::size_t N = fine.size();
  const Eigen::Index n = Eigen::Index(N);
  FieldPair g = background_gradient(psi, phi, p, s, prof);
  double res = detail::sup_residual(g);

  int it = 0;
  for (; it < opt.max_iter && res > opt.tol; ++it) {
    FieldPair next;
    if (opt.method == SolveMethod::newton) {
      Eigen::VectorXcd F(2 * n);
      for (Eigen::Index i = 0; i < n; ++i) {
        F(i) = g.starred[std::size_t(i)];
        F(n + i) = g.plain[std::size_t(i)];
      }
      detail::Hessian J(phi, p, s, prof);
      Eigen::BiCGSTAB<detail::Hessian, detail::MeanFieldPreconditioner> solver;
      solver.preconditioner().setup(phi, p, s, prof);
      solver.compute(J);
      solver.setTolerance(std::clamp(1e-3 * res, 1e-15, 1e-4));
      solver.setMaxIterations(500);
      const Eigen::VectorXcd step = solver.solve(-F);
      if (!step.allFinite()) break;
      double t = 1.0;
      for (int h = 0; h < 30; ++h, t *= 0.5) {
        next = phi;
        for (Eigen::Index i = 0; i < n; ++i) {
          next.starred[std::size_t(i)] += t * step(i);
          next.plain[std::size_t(i)] += t * step(n + i);
        }
        FieldPair gn = background_gradient(psi, next, p, s, prof);
        const double rn = detail::sup_residual(gn);
        if (rn < res || h == 29) {
          g = std::move(gn);
          res = rn;
          break;
        }
      }
    } else {
      Field nl(fine), nls(fine);
      for (std::size_t i = 0; i < N; ++i) {
        const cplx w = p.v * phi.starred[i] * phi.plain[i];
        nl[i] = w * phi.plain[i];
        nls[i] = w * phi.starred[i];
      }
      Field rhs = average_Qn_adjoint(psi.plain, s, prof) - nl;
      Field rhss = average_Qn_adjoint(psi.starred, s, prof) - nls;
      next = {detail::resolvent_apply(rhss, true, p, s, prof, true), detail::resolvent_apply(rhs, true, p, s, prof, false)};
      g = background_gradient(psi, next, p, s, prof);
      const double rn = detail::sup_residual(g);
      if (!std::isfinite(rn)) break;
      res = rn;
    }
    phi = std::move(next);
  }
  BackgroundSolution out;
  out.phi_star = phi.starred;
  out.phi = phi.plain;
  out.residual = max_abs(g.plain);
  out.residual_star = max_abs(g.starred);
  out.iterations = it + 1;  // residual evaluations, the seed included
  out.converged = res <= opt.tol;
  return out;
}

}  // namespace plrg
