// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "plrg/action.hpp"
#include "plrg/flow.hpp"
#include "plrg/norms.hpp"

using namespace plrg;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream note;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      note << " [" << what << "]";
    }
  }
};

FieldPair random_pair(const Grid& g, std::mt19937_64& rng, double scale = 1.0) {
  return {oracle::random_field(g, rng, scale), oracle::random_field(g, rng, scale)};
}

double pair_diff(const FieldPair& a, const FieldPair& b) {
  return std::max(oracle::max_diff(a.starred, b.starred), oracle::max_diff(a.plain, b.plain));
}

Momentum random_k(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-pi, pi);
  return {U(rng), {U(rng), U(rng), U(rng)}};
}

void constant_solutions(Outcome& o) {
  const auto r = solve_constant(0.0, make_model(2.0, 1.0));
  o.require(r == std::vector<double>{-1.0, 0.0, 1.0}, "mu=2, v=1, psi=0 roots are not exactly {-1, 0, 1}");
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> Mu(-3.0, 1.0), Psi(-5.0, 5.0), V(0.05, 3.0);
  double worst = 0.0;
  int single = 0;
  for (int t = 0; t < 100; ++t) {
    const ModelParams p = make_model(Mu(rng), V(rng));
    const double psi = Psi(rng);
    const auto roots = solve_constant(psi, p);
    single += roots.size() == 1;
    for (double x : roots) worst = std::max(worst, std::abs((p.v * x * x + 1.0 - p.mu) * x - psi));
  }
  o.require(single == 100, "a mu <= 1 case had more than one real root");
  o.require(worst <= 1e-12, "residual above 1e-12");
  o.note << " sweep single-root=" << single << "/100 worst-residual=" << worst;
}

void parabolic_symbol(Outcome& o) {
  const SymbolParams P{1, 3, 0.0, 1.0, TimeMode::continuum, 1};
  auto sym = [&](const Momentum& k) { return symbol_one_minus_QSQ(k, P); };
  const SmallKFit a = small_k_fit(sym, 0.2), b = small_k_fit(sym, 0.1);
  const cplx mik0 = -b.ik0;
  o.require(mik0.real() >= 0.95 && mik0.real() <= 1.05 && std::abs(mik0.imag()) <= 0.05, "-ik0 coefficient");
  o.require(b.ksq.real() >= 0.95 && b.ksq.real() <= 1.05 && std::abs(b.ksq.imag()) <= 0.05, "k^2 coefficient");
  o.require(a.residual / b.residual >= 4.0, "residual shrink < 4x");
  o.note << " -ik0=" << mik0.real() << " k^2=" << b.ksq.real() << " residual-shrink=" << a.residual / b.residual;
}

void elliptic_symbol(Outcome& o) {
  const double d = 100.0, mu = 0.5 * d * d;
  const SymbolParams E{1, 3, mu, d, TimeMode::continuum, 1};
  const SmallKFit t = small_k_fit([&](const Momentum& k) { return symbol_one_minus_Qbox(k, E)(1, 1); }, 0.1);
  const double k0_target = 1.0 / (2.0 * mu / (d * d));
  const double k0_err = std::abs(t.k0sq - k0_target) / k0_target, k_err = std::abs(t.ksq - 1.0);
  const double radial = symbol_one_minus_Qbox(Momentum{}, E)(0, 0).real();
  const double rad_target = 2.0 * mu / (1.0 + 2.0 * mu);
  const double rad_err = std::abs(radial - rad_target) / rad_target;
  o.require(k0_err <= 0.1, "k0^2 coefficient off by > 10%");
  o.require(k_err <= 0.1, "k^2 coefficient off by > 10%");
  o.require(rad_err <= 0.01, "radial mass off by > 1%");
  o.note << " k0^2-err=" << k0_err << " k^2-err=" << k_err << " radial-err=" << rad_err;
}

void operator_identities(Outcome& o) {
  std::mt19937_64 rng(104);
  const int L = 3;
  double e1 = 0.0, e2 = 0.0, e3 = 0.0, e4 = 0.0;

  const Grid u{{9, 3, 3, 3}, 1.0, 1.0};
  for (int t = 0; t < 50; ++t) {
    const Field a = oracle::random_field(u, rng), b = oracle::random_field(u, rng);
    const Field sa = scale_inverse(a, L), sb = scale_inverse(b, L);
    e1 = std::max(e1, oracle::rel_diff(inner_product(sa, sb, Level::coarse) / double(L * L), inner_product(a, b)));
  }

  for (int t = 0; t < 50; ++t) {
    const int n = t % 2;
    const auto s_next = make_shape(n + 1, L, 1, 1), s_n = make_shape(n, L, L * L, L);
    const Field f = oracle::random_field(s_next.fine(), rng);
    const Field lhs = scale(average_Q(average_Qn(scale_inverse(f, L), s_n), L), L);
    e2 = std::max(e2, oracle::max_diff(lhs, average_Qn(f, s_next)));
  }

  for (int t = 0; t < 50; ++t) {
    const SymbolParams P{1 + t % 2, L, 0.0, 1.0, t % 4 < 2 ? TimeMode::discrete : TimeMode::continuum, 1};
    e3 = std::max(e3, check_Delta_identity(random_k(rng), P).diff);
  }

  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 2;
    const auto s = make_shape(n, L, 1, 1);
    const ModelParams p = make_model(0.1 + 0.02 * t, 1.0, 1.0 + 0.05 * t);
    if (t < 10) {
      // direct space: box applied to box^{-1} Q_n^* (R, Theta)
      const auto rt = solve_radial_tangential(oracle::random_field(s.unit(), rng), oracle::random_field(s.unit(), rng), p, s);
      e4 = std::max(e4, rt.residual);
    } else {
      // arbitrary right-hand sides on one fiber
      const SymbolParams P = symbol_params(s, p.mu, p.d, TimeMode::discrete);
      const Fiber f = make_fiber(random_k(rng), P);
      const auto S = box_fiber_system(f, P);
      std::vector<Vec2> b(f.pts.size());
      std::normal_distribution<double> N;
      for (auto& x : b) x = Vec2(cplx(N(rng), N(rng)), cplx(N(rng), N(rng)));
      const auto back = S.apply(S.solve(b));
      for (std::size_t l = 0; l < b.size(); ++l) e4 = std::max(e4, (back[l] - b[l]).cwiseAbs().maxCoeff());
    }
  }
  o.require(e1 <= 1e-10, "(i) scaled inner product");
  o.require(e2 <= 1e-10, "(ii) S Q Q_n S^-1 = Q_{n+1}");
  o.require(e3 <= 1e-10, "(iii) Delta identity");
  o.require(e4 <= 1e-10, "(iv) box box^-1 = I");
  o.note << " (i)=" << e1 << " (ii)=" << e2 << " (iii)=" << e3 << " (iv)=" << e4;
}

void background_stationarity(Outcome& o) {
  const auto s = make_shape(1, 3, 2, 2);
  std::mt19937_64 rng(105);
  const ModelParams p = make_model(0.05, 0.01);
  int converged = 0;
  double worst_res = 0.0, worst_fd = 0.0;
  for (int t = 0; t < 20; ++t) {
    const FieldPair psi = random_pair(s.unit(), rng, 0.5);
    const auto sol = solve_nonlinear(psi, p, s);
    converged += sol.converged;
    worst_res = std::max({worst_res, sol.residual, sol.residual_star});
    const FieldPair phi{sol.phi_star, sol.phi};
    for (int k = 0; k < 3; ++k)
      worst_fd = std::max(worst_fd, std::abs(action_directional_derivative(psi, phi, random_pair(s.fine(), rng), p, s)));
  }
  o.require(converged == 20 && worst_res <= 1e-10, "nonlinear solves");
  o.require(worst_fd <= 1e-6, "finite-difference derivative");

  SolveOptions tight;
  tight.tol = 1e-14;
  const ModelParams q = make_model(0.05, 1.0);
  const FieldPair base = random_pair(s.unit(), rng);
  std::vector<double> lam, err;
  for (int k = 3; k <= 8; ++k) {
    const double l = std::ldexp(1.0, -k);
    const FieldPair psi{cplx(l) * base.starred, cplx(l) * base.plain};
    const auto nl = solve_nonlinear(psi, q, s, tight);
    const auto li = solve_linearized_parabolic(psi, q, s);
    lam.push_back(l);
    err.push_back(pair_diff({nl.phi_star, nl.phi}, {li.phi_star, li.phi}));
  }
  const double lin_slope = oracle::loglog_slope(lam, err);

  const ModelParams w = make_model(0.5, 0.5);
  const double r = w.r();
  const Field R = oracle::random_real_field(s.unit(), rng), T = oracle::random_real_field(s.unit(), rng);
  const cplx I(0.0, 1.0);
  lam.clear();
  err.clear();
  for (int k = 3; k <= 8; ++k) {
    const double l = std::ldexp(1.0, -k);
    FieldPair psi{Field(s.unit()), Field(s.unit())};
    for (std::size_t i = 0; i < R.size(); ++i) {
      psi.plain[i] = r * std::exp(l * (R[i] + I * T[i]));
      psi.starred[i] = r * std::exp(l * (R[i] - I * T[i]));
    }
    SolveOptions opt = tight;
    opt.tol = 1e-13;
    opt.seed = SeedStrategy::radial_tangential;
    const auto nl = solve_nonlinear(psi, w, s, opt);
    const auto rt = solve_radial_tangential(cplx(l) * R, cplx(l) * T, w, s);
    FieldPair approx{Field(s.fine()), Field(s.fine())};
    for (std::size_t i = 0; i < approx.plain.size(); ++i) {
      approx.plain[i] = r * std::exp(rt.X[i] + I * rt.H[i]);
      approx.starred[i] = r * std::exp(rt.X[i] - I * rt.H[i]);
    }
    lam.push_back(l);
    err.push_back(pair_diff({nl.phi_star, nl.phi}, approx));
  }
  const double rt_slope = oracle::loglog_slope(lam, err);
  o.require(std::abs(lin_slope - 3.0) <= 0.2, "linearized slope");
  o.require(std::abs(rt_slope - 2.0) <= 0.2, "radial-tangential slope");
  o.note << " converged=" << converged << "/20 residual=" << worst_res << " fd=" << worst_fd
         << " slopes=" << lin_slope << "," << rt_slope;
}

void quadratic_approximations(Outcome& o) {
  const auto s = make_shape(1, 3, 3, 2);
  std::mt19937_64 rng(106);
  const ModelParams p = make_model(0.05, 1.0);
  const FieldPair base = random_pair(s.unit(), rng);
  std::vector<double> lam, err;
  for (int k = 3; k <= 8; ++k) {
    const double l = std::ldexp(1.0, -k);
    const FieldPair psi{cplx(l) * base.starred, cplx(l) * base.plain};
    const auto lin = solve_linearized_parabolic(psi, p, s);
    lam.push_back(l);
    err.push_back(std::abs(eval_action(psi, {lin.phi_star, lin.phi}, p, s).total() - quadratic_form_parabolic(psi, p, s)));
  }
  const double par = oracle::loglog_slope(lam, err);

  const ModelParams w = make_model(0.5, 0.5);
  const double r = w.r();
  const Field R = oracle::random_real_field(s.unit(), rng), T = oracle::random_real_field(s.unit(), rng);
  const cplx I(0.0, 1.0);
  lam.clear();
  err.clear();
  for (int k = 3; k <= 8; ++k) {
    const double l = std::ldexp(1.0, -k);
    const Field Rl = cplx(l) * R, Tl = cplx(l) * T;
    const auto rt = solve_radial_tangential(Rl, Tl, w, s);
    FieldPair psi{Field(s.unit()), Field(s.unit())}, phi{Field(s.fine()), Field(s.fine())};
    for (std::size_t i = 0; i < R.size(); ++i) {
      psi.plain[i] = r * std::exp(Rl[i] + I * Tl[i]);
      psi.starred[i] = r * std::exp(Rl[i] - I * Tl[i]);
    }
    for (std::size_t i = 0; i < phi.plain.size(); ++i) {
      phi.plain[i] = r * std::exp(rt.X[i] + I * rt.H[i]);
      phi.starred[i] = r * std::exp(rt.X[i] - I * rt.H[i]);
    }
    lam.push_back(l);
    err.push_back(std::abs(eval_action(psi, phi, w, s).total() / (r * r) - quadratic_form_radial(Rl, Tl, w, s)));
  }
  const double rad = oracle::loglog_slope(lam, err);
  o.require(std::abs(par - 4.0) <= 0.2, "parabolic slope");
  o.require(rad >= 2.8, "radial-tangential slope");
  o.note << " parabolic-slope=" << par << " radial-slope=" << rad;
}

void spectral_claim(Outcome& o) {
  double dist = std::numeric_limits<double>::infinity(), sq = 0.0, re = std::numeric_limits<double>::infinity();
  for (int n : {1, 2})
    for (double mu : {0.0, 0.05, 0.1}) {
      const auto rep = dominant_quadratic_spectrum(make_model(mu, 1.0), make_shape(n, 3, 1, 1));
      dist = std::min(dist, rep.min_distance);
      sq = std::max(sq, rep.sqrt_residual);
      re = std::min(re, rep.sqrt_min_real);
    }
  o.require(dist > 0.0, "spectrum touches the negative axis");
  o.require(sq <= 1e-8, "square-root residual");
  o.require(re > 0.0, "square root leaves the right half-plane");
  o.note << " min-distance=" << dist << " sqrt-residual=" << sq << " sqrt-min-re=" << re;
}

void flow_bookkeeping(Outcome& o) {
  const int L = 3;
  bool a_ok = a_coefficient(1, L) == 1.0;
  for (int n = 2; n <= 8; ++n) {
    // integer form (L^{2n} - L^{2n-2}) / (L^{2n} - 1)
    const long long big = ipow(L, 2 * n), small = ipow(L, 2 * n - 2);
    const double ref = double(big - small) / double(big - 1);
    a_ok = a_ok && std::abs(a_coefficient(n, L) - ref) <= 2.0 * std::numeric_limits<double>::epsilon() * ref;
  }
  o.require(a_ok, "a_n");
  o.require(std::abs(a_coefficient(2, L) - 0.9) <= 1e-15, "a_2 = 0.9");
  o.require(n_max(1e-5, L) == 4, "n_max");
  const auto tr = run_flow(1e-5, 1e-5, L);
  double worst_geom = 0.0, lo = 1e300, hi = 0.0;
  for (std::size_t i = 0; i + 1 < tr.rows.size(); ++i) {
    const auto &a = tr.rows[i], &b = tr.rows[i + 1];
    worst_geom = std::max(worst_geom, std::abs(b.well.radius / a.well.radius / std::pow(3.0, 1.5) - 1.0));
    worst_geom = std::max(worst_geom, std::abs(b.well.depth / a.well.depth / 243.0 - 1.0));
    const double ratio = b.mu_quadratic / a.mu_quadratic / 9.0;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    o.require(a.params.warnings.empty(), "step outside the admissible window");
  }
  o.require(tr.rows.size() == 5, "row count");
  o.require(worst_geom <= 1e-13, "well geometry ratios");
  o.require(lo >= 0.9 && hi <= 1.1, "mu ratio");
  o.note << " geometry-rel-err=" << worst_geom << " mu-ratio/L^2 in [" << lo << ", " << hi << "]";
}

void gaussian_rg(Outcome& o) {
  const QuadraticAction A = dominant_quadratic_action({1, 3, 0.05, 1.0, TimeMode::discrete, 1});
  const Grid unit{{9, 3, 3, 3}, 1.0, 1.0}, out{{1, 1, 1, 1}, 1.0, 1.0};
  const Eigen::MatrixXcd ref = oracle::gaussian_block_integral(unit, oracle::dense_from_symbol(unit, A.symbol), 3);
  const Eigen::MatrixXcd mine = oracle::dense_from_symbol(out, rg_step_quadratic(A, 3).symbol);
  const double err = (ref - mine).cwiseAbs().maxCoeff();
  o.require(err <= 1e-8, "oracle mismatch");
  o.note << " max-err=" << err;
}

void norms(Outcome& o) {
  std::mt19937_64 rng(110);
  int agree = 0, tried = 0;
  for (const Grid& g : {Grid{{4, 4, 4, 4}, 1.0, 1.0}, Grid{{6, 5, 4, 3}, 1.0, 1.0}, Grid{{6, 6, 6, 6}, 1.0, 1.0}}) {
    const auto d = oracle::bfs_table(g);
    const int reps = g.size() > 1000 ? 5 : 10;
    for (int r = 0; r < reps; ++r, ++tried) {
      std::vector<Site> pts;
      std::vector<std::size_t> idx;
      std::uniform_int_distribution<std::size_t> site(0, g.size() - 1);
      while (pts.size() < 4) {
        const std::size_t i = site(rng);
        if (std::find(idx.begin(), idx.end(), i) != idx.end()) continue;
        idx.push_back(i);
        pts.push_back(g.coords(i));
      }
      agree += tree_length(pts, g) == double(oracle::brute_steiner4(idx, d));
    }
  }
  o.require(tried == 25 && agree == 25, "Steiner lengths");

  const Grid g{{3, 3, 3, 3}, 1.0, 1.0};
  const auto d = oracle::bfs_table(g);
  Kernel K{4, g, false, {}};
  std::normal_distribution<double> N;
  std::uniform_int_distribution<std::size_t> site(0, g.size() - 1);
  std::uniform_int_distribution<int> axis(0, 3), step(-1, 1);
  for (int e = 0; e < 10; ++e) {
    const Site base = g.coords(site(rng));
    std::vector<Site> args;
    for (int j = 0; j < 4; ++j) {
      Site x = base;
      x[std::size_t(axis(rng))] += step(rng);
      args.push_back(x);
    }
    add_entry(K, args, cplx(N(rng), N(rng)));
  }
  K = symmetrize(K);
  double worst = 0.0;
  for (double m : {0.0, 0.3, 1.0}) {
    const double ref = oracle::naive_kernel_norm(K, m, d);
    worst = std::max(worst, std::abs(kernel_norm(K, m) - ref) / ref);
  }
  o.require(worst <= 1e-12, "kernel norm");

  std::istringstream in("0 0 0 0  0 0 0 0  0 0 0 0  0 0 0 0  0.0123 0\n");
  const Kernel delta = read_kernel(in, g, true);
  bool exact = true;
  for (double m : {0.0, 0.5, 2.0}) exact = exact && coupling_constant(delta, m) == 2.0 * 0.0123;
  o.require(exact, "delta coupling");
  o.note << " steiner=" << agree << "/" << tried << " kernel-norm-rel-err=" << worst;
}

void envelopes(Outcome& o) {
  std::vector<Momentum> grid;
  for (double a : {-2.0, -0.5, 0.3, 1.0})
    for (double b : {-1.0, 0.0, 0.7}) grid.push_back({a, {b, 0.3 * b, -0.2 * b}});
  double worst = 0.0;
  bool finite = true;
  for (double rho : {0.5, 2.0}) {
    EnvelopeReport prev;
    for (int i = 3; i <= 13; ++i) {
      const double d = std::ldexp(1.0, i);
      const auto r = verify_lemma_A2_bounds({1, 3, rho * d * d, d, TimeMode::continuum, 1}, grid);
      for (std::size_t k = 0; k < r.stats.size(); ++k) {
        const double x = r.stats[k].max_ratio;
        finite = finite && std::isfinite(x) && x > 0.0;
        if (i > 3) worst = std::max({worst, x / prev.stats[k].max_ratio, prev.stats[k].max_ratio / x});
      }
      prev = r;
    }
  }
  o.require(finite, "non-finite ratio");
  o.require(worst < 2.0, "ratio moved by >= 2x under d -> 2d");
  o.note << " d in [8, 8192], worst-change=" << worst;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    void (*run)(Outcome&);
  };
  const Criterion all[] = {
      {1, "constant-field solutions", 1.0, constant_solutions},
      {2, "parabolic symbol fit", 30.0, parabolic_symbol},
      {3, "elliptic symbol fit", 60.0, elliptic_symbol},
      {4, "operator identities", 60.0, operator_identities},
      {5, "background stationarity and scaling", 120.0, background_stationarity},
      {6, "quadratic approximations", 60.0, quadratic_approximations},
      {7, "spectrum away from the negative axis", 60.0, spectral_claim},
      {8, "flow bookkeeping", 30.0, flow_bookkeeping},
      {9, "Gaussian RG step against the dense integral", 30.0, gaussian_rg},
      {10, "Steiner lengths and kernel norms", 120.0, norms},
      {11, "envelope ratios under d -> 2d", 120.0, envelopes},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.note << " exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      o.ok = false;
      o.note << " [runtime over " << c.limit_s << " s]";
    }
    failed += !o.ok;
    std::printf("[%s] %2d %s (%.2f s)%s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, o.note.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(std::size(all)) - failed, std::size(all));
  return failed == 0 ? 0 : 1;
}
