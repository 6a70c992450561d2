#pragma once

// Independent reference evaluators used as test oracles. Nothing here calls into the
// library beyond its plain data types.

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <map>
#include <random>

#include "plrg/kernel.hpp"
#include "plrg/torus.hpp"

namespace oracle {

using plrg::cplx;
using plrg::Field;
using plrg::Grid;
using plrg::Site;

inline Field random_field(const Grid& g, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g);
  for (auto& x : f.v) x = scale * cplx(N(rng), N(rng));
  return f;
}

inline Field random_real_field(const Grid& g, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, 1.0);
  Field f(g);
  for (auto& x : f.v) x = scale * N(rng);
  return f;
}

// vol * sum_x e^{-i p.x} f(x), evaluated by a direct sum at an arbitrary physical momentum.
inline cplx direct_dft(const Field& f, const std::array<double, 4>& p) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Site x = f.grid.coords(i);
    double phase = p[0] * x[0] * f.grid.at;
    for (int a = 1; a < 4; ++a) phase += p[std::size_t(a)] * x[std::size_t(a)] * f.grid.ax;
    s += std::polar(1.0, -phase) * f[i];
  }
  return f.grid.cell_volume() * s;
}

inline Field plane_wave(const Grid& g, const std::array<double, 4>& p) {
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    Site x = g.coords(i);
    double phase = p[0] * x[0] * g.at;
    for (int a = 1; a < 4; ++a) phase += p[std::size_t(a)] * x[std::size_t(a)] * g.ax;
    f[i] = std::polar(1.0, phase);
  }
  return f;
}

// Sharp block mean with blocks of bt x bx^3 sites centred on sublattice points.
inline Field sharp_block_mean(const Field& f, int bt, int bx) {
  const Grid& g = f.grid;
  Grid c{{g.ext[0] / bt, g.ext[1] / bx, g.ext[2] / bx, g.ext[3] / bx}, g.at * bt, g.ax * bx};
  Field out(c);
  for (std::size_t j = 0; j < c.size(); ++j) {
    Site y = c.coords(j);
    cplx s = 0.0;
    for (int a = -(bt / 2); a <= bt / 2; ++a)
      for (int b = -(bx / 2); b <= bx / 2; ++b)
        for (int cc = -(bx / 2); cc <= bx / 2; ++cc)
          for (int d = -(bx / 2); d <= bx / 2; ++d)
            s += f[g.index({y[0] * bt + a, y[1] * bx + b, y[2] * bx + cc, y[3] * bx + d})];
    out[j] = s / double(bt * bx * bx * bx);
  }
  return out;
}

inline double rel_diff(cplx a, cplx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double max_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Least-squares slope of log(err) against log(lambda).
inline double loglog_slope(const std::vector<double>& lam, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(lam.size());
  for (std::size_t i = 0; i < lam.size(); ++i) {
    const double x = std::log(lam[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Dense matrix of a translation-invariant operator from its symbol: A(x, y) = (1/N) sum_p A^(p) e^{ip(x-y)}.
inline Eigen::MatrixXcd dense_from_symbol(const plrg::Grid& g, const std::function<cplx(const plrg::Momentum&)>& sym) {
  const Eigen::Index N = Eigen::Index(g.size());
  std::vector<plrg::Momentum> ps;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Site m = g.coords(i);
    ps.push_back({2.0 * plrg::pi * m[0] / g.ext[0], {2.0 * plrg::pi * m[1] / g.ext[1], 2.0 * plrg::pi * m[2] / g.ext[2], 2.0 * plrg::pi * m[3] / g.ext[3]}});
  }
  // c(z) = (1/N) sum_p A^(p) e^{ipz}; A(x, y) = c(x - y)
  std::vector<cplx> vals;
  for (const auto& p : ps) vals.push_back(sym(p));
  std::vector<cplx> c(g.size());
  for (std::size_t z = 0; z < g.size(); ++z) {
    const Site sz = g.coords(z);
    for (std::size_t j = 0; j < ps.size(); ++j) {
      double ph = 0.0;
      for (int a = 0; a < 4; ++a) ph += ps[j][a] * sz[a];
      c[z] += vals[j] * std::polar(1.0, ph);
    }
    c[z] /= double(N);
  }
  Eigen::MatrixXcd A(N, N);
  for (Eigen::Index x = 0; x < N; ++x) {
    const Site sx = g.coords(std::size_t(x));
    for (Eigen::Index y = 0; y < N; ++y) {
      const Site sy = g.coords(std::size_t(y));
      A(x, y) = c[g.index({sx[0] - sy[0], sx[1] - sy[1], sx[2] - sy[2], sx[3] - sy[3]})];
    }
  }
  return A;
}

// Complex Gaussian integration over psi of exp(-psi_*^T A psi - L^3 |theta - Q psi|^2):
// B = L^3 - L^6 Q (A + L^3 Q^T Q)^{-1} Q^T, then A' = L^-3 B on the rescaled lattice.
inline Eigen::MatrixXcd gaussian_block_integral(const plrg::Grid& unit, const Eigen::MatrixXcd& A, int L) {
  const int bt = L * L, bx = L;
  const plrg::Grid c{{unit.ext[0] / bt, unit.ext[1] / bx, unit.ext[2] / bx, unit.ext[3] / bx}, 1.0, 1.0};
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(Eigen::Index(c.size()), Eigen::Index(unit.size()));
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const Site x = unit.coords(i);
    Site y;
    // blocks are centred on sublattice points
    for (int a = 0; a < 4; ++a) {
      const int b = a == 0 ? bt : bx;
      y[a] = int(std::floor((x[a] + b / 2) / double(b)));
    }
    Q(Eigen::Index(c.index(y)), Eigen::Index(i)) = 1.0 / double(bt * bx * bx * bx);
  }
  const double L3 = double(L) * L * L;
  const Eigen::MatrixXcd Qc = Q.cast<cplx>();
  const Eigen::MatrixXcd M = A + L3 * Qc.transpose() * Qc;
  const Eigen::MatrixXcd B =
      L3 * Eigen::MatrixXcd::Identity(Qc.rows(), Qc.rows()) - L3 * L3 * Qc * M.partialPivLu().solve(Qc.transpose());
  return B / L3;
}

// All-pairs hop counts by breadth-first search over explicit neighbours.
inline std::vector<std::vector<int>> bfs_table(const Grid& g) {
  const std::size_t N = g.size();
  std::vector<std::vector<int>> d(N, std::vector<int>(N, -1));
  for (std::size_t s = 0; s < N; ++s) {
    std::deque<std::size_t> q{s};
    d[s][s] = 0;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop_front();
      Site x = g.coords(v);
      for (int a = 0; a < 4; ++a)
        for (int e : {-1, 1}) {
          Site y = x;
          y[a] = (y[a] + e + g.ext[a]) % g.ext[a];
          const std::size_t w = g.index(y);
          if (d[s][w] < 0) {
            d[s][w] = d[s][v] + 1;
            q.push_back(w);
          }
        }
    }
  }
  return d;
}

inline int mst(const std::vector<std::size_t>& v, const std::vector<std::vector<int>>& d) {
  const std::size_t k = v.size();
  std::vector<int> best(k, 1 << 29);
  std::vector<bool> in(k, false);
  best[0] = 0;
  int total = 0;
  for (std::size_t s = 0; s < k; ++s) {
    std::size_t u = k;
    for (std::size_t i = 0; i < k; ++i)
      if (!in[i] && (u == k || best[i] < best[u])) u = i;
    in[u] = true;
    total += best[u];
    for (std::size_t i = 0; i < k; ++i)
      if (!in[i]) best[i] = std::min(best[i], d[v[u]][v[i]]);
  }
  return total;
}

// A Steiner tree on k terminals needs at most k - 2 branch points; try every choice.
inline int brute_steiner4(const std::vector<std::size_t>& t, const std::vector<std::vector<int>>& d) {
  const std::size_t N = d.size();
  int best = mst(t, d);
  for (std::size_t a = 0; a < N; ++a) {
    auto v = t;
    v.push_back(a);
    best = std::min(best, mst(v, d));
    for (std::size_t b = a + 1; b < N; ++b) {
      v.push_back(b);
      best = std::min(best, mst(v, d));
      v.pop_back();
    }
  }
  return best;
}

// Every argument tuple on the torus, one at a time, pinned argument by pinned argument.
inline double naive_kernel_norm(const plrg::Kernel& V, double m, const std::vector<std::vector<int>>& d) {
  const Grid& g = V.grid;
  std::map<std::vector<std::size_t>, int> cache;
  auto tau = [&](const std::vector<Site>& args) {
    std::vector<std::size_t> t;
    for (const auto& a : args) t.push_back(g.index(a));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    auto [it, fresh] = cache.try_emplace(t, 0);
    if (fresh && t.size() > 1) it->second = brute_steiner4(t, d);
    return it->second;
  };
  struct Entry {
    std::vector<Site> args;
    double weight;
  };
  std::vector<Entry> all;
  for (const auto& [args, val] : V.entries) {
    // hop counts do not see translations
    const double w = std::abs(val) * std::exp(m * tau(args));
    if (!V.translation_invariant) {
      all.push_back({args, w});
      continue;
    }
    for (std::size_t s = 0; s < g.size(); ++s) {
      const Site sh = g.coords(s);
      std::vector<Site> moved = args;
      for (auto& x : moved)
        for (int a = 0; a < 4; ++a) x[a] = plrg::wrap(x[a] + sh[a], g.ext[a]);
      all.push_back({moved, w});
    }
  }
  double best = 0.0;
  for (int j = 0; j < V.arity; ++j)
    for (std::size_t x = 0; x < g.size(); ++x) {
      double s = 0.0;
      for (const auto& e : all)
        if (g.index(e.args[std::size_t(j)]) == x) s += e.weight;
      best = std::max(best, s);
    }
  return best;
}

}  // namespace oracle
