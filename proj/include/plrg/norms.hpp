#pragma once

#include <cmath>
#include <limits>
#include <queue>

#include "plrg/kernel.hpp"

namespace plrg {

// Graph distance on the periodic nearest-neighbour lattice.
inline int torus_distance(const Site& a, const Site& b, const Grid& g) {
  int d = 0;
  for (int a_ = 0; a_ < 4; ++a_) {
    const int r = wrap(a[a_] - b[a_], g.ext[a_]);
    d += std::min(r, g.ext[a_] - r);
  }
  return d;
}

inline constexpr std::size_t max_steiner_terminals = 6;

enum class TreeMethod { steiner, mst_bound };

namespace detail {

inline std::vector<Site> distinct_sites(const std::vector<Site>& pts, const Grid& g) {
  std::vector<std::size_t> idx;
  for (const auto& p : pts) idx.push_back(g.index(p));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<Site> out;
  for (auto i : idx) out.push_back(g.coords(i));
  return out;
}

// Prim on the metric closure of the terminals.
inline int mst_length(const std::vector<Site>& t, const Grid& g) {
  const std::size_t k = t.size();
  std::vector<int> best(k, std::numeric_limits<int>::max());
  std::vector<bool> in(k, false);
  best[0] = 0;
  int total = 0;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t u = k;
    for (std::size_t i = 0; i < k; ++i)
      if (!in[i] && (u == k || best[i] < best[u])) u = i;
    in[u] = true;
    total += best[u];
    for (std::size_t i = 0; i < k; ++i)
      if (!in[i]) best[i] = std::min(best[i], torus_distance(t[u], t[i], g));
  }
  return total;
}

// Dreyfus-Wagner: dp[S][v] is the shortest tree joining terminal set S and vertex v.
inline int dreyfus_wagner(const std::vector<Site>& t, const Grid& g) {
  const std::size_t k = t.size(), N = g.size();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::array<std::size_t, 8>> nbr(N);
  for (std::size_t v = 0; v < N; ++v)
    for (int a = 0; a < 4; ++a) {
      nbr[v][std::size_t(2 * a)] = g.shifted(v, a, 1);
      nbr[v][std::size_t(2 * a + 1)] = g.shifted(v, a, -1);
    }
  const std::size_t full = (std::size_t(1) << k) - 1;
  std::vector<std::vector<int>> dp(full + 1, std::vector<int>(N, inf));
  using Item = std::pair<int, std::size_t>;
  auto relax = [&](std::vector<int>& d) {
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (std::size_t v = 0; v < N; ++v)
      if (d[v] < inf) pq.push({d[v], v});
    while (!pq.empty()) {
      auto [dv, v] = pq.top();
      pq.pop();
      if (dv > d[v]) continue;
      for (auto w : nbr[v])
        if (dv + 1 < d[w]) {
          d[w] = dv + 1;
          pq.push({d[w], w});
        }
    }
  };
  for (std::size_t i = 0; i < k; ++i) {
    dp[std::size_t(1) << i][g.index(t[i])] = 0;
    relax(dp[std::size_t(1) << i]);
  }
  for (std::size_t S = 1; S <= full; ++S) {
    if ((S & (S - 1)) == 0) continue;
    auto& d = dp[S];
    for (std::size_t A = (S - 1) & S; A > 0; A = (A - 1) & S) {
      if (A < (S ^ A)) continue;
      const auto &da = dp[A], &db = dp[S ^ A];
      for (std::size_t v = 0; v < N; ++v) d[v] = std::min(d[v], da[v] + db[v]);
    }
    relax(d);
  }
  return dp[full][g.index(t[0])];
}

}  // namespace detail

// Minimal length of a tree in the lattice graph having all points among its vertices.
inline double tree_length(const std::vector<Site>& points, const Grid& g, TreeMethod m = TreeMethod::steiner) {
  const auto t = detail::distinct_sites(points, g);
  if (t.size() <= 1) return 0.0;
  if (t.size() == 2) return torus_distance(t[0], t[1], g);
  if (m == TreeMethod::mst_bound) return detail::mst_length(t, g);
  if (t.size() > max_steiner_terminals)
    throw ConfigError("tree_length: " + std::to_string(t.size()) + " distinct terminals exceed the exact cap of " +
                      std::to_string(max_steiner_terminals));
  return detail::dreyfus_wagner(t, g);
}

// max_j sup_{x_j} sum_{x_k, k != j} |V(x_1..x_r)| e^{m tau(x_1..x_r)}.
inline double kernel_norm(const Kernel& V, double m, TreeMethod method = TreeMethod::steiner) {
  if (!(m >= 0.0)) throw ConfigError("kernel_norm: decay rate must be nonnegative");
  std::map<std::vector<Site>, double> tau_cache;
  auto weight = [&](const std::vector<Site>& args) {
    auto [it, fresh] = tau_cache.try_emplace(args, 0.0);
    if (fresh) it->second = tree_length(args, V.grid, method);
    return std::exp(m * it->second);
  };
  if (V.translation_invariant) {
    // pinning any argument meets each translation class exactly once
    double s = 0.0;
    for (const auto& [args, val] : V.entries) s += std::abs(val) * weight(args);
    return s;
  }
  double best = 0.0;
  for (int j = 0; j < V.arity; ++j) {
    std::map<std::size_t, double> per_site;
    for (const auto& [args, val] : V.entries)
      per_site[V.grid.index(args[std::size_t(j)])] += std::abs(val) * weight(args);
    for (const auto& [site, s] : per_site) best = std::max(best, s);
  }
  return best;
}

inline double coupling_constant(const Kernel& V, double m) { return 2.0 * kernel_norm(V, 2.0 * m); }

struct SeriesTerm {
  int r = 0;  // degree in the starred field
  int s = 0;  // degree in the derivative fields
  double norm = 0.0;
};

struct SeriesNorm {
  std::vector<SeriesTerm> terms;
  double kappa = 0.0, kappa_prime = 0.0;
  double total = 0.0;
};

inline SeriesNorm series_norm(const std::vector<SeriesTerm>& terms, double kappa, double kappa_prime) {
  SeriesNorm out{terms, kappa, kappa_prime, 0.0};
  for (const auto& t : terms) {
    if (t.r < 0 || t.s < 0) throw ConfigError("series_norm: negative degree");
    if (t.r == 0 && t.s == 0) throw ConfigError("series_norm: constant term (r, s) = (0, 0) is not allowed");
    if (!(t.norm >= 0.0)) throw ConfigError("series_norm: kernel norms must be nonnegative");
    out.total += t.norm * std::pow(kappa, t.r) * std::pow(kappa_prime, t.s);
  }
  return out;
}

}  // namespace plrg
