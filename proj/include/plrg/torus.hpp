#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace plrg {

using cplx = std::complex<double>;
using Site = std::array<int, 4>;

inline constexpr double pi = std::numbers::pi;

// Bad parameters or incompatible shapes (CLI exit code 2).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Singular systems, failed convergence (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline long ipow(long b, int e) {
  long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

// Periodic box with `ext` sites per axis (t, x, y, z) and spacings at, ax.
struct Grid {
  std::array<int, 4> ext{1, 1, 1, 1};
  double at = 1.0;
  double ax = 1.0;

  std::size_t size() const {
    return std::size_t(ext[0]) * ext[1] * ext[2] * ext[3];
  }
  double spacing(int axis) const { return axis == 0 ? at : ax; }
  double cell_volume() const { return at * ax * ax * ax; }

  std::size_t index(const Site& s) const {
    std::size_t i = 0;
    for (int a = 0; a < 4; ++a) i = i * ext[a] + wrap(s[a], ext[a]);
    return i;
  }
  Site coords(std::size_t i) const {
    Site s{};
    for (int a = 3; a >= 0; --a) {
      s[a] = int(i % ext[a]);
      i /= ext[a];
    }
    return s;
  }
  std::size_t shifted(std::size_t i, int axis, int by) const {
    Site s = coords(i);
    s[axis] += by;
    return index(s);
  }
  bool operator==(const Grid& o) const {
    return ext == o.ext && same_spacing(at, o.at) && same_spacing(ax, o.ax);
  }
  static bool same_spacing(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }
};

enum class Level { unit, fine, coarse };

inline Level level_of(const Grid& g) {
  if (Grid::same_spacing(g.at, 1.0) && Grid::same_spacing(g.ax, 1.0)) return Level::unit;
  return g.at < 1.0 ? Level::fine : Level::coarse;
}

inline const char* to_string(Level l) {
  switch (l) {
    case Level::unit: return "unit";
    case Level::fine: return "fine";
    default: return "coarse";
  }
}

struct TorusShape {
  int n = 0;
  int L = 3;
  int Nt = 1;
  int Nx = 1;
  double eps_t = 1.0;
  double eps_x = 1.0;

  long block_t() const { return ipow(L, 2 * n); }
  long block_x() const { return ipow(L, n); }
  long fine_per_unit() const { return ipow(L, 5 * n); }

  Grid unit() const { return {{Nt, Nx, Nx, Nx}, 1.0, 1.0}; }
  Grid fine() const {
    const int ft = int(Nt * block_t());
    const int fx = int(Nx * block_x());
    return {{ft, fx, fx, fx}, eps_t, eps_x};
  }
  bool blockable() const { return Nt % (L * L) == 0 && Nx % L == 0; }
  // Sublattice of the unit torus with spacing L^2 in time and L in space.
  Grid coarse() const {
    if (!blockable())
      throw ConfigError("block step needs L^2 | Nt and L | Nx");
    const int ct = Nt / (L * L);
    const int cx = Nx / L;
    return {{ct, cx, cx, cx}, double(L) * L, double(L)};
  }
};

inline TorusShape make_shape(int n, int L, int Nt, int Nx) {
  if (L < 3 || L % 2 == 0)
    throw ConfigError("L must be an odd integer >= 3 (got " + std::to_string(L) + ")");
  if (n < 0) throw ConfigError("scale index n must be nonnegative");
  if (Nt <= 0 || Nx <= 0) throw ConfigError("torus extents Nt, Nx must be positive");
  TorusShape s{n, L, Nt, Nx, 1.0, 1.0};
  s.eps_t = 1.0 / double(s.block_t());
  s.eps_x = 1.0 / double(s.block_x());
  return s;
}

struct Field {
  Grid grid;
  std::vector<cplx> v;

  Field() = default;
  explicit Field(const Grid& g, cplx c = 0.0) : grid(g), v(g.size(), c) {}

  std::size_t size() const { return v.size(); }
  cplx& operator[](std::size_t i) { return v[i]; }
  const cplx& operator[](std::size_t i) const { return v[i]; }
  Level level() const { return level_of(grid); }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
  }
  Field& operator*=(cplx c) {
    for (auto& x : v) x *= c;
    return *this;
  }
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(cplx c, Field a) { return a *= c; }

// (starred, plain); independent fields, not complex conjugates of each other.
struct FieldPair {
  Field starred;
  Field plain;
};

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (auto x : f.v) m = std::max(m, std::abs(x));
  return m;
}

// Bilinear, no conjugation; weight is the cell volume: 1 (unit), L^-5n (fine), L^5 (coarse).
inline cplx inner_product(const Field& a, const Field& b) {
  if (!(a.grid == b.grid)) throw ConfigError("inner_product: fields live on different lattices");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return a.grid.cell_volume() * s;
}

inline cplx inner_product(const Field& a, const Field& b, Level level) {
  if (a.level() != level || b.level() != level)
    throw ConfigError(std::string("inner_product: expected ") + to_string(level) + " fields");
  return inner_product(a, b);
}

inline Field pointwise(const Field& a, const Field& b) {
  Field r(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

// Physical momentum; unit-lattice components live in (-pi, pi].
struct Momentum {
  double k0 = 0.0;
  std::array<double, 3> k{0.0, 0.0, 0.0};

  double operator[](int axis) const { return axis == 0 ? k0 : k[axis - 1]; }
  double spatial_sq() const { return k[0] * k[0] + k[1] * k[1] + k[2] * k[2]; }
  double norm() const { return std::sqrt(k0 * k0 + spatial_sq()); }
  Momentum operator+(const Momentum& o) const {
    return {k0 + o.k0, {k[0] + o.k[0], k[1] + o.k[1], k[2] + o.k[2]}};
  }
  Momentum operator-() const { return {-k0, {-k[0], -k[1], -k[2]}}; }
};

// Symmetric representative of mode m modulo n: (-n/2, n/2].
inline int symmetric_mode(int m, int n) {
  int r = wrap(m, n);
  return 2 * r > n ? r - n : r;
}

using Mode = std::array<int, 4>;

inline Momentum momentum_of(const Mode& m, const Grid& g) {
  Momentum p;
  p.k0 = 2.0 * pi * m[0] / (g.ext[0] * g.at);
  for (int a = 1; a < 4; ++a) p.k[a - 1] = 2.0 * pi * m[a] / (g.ext[a] * g.ax);
  return p;
}

// Mode numbers in row-major order matching Grid::index of the DFT output.
inline std::vector<Mode> dual_modes(const Grid& g) {
  std::vector<Mode> out;
  out.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Site s = g.coords(i);
    Mode m;
    for (int a = 0; a < 4; ++a) m[a] = symmetric_mode(s[a], g.ext[a]);
    out.push_back(m);
  }
  return out;
}

inline std::vector<Momentum> dual_lattice(const Grid& g) {
  std::vector<Momentum> out;
  for (const auto& m : dual_modes(g)) out.push_back(momentum_of(m, g));
  return out;
}

// Offsets l = 2 pi j (per axis) with j symmetric in a box of bt x bx^3; the fine
// momenta over a unit momentum k are k + l.
inline std::vector<Mode> block_offsets(long bt, long bx) {
  std::vector<Mode> out;
  out.reserve(std::size_t(bt * bx * bx * bx));
  const int ht = int(bt / 2), hx = int(bx / 2);
  for (int j0 = -ht; j0 <= ht; ++j0)
    for (int j1 = -hx; j1 <= hx; ++j1)
      for (int j2 = -hx; j2 <= hx; ++j2)
        for (int j3 = -hx; j3 <= hx; ++j3) out.push_back({j0, j1, j2, j3});
  return out;
}

}  // namespace plrg
