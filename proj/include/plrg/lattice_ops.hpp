#pragma once

#include <Eigen/Dense>

#include "plrg/kernel.hpp"
#include "plrg/torus.hpp"

namespace plrg {

// exponent 1: sharp box mean; exponent 5: the box convolved with itself four times.
struct AveragingProfile {
  int exponent = 1;
};

inline std::vector<double> profile_weights_1d(long width, int exponent) {
  if (width < 1 || width % 2 == 0) throw ConfigError("averaging block width must be odd");
  if (exponent < 1) throw ConfigError("profile exponent must be >= 1");
  std::vector<double> w{1.0};
  for (int e = 0; e < exponent; ++e) {
    std::vector<double> next(w.size() + width - 1, 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
      for (long j = 0; j < width; ++j) next[i + j] += w[i] / double(width);
    w = std::move(next);
  }
  double s = 0.0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return w;
}

namespace detail {

struct Strides {
  std::size_t outer, len, inner;
};
inline Strides strides(const std::array<int, 4>& ext, int axis) {
  Strides s{1, std::size_t(ext[axis]), 1};
  for (int a = 0; a < axis; ++a) s.outer *= ext[a];
  for (int a = axis + 1; a < 4; ++a) s.inner *= ext[a];
  return s;
}

// out[y] = sum_i w[i] in[b*y + i - c] along one axis (periodic), y over ext/b.
inline std::vector<cplx> restrict_axis(const std::vector<cplx>& in, std::array<int, 4>& ext, int axis,
                                       long b, const std::vector<double>& w) {
  const Strides s = strides(ext, axis);
  const long n = long(s.len), m = n / b, c = long(w.size() - 1) / 2;
  std::vector<cplx> out(s.outer * m * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (long y = 0; y < m; ++y)
      for (std::size_t i = 0; i < w.size(); ++i) {
        const long x = wrap(int(b * y + long(i) - c), int(n));
        const cplx* src = &in[(o * n + x) * s.inner];
        cplx* dst = &out[(o * m + y) * s.inner];
        for (std::size_t r = 0; r < s.inner; ++r) dst[r] += w[i] * src[r];
      }
  ext[axis] = int(m);
  return out;
}

// Transpose of restrict_axis.
inline std::vector<cplx> extend_axis(const std::vector<cplx>& in, std::array<int, 4>& ext, int axis,
                                     long b, const std::vector<double>& w) {
  const Strides s = strides(ext, axis);
  const long m = long(s.len), n = m * b, c = long(w.size() - 1) / 2;
  std::vector<cplx> out(s.outer * n * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (long y = 0; y < m; ++y)
      for (std::size_t i = 0; i < w.size(); ++i) {
        const long x = wrap(int(b * y + long(i) - c), int(n));
        const cplx* src = &in[(o * m + y) * s.inner];
        cplx* dst = &out[(o * n + x) * s.inner];
        for (std::size_t r = 0; r < s.inner; ++r) dst[r] += w[i] * src[r];
      }
  ext[axis] = int(n);
  return out;
}

}  // namespace detail

// Profile-weighted block average onto the sublattice with spacing multiplied by
// (bt, bx); blocks are centred on the sublattice points.
inline Field block_average(const Field& f, long bt, long bx, AveragingProfile p = {}) {
  const Grid& g = f.grid;
  if (g.ext[0] % bt != 0 || g.ext[1] % bx != 0 || g.ext[2] % bx != 0 || g.ext[3] % bx != 0)
    throw ConfigError("block_average: extents not divisible by the block size");
  const auto wt = profile_weights_1d(bt, p.exponent);
  const auto wx = profile_weights_1d(bx, p.exponent);
  std::array<int, 4> ext = g.ext;
  std::vector<cplx> data = f.v;
  for (int a = 0; a < 4; ++a) data = detail::restrict_axis(data, ext, a, a == 0 ? bt : bx, a == 0 ? wt : wx);
  Field out(Grid{ext, g.at * double(bt), g.ax * double(bx)});
  out.v = std::move(data);
  return out;
}

// Adjoint of block_average for the volume-weighted pairings on both lattices.
inline Field block_average_adjoint(const Field& f, long bt, long bx, AveragingProfile p = {}) {
  const Grid& g = f.grid;
  const auto wt = profile_weights_1d(bt, p.exponent);
  const auto wx = profile_weights_1d(bx, p.exponent);
  std::array<int, 4> ext = g.ext;
  std::vector<cplx> data = f.v;
  for (int a = 0; a < 4; ++a) data = detail::extend_axis(data, ext, a, a == 0 ? bt : bx, a == 0 ? wt : wx);
  Field out(Grid{ext, g.at / double(bt), g.ax / double(bx)});
  const double ratio = double(bt) * double(bx) * double(bx) * double(bx);
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = ratio * data[i];
  return out;
}

inline void require_grid(const Field& f, const Grid& g, const char* what) {
  if (!(f.grid == g)) throw ConfigError(std::string(what) + ": field is not on the expected lattice");
}

// Q_n: fine torus -> unit torus.
inline Field average_Qn(const Field& f, const TorusShape& s, AveragingProfile p = {}) {
  require_grid(f, s.fine(), "Q_n");
  return block_average(f, s.block_t(), s.block_x(), p);
}

inline Field average_Qn_adjoint(const Field& f, const TorusShape& s, AveragingProfile p = {}) {
  require_grid(f, s.unit(), "Q_n*");
  return block_average_adjoint(f, s.block_t(), s.block_x(), p);
}

// Q: unit torus -> coarse sublattice (L^2 x L^3 blocks).
inline Field average_Q(const Field& f, int L, AveragingProfile p = {}) {
  if (level_of(f.grid) != Level::unit) throw ConfigError("Q acts on unit-lattice fields");
  return block_average(f, long(L) * L, L, p);
}

inline Field average_Q_adjoint(const Field& f, int L, AveragingProfile p = {}) {
  if (!Grid::same_spacing(f.grid.at, double(L) * L) || !Grid::same_spacing(f.grid.ax, double(L)))
    throw ConfigError("Q* acts on coarse-lattice fields");
  return block_average_adjoint(f, long(L) * L, L, p);
}

inline Field forward_diff(const Field& f, int axis) {
  Field r(f.grid);
  const double h = f.grid.spacing(axis);
  for (std::size_t i = 0; i < f.size(); ++i) r[i] = (f[f.grid.shifted(i, axis, 1)] - f[i]) / h;
  return r;
}

inline Field backward_diff(const Field& f, int axis) {
  Field r(f.grid);
  const double h = f.grid.spacing(axis);
  for (std::size_t i = 0; i < f.size(); ++i) r[i] = (f[i] - f[f.grid.shifted(i, axis, -1)]) / h;
  return r;
}

// Adjoint of forward_diff under the bilinear pairing: minus the backward difference.
inline Field forward_diff_adjoint(const Field& f, int axis) { return -1.0 * backward_diff(f, axis); }

inline Field laplacian(const Field& f) {
  Field r(f.grid);
  for (int a = 1; a < 4; ++a) {
    const double h2 = f.grid.ax * f.grid.ax;
    for (std::size_t i = 0; i < f.size(); ++i)
      r[i] += (f[f.grid.shifted(i, a, 1)] + f[f.grid.shifted(i, a, -1)] - 2.0 * f[i]) / h2;
  }
  return r;
}

// D = -d d_0 - Delta.
inline Field heat_op(const Field& f, double d) {
  Field r = forward_diff(f, 0);
  r *= -d;
  return r - laplacian(f);
}

// D* = -d d_0^* - Delta.
inline Field heat_op_adjoint(const Field& f, double d) {
  Field r = forward_diff_adjoint(f, 0);
  r *= -d;
  return r - laplacian(f);
}

inline Field translate(const Field& f, const Site& by) {
  Field r(f.grid);
  for (std::size_t i = 0; i < f.size(); ++i) {
    Site s = f.grid.coords(i);
    for (int a = 0; a < 4; ++a) s[a] += by[a];
    r[f.grid.index(s)] = f[i];
  }
  return r;
}

// (S^{-1} psi)(y0, y) = L^{-3/2} psi(y0/L^2, y/L): same sites, spacings times (L^2, L).
inline Field scale_inverse(const Field& f, int L) {
  Field r = f;
  r.grid.at *= double(L) * L;
  r.grid.ax *= double(L);
  r *= std::pow(double(L), -1.5);
  return r;
}

inline Field scale(const Field& f, int L) {
  Field r = f;
  r.grid.at /= double(L) * L;
  r.grid.ax /= double(L);
  r *= std::pow(double(L), 1.5);
  return r;
}

inline constexpr std::size_t dense_cap = 5000;

// Column j is op(e_j).
template <class Op>
Eigen::MatrixXcd dense_matrix(const Grid& domain, Op&& op) {
  if (domain.size() > dense_cap) throw ConfigError("dense_matrix: lattice too large for a dense matrix");
  Field e(domain);
  Eigen::MatrixXcd M;
  for (std::size_t j = 0; j < domain.size(); ++j) {
    e[j] = 1.0;
    Field col = op(e);
    if (j == 0) M.resize(Eigen::Index(col.size()), Eigen::Index(domain.size()));
    for (std::size_t i = 0; i < col.size(); ++i) M(Eigen::Index(i), Eigen::Index(j)) = col[i];
    e[j] = 0.0;
  }
  return M;
}

// V_n(u_1..u_k) = L^{-n} (L^{5n})^{k-1} V_0(U_1..U_k), U = (L^{2n} u_0, L^n u); the fine-lattice
// site indices of u coincide with the integer coordinates U.
inline Kernel scale_interaction_kernel(const Kernel& V, int n, int L) {
  if (!V.translation_invariant) throw ConfigError("scale_interaction_kernel: kernel must be translation invariant");
  if (level_of(V.grid) != Level::unit) throw ConfigError("scale_interaction_kernel: kernel must live on a unit lattice");
  for (const auto& [args, val] : V.entries)
    for (const auto& x : args)
      for (int a = 0; a < 4; ++a)
        if (std::abs(x[a] - args[0][a]) * 2 >= V.grid.ext[a])
          throw ConfigError("scale_interaction_kernel: kernel support exceeds half the torus");
  Kernel out = V;
  out.grid.at = std::pow(double(L), -2.0 * n);
  out.grid.ax = std::pow(double(L), -double(n));
  const double factor = std::pow(double(L), -double(n) + 5.0 * n * (V.arity - 1));
  for (auto& [args, val] : out.entries) val *= factor;
  return out;
}

// Coefficient v of the local quartic term: vol^{k-1} times the sum of the kernel with one
// argument pinned.
inline cplx local_coupling(const Kernel& V) {
  cplx s = 0.0;
  for (const auto& [args, val] : V.entries) s += val;
  if (!V.translation_invariant) s /= double(V.grid.size());
  return std::pow(V.grid.cell_volume(), V.arity - 1) * s;
}

}  // namespace plrg
