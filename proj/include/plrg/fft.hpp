#pragma once

#include <fftw3.h>

#include <cstring>

#include "plrg/torus.hpp"

namespace plrg {

namespace detail {
inline void fftw_4d(const Grid& g, const cplx* in, cplx* out, int sign) {
  int dims[4] = {g.ext[0], g.ext[1], g.ext[2], g.ext[3]};
  const std::size_t n = g.size();
  auto* buf = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan plan = fftw_plan_dft(4, dims, buf, buf, sign, FFTW_ESTIMATE);
  std::memcpy(buf, in, sizeof(fftw_complex) * n);
  fftw_execute(plan);
  std::memcpy(out, buf, sizeof(fftw_complex) * n);
  fftw_destroy_plan(plan);
  fftw_free(buf);
}
}  // namespace detail

// f^(p) = vol * sum_x e^{-i p.x} f(x); entry i holds the mode dual_modes(grid)[i].
inline std::vector<cplx> dft(const Field& f) {
  std::vector<cplx> out(f.size());
  detail::fftw_4d(f.grid, f.v.data(), out.data(), FFTW_FORWARD);
  const double w = f.grid.cell_volume();
  for (auto& x : out) x *= w;
  return out;
}

inline Field inverse_dft(const Grid& g, const std::vector<cplx>& hat) {
  Field f(g);
  detail::fftw_4d(g, hat.data(), f.v.data(), FFTW_BACKWARD);
  const double w = 1.0 / (g.cell_volume() * double(g.size()));
  for (auto& x : f.v) x *= w;
  return f;
}

}  // namespace plrg
