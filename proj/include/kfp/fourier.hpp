#ifndef KFP_FOURIER_HPP
#define KFP_FOURIER_HPP

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

using Cplx = std::complex<Real>;
using CArray = Eigen::ArrayXcd;

// signed DFT index: 0,1,...,n/2,-(n/2-1),...,-1
inline int signed_freq_index(int i, int n) { return i <= n / 2 ? i : i - n; }

// Raised-cosine window over the outer `fraction` of [0, n-1].
inline Real raised_cosine(int i, int n, Real fraction) {
  const Real u = static_cast<Real>(i) / (n - 1);
  const Real f = fraction;
  if (u < f) return 0.5 * (1.0 - std::cos(kPi * u / f));
  if (u > 1.0 - f) return 0.5 * (1.0 - std::cos(kPi * (1.0 - u) / f));
  return 1.0;
}

struct Taper {
  bool t = false;
  bool x = false;
  Real fraction = 0.1;
};

namespace detail {

// complex DFT along one axis of a flat nd array; dims listed slowest first
inline void dft_axis(CArray& data, const std::vector<int>& dims, int axis, bool inverse) {
  Eigen::FFT<Real> fft;
  const int n = dims[axis];
  long stride = 1;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) stride *= dims[a];
  long outer = 1;
  for (int a = 0; a < axis; ++a) outer *= dims[a];
  const long block = stride * n;

  std::vector<Cplx> line(n), out(n);
  for (long o = 0; o < outer; ++o) {
    for (long s = 0; s < stride; ++s) {
      const long base = o * block + s;
      for (int i = 0; i < n; ++i) line[i] = data[base + static_cast<long>(i) * stride];
      if (inverse)
        fft.inv(out, line);
      else
        fft.fwd(out, line);
      for (int i = 0; i < n; ++i) data[base + static_cast<long>(i) * stride] = out[i];
    }
  }
}

}  // namespace detail

inline CArray dft_nd(const CArray& input, const std::vector<int>& dims, bool inverse = false) {
  CArray data = input;
  for (std::size_t a = 0; a < dims.size(); ++a)
    detail::dft_axis(data, dims, static_cast<int>(a), inverse);
  return data;
}

// Tapered copy of a space-time field's samples (t axis 0, then x axes).
inline CArray windowed_complex(const SpaceTimeField& u, const Taper& taper) {
  CArray data(u.size());
  for (int it = 0; it < u.nt; ++it) {
    const Real wt = taper.t ? raised_cosine(it, u.nt, taper.fraction) : 1.0;
    for (long jf = 0; jf < u.nx_flat(); ++jf) {
      Real w = wt;
      if (taper.x) {
        if (u.d == 1) {
          w *= raised_cosine(static_cast<int>(jf), u.nx, taper.fraction);
        } else {
          w *= raised_cosine(static_cast<int>(jf / u.nx), u.nx, taper.fraction) *
               raised_cosine(static_cast<int>(jf % u.nx), u.nx, taper.fraction);
        }
      }
      data[static_cast<long>(it) * u.nx_flat() + jf] = Cplx(w * u.at(it, jf), 0.0);
    }
  }
  return data;
}

}  // namespace kfp

#endif
