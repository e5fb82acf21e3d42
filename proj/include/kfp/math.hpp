#ifndef KFP_MATH_HPP
#define KFP_MATH_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfp/errors.hpp"

namespace kfp {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Array = Eigen::ArrayXd;

inline constexpr Real kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Smooth profiles
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar smoothstep(Scalar y) {
  if (y <= Scalar(0)) return Scalar(0);
  if (y >= Scalar(1)) return Scalar(1);
  return y * y * (Scalar(3) - Scalar(2) * y);
}

// Canonical even cutoff: 1 on [-1/2,1/2], 0 outside [-1,1], polynomial
// smoothstep composed twice on the transition.
template <typename Scalar>
Scalar zeta_cutoff(Scalar u) {
  Scalar a = std::abs(u);
  if (a <= Scalar(0.5)) return Scalar(1);
  if (a >= Scalar(1)) return Scalar(0);
  return smoothstep(smoothstep(Scalar(2) * (Scalar(1) - a)));
}

// C-infinity bump on (-1,1), used for test functions and mollifiers.
template <typename Scalar>
Scalar smooth_bump(Scalar u) {
  Scalar a = u * u;
  if (a >= Scalar(1)) return Scalar(0);
  return std::exp(Scalar(1) - Scalar(1) / (Scalar(1) - a));
}

template <typename Scalar>
Scalar smooth_bump_deriv(Scalar u) {
  Scalar a = u * u;
  if (a >= Scalar(1)) return Scalar(0);
  Scalar w = Scalar(1) - a;
  return smooth_bump(u) * (Scalar(-2) * u / (w * w));
}

// ---------------------------------------------------------------------------
// Least squares on (x, y) samples
// ---------------------------------------------------------------------------

struct LineFit {
  Real slope = 0;
  Real intercept = 0;
  Real rms_residual = 0;
  Real r_squared = 1;
};

inline LineFit fit_line(const std::vector<Real>& x, const std::vector<Real>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InputError("fit_line: need at least 2 samples with matching sizes");
  const auto n = static_cast<Real>(x.size());
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const Real det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) throw InputError("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  Real ss_res = 0, ss_tot = 0;
  const Real ybar = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.rms_residual = std::sqrt(ss_res / n);
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

// ---------------------------------------------------------------------------
// Deterministic counter-based randomness.
//
// Every random draw in the project flows from one config seed: a stream is
// keyed by (seed, stream id hashed with FNV-1a), and draws advance a local
// counter through splitmix64. Reproducible across platforms; independent
// streams never share state.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_str(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class SplitRng {
 public:
  SplitRng(std::uint64_t seed, const std::string& stream)
      : key_(splitmix64(seed ^ fnv1a64_str(stream))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + 0x632be59bd9b4e019ull * ++counter_); }

  // uniform in [0,1)
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; avoids implementation-defined std::normal_distribution.
  Real normal() {
    const Real u1 = std::max(uniform(), std::numeric_limits<Real>::min());
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace kfp

#endif
