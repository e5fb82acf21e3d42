#ifndef KFP_GRID_HPP
#define KFP_GRID_HPP

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "kfp/errors.hpp"
#include "kfp/math.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Grid layout
//
// A field lives on a tensor grid over (t, x, v) with x, v in R^d, d = 1 or 2.
// The d x-axes share one interval and point count, likewise the d v-axes.
// Node conventions:
//   t            : nt nodes inclusive of both ends, dt = (t1-t0)/(nt-1)
//   periodic axis: n nodes covering [lo, hi), spacing (hi-lo)/n
//   bounded axis : n nodes inclusive of both ends, spacing (hi-lo)/(n-1)
// Values are indexed t slowest, then x axes, then v axes fastest.
// ---------------------------------------------------------------------------

struct GridSpec {
  int d = 1;
  int nt = 4, nx = 4, nv = 4;
  Real t0 = -1.0, t1 = 0.0;
  Real x_lo = -1.0, x_hi = 1.0;
  Real v_lo = -1.0, v_hi = 1.0;
  bool periodic_x = true;
  bool periodic_v = false;

  void validate() const {
    if (d != 1 && d != 2) throw ConfigError("grid: d must be 1 or 2");
    if (nt < 4 || nx < 4 || nv < 4) throw ConfigError("grid: nt, nx, nv must be >= 4");
    if (!(t1 > t0) || !(x_hi > x_lo) || !(v_hi > v_lo))
      throw ConfigError("grid: extents must have positive length");
  }

  Real dt() const { return (t1 - t0) / (nt - 1); }
  Real dx() const { return periodic_x ? (x_hi - x_lo) / nx : (x_hi - x_lo) / (nx - 1); }
  Real dv() const { return periodic_v ? (v_hi - v_lo) / nv : (v_hi - v_lo) / (nv - 1); }

  Real t_at(int i) const { return t0 + i * dt(); }
  Real x_at(int j) const { return x_lo + j * dx(); }
  Real v_at(int k) const { return v_lo + k * dv(); }

  long nx_flat() const { return d == 1 ? nx : static_cast<long>(nx) * nx; }
  long nv_flat() const { return d == 1 ? nv : static_cast<long>(nv) * nv; }
  long slice_size() const { return nx_flat() * nv_flat(); }
  long size() const { return static_cast<long>(nt) * slice_size(); }

  // cell volume element dt*dx^d*dv^d used by all counting measures
  Real cell_volume() const { return dt() * std::pow(dx(), d) * std::pow(dv(), d); }

  Vec x_point(long jf) const {
    Vec x(d);
    if (d == 1) {
      x[0] = x_at(static_cast<int>(jf));
    } else {
      x[0] = x_at(static_cast<int>(jf / nx));
      x[1] = x_at(static_cast<int>(jf % nx));
    }
    return x;
  }

  Vec v_point(long kf) const {
    Vec v(d);
    if (d == 1) {
      v[0] = v_at(static_cast<int>(kf));
    } else {
      v[0] = v_at(static_cast<int>(kf / nv));
      v[1] = v_at(static_cast<int>(kf % nv));
    }
    return v;
  }

  bool operator==(const GridSpec&) const = default;
};

struct ScalarField {
  GridSpec grid;
  Array values;  // size grid.size()

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g) : grid(g), values(Array::Zero(g.size())) {}

  long index(int it, long jf, long kf) const {
    return (static_cast<long>(it) * grid.nx_flat() + jf) * grid.nv_flat() + kf;
  }
  Real& at(int it, long jf, long kf) { return values[index(it, jf, kf)]; }
  Real at(int it, long jf, long kf) const { return values[index(it, jf, kf)]; }

  bool all_finite() const { return values.isFinite().all(); }
};

// Field over (t, x) only; the natural codomain of velocity averages.
struct SpaceTimeField {
  int d = 1;
  int nt = 0, nx = 0;
  Real t0 = 0, t1 = 0, x_lo = 0, x_hi = 0;
  bool periodic_x = true;
  Array values;  // nt * nx^d, t slowest

  static SpaceTimeField like(const GridSpec& g) {
    SpaceTimeField u;
    u.d = g.d;
    u.nt = g.nt;
    u.nx = g.nx;
    u.t0 = g.t0;
    u.t1 = g.t1;
    u.x_lo = g.x_lo;
    u.x_hi = g.x_hi;
    u.periodic_x = g.periodic_x;
    u.values = Array::Zero(static_cast<long>(g.nt) * g.nx_flat());
    return u;
  }

  long nx_flat() const { return d == 1 ? nx : static_cast<long>(nx) * nx; }
  long size() const { return static_cast<long>(nt) * nx_flat(); }
  Real dt() const { return (t1 - t0) / (nt - 1); }
  Real dx() const { return periodic_x ? (x_hi - x_lo) / nx : (x_hi - x_lo) / (nx - 1); }
  Real& at(int it, long jf) { return values[static_cast<long>(it) * nx_flat() + jf]; }
  Real at(int it, long jf) const { return values[static_cast<long>(it) * nx_flat() + jf]; }

  Real l2_norm() const {
    const Real w = dt() * std::pow(dx(), d);
    return std::sqrt((values * values).sum() * w);
  }
};

// ---------------------------------------------------------------------------
// Interpolation on the periodic x-axis (cubic Lagrange, 4-point stencil)
// ---------------------------------------------------------------------------

inline int wrap_index(long j, int n) {
  long m = j % n;
  return static_cast<int>(m < 0 ? m + n : m);
}

// values: one x-line of length n on a periodic axis [lo, lo + n*h)
inline Real cubic_interp_periodic(const Real* line, int n, Real lo, Real h, Real xq) {
  Real s = (xq - lo) / h;
  Real j1f = std::floor(s);
  Real th = s - j1f;
  long j1 = static_cast<long>(j1f);
  const int i0 = wrap_index(j1 - 1, n), i1 = wrap_index(j1, n), i2 = wrap_index(j1 + 1, n),
            i3 = wrap_index(j1 + 2, n);
  const Real w0 = -th * (th - 1.0) * (th - 2.0) / 6.0;
  const Real w1 = (th * th - 1.0) * (th - 2.0) / 2.0;
  const Real w2 = -th * (th + 1.0) * (th - 2.0) / 2.0;
  const Real w3 = th * (th * th - 1.0) / 6.0;
  return w0 * line[i0] + w1 * line[i1] + w2 * line[i2] + w3 * line[i3];
}

// Multilinear interpolation of a full (t,x,v) field; clamped at bounded axes,
// wrapped on periodic ones. Used by the zoom-commutation machinery.
inline Real multilinear_sample(const ScalarField& f, Real tq, const Vec& xq, const Vec& vq) {
  const GridSpec& g = f.grid;

  auto locate = [](Real q, Real lo, Real h, int n, bool periodic, int& i0, Real& th) {
    Real s = (q - lo) / h;
    if (periodic) {
      Real f0 = std::floor(s);
      i0 = wrap_index(static_cast<long>(f0), n);
      th = s - f0;
    } else {
      if (s <= 0) {
        i0 = 0;
        th = 0;
      } else if (s >= n - 1) {
        i0 = n - 2;
        th = 1;
      } else {
        i0 = static_cast<int>(std::floor(s));
        th = s - i0;
      }
    }
  };

  int it0;
  Real tht;
  locate(tq, g.t0, g.dt(), g.nt, false, it0, tht);

  std::array<int, 2> jx0{};
  std::array<Real, 2> thx{};
  std::array<int, 2> kv0{};
  std::array<Real, 2> thv{};
  for (int a = 0; a < g.d; ++a) {
    locate(xq[a], g.x_lo, g.dx(), g.nx, g.periodic_x, jx0[a], thx[a]);
    locate(vq[a], g.v_lo, g.dv(), g.nv, g.periodic_v, kv0[a], thv[a]);
  }

  auto xi = [&](int a, int off) {
    return g.periodic_x ? wrap_index(jx0[a] + off, g.nx) : std::min(jx0[a] + off, g.nx - 1);
  };
  auto vi = [&](int a, int off) {
    return g.periodic_v ? wrap_index(kv0[a] + off, g.nv) : std::min(kv0[a] + off, g.nv - 1);
  };

  Real acc = 0;
  const int nd = g.d;
  const int corners = 1 << (1 + 2 * nd);
  for (int c = 0; c < corners; ++c) {
    int bit = 0;
    const int ot = (c >> bit++) & 1;
    Real w = ot ? tht : 1 - tht;
    long jf = 0, kf = 0;
    for (int a = 0; a < nd; ++a) {
      const int ox = (c >> bit++) & 1;
      w *= ox ? thx[a] : 1 - thx[a];
      jf = jf * g.nx + xi(a, ox);
    }
    for (int a = 0; a < nd; ++a) {
      const int ov = (c >> bit++) & 1;
      w *= ov ? thv[a] : 1 - thv[a];
      kf = kf * g.nv + vi(a, ov);
    }
    if (w != 0) acc += w * f.at(it0 + ot, jf, kf);
  }
  return acc;
}

}  // namespace kfp

#endif
