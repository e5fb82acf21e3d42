#ifndef KFP_SOLVER_HPP
#define KFP_SOLVER_HPP

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "kfp/coeffs.hpp"
#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Transport equation (d_t + b(v)·grad_x) h = div_v g1 + g0, periodic in x.
//
// Semi-Lagrangian: each (t, x, v) node traces its straight characteristic back
// to the initial time; the initial value is picked up by cubic interpolation
// and the source is accumulated with trapezoidal quadrature along the way.
// The v axis is purely a parameter, so v-slices never couple.
// ---------------------------------------------------------------------------

namespace detail {

inline Real cubic_x_sample(const Real* xline, const GridSpec& g, const Vec& xq) {
  if (g.d == 1) return cubic_interp_periodic(xline, g.nx, g.x_lo, g.dx(), xq[0]);
  // tensor cubic: rows along axis 0, then a cubic across the row values
  const int n = g.nx;
  const Real h = g.dx();
  Real s = (xq[0] - g.x_lo) / h;
  const Real f0 = std::floor(s);
  const Real th = s - f0;
  const long j1 = static_cast<long>(f0);
  const Real w0 = -th * (th - 1.0) * (th - 2.0) / 6.0;
  const Real w1 = (th * th - 1.0) * (th - 2.0) / 2.0;
  const Real w2 = -th * (th + 1.0) * (th - 2.0) / 2.0;
  const Real w3 = th * (th * th - 1.0) / 6.0;
  const Real wr[4] = {w0, w1, w2, w3};
  Real acc = 0;
  for (int r = 0; r < 4; ++r) {
    const int row = wrap_index(j1 - 1 + r, n);
    acc += wr[r] * cubic_interp_periodic(xline + static_cast<long>(row) * n, n, g.x_lo, h, xq[1]);
  }
  return acc;
}

// central difference along v axis `a`; wraps on periodic v, one-sided at the
// ends of a bounded axis
inline Real v_derivative(const Array& slice, const GridSpec& g, long jf, long kf, int a) {
  const Real dv = g.dv();
  const long nvf = g.nv_flat();
  const int nv = g.nv;
  const long stride = (g.d == 2 && a == 0) ? nv : 1;
  const int k_a = (g.d == 1) ? static_cast<int>(kf) : (a == 0 ? static_cast<int>(kf / nv)
                                                              : static_cast<int>(kf % nv));
  auto val = [&](long kk) { return slice[jf * nvf + kk]; };
  if (g.periodic_v) {
    const long kp = (k_a + 1 < nv) ? kf + stride : kf - stride * (nv - 1);
    const long km = (k_a > 0) ? kf - stride : kf + stride * (nv - 1);
    return (val(kp) - val(km)) / (2 * dv);
  }
  if (k_a == 0) return (val(kf + stride) - val(kf)) / dv;
  if (k_a == nv - 1) return (val(kf) - val(kf - stride)) / dv;
  return (val(kf + stride) - val(kf - stride)) / (2 * dv);
}

}  // namespace detail

// h0: values over (x, v) at t_start, flat layout x slower than v.
// g0: optional source field on the full grid (empty ScalarField -> zero).
// g1: optional vector source, one component per v axis.
inline ScalarField solve_transport(const VelocityField& b, const Array& h0,
                                   const ScalarField& g0, const std::vector<ScalarField>& g1,
                                   const GridSpec& grid) {
  grid.validate();
  if (!grid.periodic_x)
    throw ConfigError("solve_transport: requires periodic_x (characteristics wrap)");
  if (h0.size() != grid.slice_size())
    throw InputError("solve_transport: h0 must hold nx^d * nv^d values");

  const bool has_g0 = g0.values.size() > 0;
  const bool has_g1 = !g1.empty();

  // S = g0 + div_v g1 on the full grid
  ScalarField S;
  if (has_g0 || has_g1) {
    S = ScalarField(grid);
    if (has_g0) S.values = g0.values;
    if (has_g1) {
      for (int a = 0; a < grid.d; ++a) {
        for (int it = 0; it < grid.nt; ++it) {
          Array slice = g1[a].values.segment(static_cast<long>(it) * grid.slice_size(),
                                             grid.slice_size());
          for (long jf = 0; jf < grid.nx_flat(); ++jf)
            for (long kf = 0; kf < grid.nv_flat(); ++kf)
              S.at(it, jf, kf) += detail::v_derivative(slice, grid, jf, kf, a);
        }
      }
    }
  }

  ScalarField h(grid);
  const long nxf = grid.nx_flat();
  const long nvf = grid.nv_flat();
  const Real dt = grid.dt();

  std::vector<Real> xline(nxf);
  std::vector<Real> sline(nxf);

  for (long kf = 0; kf < nvf; ++kf) {
    const Vec bv = b(grid.v_point(kf));
    for (long jf = 0; jf < nxf; ++jf) xline[jf] = h0[jf * nvf + kf];

    for (int it = 0; it < grid.nt; ++it) {
      const Real elapsed = grid.t_at(it) - grid.t0;
      for (long jf = 0; jf < nxf; ++jf) {
        const Vec xq = grid.x_point(jf) - elapsed * bv;
        h.at(it, jf, kf) = detail::cubic_x_sample(xline.data(), grid, xq);
      }
      if (S.values.size() > 0 && it > 0) {
        // trapezoid over the characteristic through each (t_it, x_j)
        for (int m = 0; m <= it; ++m) {
          const Real w = (m == 0 || m == it) ? 0.5 * dt : dt;
          const Real back = grid.t_at(it) - grid.t_at(m);
          for (long jf = 0; jf < nxf; ++jf)
            sline[jf] = S.at(m, jf, kf);
          for (long jf = 0; jf < nxf; ++jf) {
            const Vec xq = grid.x_point(jf) - back * bv;
            h.at(it, jf, kf) += w * detail::cubic_x_sample(sline.data(), grid, xq);
          }
        }
      }
    }
  }
  if (!h.all_finite()) throw NumericalError("solve_transport: non-finite values in output");
  return h;
}

// ---------------------------------------------------------------------------
// Full equation, IMEX stepping:
//   explicit conservative upwind for b(v)·grad_x,
//   explicit centered for B·grad_v f and s,
//   implicit flux-form centered for div_v(A grad_v f).
// v boundary: homogeneous Dirichlet ghosts by default, periodic per grid flag.
// ---------------------------------------------------------------------------

namespace detail {

struct Tridiag {
  std::vector<Real> a, b, c;  // sub, diag, super
};

inline void thomas_solve(Tridiag& m, std::vector<Real>& rhs) {
  const int n = static_cast<int>(rhs.size());
  for (int i = 1; i < n; ++i) {
    const Real w = m.a[i] / m.b[i - 1];
    m.b[i] -= w * m.c[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= m.b[n - 1];
  for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - m.c[i] * rhs[i + 1]) / m.b[i];
}

// cyclic tridiagonal via Sherman-Morrison
inline void cyclic_thomas_solve(const Tridiag& m, Real corner_lo, Real corner_hi,
                                std::vector<Real>& rhs) {
  const int n = static_cast<int>(rhs.size());
  const Real gamma = -m.b[0];
  Tridiag t = m;
  t.b[0] -= gamma;
  t.b[n - 1] -= corner_lo * corner_hi / gamma;
  std::vector<Real> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = corner_hi;
  Tridiag t2 = t;
  std::vector<Real> q = u;
  thomas_solve(t2, q);
  thomas_solve(t, rhs);
  const Real num = rhs[0] + rhs[n - 1] * corner_lo / gamma;
  const Real den = 1.0 + q[0] + q[n - 1] * corner_lo / gamma;
  const Real fac = num / den;
  for (int i = 0; i < n; ++i) rhs[i] -= fac * q[i];
}

inline void check_elliptic_scalar(Real a, Real lambda, Real Lambda) {
  if (a < lambda - 1e-12 || a > Lambda + 1e-12)
    throw InvariantError("solve_fp: A violates the ellipticity window [lambda, Lambda]");
}

}  // namespace detail

inline ScalarField solve_fp(const CoefficientSet& c, const Array& f_init, const GridSpec& grid) {
  grid.validate();
  if (f_init.size() != grid.slice_size())
    throw InputError("solve_fp: f_init must hold nx^d * nv^d values");
  if (!grid.periodic_x) throw ConfigError("solve_fp: requires periodic_x");
  if (!(c.lambda > 0) || c.lambda > c.Lambda)
    throw InvariantError("solve_fp: ellipticity bounds require 0 < lambda <= Lambda");

  const long nxf = grid.nx_flat();
  const long nvf = grid.nv_flat();
  const int nv = grid.nv;
  const Real dt = grid.dt();
  const Real dx = grid.dx();
  const Real dv = grid.dv();

  // advection CFL with safety factor 0.9
  Real bmax = 0;
  std::vector<Vec> bv(nvf);
  for (long kf = 0; kf < nvf; ++kf) {
    bv[kf] = c.b(grid.v_point(kf));
    bmax = std::max(bmax, bv[kf].template lpNorm<1>());
  }
  if (bmax > 0 && dt > 0.9 * dx / bmax)
    throw ConfigError("solve_fp: CFL violated, require dt <= 0.9 dx / sup|b|");

  ScalarField f(grid);
  f.values.segment(0, grid.slice_size()) = f_init;

  Array work(grid.slice_size());
  Array star(grid.slice_size());

  // d=2 sparse machinery
  Eigen::SparseMatrix<Real> M2;
  Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu2;
  Eigen::SelfAdjointEigenSolver<Mat> es2;

  for (int n = 0; n + 1 < grid.nt; ++n) {
    const Real tn = grid.t_at(n);
    const Real tnp1 = grid.t_at(n + 1);
    const Array fn = f.values.segment(static_cast<long>(n) * grid.slice_size(),
                                      grid.slice_size());

    // --- explicit upwind advection in x (flux form; b constant per v slice)
    for (long kf = 0; kf < nvf; ++kf) {
      for (long jf = 0; jf < nxf; ++jf) {
        Real div = 0;
        for (int a = 0; a < grid.d; ++a) {
          const Real ba = bv[kf][a];
          if (ba == 0) continue;
          const int nxa = grid.nx;
          const long stride = (grid.d == 2 && a == 0) ? nxa : 1;
          const int j_a = (grid.d == 1) ? static_cast<int>(jf)
                                        : (a == 0 ? static_cast<int>(jf / nxa)
                                                  : static_cast<int>(jf % nxa));
          const long jp = (j_a + 1 < nxa) ? jf + stride : jf - stride * (nxa - 1);
          const long jm = (j_a > 0) ? jf - stride : jf + stride * (nxa - 1);
          auto val = [&](long jj) { return fn[jj * nvf + kf]; };
          const Real flux_hi = ba > 0 ? ba * val(jf) : ba * val(jp);
          const Real flux_lo = ba > 0 ? ba * val(jm) : ba * val(jf);
          div += (flux_hi - flux_lo) / dx;
        }
        star[jf * nvf + kf] = fn[jf * nvf + kf] - dt * div;
      }
    }

    // --- explicit centered B·grad_v + source at t_n
    for (long jf = 0; jf < nxf; ++jf) {
      const Vec x = grid.x_point(jf);
      for (long kf = 0; kf < nvf; ++kf) {
        const Vec v = grid.v_point(kf);
        const Vec Bv = c.B(tn, x, v);
        if (Bv.norm() > c.Lambda + 1e-12)
          throw InvariantError("solve_fp: |B| must not exceed Lambda");
        Real adv = 0;
        for (int a = 0; a < grid.d; ++a)
          if (Bv[a] != 0) adv += Bv[a] * detail::v_derivative(star, grid, jf, kf, a);
        work[jf * nvf + kf] = star[jf * nvf + kf] + dt * (adv + c.s(tn, x, v));
      }
    }

    // --- implicit flux-form v diffusion at t_{n+1}, independent per x point
    if (grid.d == 1) {
      detail::Tridiag m;
      m.a.assign(nv, 0);
      m.b.assign(nv, 0);
      m.c.assign(nv, 0);
      std::vector<Real> rhs(nv);
      Vec vface(1);
      for (long jf = 0; jf < nxf; ++jf) {
        const Vec x = grid.x_point(jf);
        std::vector<Real> aface(nv + 1);
        for (int k = 0; k <= nv; ++k) {
          Real pos = grid.v_lo + (k - 0.5) * dv;
          // periodic v: the wrap face is one physical face, so fold its
          // coordinate into [v_lo, v_hi) before evaluating A
          if (grid.periodic_v && pos < grid.v_lo) pos += nv * dv;
          vface[0] = pos;
          const Real a = c.A(tnp1, x, vface)(0, 0);
          detail::check_elliptic_scalar(a, c.lambda, c.Lambda);
          aface[k] = a;
        }
        const Real r = dt / (dv * dv);
        Real corner_lo = 0, corner_hi = 0;
        for (int k = 0; k < nv; ++k) {
          const Real al = aface[k];
          const Real ah = aface[k + 1];
          m.b[k] = 1.0 + r * (al + ah);
          m.a[k] = (k > 0) ? -r * al : 0.0;
          m.c[k] = (k + 1 < nv) ? -r * ah : 0.0;
          rhs[k] = work[jf * nvf + k];
        }
        if (grid.periodic_v) {
          // wrap fluxes: face 0 couples node 0 and node nv-1
          corner_lo = -r * aface[0];
          corner_hi = -r * aface[nv];
          detail::cyclic_thomas_solve(m, corner_lo, corner_hi, rhs);
        } else {
          // homogeneous Dirichlet ghosts: boundary rows keep the ghost flux
          detail::thomas_solve(m, rhs);
        }
        for (int k = 0; k < nv; ++k) f.at(n + 1, jf, k) = rhs[k];
      }
    } else {
      const Real r = dt / (dv * dv);
      const int nv2 = nv * nv;
      std::vector<Eigen::Triplet<Real>> trip;
      for (long jf = 0; jf < nxf; ++jf) {
        const Vec x = grid.x_point(jf);
        trip.clear();
        trip.reserve(static_cast<std::size_t>(nv2) * 9);
        auto idx = [&](int k, int l) {
          return wrap_index(k, nv) * nv + wrap_index(l, nv);
        };
        auto inside = [&](int k) { return k >= 0 && k < nv; };
        auto fold_v = [&](Real pos) {
          if (!grid.periodic_v) return pos;
          const Real period = nv * dv;
          while (pos < grid.v_lo) pos += period;
          while (pos >= grid.v_lo + period) pos -= period;
          return pos;
        };
        Vec vf(2);
        // assemble I - dt*L with the 9-point flux stencil
        std::vector<Real> diag(nv2, 1.0);
        std::vector<std::vector<std::pair<int, Real>>> rows(nv2);
        auto add = [&](int row, int k, int l, Real w) {
          if (grid.periodic_v) {
            rows[row].emplace_back(idx(k, l), w);
          } else if (inside(k) && inside(l)) {
            rows[row].emplace_back(k * nv + l, w);
          }  // Dirichlet ghosts contribute nothing
        };
        for (int k = 0; k < nv; ++k) {
          for (int l = 0; l < nv; ++l) {
            const int row = k * nv + l;
            // faces along axis 0 at (k+-1/2, l); axis 1 at (k, l+-1/2)
            for (int sgn = -1; sgn <= 1; sgn += 2) {
              vf[0] = fold_v(grid.v_at(k) + sgn * 0.5 * dv);
              vf[1] = grid.v_at(l);
              Mat A = c.A(tnp1, x, vf);
              es2.compute(A, Eigen::EigenvaluesOnly);
              if (es2.eigenvalues().minCoeff() < c.lambda - 1e-12 ||
                  es2.eigenvalues().maxCoeff() > c.Lambda + 1e-12)
                throw InvariantError("solve_fp: A violates the ellipticity window");
              const Real a11 = A(0, 0), a12 = A(0, 1);
              // normal part
              add(row, k + sgn, l, -r * a11);
              add(row, k, l, r * a11);
              // cross part: d_1 f at the face by the 4-point average
              const Real cw = sgn * r * a12 / 4.0;
              add(row, k, l + 1, -cw);
              add(row, k + sgn, l + 1, -cw);
              add(row, k, l - 1, cw);
              add(row, k + sgn, l - 1, cw);
              // axis 1 face
              vf[0] = grid.v_at(k);
              vf[1] = fold_v(grid.v_at(l) + sgn * 0.5 * dv);
              Mat A2 = c.A(tnp1, x, vf);
              const Real a22 = A2(1, 1), a21 = A2(0, 1);
              add(row, k, l + sgn, -r * a22);
              add(row, k, l, r * a22);
              const Real cw2 = sgn * r * a21 / 4.0;
              add(row, k + 1, l, -cw2);
              add(row, k + 1, l + sgn, -cw2);
              add(row, k - 1, l, cw2);
              add(row, k - 1, l + sgn, cw2);
            }
          }
        }
        for (int row = 0; row < nv2; ++row) {
          trip.emplace_back(row, row, diag[row]);
          for (auto& [col, w] : rows[row]) trip.emplace_back(row, col, w);
        }
        M2.resize(nv2, nv2);
        M2.setFromTriplets(trip.begin(), trip.end());
        lu2.compute(M2);
        if (lu2.info() != Eigen::Success)
          throw NumericalError("solve_fp: implicit diffusion factorization failed");
        Eigen::VectorXd rhs(nv2);
        for (int q = 0; q < nv2; ++q) rhs[q] = work[jf * nvf + q];
        Eigen::VectorXd sol = lu2.solve(rhs);
        for (int q = 0; q < nv2; ++q) f.at(n + 1, jf, q) = sol[q];
      }
    }
  }

  if (!f.all_finite()) throw NumericalError("solve_fp: non-finite values in output");
  return f;
}

// ---------------------------------------------------------------------------
// Truncations
// ---------------------------------------------------------------------------

enum class TruncMode { positive_part, level, shifted };

inline ScalarField truncate(const ScalarField& f, TruncMode mode, Real param = 0.0) {
  ScalarField out = f;
  switch (mode) {
    case TruncMode::positive_part:
      out.values = f.values.max(0.0);
      break;
    case TruncMode::level:
      out.values = (f.values - param).max(0.0);
      break;
    case TruncMode::shifted:
      out.values = f.values.max(0.0) + param;
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weak residual against randomized smooth test bumps (all derivatives
// discrete, so exact solutions of the discrete structure score ~0).
// ---------------------------------------------------------------------------

struct ResidualStats {
  Real max = 0;
  Real rms = 0;
};

inline ResidualStats weak_residual(const ScalarField& f, const CoefficientSet& c, int test_count,
                                   std::uint64_t seed = 1) {
  const GridSpec& g = f.grid;
  SplitRng rng(seed, "weak_residual");
  const long nxf = g.nx_flat();
  const long nvf = g.nv_flat();
  const Real w_cell = g.cell_volume();

  Real sum_sq = 0, maxr = 0;
  for (int trial = 0; trial < test_count; ++trial) {
    // tensor-product bump with support strictly inside the domain
    const Real wt = rng.uniform(0.28, 0.42) * (g.t1 - g.t0);
    const Real ct = rng.uniform(g.t0 + wt + 2 * g.dt(), g.t1 - wt - 2 * g.dt());
    std::array<Real, 2> wx{}, cx{}, wv{}, cv{};
    for (int a = 0; a < g.d; ++a) {
      wx[a] = rng.uniform(0.28, 0.42) * (g.x_hi - g.x_lo);
      cx[a] = rng.uniform(g.x_lo + wx[a] + 2 * g.dx(), g.x_hi - wx[a] - 2 * g.dx());
      wv[a] = rng.uniform(0.28, 0.42) * (g.v_hi - g.v_lo);
      cv[a] = rng.uniform(g.v_lo + wv[a] + 2 * g.dv(), g.v_hi - wv[a] - 2 * g.dv());
    }

    ScalarField phi(g);
    for (int it = 0; it < g.nt; ++it) {
      const Real pt = smooth_bump((g.t_at(it) - ct) / wt);
      if (pt == 0) continue;
      for (long jf = 0; jf < nxf; ++jf) {
        const Vec x = g.x_point(jf);
        Real px = pt;
        for (int a = 0; a < g.d; ++a) px *= smooth_bump((x[a] - cx[a]) / wx[a]);
        if (px == 0) continue;
        for (long kf = 0; kf < nvf; ++kf) {
          const Vec v = g.v_point(kf);
          Real p = px;
          for (int a = 0; a < g.d; ++a) p *= smooth_bump((v[a] - cv[a]) / wv[a]);
          phi.at(it, jf, kf) = p;
        }
      }
    }

    Real acc = 0;
    for (int it = 1; it + 1 < g.nt; ++it) {
      const Real t = g.t_at(it);
      const Array fslice = f.values.segment(static_cast<long>(it) * g.slice_size(),
                                            g.slice_size());
      const Array phislice = phi.values.segment(static_cast<long>(it) * g.slice_size(),
                                                g.slice_size());
      for (long jf = 0; jf < nxf; ++jf) {
        for (long kf = 0; kf < nvf; ++kf) {
          // skip nodes whose whole derivative stencil sits outside the bump
          bool stencil_zero = phi.at(it, jf, kf) == 0 && phi.at(it + 1, jf, kf) == 0 &&
                              phi.at(it - 1, jf, kf) == 0;
          for (int a = 0; stencil_zero && a < g.d; ++a) {
            const int nxa = g.nx;
            const long xs = (g.d == 2 && a == 0) ? nxa : 1;
            const int j_a = (g.d == 1) ? static_cast<int>(jf)
                                       : (a == 0 ? static_cast<int>(jf / nxa)
                                                 : static_cast<int>(jf % nxa));
            const long jp2 = (j_a + 1 < nxa) ? jf + xs : jf - xs * (nxa - 1);
            const long jm2 = (j_a > 0) ? jf - xs : jf + xs * (nxa - 1);
            if (phi.at(it, jp2, kf) != 0 || phi.at(it, jm2, kf) != 0) stencil_zero = false;
            const int nva = g.nv;
            const long vs = (g.d == 2 && a == 0) ? nva : 1;
            const int k_a = (g.d == 1) ? static_cast<int>(kf)
                                       : (a == 0 ? static_cast<int>(kf / nva)
                                                 : static_cast<int>(kf % nva));
            const long kp2 = k_a + 1 < nva ? kf + vs : kf;
            const long km2 = k_a > 0 ? kf - vs : kf;
            if (phi.at(it, jf, kp2) != 0 || phi.at(it, jf, km2) != 0) stencil_zero = false;
          }
          if (stencil_zero) continue;
          const Vec x = g.x_point(jf);
          const Real fv = f.at(it, jf, kf);
          const Real dphidt =
              (phi.at(it + 1, jf, kf) - phi.at(it - 1, jf, kf)) / (2 * g.dt());
          Real term = -fv * dphidt;

          const Vec v = g.v_point(kf);
          const Vec bv = c.b(v);
          for (int a = 0; a < g.d; ++a) {
            const int nxa = g.nx;
            const long stride = (g.d == 2 && a == 0) ? nxa : 1;
            const int j_a = (g.d == 1) ? static_cast<int>(jf)
                                       : (a == 0 ? static_cast<int>(jf / nxa)
                                                 : static_cast<int>(jf % nxa));
            const long jp = (j_a + 1 < nxa) ? jf + stride : jf - stride * (nxa - 1);
            const long jm = (j_a > 0) ? jf - stride : jf + stride * (nxa - 1);
            const Real dphidx = (phi.at(it, jp, kf) - phi.at(it, jm, kf)) / (2 * g.dx());
            term -= fv * bv[a] * dphidx;
          }

          const Mat A = c.A(t, x, v);
          const Vec B = c.B(t, x, v);
          Vec gradf(g.d), gradphi(g.d);
          for (int a = 0; a < g.d; ++a) {
            gradf[a] = detail::v_derivative(fslice, g, jf, kf, a);
            gradphi[a] = detail::v_derivative(phislice, g, jf, kf, a);
          }
          term += (A * gradf).dot(gradphi);
          term -= (B.dot(gradf) + c.s(t, x, v)) * phi.at(it, jf, kf);
          acc += term;
        }
      }
    }
    const Real res = std::abs(acc * w_cell);
    sum_sq += res * res;
    maxr = std::max(maxr, res);
  }
  return {maxr, std::sqrt(sum_sq / test_count)};
}

}  // namespace kfp

#endif
