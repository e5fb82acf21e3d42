#ifndef KFP_DEGIORGI_HPP
#define KFP_DEGIORGI_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kfp/averaging.hpp"
#include "kfp/coeffs.hpp"
#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/solver.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Regions and measures
// ---------------------------------------------------------------------------

struct Region {
  std::function<bool(Real t, const Vec& x, const Vec& v)> contains;
};

// Q_r = (-r^2, 0] x B_{r^3} x B_r, the iteration cylinders centered at the
// origin with the top time at t = 0.
inline Region cylinder_Qr(Real r) {
  Region reg;
  reg.contains = [r](Real t, const Vec& x, const Vec& v) {
    return t > -r * r && t <= 0 && x.norm() < r * r * r && v.norm() < r;
  };
  return reg;
}

inline Region kinetic_cylinder(const KineticPoint& z0, Real r, const Vec& b_v0) {
  Region reg;
  reg.contains = [z0, r, b_v0](Real t, const Vec& x, const Vec& v) {
    KineticPoint z{t, x, v};
    return cylinder_membership(z, z0, r, b_v0);
  };
  return reg;
}

// Counting measure of {f > k} within the region, cells weighted by
// dt dx^d dv^d.
inline Real level_set_measure(const ScalarField& f, Real k, const Region& region) {
  const GridSpec& g = f.grid;
  const Real w = g.cell_volume();
  long inside = 0, above = 0;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        if (!region.contains(t, x, g.v_point(kf))) continue;
        ++inside;
        if (f.at(it, jf, kf) > k) ++above;
      }
    }
  }
  if (inside == 0) throw InputError("level_set_measure: region does not intersect the grid");
  return above * w;
}

// L^p norm over a region (counting measure), max-factored for stability at
// large p.
inline Real lp_norm(const ScalarField& f, Real p, const Region& region) {
  const GridSpec& g = f.grid;
  const Real w = g.cell_volume();
  Real maxabs = 0;
  long inside = 0;
  std::vector<Real> vals;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        if (!region.contains(t, x, g.v_point(kf))) continue;
        ++inside;
        const Real a = std::abs(f.at(it, jf, kf));
        vals.push_back(a);
        maxabs = std::max(maxabs, a);
      }
    }
  }
  if (inside == 0) throw InputError("lp_norm: region does not intersect the grid");
  if (maxabs == 0) return 0;
  Real acc = 0;
  for (Real a : vals) acc += std::pow(a / maxabs, p);
  return maxabs * std::pow(acc * w, 1.0 / p);
}

inline Real region_volume(const ScalarField& f, const Region& region) {
  const GridSpec& g = f.grid;
  long inside = 0;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      for (long kf = 0; kf < g.nv_flat(); ++kf)
        if (region.contains(t, x, g.v_point(kf))) ++inside;
    }
  }
  return inside * g.cell_volume();
}

// ---------------------------------------------------------------------------
// Iteration traces
// ---------------------------------------------------------------------------

struct IterationEntry {
  int n = 0;
  Real r_n = 0;
  Real level_or_p = 0;  // p_n for moser, k_n for degiorgi
  Real value = 0;       // the tracked norm
  Real growth = 0;      // value_n / value_{n-1} (0 for n = 0)
};

struct IterationTrace {
  std::string scheme;  // "moser" | "degiorgi"
  std::vector<IterationEntry> entries;
  Real kappa = 0;
  Real shift_l = 0;      // l for moser, l0 for degiorgi
  Real fitted_c = 0;     // measured growth constant
  Real eps_surrogate = 0;
  bool converged = false;
};

inline Real iteration_radius(int n) { return 0.5 + std::pow(0.5, n + 1); }

// Moser schedule: p_n = 2 kappa^n on Q_{r_n}, with the shift l = ||s||_{L^q(Q_1)}.
inline IterationTrace moser_trace(const ScalarField& f, const ScalarField& s, Real q,
                                  const ExponentTable& table, int n_max) {
  if (!(q > table.q_threshold))
    throw ThresholdError("moser_trace: q must exceed 2 kappa/(kappa-1) = " +
                         std::to_string(table.q_threshold));
  if (!f.all_finite()) throw InputError("moser_trace: f must be bounded (finite values)");

  const Region q1 = cylinder_Qr(1.0);
  const Real l = s.values.size() > 0 ? lp_norm(s, q, q1) : 0.0;
  const ScalarField fl = truncate(f, TruncMode::shifted, l);

  IterationTrace tr;
  tr.scheme = "moser";
  tr.kappa = table.kappa;
  tr.shift_l = l;

  Real prev = 0;
  for (int n = 0; n <= n_max; ++n) {
    IterationEntry e;
    e.n = n;
    e.r_n = iteration_radius(n);
    e.level_or_p = 2.0 * std::pow(table.kappa, n);
    e.value = lp_norm(fl, e.level_or_p, cylinder_Qr(e.r_n));
    e.growth = (n > 0 && prev > 0) ? e.value / prev : 0.0;
    prev = e.value;
    tr.entries.push_back(e);
    if (n > 0) tr.fitted_c = std::max(tr.fitted_c, e.growth);
  }
  if (tr.entries.size() >= 2) {
    const Real last = tr.entries.back().value;
    const Real before = tr.entries[tr.entries.size() - 2].value;
    tr.converged = last == before || std::abs(last - before) <= 0.05 * std::abs(last);
  } else {
    tr.converged = true;
  }
  return tr;
}

// De Giorgi schedule: k_n = l0 + l (1 - 2^{-n}), A_n = ||(f-k_n)^+||_{L^2(Q_{r_n})},
// with the fitted constant of A_n <= C^n A_{n-1}^{1+eps}.
inline IterationTrace degiorgi_trace(const ScalarField& f, const ScalarField& s, Real q, Real l,
                                     const ExponentTable& table, int n_max, Real c0 = 10.0) {
  if (!(q > table.q_threshold))
    throw ThresholdError("degiorgi_trace: q must exceed 2 kappa/(kappa-1) = " +
                         std::to_string(table.q_threshold));
  if (!(l > 0)) throw InputError("degiorgi_trace: l must be positive");

  const Region q1 = cylinder_Qr(1.0);
  const Real l0 = c0 * lp_norm(truncate(f, TruncMode::positive_part), 2.0, q1);

  IterationTrace tr;
  tr.scheme = "degiorgi";
  tr.kappa = table.kappa;
  tr.shift_l = l0;
  // the two level-set exponents of the induction inequality
  tr.eps_surrogate = std::min(1.0 - 1.0 / table.kappa, 1.0 - 2.0 / q - 1.0 / table.kappa);

  std::vector<Real> an;
  for (int n = 0; n <= n_max; ++n) {
    IterationEntry e;
    e.n = n;
    e.r_n = iteration_radius(n);
    e.level_or_p = l0 + l * (1.0 - std::pow(0.5, n));
    e.value = lp_norm(truncate(f, TruncMode::level, e.level_or_p), 2.0, cylinder_Qr(e.r_n));
    e.growth = (n > 0 && an.back() > 0) ? e.value / an.back() : 0.0;
    an.push_back(e.value);
    tr.entries.push_back(e);
  }

  Real c_fit = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (an[n - 1] <= 1e-300) continue;
    const Real cn = std::pow(an[n] / std::pow(an[n - 1], 1.0 + tr.eps_surrogate),
                             1.0 / static_cast<Real>(n));
    c_fit = std::max(c_fit, cn);
  }
  tr.fitted_c = c_fit;

  bool geometric = an.front() > 0;
  for (std::size_t n = 1; n < an.size(); ++n)
    if (an[n - 1] > 0 && an[n] > 0.95 * an[n - 1]) geometric = false;
  tr.converged = an.back() <= 1e-10 * std::max(an.front(), 1e-300) || geometric;
  return tr;
}

// ---------------------------------------------------------------------------
// Technical iteration lemmas
// ---------------------------------------------------------------------------

// Absorption constant for psi(r) <= eps psi(s) + c (s-r)^{-iota}:
// theta is the midpoint of the admissible interval (eps theta^{-iota} < 1),
// C = (1-theta)^{-iota} / (1 - eps theta^{-iota}). Verified at construction by
// unrolling the recursion on the geometric point sequence.
inline Real iteration_bound_const(Real eps, Real iota) {
  if (!(eps >= 0 && eps < 1)) throw InputError("iteration_bound_const: eps must lie in [0, 1)");
  if (!(iota > 0)) throw InputError("iteration_bound_const: iota must be positive");
  const Real theta = eps > 0 ? 0.5 * (std::pow(eps, 1.0 / iota) + 1.0) : 0.5;
  const Real ratio = eps * std::pow(theta, -iota);
  const Real C = std::pow(1.0 - theta, -iota) / (1.0 - ratio);

  // unroll: psi(t_0) <= sum_{i<k} eps^i c ((1-theta) theta^i (s-r))^{-iota}
  //                    + eps^k psi(t_k), with t spacing (1-theta) theta^i (s-r)
  const Real c = 1.0, gap = 1.0, psi_cap = 10.0;
  Real partial = 0, epspow = 1.0;
  for (int i = 0; i < 60; ++i) {
    partial += epspow * c * std::pow((1.0 - theta) * std::pow(theta, i) * gap, -iota);
    epspow *= eps;
  }
  if (!(partial + epspow * psi_cap <= C * c * std::pow(gap, -iota) * (1.0 + 1e-9)))
    throw InvariantError("iteration_bound_const: unroll check failed");
  return C;
}

// beta_1 = (1 - eps) log(delta) / log(tau) of the oscillation-decay lemma.
inline Real decay_exponent(Real tau, Real delta, Real eps) {
  if (!(tau > 0 && tau < 1)) throw InputError("decay_exponent: tau must lie in (0, 1)");
  if (!(delta > 0 && delta < 1)) throw InputError("decay_exponent: delta must lie in (0, 1)");
  if (!(eps >= 0 && eps < 1)) throw InputError("decay_exponent: eps must lie in [0, 1)");
  return (1.0 - eps) * std::log(delta) / std::log(tau);
}

// ---------------------------------------------------------------------------
// Directional jump detector (qualitative isoperimetric check)
//
// P is a binary field on a box in R^D. D(tau) = (1/tau) int (1_P(z + tau h)
// - 1_P(z))_+ phi(z) dz with a fixed interior bump phi; on indicator
// increments the p-th power of the positive part equals the positive part
// itself, so p only enters the competing bound tau^{p-1}.
// ---------------------------------------------------------------------------

struct BoxField {
  std::vector<int> dims;       // per-axis counts, axis 0 slowest
  std::vector<Real> lo, hi;    // per-axis extents
  Array values;

  int D() const { return static_cast<int>(dims.size()); }
  Real step(int a) const { return (hi[a] - lo[a]) / (dims[a] - 1); }
  long size() const {
    long s = 1;
    for (int n : dims) s *= n;
    return s;
  }
  Real coord(int a, long i) const { return lo[a] + i * step(a); }
};

enum class JumpVerdict { compliant, violating };

struct JumpDiagnostics {
  JumpVerdict verdict = JumpVerdict::compliant;
  std::vector<std::array<Real, 3>> curve;  // (tau, D(tau), tau^{p-1})
  Real tolerance = 0;
};

inline JumpDiagnostics directional_jump_detect(const BoxField& P, const Vec& h_dir,
                                               std::vector<Real> tau_list, Real p) {
  const int D = P.D();
  if (h_dir.size() != D || std::abs(h_dir.norm() - 1.0) > 1e-10)
    throw InputError("directional_jump_detect: h must be a unit vector of the box dimension");
  if (!(p > 1)) throw InputError("directional_jump_detect: p must exceed 1");
  for (long i = 0; i < P.size(); ++i) {
    const Real v = P.values[i];
    if (std::abs(v) > 1e-12 && std::abs(v - 1.0) > 1e-12)
      throw InputError("directional_jump_detect: P must be binary-valued");
  }
  std::sort(tau_list.begin(), tau_list.end(), std::greater<>());

  // interior test bump over the central 80% of each axis
  std::vector<Real> center(D), width(D);
  for (int a = 0; a < D; ++a) {
    center[a] = 0.5 * (P.lo[a] + P.hi[a]);
    width[a] = 0.4 * (P.hi[a] - P.lo[a]);
  }

  std::vector<long> strides(D, 1);
  for (int a = D - 2; a >= 0; --a) strides[a] = strides[a + 1] * P.dims[a + 1];

  Real cellvol = 1.0;
  for (int a = 0; a < D; ++a) cellvol *= P.step(a);

  Real phi_mass = 0;
  std::vector<Real> phi(P.size());
  {
    std::vector<long> idx(D, 0);
    for (long flat = 0; flat < P.size(); ++flat) {
      Real w = 1.0;
      long rem = flat;
      for (int a = 0; a < D; ++a) {
        const long ia = rem / strides[a];
        rem %= strides[a];
        w *= smooth_bump((P.coord(a, ia) - center[a]) / width[a]);
      }
      phi[flat] = w;
      phi_mass += w * cellvol;
    }
  }

  JumpDiagnostics diag;
  Real min_extent = P.hi[0] - P.lo[0];
  for (int a = 1; a < D; ++a) min_extent = std::min(min_extent, P.hi[a] - P.lo[a]);
  diag.tolerance = 1e-8 * phi_mass / min_extent;

  for (Real tau : tau_list) {
    // nearest-neighbor shift, tau snapped to integer cell multiples per axis
    std::vector<long> shift(D);
    for (int a = 0; a < D; ++a) shift[a] = std::lround(tau * h_dir[a] / P.step(a));

    Real acc = 0;
    for (long flat = 0; flat < P.size(); ++flat) {
      if (phi[flat] == 0) continue;
      long rem = flat, shifted = 0;
      bool inside = true;
      for (int a = 0; a < D; ++a) {
        const long ia = rem / strides[a];
        rem %= strides[a];
        const long ja = ia + shift[a];
        if (ja < 0 || ja >= P.dims[a]) {
          inside = false;
          break;
        }
        shifted += ja * strides[a];
      }
      const Real inc = (inside ? P.values[shifted] : 0.0) - P.values[flat];
      if (inc > 0) acc += inc * phi[flat];
    }
    const Real dval = acc * cellvol / tau;
    diag.curve.push_back({tau, dval, std::pow(tau, p - 1.0)});
  }

  diag.verdict = diag.curve.back()[1] <= diag.tolerance ? JumpVerdict::compliant
                                                        : JumpVerdict::violating;
  return diag;
}

// one-line summary record of a jump verdict
inline std::string jump_summary(const JumpDiagnostics& diag) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "verdict=%s tau_min=%.6g D=%.6g competing_bound=%.6g tol=%.6g",
                diag.verdict == JumpVerdict::compliant ? "compliant" : "violating",
                diag.curve.back()[0], diag.curve.back()[1], diag.curve.back()[2],
                diag.tolerance);
  return buf;
}

}  // namespace kfp

#endif
