#ifndef KFP_HOLDER_HPP
#define KFP_HOLDER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kfp/coeffs.hpp"
#include "kfp/degiorgi.hpp"
#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Oscillation over kinetic cylinders and the multi-scale exponent fit.
// ---------------------------------------------------------------------------

inline Real oscillation(const ScalarField& f, const KineticPoint& z0, Real r, const Vec& b_v0) {
  const GridSpec& g = f.grid;
  Real lo = std::numeric_limits<Real>::infinity();
  Real hi = -lo;
  long count = 0;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    if (!(t > z0.t - r * r && t <= z0.t)) continue;
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      if ((x - z0.x - (t - z0.t) * b_v0).norm() >= r * r * r) continue;
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        if ((g.v_point(kf) - z0.v).norm() >= r) continue;
        const Real val = f.at(it, jf, kf);
        lo = std::min(lo, val);
        hi = std::max(hi, val);
        ++count;
      }
    }
  }
  if (count < 8)
    throw ResolutionError("oscillation: cylinder at r = " + std::to_string(r) +
                          " covers fewer than 8 cells");
  return hi - lo;
}

// forward-in-time variant around t0 = 0, clipped to t >= 0
inline Real oscillation_forward(const ScalarField& f, const KineticPoint& z0, Real r,
                                const Vec& b_v0) {
  const GridSpec& g = f.grid;
  Real lo = std::numeric_limits<Real>::infinity();
  Real hi = -lo;
  long count = 0;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    if (!(t >= 0 && t > z0.t - r * r && t < z0.t + r * r)) continue;
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      if ((x - z0.x - (t - z0.t) * b_v0).norm() >= r * r * r) continue;
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        if ((g.v_point(kf) - z0.v).norm() >= r) continue;
        const Real val = f.at(it, jf, kf);
        lo = std::min(lo, val);
        hi = std::max(hi, val);
        ++count;
      }
    }
  }
  if (count < 8)
    throw ResolutionError("oscillation_forward: cylinder at r = " + std::to_string(r) +
                          " covers fewer than 8 cells");
  return hi - lo;
}

struct OscillationProfile {
  KineticPoint z0;
  std::vector<Real> scales;
  std::vector<Real> osc_values;
  std::vector<Real> source_correction;
  Real theta1_hat = 0;
  Real beta_fit = 0;      // +inf sentinel when all oscillations vanish
  Real beta_over_3 = 0;   // beta_fit / 3
  Real beta0 = 0;         // boundary profiles: min(alpha0/2, beta_fit)/3
  Real r_squared = 1;
  Real fitted_source_c = 0;
  std::vector<std::string> warnings;
};

inline Real initial_beta0(Real alpha0, Real beta1) { return std::min(alpha0 / 2.0, beta1) / 3.0; }

namespace detail {

// largest r with Q^b_r(z0) inside the grid box (backward or symmetric in t)
inline Real max_cylinder_radius(const GridSpec& g, const KineticPoint& z0, const Vec& b_v0,
                                bool forward) {
  Real r_t;
  if (forward)
    r_t = std::sqrt(std::max(0.0, g.t1 - z0.t));
  else
    r_t = std::sqrt(std::max(0.0, z0.t - g.t0));
  Real r_v = std::numeric_limits<Real>::infinity();
  Real dist_x = std::numeric_limits<Real>::infinity();
  for (int a = 0; a < g.d; ++a) {
    r_v = std::min(r_v, std::min(g.v_hi - z0.v[a], z0.v[a] - g.v_lo));
    dist_x = std::min(dist_x, std::min(g.x_hi - z0.x[a], z0.x[a] - g.x_lo));
  }
  // x constraint: r^3 + r^2 |b(v0)| <= dist_x, solved by bisection
  const Real bnorm = b_v0.norm();
  Real lo = 0, hi = std::max(1.0, dist_x);
  for (int i = 0; i < 80; ++i) {
    const Real mid = 0.5 * (lo + hi);
    if (mid * mid * mid + mid * mid * bnorm <= dist_x)
      lo = mid;
    else
      hi = mid;
  }
  return 0.999 * std::min({r_t, r_v, lo});
}

struct PowerFit {
  Real beta = 0;
  Real r2 = 1;
  Real c_source = 0;
  std::vector<Real> corrections;
  bool all_zero = false;
};

// osc_i = a r_i^beta (+ C g_i when a source correction is present); C fitted
// jointly by a grid search, beta by least squares on the corrected log-log
// samples.
inline PowerFit fit_power_law(const std::vector<Real>& r, const std::vector<Real>& osc,
                              const std::vector<Real>& gsrc) {
  PowerFit out;
  out.corrections.assign(r.size(), 0.0);
  Real osc_max = 0;
  for (Real o : osc) osc_max = std::max(osc_max, o);
  if (osc_max <= 0) {
    out.all_zero = true;
    out.beta = std::numeric_limits<Real>::infinity();
    out.r2 = 1;
    return out;
  }

  const bool with_source = !gsrc.empty() &&
                           *std::max_element(gsrc.begin(), gsrc.end()) > 0;
  Real c_max = 0;
  if (with_source) {
    c_max = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < r.size(); ++i)
      if (gsrc[i] > 0) c_max = std::min(c_max, osc[i] / gsrc[i]);
    c_max *= 0.999;
  }

  const int c_steps = with_source ? 65 : 1;
  Real best_ss = std::numeric_limits<Real>::infinity();
  for (int ci = 0; ci < c_steps; ++ci) {
    const Real C = with_source ? c_max * ci / (c_steps - 1) : 0.0;
    std::vector<Real> lx, ly;
    bool ok = true;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Real corrected = osc[i] - C * (with_source ? gsrc[i] : 0.0);
      if (corrected <= 0) {
        ok = false;
        break;
      }
      lx.push_back(std::log(r[i]));
      ly.push_back(std::log(corrected));
    }
    if (!ok) continue;
    const LineFit f = fit_line(lx, ly);
    const Real ss = f.rms_residual;
    if (ss < best_ss) {
      best_ss = ss;
      out.beta = f.slope;
      out.r2 = f.r_squared;
      out.c_source = C;
      for (std::size_t i = 0; i < r.size(); ++i)
        out.corrections[i] = C * (with_source ? gsrc[i] : 0.0);
    }
  }
  return out;
}

}  // namespace detail

// Oscillations over nested cylinders r_i = r1 * ratio^i and the fitted decay
// exponent. ratio <= 0 selects the omega/2 contraction scale of the zoom
// geometry; the default 1/2 keeps four scales resolvable on desk-size grids.
inline OscillationProfile oscillation_profile(const ScalarField& f, const ScalarField& s, Real q,
                                              const KineticPoint& z0, const VelocityField& b,
                                              int scale_count, Real scale_ratio = 0.5) {
  if (scale_count < 4) throw InputError("oscillation_profile: need at least 4 scales");
  const GridSpec& g = f.grid;
  const Vec b_v0 = b(z0.v);

  Real ratio = scale_ratio;
  if (ratio <= 0) {
    const GeometryConstants gc = geometry_constants(b.jacobian(z0.v));
    ratio = gc.omega / 2.0;
  }
  if (!(ratio > 0 && ratio < 1))
    throw InputError("oscillation_profile: scale ratio must lie in (0, 1)");

  const Real r1 = detail::max_cylinder_radius(g, z0, b_v0, false);
  if (!(r1 > 0)) throw ResolutionError("oscillation_profile: no cylinder fits at z0");

  OscillationProfile prof;
  prof.z0 = z0;
  const bool with_source = s.values.size() > 0;

  std::vector<Real> gsrc;
  for (int i = 0; i < scale_count; ++i) {
    const Real r = r1 * std::pow(ratio, i);
    prof.scales.push_back(r);
    prof.osc_values.push_back(oscillation(f, z0, r, b_v0));
    if (with_source) {
      const Real snorm = lp_norm(s, q, kinetic_cylinder(z0, r, b_v0));
      gsrc.push_back(std::pow(r, 2.0 - (1.0 + 2.0 * g.d) / q) * snorm);
    }
  }

  const auto fit = detail::fit_power_law(prof.scales, prof.osc_values, gsrc);
  prof.beta_fit = fit.beta;
  prof.r_squared = fit.r2;
  prof.fitted_source_c = fit.c_source;
  prof.source_correction = fit.corrections;
  prof.beta_over_3 = fit.all_zero ? fit.beta : fit.beta / 3.0;

  if (fit.all_zero) {
    prof.theta1_hat = 1.0;
  } else {
    std::vector<Real> ratios;
    for (std::size_t i = 0; i + 1 < prof.osc_values.size(); ++i)
      if (prof.osc_values[i] > 0) ratios.push_back(prof.osc_values[i + 1] / prof.osc_values[i]);
    if (ratios.empty()) {
      prof.theta1_hat = 1.0;
    } else {
      std::sort(ratios.begin(), ratios.end());
      const std::size_t m = ratios.size();
      const Real median =
          m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
      prof.theta1_hat = 1.0 - median;
    }
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Point-pair Hoelder seminorm in the kinetic metric
// max(|dt|^{1/2}, |dx|^{1/3}, |dv|).
// ---------------------------------------------------------------------------

inline Real kinetic_distance(const KineticPoint& a, const KineticPoint& b) {
  return std::max({std::sqrt(std::abs(a.t - b.t)), std::cbrt((a.x - b.x).norm()),
                   (a.v - b.v).norm()});
}

inline Real holder_seminorm(const ScalarField& f, Real beta, int pair_count, const Region& region,
                            std::uint64_t seed) {
  if (!(beta > 0 && beta <= 1)) throw InputError("holder_seminorm: beta must lie in (0, 1]");
  const GridSpec& g = f.grid;
  SplitRng rng(seed, "holder_seminorm");

  // collect region nodes once
  struct Node {
    int it;
    long jf, kf;
    KineticPoint z;
  };
  std::vector<Node> nodes;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        const Vec v = g.v_point(kf);
        if (region.contains(t, x, v)) nodes.push_back({it, jf, kf, {t, x, v}});
      }
    }
  }
  if (nodes.size() < 2) throw InputError("holder_seminorm: region holds fewer than 2 grid nodes");

  Real sup = 0;
  for (int i = 0; i < pair_count; ++i) {
    const auto& a = nodes[rng.uniform_int(0, static_cast<int>(nodes.size()) - 1)];
    const auto& c = nodes[rng.uniform_int(0, static_cast<int>(nodes.size()) - 1)];
    const Real dist = kinetic_distance(a.z, c.z);
    if (dist <= 0) continue;
    const Real diff = std::abs(f.at(a.it, a.jf, a.kf) - f.at(c.it, c.jf, c.kf));
    sup = std::max(sup, diff / std::pow(dist, beta));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Initial-time (boundary) oscillation profile
// ---------------------------------------------------------------------------

inline OscillationProfile initial_time_profile(const ScalarField& f, Real alpha0,
                                               Real /*f0_seminorm*/, const ScalarField& s, Real q,
                                               const KineticPoint& z0, const VelocityField& b,
                                               int scale_count, Real scale_ratio = 0.5) {
  if (std::abs(z0.t) > 1e-12)
    throw InputError("initial_time_profile: z0 must sit on the initial slice t = 0");
  if (!(alpha0 > 0)) throw InputError("initial_time_profile: alpha0 must be positive");

  OscillationProfile prof;
  if (alpha0 > 1.0) {
    prof.warnings.push_back("alpha0 clamped to 1");
    alpha0 = 1.0;
  }

  const GridSpec& g = f.grid;
  const Vec b_v0 = b(z0.v);
  const Real r1 = detail::max_cylinder_radius(g, z0, b_v0, true);
  if (!(r1 > 0)) throw ResolutionError("initial_time_profile: no cylinder fits at z0");

  prof.z0 = z0;
  const bool with_source = s.values.size() > 0;
  std::vector<Real> gsrc;
  for (int i = 0; i < scale_count; ++i) {
    const Real r = r1 * std::pow(scale_ratio, i);
    prof.scales.push_back(r);
    prof.osc_values.push_back(oscillation_forward(f, z0, r, b_v0));
    if (with_source) {
      Region reg;
      reg.contains = [z0, r, b_v0](Real t, const Vec& x, const Vec& v) {
        return t >= 0 && t < z0.t + r * r &&
               (x - z0.x - (t - z0.t) * b_v0).norm() < r * r * r && (v - z0.v).norm() < r;
      };
      gsrc.push_back(std::pow(r, 2.0 - (1.0 + 2.0 * g.d) / q) * lp_norm(s, q, reg));
    }
  }

  const auto fit = detail::fit_power_law(prof.scales, prof.osc_values, gsrc);
  prof.beta_fit = fit.beta;
  prof.r_squared = fit.r2;
  prof.fitted_source_c = fit.c_source;
  prof.source_correction = fit.corrections;
  prof.beta_over_3 = fit.all_zero ? fit.beta : fit.beta / 3.0;
  prof.beta0 = initial_beta0(alpha0, fit.beta);
  prof.theta1_hat = 0;
  if (!fit.all_zero) {
    std::vector<Real> ratios;
    for (std::size_t i = 0; i + 1 < prof.osc_values.size(); ++i)
      if (prof.osc_values[i] > 0) ratios.push_back(prof.osc_values[i + 1] / prof.osc_values[i]);
    if (!ratios.empty()) {
      std::sort(ratios.begin(), ratios.end());
      const std::size_t m = ratios.size();
      prof.theta1_hat =
          1.0 - (m % 2 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]));
    }
  } else {
    prof.theta1_hat = 1.0;
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Zoomed resampling f o T_{z0,r} onto a fresh Q_1-covering grid; connects the
// direct cylinder oscillation with the rescaled one.
// ---------------------------------------------------------------------------

inline ScalarField field_rescale(const ScalarField& f, const KineticPoint& z0, Real r,
                                 const VelocityField& b, int nt = 0, int nx = 0, int nv = 0) {
  // default target counts: two cells per source cell inside the cylinder
  // (axis scalings r^2, r^3, r), balancing interpolation smoothing against
  // sampling gaps when oscillations on both sides are compared
  if (nt <= 0) nt = std::max(8, static_cast<int>(std::lround(2 * r * r / f.grid.dt())) + 1);
  if (nx <= 0)
    nx = std::max(8, static_cast<int>(std::lround(4 * r * r * r / f.grid.dx())) + 1);
  if (nv <= 0) nv = std::max(8, static_cast<int>(std::lround(4 * r / f.grid.dv())) + 1);
  GridSpec zg;
  zg.d = f.grid.d;
  zg.nt = nt;
  zg.nx = nx;
  zg.nv = nv;
  zg.t0 = -1.0;
  zg.t1 = 0.0;
  zg.x_lo = -1.0;
  zg.x_hi = 1.0;
  zg.v_lo = -1.0;
  zg.v_hi = 1.0;
  zg.periodic_x = false;
  zg.periodic_v = false;
  zg.validate();

  const Vec b_v0 = b(z0.v);
  ScalarField out(zg);
  for (int it = 0; it < nt; ++it) {
    const Real tt = zg.t_at(it);
    for (long jf = 0; jf < zg.nx_flat(); ++jf) {
      const Vec xt = zg.x_point(jf);
      for (long kf = 0; kf < zg.nv_flat(); ++kf) {
        const KineticPoint z = zoom_map(z0, r, b_v0, tt, xt, zg.v_point(kf));
        out.at(it, jf, kf) = multilinear_sample(f, z.t, z.x, z.v);
      }
    }
  }
  return out;
}

}  // namespace kfp

#endif
