#ifndef KFP_AVERAGING_HPP
#define KFP_AVERAGING_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kfp/coeffs.hpp"
#include "kfp/errors.hpp"
#include "kfp/fourier.hpp"
#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Exponent arithmetic
//
// All derived exponents of the averaging/iteration machinery in one table.
// The regularization order gamma depends on which hypotheses are assumed on
// b; the choice feeds the Sobolev conjugate kappa and the q thresholds.
// ---------------------------------------------------------------------------

enum class GammaChoice { val, lip, na };

struct ExponentTable {
  Real alpha = 1, delta = 1;
  int d1 = 1, d2 = 1;
  Real q = 0;
  GammaChoice choice = GammaChoice::lip;

  Real varsigma = 0;       // alpha/(4+alpha)
  Real gamma_VAL = 0;      // 2 alpha delta / ((4+alpha)(2+2 delta+d2))
  Real gamma_lip = 0;      // alpha delta / (alpha delta + 2 d2)
  Real gamma_NA = 0;       // alpha delta / (2 + alpha delta)
  Real gamma_bdd = 0;      // 1/(1+2d): gamma_lip at alpha = delta = 1
  Real gamma_selected = 0;
  Real kappa = 0;          // Sobolev conjugate for the selected gamma
  Real theta = 0;          // kappa/((kappa-1) q)
  Real vartheta = 0;       // 1/(1-theta)
  Real q_min_bdd = 0;      // (4+alpha)(4+d2)(1+d1+d2)/(2 alpha)
  Real q_min_reg = 0;      // (1+2d)^2
  Real rho_exponent = 0;   // (2+alpha)/(4+alpha), the m(xi) power
  Real q_threshold = 0;    // (1+d1+d2)/gamma_selected = 2 kappa/(kappa-1)
};

inline ExponentTable exponent_table(Real alpha, Real delta, int d1, int d2, Real q,
                                    GammaChoice choice = GammaChoice::lip) {
  if (!(alpha > 0 && alpha <= 1)) throw InputError("exponent_table: alpha must lie in (0, 1]");
  if (!(delta > 0 && delta <= 1)) throw InputError("exponent_table: delta must lie in (0, 1]");
  if (d1 < 1 || d2 < 1) throw InputError("exponent_table: dimensions must be positive");

  ExponentTable t;
  t.alpha = alpha;
  t.delta = delta;
  t.d1 = d1;
  t.d2 = d2;
  t.q = q;
  t.choice = choice;

  t.varsigma = alpha / (4.0 + alpha);
  t.gamma_VAL = 2.0 * alpha * delta / ((4.0 + alpha) * (2.0 + 2.0 * delta + d2));
  t.gamma_lip = alpha * delta / (alpha * delta + 2.0 * d2);
  t.gamma_NA = alpha * delta / (2.0 + alpha * delta);
  t.gamma_bdd = 1.0 / (1.0 + 2.0 * d2);
  t.rho_exponent = (2.0 + alpha) / (4.0 + alpha);
  t.q_min_bdd = (4.0 + alpha) * (4.0 + d2) * (1.0 + d1 + d2) / (2.0 * alpha);
  t.q_min_reg = (1.0 + 2.0 * d2) * (1.0 + 2.0 * d2);

  switch (choice) {
    case GammaChoice::val: t.gamma_selected = t.gamma_VAL; break;
    case GammaChoice::lip: t.gamma_selected = t.gamma_lip; break;
    case GammaChoice::na: t.gamma_selected = t.gamma_NA; break;
  }

  const Real D = 1.0 + d1 + d2;
  t.kappa = D / (D - 2.0 * t.gamma_selected);
  t.q_threshold = D / t.gamma_selected;  // equals 2 kappa/(kappa-1)

  if (!(q > t.q_threshold)) {
    std::string msg = "exponent_table: threshold violated: ";
    if (choice == GammaChoice::lip && alpha == 1.0 && delta == 1.0)
      msg += "require q > (1+2d)^2 = " + std::to_string(t.q_min_reg);
    else if (choice == GammaChoice::val && delta == 1.0)
      msg += "require q > (4+alpha)(4+d2)(1+d1+d2)/(2 alpha) = " + std::to_string(t.q_min_bdd);
    else
      msg += "require q > (1+d1+d2)/gamma = " + std::to_string(t.q_threshold);
    msg += " (got q = " + std::to_string(q) + ")";
    throw ThresholdError(msg);
  }

  t.theta = t.kappa / ((t.kappa - 1.0) * q);
  if (!(t.theta > 0 && t.theta < 1))
    throw ThresholdError("exponent_table: theta in (0,1) requires q > kappa/(kappa-1)");
  t.vartheta = 1.0 / (1.0 - t.theta);
  return t;
}

// ---------------------------------------------------------------------------
// Velocity averages
// ---------------------------------------------------------------------------

struct VelocityWeight {
  Vec center;
  Real radius = 1.0;  // support in the box {|v_a - center_a| < radius}
  std::function<Real(const Vec&)> eval;
};

inline VelocityWeight bump_weight(int d, Real radius = 0.8, Real scale = 1.0) {
  VelocityWeight w;
  w.center = Vec::Zero(d);
  w.radius = radius;
  w.eval = [d, radius, scale, c = w.center](const Vec& v) {
    Real p = scale;
    for (int a = 0; a < d; ++a) p *= smooth_bump((v[a] - c[a]) / radius);
    return p;
  };
  return w;
}

namespace detail {

inline Real v_quad_weight(const GridSpec& g, long kf) {
  if (g.periodic_v) return std::pow(g.dv(), g.d);
  Real w = 1.0;
  const int nv = g.nv;
  auto axis_w = [&](int k) { return (k == 0 || k == nv - 1) ? 0.5 : 1.0; };
  if (g.d == 1) {
    w = axis_w(static_cast<int>(kf));
  } else {
    w = axis_w(static_cast<int>(kf / nv)) * axis_w(static_cast<int>(kf % nv));
  }
  return w * std::pow(g.dv(), g.d);
}

}  // namespace detail

// Trapezoidal v-average per (t, x): h_psi(t,x) = int h psi dv.
inline SpaceTimeField velocity_average(const ScalarField& h, const VelocityWeight& psi) {
  const GridSpec& g = h.grid;
  for (int a = 0; a < g.d; ++a) {
    if (psi.center[a] - psi.radius < g.v_lo - 1e-12 ||
        psi.center[a] + psi.radius > g.v_hi + 1e-12)
      throw DomainError("velocity_average: psi support exceeds the v grid");
  }
  SpaceTimeField out = SpaceTimeField::like(g);
  std::vector<Real> wpsi(g.nv_flat());
  for (long kf = 0; kf < g.nv_flat(); ++kf)
    wpsi[kf] = detail::v_quad_weight(g, kf) * psi.eval(g.v_point(kf));
  for (int it = 0; it < g.nt; ++it)
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      Real acc = 0;
      for (long kf = 0; kf < g.nv_flat(); ++kf) acc += wpsi[kf] * h.at(it, jf, kf);
      out.at(it, jf) = acc;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Fractional Sobolev norm over (t, x) by DFT
// ---------------------------------------------------------------------------

enum class SobolevConvention { homogeneous_plus_L2, inhomogeneous };

namespace detail {

struct FreqGrid {
  Real period_t, period_x;
  int nt, nx, d;
  Real tau(int i) const { return 2.0 * kPi * signed_freq_index(i, nt) / period_t; }
  Real xi_axis(int j, int) const { return 2.0 * kPi * signed_freq_index(j, nx) / period_x; }
  Real xi_norm(long jf) const {
    if (d == 1) return std::abs(xi_axis(static_cast<int>(jf), 0));
    const Real x0 = xi_axis(static_cast<int>(jf / nx), 0);
    const Real x1 = xi_axis(static_cast<int>(jf % nx), 1);
    return std::hypot(x0, x1);
  }
};

inline FreqGrid freq_grid(const SpaceTimeField& u) {
  FreqGrid fg;
  fg.nt = u.nt;
  fg.nx = u.nx;
  fg.d = u.d;
  fg.period_t = u.nt * u.dt();
  fg.period_x = u.periodic_x ? (u.x_hi - u.x_lo) : u.nx * u.dx();
  return fg;
}

inline std::vector<int> tx_dims(const SpaceTimeField& u) {
  std::vector<int> dims{u.nt, u.nx};
  if (u.d == 2) dims.push_back(u.nx);
  return dims;
}

}  // namespace detail

inline Real fractional_sobolev_norm(const SpaceTimeField& u, Real varsigma,
                                    SobolevConvention conv = SobolevConvention::homogeneous_plus_L2,
                                    const Taper& taper = {}) {
  const CArray hat = dft_nd(windowed_complex(u, taper), detail::tx_dims(u));
  const auto fg = detail::freq_grid(u);
  const Real cellvol = u.dt() * std::pow(u.dx(), u.d);
  const Real scale = cellvol / static_cast<Real>(u.size());
  Real acc = 0;
  for (int it = 0; it < u.nt; ++it) {
    const Real tau = std::abs(fg.tau(it));
    for (long jf = 0; jf < u.nx_flat(); ++jf) {
      const Real xin = fg.xi_norm(jf);
      const Real p = std::norm(hat[static_cast<long>(it) * u.nx_flat() + jf]);
      if (conv == SobolevConvention::homogeneous_plus_L2)
        acc += p * (std::pow(tau + xin, 2.0 * varsigma) + 1.0);
      else
        acc += p * std::pow(1.0 + tau + xin, 2.0 * varsigma);
    }
  }
  return std::sqrt(acc * scale);
}

// ---------------------------------------------------------------------------
// Microlocal decomposition of I(tau, xi) = int h^ psi dv with the canonical
// cutoff zeta and the schedule m(xi) = 1 for |xi| <= 1, |xi|^rho above.
// ---------------------------------------------------------------------------

struct MicrolocalResult {
  CArray I, I1, I2;             // over (tau, xi), t slowest
  Real partition_max_err = 0;   // max |I - (I1 + I2)|
  Real i1_outside_max = 0;      // max |I1| where |tau| > m + sup|b| |xi|
  Real i1_bound_constant = 0;   // empirical constant of the I1 bound
  Real sup_b = 0;
};

inline MicrolocalResult microlocal_split(const ScalarField& h, const VelocityField& b,
                                         const VelocityWeight& psi, const ExponentTable& table,
                                         const Taper& taper = {}) {
  const GridSpec& g = h.grid;
  const long nxf = g.nx_flat();
  const long nvf = g.nv_flat();
  const long ntx = static_cast<long>(g.nt) * nxf;
  const Real rho = table.rho_exponent;

  // per-v transform over (t, x)
  std::vector<CArray> hat(nvf);
  {
    SpaceTimeField slice = SpaceTimeField::like(g);
    for (long kf = 0; kf < nvf; ++kf) {
      for (int it = 0; it < g.nt; ++it)
        for (long jf = 0; jf < nxf; ++jf) slice.at(it, jf) = h.at(it, jf, kf);
      hat[kf] = dft_nd(windowed_complex(slice, taper), detail::tx_dims(slice));
    }
  }

  std::vector<Real> wq(nvf), psiv(nvf), bdotbuf(nvf);
  Real psi_inf = 0, sup_b = 0;
  std::vector<Vec> bv(nvf);
  for (long kf = 0; kf < nvf; ++kf) {
    wq[kf] = detail::v_quad_weight(g, kf);
    psiv[kf] = psi.eval(g.v_point(kf));
    psi_inf = std::max(psi_inf, std::abs(psiv[kf]));
    bv[kf] = b(g.v_point(kf));
    sup_b = std::max(sup_b, bv[kf].norm());
  }

  SpaceTimeField proto = SpaceTimeField::like(g);
  const auto fg = detail::freq_grid(proto);

  MicrolocalResult res;
  res.sup_b = sup_b;
  res.I = CArray::Zero(ntx);
  res.I1 = CArray::Zero(ntx);
  res.I2 = CArray::Zero(ntx);

  for (int it = 0; it < g.nt; ++it) {
    const Real tau = fg.tau(it);
    for (long jf = 0; jf < nxf; ++jf) {
      const Real xin = fg.xi_norm(jf);
      const Real m = xin <= 1.0 ? 1.0 : std::pow(xin, rho);
      Vec xi(g.d);
      if (g.d == 1) {
        xi[0] = fg.xi_axis(static_cast<int>(jf), 0);
      } else {
        xi[0] = fg.xi_axis(static_cast<int>(jf / g.nx), 0);
        xi[1] = fg.xi_axis(static_cast<int>(jf % g.nx), 1);
      }
      const long idx = static_cast<long>(it) * nxf + jf;
      Cplx I(0, 0), I1(0, 0), I2(0, 0);
      Real hat_l2sq = 0;
      for (long kf = 0; kf < nvf; ++kf) {
        const Cplx hv = hat[kf][idx];
        const Real z = zeta_cutoff((tau + bv[kf].dot(xi)) / m);
        const Cplx base = wq[kf] * psiv[kf] * hv;
        I += base;
        I1 += base * z;
        I2 += base * (1.0 - z);
        hat_l2sq += wq[kf] * std::norm(hv);
      }
      res.I[idx] = I;
      res.I1[idx] = I1;
      res.I2[idx] = I2;
      res.partition_max_err = std::max(res.partition_max_err, std::abs(I - (I1 + I2)));
      if (std::abs(tau) > m + sup_b * xin)
        res.i1_outside_max = std::max(res.i1_outside_max, std::abs(I1));
      if (xin > 0 && hat_l2sq > 1e-280 && psi_inf > 0) {
        const Real denom = psi_inf * psi_inf * hat_l2sq * std::pow(m / xin, table.alpha);
        res.i1_bound_constant = std::max(res.i1_bound_constant, std::norm(I1) / denom);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Free-transport averaging-gain experiment
//
// For each band limit N, h(t,x,v) = phi_N(x - b(v) t) psi~(v) with phi_N
// seeded band-limited unit-variance noise, so g0 = g1 = 0 exactly, and the
// gain ratio ||h_psi||_{H^varsigma} / ||h||_{L^2} is recorded.
// d = 1 only; x extent must be [0, 1) periodic.
// ---------------------------------------------------------------------------

struct AveragingGainRow {
  int band_limit = 0;
  Real h_l2 = 0;
  Real h_hs_per_v = 0;
  Real avg_hs = 0;
  Real ratio = 0;
};

struct BandNoise {
  std::vector<Real> a, b;  // cos/sin coefficients for modes 1..N
};

inline BandNoise make_band_noise(int N, std::uint64_t seed) {
  SplitRng rng(seed, "band_noise_" + std::to_string(N));
  BandNoise f;
  f.a.resize(N);
  f.b.resize(N);
  Real var = 0;
  for (int k = 0; k < N; ++k) {
    f.a[k] = rng.normal();
    f.b[k] = rng.normal();
    var += 0.5 * (f.a[k] * f.a[k] + f.b[k] * f.b[k]);
  }
  const Real s = 1.0 / std::sqrt(var);
  for (int k = 0; k < N; ++k) {
    f.a[k] *= s;
    f.b[k] *= s;
  }
  return f;
}

inline Real eval_band_noise(const BandNoise& f, Real x) {
  Real acc = 0;
  for (std::size_t k = 0; k < f.a.size(); ++k) {
    const Real ph = 2.0 * kPi * (k + 1) * x;
    acc += f.a[k] * std::cos(ph) + f.b[k] * std::sin(ph);
  }
  return acc;
}

inline std::vector<AveragingGainRow> averaging_gain_experiment(
    const VelocityField& b, const std::vector<int>& band_limits, const VelocityWeight& psi,
    Real varsigma, std::uint64_t seed, const GridSpec& grid, bool taper_t = true) {
  if (grid.d != 1) throw ConfigError("averaging_gain_experiment: d = 1 only");
  if (!grid.periodic_x || std::abs(grid.x_lo) > 1e-12 || std::abs(grid.x_hi - 1.0) > 1e-12)
    throw ConfigError("averaging_gain_experiment: x must be the periodic unit interval");
  const int nt = grid.nt, nx = grid.nx, nv = grid.nv;
  if (2 * *std::max_element(band_limits.begin(), band_limits.end()) >= nx)
    throw ConfigError("averaging_gain_experiment: nx must resolve 2N modes");

  // fixed v-profile of h, strictly inside the v domain
  const Real vr = 0.8 * 0.5 * (grid.v_hi - grid.v_lo);
  const Real vc = 0.5 * (grid.v_hi + grid.v_lo);
  auto psi_tilde = [vr, vc](Real v) { return smooth_bump((v - vc) / vr); };

  Eigen::FFT<Real> fft;
  const Taper taper{taper_t, false, 0.1};

  std::vector<AveragingGainRow> rows;
  for (int N : band_limits) {
    const BandNoise noise = make_band_noise(N, seed);
    // half spectrum c_k = (a_k - i b_k)/2 at mode k, conjugate at nx - k
    std::vector<Cplx> spec0(nx, Cplx(0, 0));
    for (int k = 1; k <= N; ++k) {
      const Cplx c(0.5 * noise.a[k - 1], -0.5 * noise.b[k - 1]);
      spec0[k] = c;
      spec0[nx - k] = std::conj(c);
    }

    SpaceTimeField havg = SpaceTimeField::like(grid);
    SpaceTimeField hslice = SpaceTimeField::like(grid);
    Real h_sq = 0, per_v_sq = 0;
    std::vector<Cplx> spec(nx), line(nx);

    for (int kf = 0; kf < nv; ++kf) {
      const Real v = grid.v_at(kf);
      const Real bv = b.scalar(v);
      const Real pt = psi_tilde(v);
      const Real wq = detail::v_quad_weight(grid, kf);
      const Real wpsi = wq * psi.eval(grid.v_point(kf));
      for (int it = 0; it < nt; ++it) {
        const Real shift = bv * grid.t_at(it);
        for (int k = 0; k < nx; ++k) {
          const int kk = signed_freq_index(k, nx);
          const Real ph = -2.0 * kPi * kk * shift;
          spec[k] = spec0[k] * Cplx(std::cos(ph), std::sin(ph)) * static_cast<Real>(nx);
        }
        fft.inv(line, spec);  // Eigen inv scales by 1/nx
        for (int j = 0; j < nx; ++j) {
          const Real hval = pt * line[j].real();
          hslice.at(it, j) = hval;
          havg.at(it, j) += wpsi * hval;
          h_sq += hval * hval * wq;
        }
      }
      const Real hs_v = fractional_sobolev_norm(hslice, varsigma,
                                                SobolevConvention::homogeneous_plus_L2, taper);
      per_v_sq += wq * hs_v * hs_v;
    }

    AveragingGainRow row;
    row.band_limit = N;
    row.h_l2 = std::sqrt(h_sq * grid.dt() * grid.dx());
    row.h_hs_per_v = std::sqrt(per_v_sq);
    row.avg_hs = fractional_sobolev_norm(havg, varsigma,
                                         SobolevConvention::homogeneous_plus_L2, taper);
    row.ratio = row.avg_hs / row.h_l2;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Mollifier utilities (radial profile rho_eps and the transfer scale)
// ---------------------------------------------------------------------------

inline Real mollifier_rho(const Vec& v, Real eps, int d) {
  // normalized so that the d = 1 profile integrates to 1
  static const Real norm1 = 1.2069003224378743;  // int of smooth_bump on (-1,1)
  Real p = 1.0;
  for (int a = 0; a < d; ++a) p *= smooth_bump(v[a] / eps) / (norm1 * eps);
  return p;
}

// epsilon(tau, xi) = (|tau| + |xi|)^{-gamma/delta}
inline Real mollifier_scale(Real tau, Real xi_norm, Real gamma, Real delta) {
  const Real s = std::abs(tau) + xi_norm;
  return s > 0 ? std::pow(s, -gamma / delta) : 1.0;
}

}  // namespace kfp

#endif
