#ifndef KFP_COEFFS_HPP
#define KFP_COEFFS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Velocity field b : R^d -> R^d with optional closed-form Jacobian.
// ---------------------------------------------------------------------------

struct VelocityField {
  int d = 1;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jac;        // empty -> central differences
  std::optional<Real> domain_radius;         // restriction |v| < R, if any

  Vec operator()(const Vec& v) const { return eval(v); }

  Real scalar(Real v) const {
    Vec w(1);
    w[0] = v;
    return eval(w)[0];
  }

  // Jacobian; falls back to central differences at the given step.
  Mat jacobian(const Vec& v, Real h = 1e-4) const {
    if (jac) return jac(v);
    Mat J(d, d);
    for (int a = 0; a < d; ++a) {
      Vec vp = v, vm = v;
      vp[a] += h;
      vm[a] -= h;
      J.col(a) = (eval(vp) - eval(vm)) / (2 * h);
    }
    return J;
  }

  void require_contains(const Vec& center, Real r) const {
    if (domain_radius && center.norm() + r > *domain_radius + 1e-12)
      throw DomainError("velocity field: ball B_r(v0) exceeds the field's domain");
  }
};

inline VelocityField make_free_streaming(int d) {
  VelocityField b;
  b.d = d;
  b.eval = [](const Vec& v) { return v; };
  b.jac = [d](const Vec&) { return Mat::Identity(d, d); };
  return b;
}

inline VelocityField make_relativistic(int d) {
  VelocityField b;
  b.d = d;
  b.eval = [](const Vec& v) { return Vec(v / std::sqrt(1.0 + v.squaredNorm())); };
  b.jac = [d](const Vec& v) {
    const Real s = 1.0 + v.squaredNorm();
    return Mat((Mat::Identity(d, d) * s - v * v.transpose()) / std::pow(s, 1.5));
  };
  return b;
}

inline VelocityField make_cubic(int d) {
  VelocityField b;
  b.d = d;
  b.eval = [](const Vec& v) { return Vec(v.array().cube()); };
  b.jac = [](const Vec& v) { return Mat((3.0 * v.array().square()).matrix().asDiagonal()); };
  return b;
}

inline VelocityField make_constant(int d, const Vec& c) {
  VelocityField b;
  b.d = d;
  b.eval = [c](const Vec&) { return c; };
  b.jac = [d](const Vec&) { return Mat::Zero(d, d); };
  return b;
}

// Componentwise polynomial b_i(v) = sum_k c_k v_i^k.
inline VelocityField make_polynomial(int d, const std::vector<Real>& coeffs) {
  VelocityField b;
  b.d = d;
  b.eval = [coeffs, d](const Vec& v) {
    Vec out(d);
    for (int a = 0; a < d; ++a) {
      Real acc = 0;
      for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * v[a] + coeffs[k];
      out[a] = acc;
    }
    return out;
  };
  b.jac = [coeffs, d](const Vec& v) {
    Mat J = Mat::Zero(d, d);
    for (int a = 0; a < d; ++a) {
      Real acc = 0;
      for (std::size_t k = coeffs.size(); k-- > 1;)
        acc = acc * v[a] + static_cast<Real>(k) * coeffs[k];
      J(a, a) = acc;
    }
    return J;
  };
  return b;
}

// ---------------------------------------------------------------------------
// Coefficient set of the equation: function-backed fields plus the
// ellipticity window [lambda, Lambda].
// ---------------------------------------------------------------------------

using MatrixFieldFn = std::function<Mat(Real t, const Vec& x, const Vec& v)>;
using VectorFieldFn = std::function<Vec(Real t, const Vec& x, const Vec& v)>;
using ScalarFieldFn = std::function<Real(Real t, const Vec& x, const Vec& v)>;

struct CoefficientSet {
  int d = 1;
  VelocityField b;
  MatrixFieldFn A;
  VectorFieldFn B;
  ScalarFieldFn s;
  Real lambda = 1.0;
  Real Lambda = 1.0;

  static CoefficientSet isotropic(int d, VelocityField bfield, Real a = 1.0) {
    CoefficientSet c;
    c.d = d;
    c.b = std::move(bfield);
    c.A = [a, d](Real, const Vec&, const Vec&) { return Mat(Mat::Identity(d, d) * a); };
    c.B = [d](Real, const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
    c.s = [](Real, const Vec&, const Vec&) { return 0.0; };
    c.lambda = a;
    c.Lambda = a;
    return c;
  }
};

// Checks the ellipticity window, |B| bound and symmetry of A on every node of
// the grid. Throws InvariantError naming the first violation.
inline void validate_coefficients(const CoefficientSet& c, const GridSpec& g) {
  if (!(c.lambda > 0) || c.lambda > c.Lambda)
    throw InvariantError("coefficients: ellipticity bounds require 0 < lambda <= Lambda");
  Eigen::SelfAdjointEigenSolver<Mat> es;
  for (int it = 0; it < g.nt; ++it) {
    const Real t = g.t_at(it);
    for (long jf = 0; jf < g.nx_flat(); ++jf) {
      const Vec x = g.x_point(jf);
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        const Vec v = g.v_point(kf);
        const Mat A = c.A(t, x, v);
        if ((A - A.transpose()).norm() >= 1e-12)
          throw InvariantError("coefficients: A must be symmetric at every grid point");
        es.compute(A, Eigen::EigenvaluesOnly);
        const Real lo = es.eigenvalues().minCoeff();
        const Real hi = es.eigenvalues().maxCoeff();
        if (lo < c.lambda - 1e-12 || hi > c.Lambda + 1e-12)
          throw InvariantError(
              "coefficients: eigenvalues of A must lie in [lambda, Lambda] at every grid point");
        if (c.B(t, x, v).norm() > c.Lambda + 1e-12)
          throw InvariantError("coefficients: |B| must not exceed Lambda");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Sublevel-set measures of the transport symbol and the power-law fit.
// ---------------------------------------------------------------------------

struct Ball {
  Vec center;
  Real radius = 1.0;
};

inline Ball unit_ball(int d) { return Ball{Vec::Zero(d), 1.0}; }

struct NondegReport {
  Real K = 0;
  Real alpha = 1.0;
  std::vector<std::pair<Real, Real>> samples;  // (epsilon, sup measure)
  Real fit_residual = 0;
  bool degenerate = false;
  Ball ball;

  // The measured bound with the documented fit tolerance.
  bool satisfies_bound(Real fit_slack = 0.10) const {
    if (degenerate) return true;
    for (const auto& [eps, m] : samples)
      if (m > K * std::pow(eps, alpha) * (1.0 + fit_slack)) return false;
    return true;
  }
};

namespace detail {

// Midpoint-cell centers of the ball's bounding box, restricted to the ball.
// d=1 keeps every midpoint of [v0-r, v0+r]; d=2 keeps centers with |v-v0|<r.
// Returns the symbol samples t_i = b(v_i)·nu and the cell volume.
inline void symbol_samples(const VelocityField& b, const Ball& ball, const Vec& nu,
                           int resolution, std::vector<Real>& out, Real& cell_vol) {
  const int n = resolution;
  const Real r = ball.radius;
  const Real h = 2.0 * r / n;
  out.clear();
  if (b.d == 1) {
    out.reserve(n);
    Vec v(1);
    for (int i = 0; i < n; ++i) {
      v[0] = ball.center[0] - r + (i + 0.5) * h;
      out.push_back(b(v)[0] * nu[0]);
    }
    cell_vol = h;
  } else {
    out.reserve(static_cast<std::size_t>(n) * n);
    Vec v(2);
    for (int i = 0; i < n; ++i) {
      v[0] = ball.center[0] - r + (i + 0.5) * h;
      for (int j = 0; j < n; ++j) {
        v[1] = ball.center[1] - r + (j + 0.5) * h;
        if ((v - ball.center).norm() < r) out.push_back(b(v).dot(nu));
      }
    }
    cell_vol = h * h;
  }
}

inline std::vector<Vec> direction_samples(int d, int count) {
  std::vector<Vec> dirs;
  if (d == 1) {
    Vec p(1), m(1);
    p[0] = 1.0;
    m[0] = -1.0;
    dirs = {p, m};
  } else {
    dirs.reserve(count);
    for (int i = 0; i < count; ++i) {
      const Real phi = 2.0 * kPi * i / count;
      Vec nu(2);
      nu << std::cos(phi), std::sin(phi);
      dirs.push_back(nu);
    }
  }
  return dirs;
}

}  // namespace detail

// Lebesgue measure of {v in B_r(v0) : |mu + b(v)·nu| <= eps}, midpoint rule.
inline Real sublevel_measure(const VelocityField& b, const Ball& ball, Real mu, const Vec& nu,
                             Real eps, int resolution = 4096) {
  if (std::abs(nu.norm() - 1.0) > 1e-10)
    throw InputError("sublevel_measure: nu must have unit Euclidean norm");
  if (!(eps > 0)) throw InputError("sublevel_measure: epsilon must be positive");
  b.require_contains(ball.center, ball.radius);
  std::vector<Real> t;
  Real cell_vol = 0;
  detail::symbol_samples(b, ball, nu, resolution, t, cell_vol);
  long count = 0;
  for (Real ti : t)
    if (std::abs(mu + ti) <= eps) ++count;
  return count * cell_vol;
}

// Sweeps (mu, nu) for each epsilon, records the sup measure and fits
// log(sup) = log K + alpha log(eps) over the non-saturated samples.
inline NondegReport estimate_nondegeneracy(const VelocityField& b, const Ball& ball,
                                           std::vector<Real> epsilon_grid,
                                           int direction_count = 64, int resolution = 4096,
                                           int mu_points = 512) {
  if (epsilon_grid.size() < 4)
    throw InputError("estimate_nondegeneracy: need at least 4 epsilon values");
  if (b.d == 2 && direction_count < 8)
    throw InputError("estimate_nondegeneracy: d = 2 needs at least 8 direction samples");
  b.require_contains(ball.center, ball.radius);
  std::sort(epsilon_grid.begin(), epsilon_grid.end(), std::greater<>());

  const auto dirs = detail::direction_samples(b.d, direction_count);

  // Per epsilon: sup over (mu, nu) of the midpoint count. Counting
  // |mu + t_i| <= eps on sorted symbol values t_i is exactly the midpoint
  // quadrature of sublevel_measure, evaluated by two binary searches.
  std::vector<long> sup_count(epsilon_grid.size(), 0);
  long ball_count = 0;
  Real cell_vol = 0;

  std::vector<Real> t;
  for (const Vec& nu : dirs) {
    detail::symbol_samples(b, ball, nu, resolution, t, cell_vol);
    std::sort(t.begin(), t.end());
    ball_count = static_cast<long>(t.size());

    // mu grid: uniform on [-sup|b|-1, sup|b|+1] plus the critical values
    // -t_i (subsampled to at most 4096 of them), where the sup is attained.
    const Real bmax = std::max(std::abs(t.front()), std::abs(t.back()));
    std::vector<Real> mus;
    mus.reserve(mu_points + 4096);
    for (int i = 0; i < mu_points; ++i)
      mus.push_back(-bmax - 1.0 + (2.0 * bmax + 2.0) * i / (mu_points - 1));
    const std::size_t stride = std::max<std::size_t>(1, t.size() / 4096);
    for (std::size_t i = 0; i < t.size(); i += stride) mus.push_back(-t[i]);

    for (std::size_t e = 0; e < epsilon_grid.size(); ++e) {
      const Real eps = epsilon_grid[e];
      for (Real mu : mus) {
        auto lo = std::lower_bound(t.begin(), t.end(), -mu - eps);
        auto hi = std::upper_bound(t.begin(), t.end(), -mu + eps);
        sup_count[e] = std::max(sup_count[e], static_cast<long>(hi - lo));
      }
    }
  }

  NondegReport rep;
  rep.ball = ball;
  for (std::size_t e = 0; e < epsilon_grid.size(); ++e)
    rep.samples.emplace_back(epsilon_grid[e], sup_count[e] * cell_vol);

  const Real ball_measure = ball_count * cell_vol;
  rep.degenerate = rep.samples.back().second > 0.5 * ball_measure;

  // Exclude saturated epsilons (sup equals the whole discrete ball).
  std::vector<Real> lx, ly;
  for (std::size_t e = 0; e < epsilon_grid.size(); ++e) {
    if (sup_count[e] >= ball_count) continue;
    if (sup_count[e] == 0) continue;
    lx.push_back(std::log(epsilon_grid[e]));
    ly.push_back(std::log(sup_count[e] * cell_vol));
  }
  if (lx.size() >= 2) {
    const LineFit f = fit_line(lx, ly);
    rep.alpha = std::clamp(f.slope, 1e-9, 1.0);
    rep.K = std::exp(f.intercept);
    rep.fit_residual = f.rms_residual;
  } else {
    // No usable power-law samples; only the degenerate flag is meaningful.
    rep.alpha = 1.0;
    rep.K = 0.0;
    rep.fit_residual = 0.0;
    rep.degenerate = true;
  }
  return rep;
}

// sup over the ball of the operator norm of (Db)^{-1}; nullopt marks a
// singular Jacobian (smallest singular value below 1e-10). Samples an
// endpoint-inclusive lattice so symmetry points like v = 0 are hit exactly.
inline std::optional<Real> db_inverse_norm_bound(const VelocityField& b, const Ball& ball,
                                                 int resolution = 4096) {
  b.require_contains(ball.center, ball.radius);
  const Real r = ball.radius;
  const Real step_fd = r * 1e-4;
  Real sup = 0;
  const int n = resolution + 1;  // inclusive endpoints, odd count hits center
  auto visit = [&](const Vec& v) -> bool {
    Eigen::JacobiSVD<Mat> svd(b.jacobian(v, step_fd));
    const Real smin = svd.singularValues().minCoeff();
    if (smin < 1e-10) return false;
    sup = std::max(sup, 1.0 / smin);
    return true;
  };
  if (b.d == 1) {
    Vec v(1);
    for (int i = 0; i < n; ++i) {
      v[0] = ball.center[0] - r + 2.0 * r * i / (n - 1);
      if (!visit(v)) return std::nullopt;
    }
  } else {
    const int m = std::max(32, static_cast<int>(std::sqrt(static_cast<Real>(resolution)))) + 1;
    Vec v(2);
    for (int i = 0; i < m; ++i) {
      v[0] = ball.center[0] - r + 2.0 * r * i / (m - 1);
      for (int j = 0; j < m; ++j) {
        v[1] = ball.center[1] - r + 2.0 * r * j / (m - 1);
        if ((v - ball.center).norm() > r) continue;
        if (!visit(v)) return std::nullopt;
      }
    }
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Kinetic scaling
// ---------------------------------------------------------------------------

struct KineticPoint {
  Real t = 0;
  Vec x;
  Vec v;
};

// The zoom map (t,x,v) = (t0 + r^2 t~, x0 + r^3 x~ + r^2 t~ b(v0), v0 + r v~).
inline KineticPoint zoom_map(const KineticPoint& z0, Real r, const Vec& b_v0, Real tt,
                             const Vec& xt, const Vec& vt) {
  KineticPoint z;
  z.t = z0.t + r * r * tt;
  z.x = z0.x + r * r * r * xt + r * r * tt * b_v0;
  z.v = z0.v + r * vt;
  return z;
}

inline bool cylinder_membership(const KineticPoint& z, const KineticPoint& z0, Real r,
                                const Vec& b_v0) {
  if (!(z.t > z0.t - r * r && z.t <= z0.t)) return false;
  if ((z.x - z0.x - (z.t - z0.t) * b_v0).norm() >= r * r * r) return false;
  return (z.v - z0.v).norm() < r;
}

// Zoomed coefficients: b_r(v~) = [b(v0 + r v~) - b(v0)]/r, A~ = A o T,
// B~ = r B o T, s~ = r^2 s o T; the ellipticity window carries over.
inline CoefficientSet rescale_coefficients(const CoefficientSet& c, const KineticPoint& z0,
                                           Real r) {
  if (!(r > 0 && r <= 1)) throw InputError("rescale_coefficients: r must lie in (0, 1]");
  c.b.require_contains(z0.v, r);
  const Vec b_v0 = c.b(z0.v);

  CoefficientSet out;
  out.d = c.d;
  out.lambda = c.lambda;
  out.Lambda = c.Lambda;

  const VelocityField base = c.b;
  const Vec v0 = z0.v;
  out.b.d = c.d;
  out.b.eval = [base, v0, b_v0, r](const Vec& vt) { return Vec((base(v0 + r * vt) - b_v0) / r); };
  out.b.jac = [base, v0, r](const Vec& vt) { return base.jacobian(v0 + r * vt, r * 1e-4); };
  if (base.domain_radius)
    out.b.domain_radius = (*base.domain_radius - v0.norm()) / r;

  const KineticPoint zc = z0;
  auto mapped = [zc, b_v0, r](Real tt, const Vec& xt, const Vec& vt) {
    return zoom_map(zc, r, b_v0, tt, xt, vt);
  };
  out.A = [A = c.A, mapped](Real tt, const Vec& xt, const Vec& vt) {
    const KineticPoint z = mapped(tt, xt, vt);
    return A(z.t, z.x, z.v);
  };
  out.B = [B = c.B, mapped, r](Real tt, const Vec& xt, const Vec& vt) {
    const KineticPoint z = mapped(tt, xt, vt);
    return Vec(r * B(z.t, z.x, z.v));
  };
  out.s = [s = c.s, mapped, r](Real tt, const Vec& xt, const Vec& vt) {
    const KineticPoint z = mapped(tt, xt, vt);
    return r * r * s(z.t, z.x, z.v);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Geometry constants of the zoomed intermediate-value argument
// ---------------------------------------------------------------------------

struct GeometryConstants {
  Real sigma = 0;        // half the guaranteed drift-ball radius
  Real omega = 0;        // cylinder scale
  Real s0 = 0.125;       // time lag
  Real sigma_min_Db = 0; // smallest singular value of Db(v0)
};

// sigma = sigma_min(Db)/8 makes {Db(v0) w : w in B_{1/4}} contain B_{2 sigma};
// omega = sqrt(sigma s0 / (2 + sigma)) with s0 = 1/8.
inline GeometryConstants geometry_constants(const Mat& db_at_v0) {
  Eigen::JacobiSVD<Mat> svd(db_at_v0);
  const Real smin = svd.singularValues().minCoeff();
  if (smin < 1e-10)
    throw GeometryError("geometry_constants: Db(v0) is singular within tolerance 1e-10");
  GeometryConstants gc;
  gc.sigma_min_Db = smin;
  gc.sigma = smin / 8.0;
  gc.s0 = 0.125;
  gc.omega = std::sqrt(gc.sigma * gc.s0 / (2.0 + gc.sigma));
  return gc;
}

}  // namespace kfp

#endif
