// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Every tolerance is pinned in code next to its check.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kfp/averaging.hpp"
#include "kfp/coeffs.hpp"
#include "kfp/degiorgi.hpp"
#include "kfp/holder.hpp"
#include "kfp/io.hpp"
#include "kfp/solver.hpp"
#include "kfp_cli.hpp"

using namespace kfp;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

GridSpec box(int nt, int nx, int nv, double t0, double t1, bool periodic_v = false) {
  GridSpec g;
  g.d = 1;
  g.nt = nt;
  g.nx = nx;
  g.nv = nv;
  g.t0 = t0;
  g.t1 = t1;
  g.x_lo = -1.0;
  g.x_hi = 1.0;
  g.v_lo = -1.0;
  g.v_hi = 1.0;
  g.periodic_x = true;
  g.periodic_v = periodic_v;
  return g;
}

Array gaussian_init(const GridSpec& g) {
  Array f0(g.slice_size());
  for (long jf = 0; jf < g.nx_flat(); ++jf)
    for (long kf = 0; kf < g.nv_flat(); ++kf) {
      const double x = g.x_at(static_cast<int>(jf));
      const double v = g.v_at(static_cast<int>(kf));
      f0[jf * g.nv_flat() + kf] = std::exp(-2.0 * (x * x + v * v));
    }
  return f0;
}

CoefficientSet checkerboard_instance(const GridSpec& g) {
  CoefficientSet c = CoefficientSet::isotropic(1, make_free_streaming(1));
  c.lambda = 0.5;
  c.Lambda = 2.0;
  const double cell_x = 4 * g.dx(), cell_v = 4 * g.dv();
  c.A = [cell_x, cell_v](Real, const Vec& x, const Vec& v) {
    const long p = static_cast<long>(std::floor((x[0] + 1.0) / cell_x)) +
                   static_cast<long>(std::floor((v[0] + 1.0) / cell_v));
    return Mat(Mat::Identity(1, 1) * (((p % 2 + 2) % 2) == 0 ? 0.5 : 2.0));
  };
  return c;
}

// ---------------------------------------------------------------------------

void criterion_1_exponents() {
  const ExponentTable t = exponent_table(1, 1, 1, 1, 10);
  bool ok = true;
  auto close = [&](double got, double want) {
    ok = ok && std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want));
  };
  close(t.varsigma, 0.2);
  close(t.gamma_VAL, 0.08);
  close(t.gamma_lip, 1.0 / 3.0);
  close(t.kappa, 9.0 / 7.0);
  close(t.q_min_reg, 9.0);
  close(t.q_min_bdd, 37.5);
  report(1, "exponent arithmetic", ok,
         "varsigma=" + fmt2(t.varsigma) + " kappa=" + fmt2(t.kappa) +
             " q_min_bdd=" + fmt2(t.q_min_bdd));
}

double criterion_2_nondegeneracy() {
  std::vector<double> eps;
  for (int i = 0; i < 8; ++i) eps.push_back(0.1 * std::pow(0.01, i / 7.0));

  const auto rep_v = estimate_nondegeneracy(make_free_streaming(1), unit_ball(1), eps, 2, 65536);
  const auto rep_c = estimate_nondegeneracy(make_cubic(1), unit_ball(1), eps, 2, 65536);
  const auto rep_0 = estimate_nondegeneracy(make_constant(1, Vec::Zero(1)), unit_ball(1),
                                            {0.1, 0.05, 0.01, 0.001}, 2, 4096);

  // 10^6-point brute-force oracle for two spot epsilons
  auto brute = [](auto b1d, double mu, double e) {
    const long n = 1000000;
    long cnt = 0;
    for (long i = 0; i < n; ++i) {
      const double v = -1.0 + 2.0 * (i + 0.5) / n;
      if (std::abs(mu + b1d(v)) <= e) ++cnt;
    }
    return cnt * 2.0 / n;
  };
  const bool oracle_ok =
      std::abs(brute([](double v) { return v; }, 0.0, 0.01) - 0.02) < 1e-4 &&
      std::abs(brute([](double v) { return v * v * v; }, 0.0, 0.001) - 0.2) < 1e-4;

  const bool ok = rep_v.alpha >= 0.95 && rep_v.alpha <= 1.05 && rep_v.K >= 1.8 &&
                  rep_v.K <= 2.2 && !rep_v.degenerate && rep_c.alpha >= 0.30 &&
                  rep_c.alpha <= 0.37 && rep_0.degenerate && oracle_ok &&
                  rep_v.satisfies_bound() && rep_c.satisfies_bound();
  report(2, "nondegeneracy estimator", ok,
         "v: alpha=" + fmt2(rep_v.alpha) + " K=" + fmt2(rep_v.K) +
             "; v^3: alpha=" + fmt2(rep_c.alpha) + "; const degenerate=" +
             (rep_0.degenerate ? "yes" : "no"));
  return rep_v.K;
}

void criterion_3_db() {
  const auto dv = db_inverse_norm_bound(make_free_streaming(1), unit_ball(1));
  const auto dr = db_inverse_norm_bound(make_relativistic(1), unit_ball(1));
  const auto dc = db_inverse_norm_bound(make_cubic(1), unit_ball(1));
  const bool ok = dv && std::abs(*dv - 1.0) <= 1e-12 && dr &&
                  std::abs(*dr - std::pow(2.0, 1.5)) <= 1e-3 && !dc;
  report(3, "Db characterization", ok,
         "v: " + (dv ? fmt2(*dv) : "singular") + "; relativistic: " +
             (dr ? fmt2(*dr) : "singular") + "; cubic: " + (dc ? fmt2(*dc) : "singular"));
}

GridSpec gain_grid() {
  GridSpec g;
  g.d = 1;
  g.nt = 64;
  g.nx = 2048;
  g.nv = 64;
  g.t0 = 0.0;
  g.t1 = 1.0;
  g.x_lo = 0.0;
  g.x_hi = 1.0;
  g.v_lo = -1.0;
  g.v_hi = 1.0;
  g.periodic_x = true;
  g.periodic_v = false;
  return g;
}

void criterion_4_averaging_gain() {
  const GridSpec g = gain_grid();
  const VelocityWeight psi = bump_weight(1, 0.7);
  const std::vector<int> bands{32, 64, 128, 256, 512};

  const auto rows_v = averaging_gain_experiment(make_free_streaming(1), bands, psi, 0.2, 1, g);
  double lo = 1e300, hi = 0;
  for (const auto& r : rows_v) {
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  const auto rows_c =
      averaging_gain_experiment(make_constant(1, Vec::Ones(1)), bands, psi, 0.2, 1, g);
  const double growth = rows_c.back().ratio / rows_c.front().ratio;

  // closed-form reduction predicts about 16^{0.2} = 1.74 for the degenerate
  // control; the finite t-window keeps the measured growth near 1.54
  const bool ok = hi / lo < 2.0 && growth >= 1.5;
  report(4, "averaging gain (desk scale)", ok,
         "nondegenerate spread=" + fmt2(hi / lo) + " (<2.0); degenerate growth=" +
             fmt2(growth) + " (>=1.5)");
}

void criterion_5_microlocal(double measured_K) {
  GridSpec g = gain_grid();
  g.nx = 256;  // desk scale for the per-(tau, xi) diagnostics
  g.nt = 48;
  g.nv = 48;
  const auto b = make_free_streaming(1);
  const VelocityWeight psi = bump_weight(1, 0.7);
  const ExponentTable table = exponent_table(1, 1, 1, 1, 10);
  const BandNoise noise = make_band_noise(24, 2);
  ScalarField h(g);
  for (long kf = 0; kf < g.nv_flat(); ++kf) {
    const double v = g.v_at(static_cast<int>(kf));
    const double pt = smooth_bump(v / 0.8);
    for (int it = 0; it < g.nt; ++it)
      for (long jf = 0; jf < g.nx_flat(); ++jf)
        h.at(it, jf, kf) =
            pt * eval_band_noise(noise, g.x_at(static_cast<int>(jf)) - v * g.t_at(it));
  }
  const MicrolocalResult res = microlocal_split(h, b, psi, table);
  const double iscale = std::max(1e-300, res.I.abs().maxCoeff());
  const double i1scale = std::max(1e-300, res.I1.abs().maxCoeff());
  const bool ok = res.partition_max_err <= 1e-12 * std::max(1.0, iscale) &&
                  res.i1_outside_max <= 1e-12 * i1scale &&
                  res.i1_bound_constant <= 1.1 * measured_K;
  report(5, "microlocal diagnostics", ok,
         "partition=" + fmt2(res.partition_max_err) + "; outside=" + fmt2(res.i1_outside_max) +
             "; bound const=" + fmt2(res.i1_bound_constant) + " (<=" + fmt2(1.1 * measured_K) +
             ")");
}

void criterion_6_solver() {
  bool ok = true;
  std::string detail;

  // transport closed form at nx = 256 with cubic interpolation
  {
    GridSpec g;
    g.d = 1;
    g.nt = 16;
    g.nx = 256;
    g.nv = 8;
    g.t0 = 0.0;
    g.t1 = 0.5;
    g.x_lo = 0.0;
    g.x_hi = 1.0;
    g.v_lo = -1.0;
    g.v_hi = 1.0;
    g.periodic_x = true;
    Array h0(g.slice_size());
    for (long jf = 0; jf < g.nx_flat(); ++jf)
      for (long kf = 0; kf < g.nv_flat(); ++kf)
        h0[jf * g.nv_flat() + kf] = std::sin(2.0 * kPi * g.x_at(static_cast<int>(jf)));
    const ScalarField h = solve_transport(make_free_streaming(1), h0, {}, {}, g);
    double err = 0;
    for (int it = 0; it < g.nt; ++it)
      for (long jf = 0; jf < g.nx_flat(); ++jf)
        for (long kf = 0; kf < g.nv_flat(); ++kf)
          err = std::max(err, std::abs(h.at(it, jf, kf) -
                                       std::sin(2.0 * kPi * (g.x_at(static_cast<int>(jf)) -
                                                             g.v_at(static_cast<int>(kf)) *
                                                                 g.t_at(it)))));
    ok = ok && err < 1e-6;
    detail += "transport=" + fmt2(err);
  }

  // v-heat reduction vs the spectral closed form
  {
    GridSpec g = box(801, 4, 64, 0.0, 0.5, true);
    g.v_lo = -kPi;
    g.v_hi = kPi;
    auto c = CoefficientSet::isotropic(1, make_constant(1, Vec::Zero(1)));
    Array f0(g.slice_size());
    for (long jf = 0; jf < g.nx_flat(); ++jf)
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        const double v = g.v_at(static_cast<int>(kf));
        f0[jf * g.nv_flat() + kf] = std::exp(-v * v);
      }
    const ScalarField f = solve_fp(c, f0, g);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> line(g.nv), hat(g.nv);
    for (int k = 0; k < g.nv; ++k) line[k] = f0[k];
    fft.fwd(hat, line);
    for (int k = 0; k < g.nv; ++k) {
      const double eta = 2.0 * kPi * signed_freq_index(k, g.nv) / (g.v_hi - g.v_lo);
      hat[k] *= std::exp(-eta * eta * (g.t1 - g.t0));
    }
    fft.inv(line, hat);
    double num = 0, den = 0;
    for (int k = 0; k < g.nv; ++k) {
      const double d = f.at(g.nt - 1, 0, k) - line[k].real();
      num += d * d;
      den += line[k].real() * line[k].real();
    }
    const double rel = std::sqrt(num / den);
    ok = ok && rel < 1e-3;
    detail += " vheat=" + fmt2(rel);
  }

  // conservation and comparison at 1e-10 per step
  {
    GridSpec g = box(65, 24, 24, -1.0, 0.0, true);
    CoefficientSet c = CoefficientSet::isotropic(1, make_relativistic(1));
    c.lambda = 0.5;
    c.Lambda = 2.0;
    c.A = [](Real, const Vec&, const Vec& v) {
      return Mat(Mat::Identity(1, 1) * (1.25 + 0.7 * std::sin(3.0 * v[0])));
    };
    Array f1(g.slice_size()), f2(g.slice_size());
    SplitRng rng(5, "acceptance_conservation");
    for (long i = 0; i < f1.size(); ++i) {
      f1[i] = rng.uniform(0, 1);
      f2[i] = f1[i] + rng.uniform(0, 0.5);
    }
    const ScalarField a = solve_fp(c, f1, g);
    const ScalarField b2 = solve_fp(c, f2, g);
    const double mass0 = a.values.segment(0, g.slice_size()).sum();
    double drift = 0;
    for (int it = 1; it < g.nt; ++it)
      drift = std::max(drift,
                       std::abs(a.values.segment(static_cast<long>(it) * g.slice_size(),
                                                 g.slice_size()).sum() -
                                mass0) /
                           (std::abs(mass0) * it));
    const double comparison = (a.values - b2.values).maxCoeff();
    ok = ok && drift <= 1e-10 && comparison <= 1e-10;
    detail += " massdrift=" + fmt2(drift) + " comparison=" + fmt2(comparison);
  }

  // weak-residual decay order >= ~0.85 (ratio >= 1.8 between n and 2n)
  {
    CoefficientSet c = CoefficientSet::isotropic(1, make_free_streaming(1));
    auto run = [&](int n) {
      GridSpec g = box(4 * n + 1, n, n, -1.0, 0.0, false);
      return solve_fp(c, gaussian_init(g), g);
    };
    const auto r64 = weak_residual(run(64), c, 6, 23);
    const auto r128 = weak_residual(run(128), c, 6, 23);
    const double ratio = r64.max / r128.max;
    ok = ok && ratio >= 1.8;
    detail += " residual_ratio=" + fmt2(ratio);
  }

  report(6, "solver correctness", ok, detail);
}

void criterion_7_iterations() {
  bool ok = true;
  std::string detail;

  const ExponentTable table = exponent_table(1, 1, 1, 1, 10);
  auto solve_instance = [&](int n) {
    GridSpec g = box(4 * n + 1, n, n, -1.0, 0.0, false);
    CoefficientSet c = CoefficientSet::isotropic(1, make_free_streaming(1));
    return solve_fp(c, gaussian_init(g), g);
  };

  {
    const ScalarField f = solve_instance(48);
    const IterationTrace tr = moser_trace(f, ScalarField{}, 10, table, 16);
    const GridSpec& g = f.grid;
    const Region qh = cylinder_Qr(0.5);
    double gmax = 0;
    for (int it = 0; it < g.nt; ++it)
      for (long jf = 0; jf < g.nx_flat(); ++jf)
        for (long kf = 0; kf < g.nv_flat(); ++kf)
          if (qh.contains(g.t_at(it), g.x_point(jf), g.v_point(kf)))
            gmax = std::max(gmax, f.at(it, jf, kf));
    const double relerr = std::abs(tr.entries.back().value - gmax) / gmax;
    ok = ok && relerr <= 0.10 && tr.converged;
    detail += "moser_relerr=" + fmt2(relerr);
  }

  {
    // weak diffusion keeps several levels populated so the fit is informative
    auto fit = [&](int n) {
      GridSpec g = box(4 * n + 1, n, n, -1.0, 0.0, false);
      CoefficientSet c = CoefficientSet::isotropic(1, make_free_streaming(1), 0.1);
      const ScalarField f = solve_fp(c, gaussian_init(g), g);
      return degiorgi_trace(f, ScalarField{}, 10, 0.3, table, 8, 0.5).fitted_c;
    };
    const double c32 = fit(32), c48 = fit(48);
    const double spread = std::abs(c48 - c32) / std::max(c32, c48);
    ok = ok && std::isfinite(c32) && c32 > 0 && spread <= 0.25;
    detail += " degiorgi_c=" + fmt2(c32) + "/" + fmt2(c48);
  }

  {
    bool closed = true;
    for (double iota : {1.0, 2.0, 5.0})
      closed = closed &&
               std::abs(iteration_bound_const(0.0, iota) - std::pow(2.0, iota)) <= 1e-12;
    for (double eps : {0.0, 0.3, 0.8})
      closed = closed && std::abs(decay_exponent(0.4, 0.4, eps) - (1.0 - eps)) <= 1e-14;
    ok = ok && closed;
    detail += std::string(" closed_forms=") + (closed ? "exact" : "off");
  }

  report(7, "iteration harnesses", ok, detail);
}

void criterion_8_holder() {
  GridSpec g = box(97, 96, 64, -1.0, 0.0, false);
  const CoefficientSet c = checkerboard_instance(g);
  const ScalarField f = solve_fp(c, gaussian_init(g), g);
  const KineticPoint z0{0.0, Vec::Zero(1), Vec::Zero(1)};
  const auto prof = oscillation_profile(f, ScalarField{}, 10.0, z0, c.b, 4);

  ScalarField lin(g);
  for (int it = 0; it < g.nt; ++it)
    for (long jf = 0; jf < g.nx_flat(); ++jf)
      for (long kf = 0; kf < g.nv_flat(); ++kf)
        lin.at(it, jf, kf) = g.v_at(static_cast<int>(kf));
  const auto prof_lin = oscillation_profile(lin, ScalarField{}, 10.0, z0, c.b, 4);

  const bool ok = prof.beta_fit > 0.05 && prof.r_squared >= 0.9 && prof.scales.size() >= 4 &&
                  prof_lin.beta_fit >= 0.9 && prof_lin.beta_fit <= 1.1;
  report(8, "Hoelder measurement", ok,
         "checker beta=" + fmt2(prof.beta_fit) + " R2=" + fmt2(prof.r_squared) +
             "; linear beta=" + fmt2(prof_lin.beta_fit));
}

void criterion_9_scaling_commutation() {
  GridSpec g = box(65, 96, 65, -1.0, 0.0, false);
  ScalarField f(g);
  for (int it = 0; it < g.nt; ++it)
    for (long jf = 0; jf < g.nx_flat(); ++jf)
      for (long kf = 0; kf < g.nv_flat(); ++kf) {
        const double t = g.t_at(it), x = g.x_at(static_cast<int>(jf)),
                     v = g.v_at(static_cast<int>(kf));
        f.at(it, jf, kf) = std::sin(3.0 * x + v) + 0.5 * std::cos(2.0 * t) + 0.3 * v * v;
      }
  const auto b = make_free_streaming(1);  // affine drift
  const KineticPoint z0{0.0, Vec::Constant(1, 0.1), Vec::Constant(1, 0.2)};
  const double r = 0.6;
  const double direct = oscillation(f, z0, r, b(z0.v));
  const ScalarField zoomed = field_rescale(f, z0, r, b);
  const double rescaled =
      oscillation(zoomed, {0.0, Vec::Zero(1), Vec::Zero(1)}, 1.0, Vec::Zero(1));
  const double rel = std::abs(rescaled - direct) / direct;
  report(9, "scaling commutation", rel <= 0.02,
         "direct=" + fmt2(direct) + " rescaled=" + fmt2(rescaled) + " rel=" + fmt2(rel));
}

void criterion_10_isoperimetric() {
  const int n = 65;
  Vec h(2);
  h << 1, 0;
  auto halfspace = [&](double side) {
    BoxField P;
    P.dims = {n, n};
    P.lo = {-1, -1};
    P.hi = {1, 1};
    P.values = Array::Zero(static_cast<long>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        P.values[static_cast<long>(i) * n + j] = side * P.coord(0, i) >= 0 ? 1.0 : 0.0;
    return P;
  };
  const std::vector<double> taus{0.5, 0.25, 0.125, 0.0625};
  const auto down = directional_jump_detect(halfspace(-1.0), h, taus, 2.0);
  const auto up = directional_jump_detect(halfspace(1.0), h, taus, 2.0);
  BoxField ones = halfspace(1.0);
  ones.values.setConstant(1.0);
  const auto constant = directional_jump_detect(ones, h, taus, 2.0);
  const bool ok = down.verdict == JumpVerdict::compliant &&
                  up.verdict == JumpVerdict::violating &&
                  constant.verdict == JumpVerdict::compliant;
  report(10, "isoperimetric detector", ok,
         std::string("down=") +
             (down.verdict == JumpVerdict::compliant ? "compliant" : "violating") + " up=" +
             (up.verdict == JumpVerdict::violating ? "violating" : "compliant") + " const=" +
             (constant.verdict == JumpVerdict::compliant ? "compliant" : "violating"));
}

void criterion_11_determinism() {
  const fs::path base = fs::temp_directory_path() / "kfplab_acceptance";
  fs::remove_all(base);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool ok = true;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = base / ("avg" + std::to_string(rep));
    ok = ok && cli::run({"average", "--preset", "free_streaming", "--bands", "8,16", "--out",
                         dir.string(), "--seed", "41"}) == 0;
    const fs::path nd = base / ("nondeg" + std::to_string(rep));
    ok = ok && cli::run({"nondeg", "--preset", "relativistic", "--out", nd.string(),
                         "--resolution", "4096", "--seed", "41"}) == 0;
  }
  ok = ok && bytes(base / "avg0" / "averaging.csv") == bytes(base / "avg1" / "averaging.csv");
  ok = ok && bytes(base / "avg0" / "index.txt") == bytes(base / "avg1" / "index.txt");
  ok = ok && bytes(base / "nondeg0" / "nondeg.csv") == bytes(base / "nondeg1" / "nondeg.csv");
  report(11, "determinism", ok, "byte-identical CSV and index across reruns");
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1_exponents();
  const double measured_K = criterion_2_nondegeneracy();
  criterion_3_db();
  criterion_4_averaging_gain();
  criterion_5_microlocal(measured_K);
  criterion_6_solver();
  criterion_7_iterations();
  criterion_8_holder();
  criterion_9_scaling_commutation();
  criterion_10_isoperimetric();
  criterion_11_determinism();
  std::printf(g_failures == 0 ? "all criteria passed\n" : "%d criterion(s) failed\n",
              g_failures);
  return g_failures;
}
