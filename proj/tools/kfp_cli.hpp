#ifndef KFP_CLI_HPP
#define KFP_CLI_HPP

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kfp/averaging.hpp"
#include "kfp/coeffs.hpp"
#include "kfp/config.hpp"
#include "kfp/degiorgi.hpp"
#include "kfp/holder.hpp"
#include "kfp/io.hpp"
#include "kfp/solver.hpp"

namespace kfp::cli {

namespace fs = std::filesystem;

// exit codes: 0 ok, 2 validation, 3 numerical blowup, 4 selftest failure
inline constexpr int kOk = 0;
inline constexpr int kValidation = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kSelftest = 4;

inline fs::path prepare_outdir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

inline std::vector<Real> log_eps_grid(Real eps_min, Real eps_max, int count) {
  std::vector<Real> eps;
  for (int i = 0; i < count; ++i)
    eps.push_back(eps_max * std::pow(eps_min / eps_max, static_cast<Real>(i) / (count - 1)));
  return eps;
}

// ---------------------------------------------------------------------------
// nondeg
// ---------------------------------------------------------------------------

inline int cmd_nondeg(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  const VelocityField b = make_velocity(cfg.coeffs, cfg.grid.d);
  const Ball ball{Vec::Zero(cfg.grid.d), 1.0};
  const auto eps = log_eps_grid(cfg.sweep.eps_min, cfg.sweep.eps_max, cfg.sweep.eps_count);
  const NondegReport rep = estimate_nondegeneracy(b, ball, eps, cfg.sweep.directions,
                                                  cfg.sweep.resolution, cfg.sweep.mu_points);

  CsvWriter csv({"epsilon", "sup_measure", "K", "alpha", "fit_residual", "degenerate"});
  for (const auto& [e, m] : rep.samples)
    csv.add_row({fmt(e), fmt(m), fmt(rep.K), fmt(rep.alpha), fmt(rep.fit_residual),
                 fmt(rep.degenerate)});
  csv.save(out / "nondeg.csv");
  write_plot_script(out / "nondeg.csv", "epsilon", "sup measure", 1, 2, true);
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out, {"nondeg.csv", "nondeg.gp", "effective_config.txt"});

  std::cout << "K=" << fmt(rep.K) << " alpha=" << fmt(rep.alpha)
            << " degenerate=" << fmt(rep.degenerate) << " fit_residual=" << fmt(rep.fit_residual)
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// exponents
// ---------------------------------------------------------------------------

inline int cmd_exponents(Real alpha, Real delta, int d, Real q, const std::string& gamma) {
  GammaChoice choice = GammaChoice::lip;
  if (gamma == "val") choice = GammaChoice::val;
  else if (gamma == "na") choice = GammaChoice::na;
  else if (gamma != "lip") throw InputError("exponents: gamma must be one of val|lip|na");

  const ExponentTable t = exponent_table(alpha, delta, d, d, q, choice);
  std::cout << "alpha=" << fmt(t.alpha) << "\ndelta=" << fmt(t.delta) << "\nd1=" << t.d1
            << "\nd2=" << t.d2 << "\nq=" << fmt(t.q) << "\nvarsigma=" << fmt(t.varsigma)
            << "\ngamma_VAL=" << fmt(t.gamma_VAL) << "\ngamma_lip=" << fmt(t.gamma_lip)
            << "\ngamma_NA=" << fmt(t.gamma_NA) << "\ngamma_bdd=" << fmt(t.gamma_bdd)
            << "\ngamma_selected=" << fmt(t.gamma_selected) << "\nkappa=" << fmt(t.kappa)
            << "\ntheta=" << fmt(t.theta) << "\nvartheta=" << fmt(t.vartheta)
            << "\nq_min_bdd=" << fmt(t.q_min_bdd) << "\nq_min_reg=" << fmt(t.q_min_reg)
            << "\nrho_exponent=" << fmt(t.rho_exponent)
            << "\nq_threshold=" << fmt(t.q_threshold) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int cmd_solve(const ExperimentConfig& cfg, int slice_t) {
  const auto out = prepare_outdir(cfg.out_dir);
  cfg.grid.validate();
  const CoefficientSet c = make_coefficients(cfg);
  const Array f0 = make_initial_condition(cfg);
  const ScalarField f = solve_fp(c, f0, cfg.grid);

  write_kfp1(out / "solution.kfp1", f);
  const int it = slice_t < 0 ? cfg.grid.nt - 1 : std::min(slice_t, cfg.grid.nt - 1);
  CsvWriter csv(cfg.grid.d == 1 ? std::vector<std::string>{"x", "v", "f"}
                                : std::vector<std::string>{"x0", "x1", "v0", "v1", "f"});
  for (long jf = 0; jf < cfg.grid.nx_flat(); ++jf) {
    const Vec x = cfg.grid.x_point(jf);
    for (long kf = 0; kf < cfg.grid.nv_flat(); ++kf) {
      const Vec v = cfg.grid.v_point(kf);
      if (cfg.grid.d == 1)
        csv.add_row({fmt(x[0]), fmt(v[0]), fmt(f.at(it, jf, kf))});
      else
        csv.add_row({fmt(x[0]), fmt(x[1]), fmt(v[0]), fmt(v[1]), fmt(f.at(it, jf, kf))});
    }
  }
  csv.save(out / "slice.csv");
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out, {"solution.kfp1", "slice.csv", "effective_config.txt"});
  std::cout << "solved " << cfg.grid.nt << "x" << cfg.grid.nx_flat() << "x" << cfg.grid.nv_flat()
            << " nodes; slice at t index " << it << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// average
// ---------------------------------------------------------------------------

inline int cmd_average(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  GridSpec g = cfg.grid;
  g.validate();
  if (!g.periodic_x || std::abs(g.x_lo) > 1e-12 || std::abs(g.x_hi - 1.0) > 1e-12)
    throw ConfigError("average: grid x extent must be the periodic unit interval [0, 1)");
  const VelocityField b = make_velocity(cfg.coeffs, 1);
  const VelocityWeight psi = bump_weight(1, 0.7 * 0.5 * (g.v_hi - g.v_lo));

  const auto rows =
      averaging_gain_experiment(b, cfg.sweep.bands, psi, cfg.sweep.varsigma, cfg.sweep.seed, g);

  CsvWriter csv({"N", "l2", "hs_per_v", "hs_avg", "ratio"});
  for (const auto& r : rows)
    csv.add_row({fmt(r.band_limit), fmt(r.h_l2), fmt(r.h_hs_per_v), fmt(r.avg_hs), fmt(r.ratio)});
  csv.save(out / "averaging.csv");
  write_plot_script(out / "averaging.csv", "band limit N", "gain ratio", 1, 5, true);
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out, {"averaging.csv", "averaging.gp", "effective_config.txt"});
  for (const auto& r : rows)
    std::cout << "N=" << r.band_limit << " ratio=" << fmt(r.ratio) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// moser / degiorgi
// ---------------------------------------------------------------------------

inline ScalarField solve_from_config(const ExperimentConfig& cfg, CoefficientSet& c_out) {
  cfg.grid.validate();
  c_out = make_coefficients(cfg);
  return solve_fp(c_out, make_initial_condition(cfg), cfg.grid);
}

inline ScalarField sample_source(const CoefficientSet& c, const GridSpec& g) {
  ScalarField s(g);
  for (int it = 0; it < g.nt; ++it)
    for (long jf = 0; jf < g.nx_flat(); ++jf)
      for (long kf = 0; kf < g.nv_flat(); ++kf)
        s.at(it, jf, kf) = c.s(g.t_at(it), g.x_point(jf), g.v_point(kf));
  return s;
}

inline void save_trace(const IterationTrace& tr, const fs::path& out, const std::string& name) {
  CsvWriter csv({"n", "r_n", "level_or_p", "value", "growth_factor"});
  for (const auto& e : tr.entries)
    csv.add_row({fmt(e.n), fmt(e.r_n), fmt(e.level_or_p), fmt(e.value), fmt(e.growth)});
  csv.save(out / (name + ".csv"));
  write_plot_script(out / (name + ".csv"), "n", "value", 1, 4, false);
  write_summary(out / (name + "_summary.txt"),
                {{"scheme", tr.scheme},
                 {"kappa", fmt(tr.kappa)},
                 {"shift_l", fmt(tr.shift_l)},
                 {"fitted_c", fmt(tr.fitted_c)},
                 {"eps_surrogate", fmt(tr.eps_surrogate)},
                 {"converged", fmt(tr.converged)}});
}

inline int cmd_moser(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  CoefficientSet c;
  const ScalarField f = solve_from_config(cfg, c);
  const ScalarField s = sample_source(c, cfg.grid);
  const ExponentTable t = exponent_table(1, 1, cfg.grid.d, cfg.grid.d, cfg.sweep.q);
  const IterationTrace tr = moser_trace(f, s, cfg.sweep.q, t, cfg.sweep.n_max);
  save_trace(tr, out, "moser");
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out, {"moser.csv", "moser.gp", "moser_summary.txt", "effective_config.txt"});
  std::cout << "moser: final=" << fmt(tr.entries.back().value)
            << " converged=" << fmt(tr.converged) << "\n";
  return kOk;
}

inline int cmd_degiorgi(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  CoefficientSet c;
  const ScalarField f = solve_from_config(cfg, c);
  const ScalarField s = sample_source(c, cfg.grid);
  const ExponentTable t = exponent_table(1, 1, cfg.grid.d, cfg.grid.d, cfg.sweep.q);
  Real l = cfg.sweep.l;
  if (l <= 0) l = std::max(1e-6, 0.5 * f.values.maxCoeff());
  const IterationTrace tr =
      degiorgi_trace(f, s, cfg.sweep.q, l, t, cfg.sweep.n_max, cfg.sweep.c0);
  save_trace(tr, out, "degiorgi");
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out,
               {"degiorgi.csv", "degiorgi.gp", "degiorgi_summary.txt", "effective_config.txt"});
  std::cout << "degiorgi: fitted_c=" << fmt(tr.fitted_c) << " converged=" << fmt(tr.converged)
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// oscillation / boundary
// ---------------------------------------------------------------------------

inline void save_profile(const OscillationProfile& prof, const fs::path& out,
                         const std::string& name, bool boundary) {
  CsvWriter csv({"r", "osc", "source_correction", "ratio"});
  for (std::size_t i = 0; i < prof.scales.size(); ++i) {
    const Real ratio = i + 1 < prof.osc_values.size() && prof.osc_values[i] > 0
                           ? prof.osc_values[i + 1] / prof.osc_values[i]
                           : 0.0;
    csv.add_row({fmt(prof.scales[i]), fmt(prof.osc_values[i]),
                 fmt(i < prof.source_correction.size() ? prof.source_correction[i] : 0.0),
                 fmt(ratio)});
  }
  csv.save(out / (name + ".csv"));
  write_plot_script(out / (name + ".csv"), "r", "oscillation", 1, 2, true);
  std::vector<std::pair<std::string, std::string>> kv{{"beta_fit", fmt(prof.beta_fit)},
                                                      {"beta_over_3", fmt(prof.beta_over_3)},
                                                      {"theta1_hat", fmt(prof.theta1_hat)},
                                                      {"r_squared", fmt(prof.r_squared)}};
  if (boundary) kv.emplace_back("beta0", fmt(prof.beta0));
  for (const auto& w : prof.warnings) kv.emplace_back("warning", w);
  write_summary(out / (name + "_summary.txt"), kv);
}

inline int cmd_oscillation(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  CoefficientSet c;
  const ScalarField f = solve_from_config(cfg, c);
  const ScalarField s = cfg.coeffs.s_kind == "zero" ? ScalarField{} : sample_source(c, cfg.grid);
  KineticPoint z0{cfg.grid.t1, Vec::Constant(cfg.grid.d, 0.5 * (cfg.grid.x_lo + cfg.grid.x_hi)),
                  Vec::Constant(cfg.grid.d, 0.5 * (cfg.grid.v_lo + cfg.grid.v_hi))};
  const OscillationProfile prof = oscillation_profile(f, s, cfg.sweep.q, z0, c.b,
                                                      cfg.sweep.scale_count,
                                                      cfg.sweep.scale_ratio);
  save_profile(prof, out, "oscillation", false);
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out, {"oscillation.csv", "oscillation.gp", "oscillation_summary.txt",
                     "effective_config.txt"});
  std::cout << "beta_fit=" << fmt(prof.beta_fit) << " r_squared=" << fmt(prof.r_squared)
            << " theta1_hat=" << fmt(prof.theta1_hat) << "\n";
  return kOk;
}

inline int cmd_boundary(const ExperimentConfig& cfg) {
  const auto out = prepare_outdir(cfg.out_dir);
  if (std::abs(cfg.grid.t0) > 1e-12)
    throw ConfigError("boundary: grid must start at t0 = 0 (initial-time estimate)");
  CoefficientSet c;
  const ScalarField f = solve_from_config(cfg, c);
  const ScalarField s = cfg.coeffs.s_kind == "zero" ? ScalarField{} : sample_source(c, cfg.grid);
  KineticPoint z0{0.0, Vec::Constant(cfg.grid.d, 0.5 * (cfg.grid.x_lo + cfg.grid.x_hi)),
                  Vec::Constant(cfg.grid.d, 0.5 * (cfg.grid.v_lo + cfg.grid.v_hi))};
  const OscillationProfile prof =
      initial_time_profile(f, cfg.sweep.alpha0, 0.0, s, cfg.sweep.q, z0, c.b,
                           cfg.sweep.scale_count, cfg.sweep.scale_ratio);
  save_profile(prof, out, "boundary", true);
  write_effective_config(cfg, out / "effective_config.txt");
  write_report(out,
               {"boundary.csv", "boundary.gp", "boundary_summary.txt", "effective_config.txt"});
  std::cout << "beta0=" << fmt(prof.beta0) << " beta_fit=" << fmt(prof.beta_fit) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// report: index all artifacts found in a directory
// ---------------------------------------------------------------------------

inline int cmd_report(const std::string& dir) {
  const fs::path out(dir);
  if (!fs::is_directory(out)) throw InputError("report: not a directory: " + dir);
  std::vector<fs::path> artifacts;
  for (const auto& e : fs::directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "index.txt") continue;
    const auto ext = e.path().extension().string();
    if (ext == ".csv" || ext == ".kfp1" || ext == ".txt" || ext == ".gp")
      artifacts.push_back(e.path().filename());
  }
  std::sort(artifacts.begin(), artifacts.end());
  write_report(out, artifacts);
  std::cout << "indexed " << artifacts.size() << " artifacts\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// selftest: fast deterministic checks of the closed-form machinery
// ---------------------------------------------------------------------------

inline int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  };

  const ExponentTable t = exponent_table(1, 1, 1, 1, 10);
  check(std::abs(t.varsigma - 0.2) < 1e-14 && std::abs(t.kappa - 9.0 / 7.0) < 1e-14 &&
            std::abs(t.gamma_VAL - 0.08) < 1e-14 && std::abs(t.q_min_bdd - 37.5) < 1e-12,
        "exponent arithmetic");

  const GeometryConstants gc = geometry_constants(Mat::Identity(1, 1));
  check(std::abs(gc.sigma - 0.125) < 1e-15 &&
            std::abs(gc.omega - std::sqrt(0.015625 / 2.125)) < 1e-15,
        "geometry constants");

  check(std::abs(iteration_bound_const(0.0, 3.0) - 8.0) < 1e-12 &&
            std::abs(decay_exponent(0.5, 0.5, 0.25) - 0.75) < 1e-14,
        "iteration closed forms");

  KineticPoint z0{0.0, Vec::Zero(1), Vec::Zero(1)};
  Vec bv0 = Vec::Ones(1);
  KineticPoint inside{-0.02, Vec::Constant(1, -0.02), Vec::Zero(1)};
  KineticPoint late{0.01, Vec::Zero(1), Vec::Zero(1)};
  check(cylinder_membership(z0, z0, 0.5, bv0) && cylinder_membership(inside, z0, 0.5, bv0) &&
            !cylinder_membership(late, z0, 0.5, bv0),
        "cylinder membership");

  {
    BoxField P;
    P.dims = {33, 33};
    P.lo = {-1, -1};
    P.hi = {1, 1};
    P.values = Array::Zero(33 * 33);
    for (int i = 0; i < 33; ++i)
      for (int j = 0; j < 33; ++j)
        P.values[i * 33 + j] = (P.coord(0, i) >= 0) ? 1.0 : 0.0;
    Vec h(2);
    h << 1, 0;
    const auto up = directional_jump_detect(P, h, {0.5, 0.25, 0.125}, 2.0);
    const auto down = directional_jump_detect(P, -h, {0.5, 0.25, 0.125}, 2.0);
    check(up.verdict == JumpVerdict::violating && down.verdict == JumpVerdict::compliant,
          "isoperimetric detector");
    std::cout << "  up:   " << jump_summary(up) << "\n  down: " << jump_summary(down) << "\n";
  }

  {
    const VelocityField b = make_cubic(1);
    std::vector<Real> eps{0.1, 0.05, 0.02, 0.01, 0.005};
    const NondegReport rep = estimate_nondegeneracy(b, unit_ball(1), eps, 2, 8192);
    check(rep.alpha > 0.30 && rep.alpha < 0.37 && !rep.degenerate, "cubic nondegeneracy");
  }

  std::cout << (failures == 0 ? "selftest: all checks passed\n"
                              : "selftest: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? kOk : kSelftest;
}

// ---------------------------------------------------------------------------
// dispatcher
// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"kfplab: numerical laboratory for kinetic Fokker-Planck regularity machinery"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", preset = "free_streaming", gamma = "lip";
  std::uint64_t seed = 1;
  Real alpha = 1.0, delta = 1.0, q = 10.0, varsigma = 0.2, const_value = 1.0;
  int d = 1, slice_t = -1;
  std::string bands_str, eps_str;
  int resolution = -1, directions = -1, eps_count = -1, scale_count = -1, n_max = -1;
  Real eps_min = -1, eps_max = -1, scale_ratio = -1, l_val = -1, c0 = -1, alpha0 = -1;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", config_path, "experiment config file (key = value sections)")
          ->required();
    else
      sub->add_option("--config", config_path, "experiment config file (key = value sections)");
    sub->add_option("--out", out_dir, "output directory (artifacts + index.txt)");
    sub->add_option("--seed", seed, "master seed; all randomness derives from it");
  };

  auto* nondeg = app.add_subcommand(
      "nondeg", "measure the sublevel-set nondegeneracy constants (K, alpha) of b");
  add_common(nondeg, false);
  nondeg->add_option("--preset", preset,
                     "velocity field: free_streaming|relativistic|cubic|constant|polynomial");
  nondeg->add_option("--const-value", const_value, "value for the constant preset");
  nondeg->add_option("--d", d, "dimension, 1 or 2");
  nondeg->add_option("--eps-min", eps_min, "smallest epsilon (> 0; resolve eps_min >~ 20 cells)");
  nondeg->add_option("--eps-max", eps_max, "largest epsilon (> eps_min)");
  nondeg->add_option("--eps-count", eps_count, "number of epsilons (>= 4, spanning >= 2 decades)");
  nondeg->add_option("--resolution", resolution, "v-grid points per dimension (default 4096)");
  nondeg->add_option("--directions", directions, "direction samples (>= 8 when d = 2)");

  auto* solve = app.add_subcommand("solve", "solve the full equation and store the KFP1 grid");
  add_common(solve, true);
  solve->add_option("--slice-t", slice_t, "time index for the CSV slice (default: last)");

  auto* average = app.add_subcommand(
      "average", "free-transport averaging-gain experiment over band limits");
  add_common(average, false);
  average->add_option("--preset", preset, "velocity field preset");
  average->add_option("--const-value", const_value, "value for the constant preset");
  average->add_option("--bands", bands_str, "comma-separated band limits (nx must exceed 2N)");
  average->add_option("--varsigma", varsigma, "fractional order of the average norm");

  auto* moser = app.add_subcommand("moser", "Moser p_n = 2 kappa^n trace on a solved instance");
  add_common(moser, true);
  moser->add_option("--q", q, "source integrability (must exceed 2 kappa/(kappa-1))");
  moser->add_option("--nmax", n_max, "number of iteration steps");

  auto* degiorgi =
      app.add_subcommand("degiorgi", "De Giorgi level-set trace on a solved instance");
  add_common(degiorgi, true);
  degiorgi->add_option("--q", q, "source integrability (must exceed 2 kappa/(kappa-1))");
  degiorgi->add_option("--nmax", n_max, "number of iteration steps");
  degiorgi->add_option("--l", l_val, "level increment (positive; default: half the field max)");
  degiorgi->add_option("--c0", c0, "constant of the base level l0 = c0 ||f+||_L2(Q1)");

  auto* osc = app.add_subcommand(
      "oscillation", "multi-scale oscillation profile and Hoelder exponent fit");
  add_common(osc, true);
  osc->add_option("--scales", scale_count, "number of nested scales (>= 4, each >= 8 cells)");
  osc->add_option("--ratio", scale_ratio,
                  "scale contraction per step in (0,1); <= 0 selects omega/2");

  auto* boundary = app.add_subcommand(
      "boundary", "initial-time oscillation profile (grid must start at t0 = 0)");
  add_common(boundary, true);
  boundary->add_option("--alpha0", alpha0, "Hoelder exponent of the initial data, in (0, 1]");
  boundary->add_option("--scales", scale_count, "number of nested scales (>= 4)");
  boundary->add_option("--ratio", scale_ratio, "scale contraction per step in (0,1)");

  auto* exponents = app.add_subcommand("exponents", "print the derived exponent table");
  exponents->add_option("--alpha", alpha, "nondegeneracy exponent, in (0, 1]");
  exponents->add_option("--delta", delta, "v-regularity order, in (0, 1]");
  exponents->add_option("--d", d, "dimension (d1 = d2 = d)");
  exponents
      ->add_option("--q", q,
                   "source integrability; must exceed (1+2d)^2 in the lip regime at alpha = "
                   "delta = 1, and 2 kappa/(kappa-1) in general")
      ->required();
  exponents->add_option("--gamma", gamma, "regularization regime: val|lip|na");

  auto* report = app.add_subcommand("report", "index the artifacts of a run directory");
  report->add_option("--dir", out_dir, "directory to index")->required();

  app.add_subcommand("selftest", "fast deterministic checks of the closed-form machinery");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);

    // flags override config values only when actually given
    CLI::App* active = app.get_subcommands().front();
    auto flag_given = [&](const std::string& name) {
      const CLI::Option* opt = active->get_option_no_throw(name);
      return opt != nullptr && opt->count() > 0;
    };
    if (flag_given("--out") || config_path.empty()) cfg.out_dir = out_dir;
    if (flag_given("--seed")) cfg.sweep.seed = seed;
    if (eps_min > 0) cfg.sweep.eps_min = eps_min;
    if (eps_max > 0) cfg.sweep.eps_max = eps_max;
    if (eps_count > 0) cfg.sweep.eps_count = eps_count;
    if (resolution > 0) cfg.sweep.resolution = resolution;
    if (directions > 0) cfg.sweep.directions = directions;
    if (scale_count > 0) cfg.sweep.scale_count = scale_count;
    if (scale_ratio >= 0) cfg.sweep.scale_ratio = scale_ratio;
    if (n_max > 0) cfg.sweep.n_max = n_max;
    if (l_val > 0) cfg.sweep.l = l_val;
    if (c0 > 0) cfg.sweep.c0 = c0;
    if (alpha0 > 0) cfg.sweep.alpha0 = alpha0;
    if (flag_given("--q")) cfg.sweep.q = q;
    if (!bands_str.empty()) cfg.sweep.bands = detail::parse_int_list(bands_str);
    if (flag_given("--varsigma")) cfg.sweep.varsigma = varsigma;
    if (flag_given("--preset")) cfg.coeffs.preset = preset;
    if (flag_given("--const-value")) cfg.coeffs.const_value = const_value;
    if (flag_given("--d")) cfg.grid.d = d;
    if (average->parsed() && config_path.empty()) {
      cfg.grid.d = 1;
      cfg.grid.nt = 64;
      cfg.grid.nx = 2048;
      cfg.grid.nv = 64;
      cfg.grid.t0 = 0.0;
      cfg.grid.t1 = 1.0;
      cfg.grid.x_lo = 0.0;
      cfg.grid.x_hi = 1.0;
      cfg.grid.periodic_x = true;
    }

    if (nondeg->parsed()) return cmd_nondeg(cfg);
    if (solve->parsed()) return cmd_solve(cfg, slice_t);
    if (average->parsed()) return cmd_average(cfg);
    if (moser->parsed()) return cmd_moser(cfg);
    if (degiorgi->parsed()) return cmd_degiorgi(cfg);
    if (osc->parsed()) return cmd_oscillation(cfg);
    if (boundary->parsed()) return cmd_boundary(cfg);
    if (exponents->parsed()) return cmd_exponents(alpha, delta, d, q, gamma);
    if (report->parsed()) return cmd_report(out_dir);
    return cmd_selftest();
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace kfp::cli

#endif
