#ifndef KFP_CONFIG_HPP
#define KFP_CONFIG_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/coeffs.hpp"
#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/io.hpp"

namespace kfp {

// ---------------------------------------------------------------------------
// Experiment configuration: plain-text sections of key = value lines.
//
//   # comment
//   [grid]
//   d = 1
//   nt = 64
//   ...
//
// Unknown sections or keys are rejected; validation gathers every violation
// before failing, not just the first.
// ---------------------------------------------------------------------------

struct CoeffSpec {
  std::string preset = "free_streaming";  // |relativistic|cubic|constant|polynomial
  Real const_value = 1.0;
  std::vector<Real> poly_coeffs{0.0, 1.0};
  Real lambda = 1.0, Lambda = 1.0;
  std::string A_kind = "identity";  // |scaled|checkerboard
  Real A_value = 1.0;
  Real A_lo = 0.5, A_hi = 2.0;
  int checker_cells = 4;
  std::string B_kind = "zero";  // |constant
  Real B_value = 0.0;
  std::string s_kind = "zero";  // |constant|bump
  Real s_value = 0.0;
  std::string f0_kind = "gaussian";  // |constant|cosine_x|bump
  Real f0_value = 1.0;
};

struct SweepSpec {
  std::uint64_t seed = 1;
  Real eps_min = 0.005, eps_max = 0.5;
  int eps_count = 8;
  int directions = 64;
  int resolution = 4096;
  int mu_points = 512;
  std::vector<int> bands{32, 64, 128, 256, 512};
  Real varsigma = 0.2;
  int scale_count = 4;
  Real scale_ratio = 0.5;
  Real q = 10.0;
  int n_max = 12;
  Real c0 = 10.0;
  Real l = 0.0;  // 0 -> derived from the instance
  Real alpha0 = 0.5;
  int test_count = 8;
  int pair_count = 4096;
};

struct ExperimentConfig {
  GridSpec grid;
  CoeffSpec coeffs;
  SweepSpec sweep;
  std::string out_dir = "out";
  Real fit_slack = 0.10;
};

namespace detail {

struct RawConfig {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> data;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline RawConfig parse_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      raw.data[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + ": key outside any section");
    raw.data[section][key] = {val, lineno};
  }
  return raw;
}

inline std::vector<Real> parse_real_list(const std::string& s) {
  std::vector<Real> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(trim(tok)));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(trim(tok)));
  return out;
}

class ConfigReader {
 public:
  ConfigReader(const RawConfig& raw, std::vector<std::string>& errors)
      : raw_(raw), errors_(errors) {}

  template <typename T, typename Parse>
  void get(const std::string& sec, const std::string& key, T& slot, Parse parse) {
    seen_[sec].insert(key);
    auto s = raw_.data.find(sec);
    if (s == raw_.data.end()) return;
    auto k = s->second.find(key);
    if (k == s->second.end()) return;
    try {
      slot = parse(k->second.first);
    } catch (const std::exception&) {
      errors_.push_back("line " + std::to_string(k->second.second) + ": cannot parse value for [" +
                        sec + "] " + key);
    }
  }

  void get_real(const std::string& sec, const std::string& key, Real& slot) {
    get(sec, key, slot, [](const std::string& v) { return std::stod(v); });
  }
  void get_int(const std::string& sec, const std::string& key, int& slot) {
    get(sec, key, slot, [](const std::string& v) { return std::stoi(v); });
  }
  void get_u64(const std::string& sec, const std::string& key, std::uint64_t& slot) {
    get(sec, key, slot, [](const std::string& v) { return std::stoull(v); });
  }
  void get_bool(const std::string& sec, const std::string& key, bool& slot) {
    get(sec, key, slot, [](const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw std::runtime_error("bool");
    });
  }
  void get_string(const std::string& sec, const std::string& key, std::string& slot) {
    get(sec, key, slot, [](const std::string& v) { return v; });
  }

  // every key that was present but never consumed is unknown
  void reject_unknown() {
    for (const auto& [sec, keys] : raw_.data) {
      auto known = seen_.find(sec);
      if (known == seen_.end()) {
        errors_.push_back("unknown section [" + sec + "]");
        continue;
      }
      for (const auto& [key, val] : keys)
        if (!known->second.count(key))
          errors_.push_back("line " + std::to_string(val.second) + ": unknown key '" + key +
                            "' in section [" + sec + "]");
    }
  }

 private:
  const RawConfig& raw_;
  std::vector<std::string>& errors_;
  std::map<std::string, std::set<std::string>> seen_;
};

}  // namespace detail

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto raw = detail::parse_raw(path);
  std::vector<std::string> errors;
  detail::ConfigReader rd(raw, errors);
  ExperimentConfig cfg;

  rd.get_int("grid", "d", cfg.grid.d);
  rd.get_int("grid", "nt", cfg.grid.nt);
  rd.get_int("grid", "nx", cfg.grid.nx);
  rd.get_int("grid", "nv", cfg.grid.nv);
  rd.get_real("grid", "t0", cfg.grid.t0);
  rd.get_real("grid", "t1", cfg.grid.t1);
  rd.get_real("grid", "x_lo", cfg.grid.x_lo);
  rd.get_real("grid", "x_hi", cfg.grid.x_hi);
  rd.get_real("grid", "v_lo", cfg.grid.v_lo);
  rd.get_real("grid", "v_hi", cfg.grid.v_hi);
  rd.get_bool("grid", "periodic_x", cfg.grid.periodic_x);
  rd.get_bool("grid", "periodic_v", cfg.grid.periodic_v);

  rd.get_string("coeffs", "preset", cfg.coeffs.preset);
  rd.get_real("coeffs", "const_value", cfg.coeffs.const_value);
  rd.get("coeffs", "poly_coeffs", cfg.coeffs.poly_coeffs, detail::parse_real_list);
  rd.get_real("coeffs", "lambda", cfg.coeffs.lambda);
  rd.get_real("coeffs", "Lambda", cfg.coeffs.Lambda);
  rd.get_string("coeffs", "A_kind", cfg.coeffs.A_kind);
  rd.get_real("coeffs", "A_value", cfg.coeffs.A_value);
  rd.get_real("coeffs", "A_lo", cfg.coeffs.A_lo);
  rd.get_real("coeffs", "A_hi", cfg.coeffs.A_hi);
  rd.get_int("coeffs", "checker_cells", cfg.coeffs.checker_cells);
  rd.get_string("coeffs", "B_kind", cfg.coeffs.B_kind);
  rd.get_real("coeffs", "B_value", cfg.coeffs.B_value);
  rd.get_string("coeffs", "s_kind", cfg.coeffs.s_kind);
  rd.get_real("coeffs", "s_value", cfg.coeffs.s_value);
  rd.get_string("coeffs", "f0_kind", cfg.coeffs.f0_kind);
  rd.get_real("coeffs", "f0_value", cfg.coeffs.f0_value);

  rd.get_u64("sweep", "seed", cfg.sweep.seed);
  rd.get_real("sweep", "eps_min", cfg.sweep.eps_min);
  rd.get_real("sweep", "eps_max", cfg.sweep.eps_max);
  rd.get_int("sweep", "eps_count", cfg.sweep.eps_count);
  rd.get_int("sweep", "directions", cfg.sweep.directions);
  rd.get_int("sweep", "resolution", cfg.sweep.resolution);
  rd.get_int("sweep", "mu_points", cfg.sweep.mu_points);
  rd.get("sweep", "bands", cfg.sweep.bands, detail::parse_int_list);
  rd.get_real("sweep", "varsigma", cfg.sweep.varsigma);
  rd.get_int("sweep", "scale_count", cfg.sweep.scale_count);
  rd.get_real("sweep", "scale_ratio", cfg.sweep.scale_ratio);
  rd.get_real("sweep", "q", cfg.sweep.q);
  rd.get_int("sweep", "n_max", cfg.sweep.n_max);
  rd.get_real("sweep", "c0", cfg.sweep.c0);
  rd.get_real("sweep", "l", cfg.sweep.l);
  rd.get_real("sweep", "alpha0", cfg.sweep.alpha0);
  rd.get_int("sweep", "test_count", cfg.sweep.test_count);
  rd.get_int("sweep", "pair_count", cfg.sweep.pair_count);

  rd.get_string("output", "dir", cfg.out_dir);
  rd.get_real("tolerances", "fit_slack", cfg.fit_slack);

  rd.reject_unknown();

  // semantic validation: collect everything, then fail once
  if (cfg.grid.d != 1 && cfg.grid.d != 2) errors.push_back("[grid] d must be 1 or 2");
  if (cfg.grid.nt < 4 || cfg.grid.nx < 4 || cfg.grid.nv < 4)
    errors.push_back("[grid] nt, nx, nv must each be >= 4");
  if (!(cfg.grid.t1 > cfg.grid.t0) || !(cfg.grid.x_hi > cfg.grid.x_lo) ||
      !(cfg.grid.v_hi > cfg.grid.v_lo))
    errors.push_back("[grid] extents must have positive length");
  if (!(cfg.coeffs.lambda > 0) || cfg.coeffs.lambda > cfg.coeffs.Lambda)
    errors.push_back("[coeffs] ellipticity bounds require 0 < lambda <= Lambda");
  const std::set<std::string> presets{"free_streaming", "relativistic", "cubic", "constant",
                                      "polynomial"};
  if (!presets.count(cfg.coeffs.preset))
    errors.push_back("[coeffs] preset must be one of free_streaming|relativistic|cubic|constant|"
                     "polynomial");
  if (cfg.coeffs.A_kind == "checkerboard" &&
      (cfg.coeffs.A_lo < cfg.coeffs.lambda || cfg.coeffs.A_hi > cfg.coeffs.Lambda))
    errors.push_back("[coeffs] checkerboard values must lie inside [lambda, Lambda]");
  if (cfg.sweep.eps_count < 4) errors.push_back("[sweep] eps_count must be >= 4 epsilon values");
  if (!(cfg.sweep.eps_min > 0) || !(cfg.sweep.eps_max > cfg.sweep.eps_min))
    errors.push_back("[sweep] require 0 < eps_min < eps_max");
  if (cfg.sweep.scale_count < 4) errors.push_back("[sweep] scale_count must be >= 4");
  if (cfg.grid.d == 2 && cfg.sweep.directions < 8)
    errors.push_back("[sweep] directions must be >= 8 when d = 2");

  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

// Echo of the effective configuration, written next to the outputs.
inline void write_effective_config(const ExperimentConfig& cfg,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("config echo: cannot open " + path.string());
  out << "[grid]\n";
  out << "d = " << cfg.grid.d << "\nnt = " << cfg.grid.nt << "\nnx = " << cfg.grid.nx
      << "\nnv = " << cfg.grid.nv << "\n";
  out << "t0 = " << fmt(cfg.grid.t0) << "\nt1 = " << fmt(cfg.grid.t1) << "\n";
  out << "x_lo = " << fmt(cfg.grid.x_lo) << "\nx_hi = " << fmt(cfg.grid.x_hi) << "\n";
  out << "v_lo = " << fmt(cfg.grid.v_lo) << "\nv_hi = " << fmt(cfg.grid.v_hi) << "\n";
  out << "periodic_x = " << fmt(cfg.grid.periodic_x)
      << "\nperiodic_v = " << fmt(cfg.grid.periodic_v) << "\n";
  out << "[coeffs]\n";
  out << "preset = " << cfg.coeffs.preset << "\nconst_value = " << fmt(cfg.coeffs.const_value)
      << "\n";
  out << "poly_coeffs = ";
  for (std::size_t i = 0; i < cfg.coeffs.poly_coeffs.size(); ++i)
    out << fmt(cfg.coeffs.poly_coeffs[i]) << (i + 1 < cfg.coeffs.poly_coeffs.size() ? "," : "");
  out << "\n";
  out << "lambda = " << fmt(cfg.coeffs.lambda) << "\nLambda = " << fmt(cfg.coeffs.Lambda) << "\n";
  out << "A_kind = " << cfg.coeffs.A_kind << "\nA_value = " << fmt(cfg.coeffs.A_value)
      << "\nA_lo = " << fmt(cfg.coeffs.A_lo) << "\nA_hi = " << fmt(cfg.coeffs.A_hi)
      << "\nchecker_cells = " << cfg.coeffs.checker_cells << "\n";
  out << "B_kind = " << cfg.coeffs.B_kind << "\nB_value = " << fmt(cfg.coeffs.B_value) << "\n";
  out << "s_kind = " << cfg.coeffs.s_kind << "\ns_value = " << fmt(cfg.coeffs.s_value) << "\n";
  out << "f0_kind = " << cfg.coeffs.f0_kind << "\nf0_value = " << fmt(cfg.coeffs.f0_value) << "\n";
  out << "[sweep]\n";
  out << "seed = " << cfg.sweep.seed << "\n";
  out << "eps_min = " << fmt(cfg.sweep.eps_min) << "\neps_max = " << fmt(cfg.sweep.eps_max)
      << "\neps_count = " << cfg.sweep.eps_count << "\n";
  out << "directions = " << cfg.sweep.directions << "\nresolution = " << cfg.sweep.resolution
      << "\nmu_points = " << cfg.sweep.mu_points << "\n";
  out << "bands = ";
  for (std::size_t i = 0; i < cfg.sweep.bands.size(); ++i)
    out << cfg.sweep.bands[i] << (i + 1 < cfg.sweep.bands.size() ? "," : "");
  out << "\n";
  out << "varsigma = " << fmt(cfg.sweep.varsigma) << "\nscale_count = " << cfg.sweep.scale_count
      << "\nscale_ratio = " << fmt(cfg.sweep.scale_ratio) << "\n";
  out << "q = " << fmt(cfg.sweep.q) << "\nn_max = " << cfg.sweep.n_max
      << "\nc0 = " << fmt(cfg.sweep.c0) << "\nl = " << fmt(cfg.sweep.l)
      << "\nalpha0 = " << fmt(cfg.sweep.alpha0) << "\n";
  out << "test_count = " << cfg.sweep.test_count << "\npair_count = " << cfg.sweep.pair_count
      << "\n";
  out << "[tolerances]\nfit_slack = " << fmt(cfg.fit_slack) << "\n";
}

// ---------------------------------------------------------------------------
// Instantiation of the configured coefficient set
// ---------------------------------------------------------------------------

inline VelocityField make_velocity(const CoeffSpec& cs, int d) {
  if (cs.preset == "free_streaming") return make_free_streaming(d);
  if (cs.preset == "relativistic") return make_relativistic(d);
  if (cs.preset == "cubic") return make_cubic(d);
  if (cs.preset == "constant") return make_constant(d, Vec::Constant(d, cs.const_value));
  if (cs.preset == "polynomial") return make_polynomial(d, cs.poly_coeffs);
  throw ConfigError("unknown velocity preset: " + cs.preset);
}

inline CoefficientSet make_coefficients(const ExperimentConfig& cfg) {
  const int d = cfg.grid.d;
  const CoeffSpec& cs = cfg.coeffs;
  CoefficientSet c;
  c.d = d;
  c.b = make_velocity(cs, d);
  c.lambda = cs.lambda;
  c.Lambda = cs.Lambda;

  if (cs.A_kind == "identity") {
    c.A = [d](Real, const Vec&, const Vec&) { return Mat(Mat::Identity(d, d)); };
  } else if (cs.A_kind == "scaled") {
    const Real a = cs.A_value;
    c.A = [d, a](Real, const Vec&, const Vec&) { return Mat(Mat::Identity(d, d) * a); };
  } else if (cs.A_kind == "checkerboard") {
    const Real lo = cs.A_lo, hi = cs.A_hi;
    const Real cell_x = cs.checker_cells * cfg.grid.dx();
    const Real cell_v = cs.checker_cells * cfg.grid.dv();
    const Real ox = cfg.grid.x_lo, ov = cfg.grid.v_lo;
    c.A = [d, lo, hi, cell_x, cell_v, ox, ov](Real, const Vec& x, const Vec& v) {
      long parity = 0;
      for (int a = 0; a < d; ++a) {
        parity += static_cast<long>(std::floor((x[a] - ox) / cell_x));
        parity += static_cast<long>(std::floor((v[a] - ov) / cell_v));
      }
      const Real val = (parity % 2 + 2) % 2 == 0 ? lo : hi;
      return Mat(Mat::Identity(d, d) * val);
    };
  } else {
    throw ConfigError("unknown A_kind: " + cs.A_kind);
  }

  if (cs.B_kind == "zero") {
    c.B = [d](Real, const Vec&, const Vec&) { return Vec(Vec::Zero(d)); };
  } else if (cs.B_kind == "constant") {
    Vec bvec = Vec::Zero(d);
    bvec[0] = cs.B_value;
    c.B = [bvec](Real, const Vec&, const Vec&) { return bvec; };
  } else {
    throw ConfigError("unknown B_kind: " + cs.B_kind);
  }

  if (cs.s_kind == "zero") {
    c.s = [](Real, const Vec&, const Vec&) { return 0.0; };
  } else if (cs.s_kind == "constant") {
    const Real sv = cs.s_value;
    c.s = [sv](Real, const Vec&, const Vec&) { return sv; };
  } else if (cs.s_kind == "bump") {
    const Real sv = cs.s_value;
    const GridSpec g = cfg.grid;
    c.s = [sv, g](Real t, const Vec& x, const Vec& v) {
      Real p = sv * smooth_bump((t - 0.5 * (g.t0 + g.t1)) / (0.4 * (g.t1 - g.t0)));
      for (int a = 0; a < g.d; ++a) {
        p *= smooth_bump((x[a] - 0.5 * (g.x_lo + g.x_hi)) / (0.4 * (g.x_hi - g.x_lo)));
        p *= smooth_bump((v[a] - 0.5 * (g.v_lo + g.v_hi)) / (0.4 * (g.v_hi - g.v_lo)));
      }
      return p;
    };
  } else {
    throw ConfigError("unknown s_kind: " + cs.s_kind);
  }
  return c;
}

inline Array make_initial_condition(const ExperimentConfig& cfg) {
  const GridSpec& g = cfg.grid;
  Array f0(g.slice_size());
  const Real xm = 0.5 * (g.x_lo + g.x_hi), vm = 0.5 * (g.v_lo + g.v_hi);
  for (long jf = 0; jf < g.nx_flat(); ++jf) {
    const Vec x = g.x_point(jf);
    for (long kf = 0; kf < g.nv_flat(); ++kf) {
      const Vec v = g.v_point(kf);
      Real val = 0;
      if (cfg.coeffs.f0_kind == "constant") {
        val = cfg.coeffs.f0_value;
      } else if (cfg.coeffs.f0_kind == "gaussian") {
        Real e = 0;
        for (int a = 0; a < g.d; ++a)
          e += (x[a] - xm) * (x[a] - xm) * 8.0 + (v[a] - vm) * (v[a] - vm) * 8.0;
        val = cfg.coeffs.f0_value * std::exp(-e);
      } else if (cfg.coeffs.f0_kind == "cosine_x") {
        val = cfg.coeffs.f0_value;
        for (int a = 0; a < g.d; ++a)
          val *= std::cos(2.0 * kPi * (x[a] - g.x_lo) / (g.x_hi - g.x_lo));
      } else if (cfg.coeffs.f0_kind == "bump") {
        val = cfg.coeffs.f0_value;
        for (int a = 0; a < g.d; ++a) {
          val *= smooth_bump((x[a] - xm) / (0.35 * (g.x_hi - g.x_lo)));
          val *= smooth_bump((v[a] - vm) / (0.35 * (g.v_hi - g.v_lo)));
        }
      } else {
        throw ConfigError("unknown f0_kind: " + cfg.coeffs.f0_kind);
      }
      f0[jf * g.nv_flat() + kf] = val;
    }
  }
  return f0;
}

}  // namespace kfp

#endif
