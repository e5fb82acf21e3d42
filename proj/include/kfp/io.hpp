#ifndef KFP_IO_HPP
#define KFP_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kfp/errors.hpp"
#include "kfp/grid.hpp"
#include "kfp/math.hpp"

namespace kfp {

// shortest round-trip decimal; deterministic across reruns
inline std::string fmt(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }
inline std::string fmt(const std::string& v) { return v; }

// ---------------------------------------------------------------------------
// CSV tables (UTF-8, comma separated, one header row)
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw IoError("csv: row width does not match header");
    rows_.push_back(std::move(row));
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("csv: cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header_.size(); ++i)
      out << header_[i] << (i + 1 < header_.size() ? "," : "\n");
    for (const auto& row : rows_)
      for (std::size_t i = 0; i < row.size(); ++i)
        out << row[i] << (i + 1 < row.size() ? "," : "\n");
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------------------
// Binary grid format "KFP1": 4-byte magic, u32 LE (nt, nx, nv, d),
// f64 LE extents (t0, t1, x_lo, x_hi, v_lo, v_hi), then f64 LE values with
// t slowest, x axes, v axes fastest.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ofstream& out, Real v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline Real get_f64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  Real v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline void write_kfp1(const std::filesystem::path& path, const ScalarField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("kfp1: cannot open " + path.string() + " for writing");
  out.write("KFP1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.nt));
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.nx));
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.nv));
  detail::put_u32(out, static_cast<std::uint32_t>(f.grid.d));
  detail::put_f64(out, f.grid.t0);
  detail::put_f64(out, f.grid.t1);
  detail::put_f64(out, f.grid.x_lo);
  detail::put_f64(out, f.grid.x_hi);
  detail::put_f64(out, f.grid.v_lo);
  detail::put_f64(out, f.grid.v_hi);
  for (long i = 0; i < f.values.size(); ++i) detail::put_f64(out, f.values[i]);
}

inline ScalarField read_kfp1(const std::filesystem::path& path, bool periodic_x = true,
                             bool periodic_v = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("kfp1: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "KFP1", 4) != 0) throw IoError("kfp1: bad magic in " + path.string());
  GridSpec g;
  g.nt = static_cast<int>(detail::get_u32(in));
  g.nx = static_cast<int>(detail::get_u32(in));
  g.nv = static_cast<int>(detail::get_u32(in));
  g.d = static_cast<int>(detail::get_u32(in));
  g.t0 = detail::get_f64(in);
  g.t1 = detail::get_f64(in);
  g.x_lo = detail::get_f64(in);
  g.x_hi = detail::get_f64(in);
  g.v_lo = detail::get_f64(in);
  g.v_hi = detail::get_f64(in);
  g.periodic_x = periodic_x;
  g.periodic_v = periodic_v;
  g.validate();
  ScalarField f(g);
  for (long i = 0; i < f.values.size(); ++i) f.values[i] = detail::get_f64(in);
  if (!in) throw IoError("kfp1: truncated file " + path.string());
  return f;
}

// ---------------------------------------------------------------------------
// Report index: every artifact with its FNV-1a 64 checksum.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checksum: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

inline void write_report(const std::filesystem::path& out_dir,
                         const std::vector<std::filesystem::path>& artifacts) {
  if (artifacts.empty()) throw InputError("write_report: no artifacts to index");
  std::ofstream out(out_dir / "index.txt", std::ios::binary);
  if (!out) throw IoError("write_report: output directory not writable: " + out_dir.string());
  for (const auto& p : artifacts) {
    const auto full = p.is_absolute() ? p : out_dir / p;
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_file(full)));
    out << p.filename().string() << "\t" << hex << "\t" << std::filesystem::file_size(full)
        << "\n";
  }
}

// gnuplot companion next to a CSV table
inline void write_plot_script(const std::filesystem::path& csv_path, const std::string& xlabel,
                              const std::string& ylabel, int xcol, int ycol, bool loglog) {
  std::filesystem::path gp = csv_path;
  gp.replace_extension(".gp");
  std::ofstream out(gp, std::ios::binary);
  if (!out) throw IoError("plot script: cannot open " + gp.string());
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead\n";
  if (loglog) out << "set logscale xy\n";
  out << "set xlabel '" << xlabel << "'\n";
  out << "set ylabel '" << ylabel << "'\n";
  out << "plot '" << csv_path.filename().string() << "' using " << xcol << ":" << ycol
      << " with linespoints\n";
}

// plain-text key=value summary record
inline void write_summary(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("summary: cannot open " + path.string());
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

}  // namespace kfp

#endif
