#pragma once

// Trajectory CSV and gnuplot output. Reals are written with 17 significant
// digits so a CSV read back reproduces every double exactly.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "integrate.hpp"

namespace adapted_mech {

inline std::string format_17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), end);
}

inline double parse_real(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> csv_header(int n) {
  std::vector<std::string> h{"t"};
  for (int i = 1; i <= n; ++i) h.push_back("x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) h.push_back("y" + std::to_string(i));
  for (const char* c : {"energy", "drift_rate", "residual"}) h.emplace_back(c);
  return h;
}

/// Header, one row per sample, then `# status: ...` if the run aborted.
/// Diagnostic columns not present in the trajectory are written as nan.
inline void write_csv(std::ostream& os, const Trajectory& traj, int n) {
  const auto header = csv_header(n);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    os << format_17(traj.times[s]);
    for (Eigen::Index i = 0; i < traj.states[s].natural().size(); ++i) os << "," << format_17(traj.states[s].natural()(i));
    for (const char* name : {"energy", "drift_rate", "residual"}) {
      double v = std::numeric_limits<double>::quiet_NaN();
      auto it = std::find(traj.diagnostic_names.begin(), traj.diagnostic_names.end(), name);
      if (it != traj.diagnostic_names.end()) v = traj.diagnostics[s][static_cast<std::size_t>(it - traj.diagnostic_names.begin())];
      os << "," << format_17(v);
    }
    os << "\n";
  }
  if (!traj.termination.completed) {
    os << "# status: aborted at t=" << format_17(traj.termination.time) << ": " << traj.termination.reason << "\n";
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(parse_real(cell));
    if (row.size() != t.header.size()) throw std::invalid_argument("csv row has " + std::to_string(row.size()) + " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Self-contained gnuplot script with the samples inlined: phase portrait of
/// (x1, y1) and energy against time.
inline void write_plot(std::ostream& os, const Trajectory& traj, int n, const std::string& title) {
  os << "# gnuplot script; run with: gnuplot -p <this file>\n";
  os << "$traj << EOD\n";
  write_csv(os, traj, n);
  os << "EOD\n";
  os << "set datafile separator ','\n";
  os << "set key autotitle columnhead\n";
  os << "set multiplot layout 1,2 title '" << title << "'\n";
  os << "set xlabel 'x1'\nset ylabel 'y1'\n";
  os << "plot $traj using 2:" << (n + 2) << " with lines title 'orbit'\n";
  os << "set xlabel 't'\nset ylabel 'energy'\n";
  os << "plot $traj using 1:" << (2 * n + 2) << " with lines title 'energy'\n";
  os << "unset multiplot\n";
}

}  // namespace adapted_mech
