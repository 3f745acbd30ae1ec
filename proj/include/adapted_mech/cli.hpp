#pragma once

// Command-line front end: check | derive | integrate | verify | sweep.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "integrate.hpp"
#include "io.hpp"
#include "system.hpp"
#include "verify.hpp"

namespace adapted_mech {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

/// Thrown for bad command-line values; maps to exit 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_real_list(const std::string& text, std::string_view what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t"));
    cell.erase(cell.find_last_not_of(" \t") + 1);
    try {
      out.push_back(parse_real(cell));
    } catch (const std::invalid_argument&) {
      throw UsageError(std::string(what) + ": '" + cell + "' is not a number");
    }
  }
  return out;
}

inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("ADAPTED_MECH_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("ADAPTED_MECH_SEED is not an unsigned integer: '") + env + "'");
  }
  return 42;
}

// ---------------------------------------------------------------------------
// Sweep grids

struct GridAxis {
  std::string key;
  std::vector<double> values;
};

/// "key=a:b:count" (inclusive linspace) or "key=v1,v2,...".
inline GridAxis parse_grid_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("grid '" + spec + "': expected key=values");
  GridAxis axis{spec.substr(0, eq), {}};
  const std::string rhs = spec.substr(eq + 1);
  if (rhs.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(rhs);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("grid '" + spec + "': range must be a:b:count");
    const double a = parse_real_list(parts[0], "grid")[0];
    const double b = parse_real_list(parts[1], "grid")[0];
    int count = 0;
    try {
      count = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw UsageError("grid '" + spec + "': count must be an integer");
    }
    if (count < 1) throw UsageError("grid '" + spec + "': count must be >= 1");
    for (int k = 0; k < count; ++k) axis.values.push_back(count == 1 ? a : a + (b - a) * k / (count - 1));
  } else {
    axis.values = parse_real_list(rhs, "grid");
  }
  if (axis.values.empty()) throw UsageError("grid '" + spec + "': no values");
  return axis;
}

/// Applies one override (x0[i], y0[i], x0/y0 at dim 1, or a parameter) to a definition.
inline void apply_override(SystemDefinition& def, const std::string& key, double value) {
  auto coordinate = [&](char which) -> std::optional<int> {
    const std::string prefix = std::string(1, which) + "0";
    if (key == prefix && def.dim == 1) return 1;
    if (key.rfind(prefix + "[", 0) == 0 && key.back() == ']') {
      try {
        return std::stoi(key.substr(3, key.size() - 4));
      } catch (const std::exception&) {
      }
    }
    return std::nullopt;
  };
  for (char which : {'x', 'y'}) {
    if (auto i = coordinate(which)) {
      if (*i < 1 || *i > def.dim) throw UsageError("grid key '" + key + "': index out of range 1.." + std::to_string(def.dim));
      Eigen::VectorXd z = def.initial.natural();
      z((which == 'x' ? 0 : def.dim) + *i - 1) = value;
      def.initial = BundlePoint::from_natural(z);
      return;
    }
  }
  auto it = def.params.find(key);
  if (it == def.params.end()) throw UsageError("grid key '" + key + "' is neither x0[i], y0[i] nor a declared parameter");
  it->second = value;
}

// ---------------------------------------------------------------------------
// Commands

namespace commands {

inline int check(const std::string& file, std::ostream& out) {
  const SystemDefinition def = load_system(file);
  out << normalized(def);
  return kExitOk;
}

inline int derive(const std::string& file, const std::string& at, std::ostream& out) {
  const SystemDefinition def = load_system(file);
  BundlePoint p = def.initial;
  if (!at.empty()) {
    const auto v = parse_real_list(at, "--at");
    if (static_cast<int>(v.size()) != 2 * def.dim) {
      throw UsageError("--at needs " + std::to_string(2 * def.dim) + " comma-separated values (x1..xn, y1..yn)");
    }
    p = BundlePoint::from_natural(Eigen::Map<const Eigen::VectorXd>(v.data(), 2 * def.dim));
  }
  const Model model = build_model(def);
  auto vec = [](const Eigen::VectorXd& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_17(v(i));
    return s + "]";
  };
  // Evaluate everything before printing so a degenerate point produces no partial report.
  const Eigen::VectorXd f = model.rhs(p);
  const double energy = model.energy(p);
  const double residual = model.residual(p);
  std::string extra;
  if (def.kind == SystemKind::hamiltonian) {
    extra = "drift_rate: " + format_17(energy_drift_rate(def.hamiltonian_system(), p));
  } else {
    const LagrangianSystem sys = def.lagrangian_system();
    const AdaptedDerivatives ad = adapted_derivatives(sys.lagrangian, sys.connection, p, sys.params);
    const double cond = def.lagrangian_mode == LagrangianMode::coefficient_matching
                            ? semispray_solve(ad, p).condition_number
                            : detail::condition_number(euler_lagrange_system(ad).first);
    extra = "condition_number: " + format_17(cond);
  }
  out << "system: " << def.name << " (" << to_string(def.kind) << ", " << mode_name(def) << ")\n";
  out << "point: x=" << vec(p.x()) << " y=" << vec(p.y()) << "\n";
  out << "rhs: " << vec(f) << "\n";
  out << (def.kind == SystemKind::lagrangian ? "energy (E_L): " : "energy (H): ") << format_17(energy) << "\n";
  out << extra << "\n";
  out << "residual: " << format_17(residual) << "\n";
  return kExitOk;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path.string());
  f << content;
  if (!f) throw UsageError("failed writing " + path.string());
}

inline int integrate(const std::string& file, const std::string& out_path, const std::string& plot_path,
                     std::ostream& out, std::ostream& err) {
  const SystemDefinition def = load_system(file);
  const Model model = build_model(def);
  const auto diags = model.diagnostics();
  const Trajectory traj = adapted_mech::integrate(model.rhs, def.initial, def.integrate, diags);
  std::ostringstream csv;
  write_csv(csv, traj, def.dim);
  if (out_path.empty()) {
    out << csv.str();
  } else {
    write_file(out_path, csv.str());
  }
  if (!plot_path.empty()) {
    std::ostringstream plot;
    write_plot(plot, traj, def.dim, def.name);
    write_file(plot_path, plot.str());
  }
  if (!traj.termination.completed) {
    err << "integration aborted at t=" << format_17(traj.termination.time) << ": " << traj.termination.reason << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

inline int verify(std::uint64_t seed, const std::string& dims_text, const std::string& out_path, bool report_only,
                  const std::string& fault, std::ostream& out) {
  SuiteOptions opts;
  opts.seed = seed;
  opts.include_report_only = report_only;
  opts.dims.clear();
  for (double d : parse_real_list(dims_text, "--dims")) {
    if (d < 1 || d != std::floor(d) || d > 16) throw UsageError("--dims: dimensions must be integers in 1..16");
    opts.dims.push_back(static_cast<int>(d));
  }
  if (fault == "transposed-coframe") {
    opts.fault = Fault::transposed_coframe;
  } else if (!fault.empty()) {
    throw UsageError("unknown fault '" + fault + "'");
  }
  const auto results = run_suite(opts);
  const std::string json = report_json(results).dump(2) + "\n";
  if (out_path.empty()) {
    out << json;
  } else {
    write_file(out_path, json);
    for (const auto& r : results) {
      out << std::left << std::setw(32) << r.name << " n=" << r.n << "  max_error=" << std::setw(24)
          << format_17(r.max_error) << (r.pass ? (*r.pass ? "pass" : "FAIL") : "report") << "\n";
    }
  }
  return all_pass(results) ? kExitOk : kExitVerifyFailed;
}

inline int sweep(const std::string& file, const std::vector<std::string>& grids, const std::string& out_dir,
                 unsigned threads, std::ostream& out) {
  const SystemDefinition def = load_system(file);
  if (grids.empty()) throw UsageError("sweep needs at least one --grid");
  std::vector<GridAxis> axes;
  for (const auto& g : grids) axes.push_back(parse_grid_axis(g));

  // Cartesian product, last axis fastest.
  std::vector<std::vector<std::pair<std::string, double>>> points{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<std::pair<std::string, double>>> next;
    for (const auto& prefix : points) {
      for (double v : axis.values) {
        auto row = prefix;
        row.emplace_back(axis.key, v);
        next.push_back(std::move(row));
      }
    }
    points = std::move(next);
  }

  std::vector<SystemDefinition> defs;
  std::vector<SweepItem> items;
  for (const auto& pt : points) {
    SystemDefinition d = def;
    SweepItem item;
    for (const auto& [k, v] : pt) {
      apply_override(d, k, v);
      if (d.params.count(k)) item.overrides[k] = v;
    }
    item.initial = d.initial;
    defs.push_back(std::move(d));
    items.push_back(std::move(item));
  }

  std::filesystem::create_directories(out_dir);
  // sweep() hands back references into `items`, so the offset recovers the definition.
  auto factory = [&](const SweepItem& item) {
    const auto k = static_cast<std::size_t>(&item - items.data());
    const Model m = build_model(defs[k]);
    return SweepJob{m.rhs, m.diagnostics()};
  };
  const auto results = adapted_mech::sweep(std::span<const SweepItem>(items), def.integrate, factory, threads);

  nlohmann::json index = nlohmann::json::array();
  std::size_t completed = 0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    std::ostringstream name;
    name << "run_" << std::setw(4) << std::setfill('0') << k << ".csv";
    std::ostringstream csv;
    write_csv(csv, results[k], def.dim);
    write_file(std::filesystem::path(out_dir) / name.str(), csv.str());
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [key, v] : points[k]) overrides[key] = v;
    nlohmann::json entry{{"index", k}, {"file", name.str()}, {"overrides", overrides}};
    if (results[k].termination.completed) {
      entry["status"] = "completed";
      ++completed;
    } else {
      entry["status"] = "aborted";
      entry["reason"] = results[k].termination.reason;
      entry["t"] = results[k].termination.time;
    }
    index.push_back(std::move(entry));
  }
  write_file(std::filesystem::path(out_dir) / "index.json", index.dump(2) + "\n");
  out << completed << " of " << results.size() << " runs completed; index written to "
      << (std::filesystem::path(out_dir) / "index.json").string() << "\n";
  return completed > 0 ? kExitOk : kExitNumerical;
}

}  // namespace commands

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lagrangian and Hamiltonian dynamics on adapted frames of a nonlinear connection",
               "adapted-mech"};
  app.require_subcommand(1);

  std::string file, at, out_path, plot_path, dims = "1,2,3", fault;
  std::vector<std::string> grids;
  std::optional<std::uint64_t> seed;
  bool no_report_only = false;
  unsigned threads = 0;

  auto* check = app.add_subcommand("check", "Validate a system file and print its normalized form");
  check->add_option("file", file, "System definition (TOML)")->required();

  auto* derive = app.add_subcommand("derive", "Evaluate rhs, energy and residuals at a point");
  derive->add_option("file", file, "System definition (TOML)")->required();
  derive->add_option("--at", at, "Point as x1,..,xn,y1,..,yn (default: the file's initial state)");

  auto* integ = app.add_subcommand("integrate", "Integrate a system and write a trajectory CSV");
  integ->add_option("file", file, "System definition (TOML)")->required();
  integ->add_option("--out,-o", out_path, "CSV path (default: stdout)");
  integ->add_option("--plot", plot_path, "Write a gnuplot script with the data inlined");

  auto* ver = app.add_subcommand("verify", "Run the randomized invariant suite");
  ver->add_option("--seed", seed, "Random seed (default: $ADAPTED_MECH_SEED or 42)");
  ver->add_option("--dims", dims, "Comma-separated dimensions")->capture_default_str();
  ver->add_option("--out,-o", out_path, "JSON report path (default: stdout)");
  ver->add_flag("--no-report-only", no_report_only, "Omit report-only diagnostics");
  ver->add_option("--inject-fault", fault)->group("");

  auto* sw = app.add_subcommand("sweep", "Integrate over a cartesian grid of initial states and parameters");
  sw->add_option("file", file, "System definition (TOML)")->required();
  sw->add_option("--grid", grids, "key=a:b:count or key=v1,v2 (repeatable; key is x0[i], y0[i] or a parameter)")
      ->required();
  sw->add_option("--out,-o", out_path, "Output directory")->required();
  sw->add_option("--threads", threads, "Worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*check) return commands::check(file, out);
    if (*derive) return commands::derive(file, at, out);
    if (*integ) return commands::integrate(file, out_path, plot_path, out, err);
    if (*ver) return commands::verify(seed ? *seed : default_seed(), dims, out_path, !no_report_only, fault, out);
    if (*sw) return commands::sweep(file, grids, out_path, threads, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DegenerateLagrangian& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace adapted_mech
