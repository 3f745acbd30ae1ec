#pragma once

// System definition files (TOML).
//
//   [system]       name, dim, kind = "lagrangian" | "hamiltonian", scalar
//   [connection]   N = [["0", "c"], ["-c", "0"]]   (strings or numbers; zero if absent)
//   [params]       name = value
//   [dynamics]     mode
//   [integrate]    t0, t1, method, step | rtol, atol, initial_step, x0, y0, sample_stride
//   [mechanical]   masses, potential, g, height   (lagrangian only; replaces scalar)

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <toml.hpp>

#include "expr.hpp"
#include "frame.hpp"
#include "hamiltonian.hpp"
#include "integrate.hpp"
#include "lagrangian.hpp"
#include "point.hpp"

namespace adapted_mech {

/// Any failure to load or validate a system definition. `what()` carries the
/// source position when one is known.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class SystemKind { lagrangian, hamiltonian };
enum class LagrangianMode { coefficient_matching, euler_lagrange };

struct MechanicalSpec {
  std::vector<double> masses;
  std::string potential = "0";
  std::optional<double> g;
  std::string height;
};

struct SystemDefinition {
  std::string name;
  int dim = 1;
  SystemKind kind = SystemKind::hamiltonian;
  std::string scalar_text;
  Expression scalar = Expression::constant(0.0);
  std::vector<std::vector<std::string>> connection_text;
  Connection connection{1};
  ParameterTable params;
  LagrangianMode lagrangian_mode = LagrangianMode::coefficient_matching;
  HamiltonianMode hamiltonian_mode = HamiltonianMode::paper;
  IntegratorConfig integrate;
  BundlePoint initial = BundlePoint::zero(1);
  std::optional<MechanicalSpec> mechanical;

  ParameterSet parameter_names() const {
    ParameterSet out;
    for (const auto& [k, v] : params) out.insert(k);
    return out;
  }

  LagrangianSystem lagrangian_system() const { return {dim, scalar, connection, params}; }
  HamiltonianSystem hamiltonian_system() const { return {dim, scalar, connection, params, hamiltonian_mode}; }
};

inline std::string_view to_string(SystemKind k) { return k == SystemKind::lagrangian ? "lagrangian" : "hamiltonian"; }

inline std::string_view to_string(LagrangianMode m) {
  return m == LagrangianMode::coefficient_matching ? "coefficient-matching" : "euler-lagrange";
}

inline std::string_view to_string(HamiltonianMode m) {
  return m == HamiltonianMode::paper ? "paper" : "frame-consistent";
}

inline std::string_view to_string(Method m) { return m == Method::rk4 ? "rk4" : "rk45"; }

inline std::string mode_name(const SystemDefinition& def) {
  return std::string(def.kind == SystemKind::lagrangian ? to_string(def.lagrangian_mode)
                                                        : to_string(def.hamiltonian_mode));
}

namespace detail {

class ConfigReader {
public:
  ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::source_region& where, const std::string& msg) const {
    throw ConfigError(location(where) + msg);
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(source_ + ": " + msg); }

  std::string location(const toml::source_region& where) const {
    if (!where.begin) return source_ + ": ";
    return source_ + ":" + std::to_string(where.begin.line) + ":" + std::to_string(where.begin.column) + ": ";
  }

  const toml::table* table(const toml::table& root, std::string_view key, bool required) const {
    const toml::node* n = root.get(key);
    if (!n) {
      if (required) fail("missing table [" + std::string(key) + "]");
      return nullptr;
    }
    if (!n->is_table()) fail(n->source(), "[" + std::string(key) + "] must be a table");
    return n->as_table();
  }

  std::optional<double> number(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
    fail(n->source(), "'" + std::string(key) + "' must be a number");
  }

  std::optional<std::int64_t> integer(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) fail(n->source(), "'" + std::string(key) + "' must be an integer");
    return n->as_integer()->get();
  }

  std::optional<std::string> string(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) fail(n->source(), "'" + std::string(key) + "' must be a string");
    return n->as_string()->get();
  }

  /// Expression text: strings verbatim, numbers printed.
  std::string expression_text(const toml::node& n, std::string_view what) const {
    if (n.is_string()) return n.as_string()->get();
    if (n.is_integer()) return std::to_string(n.as_integer()->get());
    if (n.is_floating_point()) return detail::format_real(n.as_floating_point()->get());
    fail(n.source(), std::string(what) + " must be a string or a number");
  }

  std::vector<double> numbers(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    std::vector<double> out;
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr) fail(n->source(), "'" + std::string(key) + "' must be an array of numbers");
    for (const toml::node& el : *arr) {
      auto v = el.value<double>();
      if (!v || !(el.is_integer() || el.is_floating_point())) {
        fail(el.source(), "'" + std::string(key) + "' must contain only numbers");
      }
      out.push_back(*v);
    }
    return out;
  }

  Expression expression(const std::string& text, int n, const ParameterSet& names, const toml::node& where,
                        std::string_view what) const {
    try {
      return parse(text, n, names);
    } catch (const ParseError& e) {
      fail(where.source(), std::string(what) + " '" + text + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      fail(where.source(), std::string(what) + ": " + e.what());
    }
  }

private:
  std::string source_;
};

}  // namespace detail

/// Parses and validates a system definition. `source` names the input in messages.
inline SystemDefinition parse_system(std::string_view text, std::string source = "<input>") {
  detail::ConfigReader rd(source);
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    rd.fail(e.source(), std::string(e.description()));
  }

  SystemDefinition def;
  const toml::table& sys = *rd.table(root, "system", true);
  def.name = rd.string(sys, "name").value_or("unnamed");
  const auto dim = rd.integer(sys, "dim");
  if (!dim) rd.fail(sys.source(), "[system] requires 'dim'");
  if (*dim < 1 || *dim > 64) rd.fail(sys.get("dim")->source(), "dim must be between 1 and 64");
  def.dim = static_cast<int>(*dim);
  const int n = def.dim;

  const auto kind = rd.string(sys, "kind");
  if (!kind) rd.fail(sys.source(), "[system] requires 'kind'");
  if (*kind == "lagrangian") {
    def.kind = SystemKind::lagrangian;
  } else if (*kind == "hamiltonian") {
    def.kind = SystemKind::hamiltonian;
  } else {
    rd.fail(sys.get("kind")->source(), "unknown kind '" + *kind + "' (expected lagrangian or hamiltonian)");
  }

  if (const toml::table* params = rd.table(root, "params", false)) {
    for (const auto& [key, node] : *params) {
      auto v = node.value<double>();
      if (!v || !(node.is_integer() || node.is_floating_point())) {
        rd.fail(node.source(), "parameter '" + std::string(key.str()) + "' must be a number");
      }
      const std::string name(key.str());
      const bool coordinate_like = name.size() > 1 && (name[0] == 'x' || name[0] == 'y') &&
                                   std::all_of(name.begin() + 1, name.end(), [](unsigned char ch) { return std::isdigit(ch); });
      static const ParameterSet reserved{"sin", "cos", "exp", "log", "sqrt"};
      if (coordinate_like || reserved.count(name)) rd.fail(key.source(), "parameter name '" + name + "' is reserved");
      def.params[name] = *v;
    }
  }
  const ParameterSet names = def.parameter_names();

  const toml::table* mech = rd.table(root, "mechanical", false);
  const toml::node* scalar_node = sys.get("scalar");
  if (mech) {
    if (def.kind != SystemKind::lagrangian) rd.fail(mech->source(), "[mechanical] applies to lagrangian systems only");
    if (scalar_node) rd.fail(scalar_node->source(), "give either [system] scalar or [mechanical], not both");
    MechanicalSpec ms;
    ms.masses = rd.numbers(*mech, "masses");
    if (static_cast<int>(ms.masses.size()) != n) {
      rd.fail(mech->source(), "masses must have length " + std::to_string(n));
    }
    const toml::node* pot = mech->get("potential");
    if (pot) ms.potential = rd.expression_text(*pot, "potential");
    ms.g = rd.number(*mech, "g");
    const toml::node* height = mech->get("height");
    if (ms.g && !height) rd.fail(mech->source(), "gravity 'g' requires a 'height' expression");
    if (height) ms.height = rd.expression_text(*height, "height");
    const Expression pe = rd.expression(ms.potential, n, names, pot ? *pot : *mech, "potential");
    std::optional<Gravity> gravity;
    if (ms.g) gravity = Gravity{*ms.g, rd.expression(ms.height, n, names, *height, "height")};
    try {
      def.scalar = mechanical_lagrangian(ms.masses, pe, gravity);
    } catch (const std::invalid_argument& e) {
      rd.fail(mech->source(), e.what());
    }
    def.scalar_text = def.scalar.to_string();
    def.mechanical = ms;
  } else {
    if (!scalar_node) rd.fail(sys.source(), "[system] requires 'scalar' (or a [mechanical] table)");
    def.scalar_text = rd.expression_text(*scalar_node, "scalar");
    def.scalar = rd.expression(def.scalar_text, n, names, *scalar_node, "scalar");
  }

  def.connection = Connection(n);
  def.connection_text.assign(static_cast<std::size_t>(n), std::vector<std::string>(static_cast<std::size_t>(n), "0"));
  if (const toml::table* conn = rd.table(root, "connection", false)) {
    const toml::node* N = conn->get("N");
    if (!N) rd.fail(conn->source(), "[connection] requires 'N'");
    const std::string shape = "connection must be " + std::to_string(n) + "x" + std::to_string(n);
    const toml::array* rows = N->as_array();
    if (!rows || static_cast<int>(rows->size()) != n) rd.fail(N->source(), shape);
    for (int i = 0; i < n; ++i) {
      const toml::node& row_node = *rows->get(static_cast<std::size_t>(i));
      const toml::array* row = row_node.as_array();
      if (!row || static_cast<int>(row->size()) != n) rd.fail(row_node.source(), shape);
      for (int j = 0; j < n; ++j) {
        const toml::node& entry = *row->get(static_cast<std::size_t>(j));
        std::string text = rd.expression_text(entry, "connection entry");
        def.connection.set(i, j, rd.expression(text, n, names, entry, "connection entry"));
        def.connection_text[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(text);
      }
    }
  }

  if (const toml::table* dyn = rd.table(root, "dynamics", false)) {
    if (const auto mode = rd.string(*dyn, "mode")) {
      const toml::source_region& where = dyn->get("mode")->source();
      if (def.kind == SystemKind::lagrangian) {
        if (*mode == "coefficient-matching") {
          def.lagrangian_mode = LagrangianMode::coefficient_matching;
        } else if (*mode == "euler-lagrange") {
          def.lagrangian_mode = LagrangianMode::euler_lagrange;
        } else {
          rd.fail(where, "unknown mode '" + *mode + "' for a lagrangian system (expected coefficient-matching or euler-lagrange)");
        }
      } else if (*mode == "paper") {
        def.hamiltonian_mode = HamiltonianMode::paper;
      } else if (*mode == "frame-consistent") {
        def.hamiltonian_mode = HamiltonianMode::frame_consistent;
      } else {
        rd.fail(where, "unknown mode '" + *mode + "' for a hamiltonian system (expected paper or frame-consistent)");
      }
    }
  }

  IntegratorConfig& cfg = def.integrate;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n), y0 = Eigen::VectorXd::Zero(n);
  if (const toml::table* in = rd.table(root, "integrate", false)) {
    if (auto m = rd.string(*in, "method")) {
      if (*m == "rk4") {
        cfg.method = Method::rk4;
      } else if (*m == "rk45") {
        cfg.method = Method::rk45;
      } else {
        rd.fail(in->get("method")->source(), "unknown method '" + *m + "' (expected rk4 or rk45)");
      }
    }
    cfg.t0 = rd.number(*in, "t0").value_or(cfg.t0);
    cfg.t1 = rd.number(*in, "t1").value_or(cfg.t1);
    cfg.step = rd.number(*in, "step").value_or(cfg.step);
    cfg.rtol = rd.number(*in, "rtol").value_or(cfg.rtol);
    cfg.atol = rd.number(*in, "atol").value_or(cfg.atol);
    cfg.initial_step = rd.number(*in, "initial_step").value_or(cfg.initial_step);
    if (auto s = rd.integer(*in, "sample_stride")) {
      if (*s < 1) rd.fail(in->get("sample_stride")->source(), "sample_stride must be >= 1");
      cfg.sample_stride = static_cast<int>(*s);
    }
    for (const char* key : {"x0", "y0"}) {
      if (!in->get(key)) continue;
      const std::vector<double> v = rd.numbers(*in, key);
      if (static_cast<int>(v.size()) != n) {
        rd.fail(in->get(key)->source(), std::string(key) + " must have length " + std::to_string(n));
      }
      (key[0] == 'x' ? x0 : y0) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    }
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      rd.fail(in->source(), e.what());
    }
  }
  def.initial = BundlePoint(x0, y0);
  if (!def.initial.finite()) rd.fail("initial state must be finite");
  return def;
}

inline SystemDefinition load_system(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str(), path.string());
}

/// Canonical TOML rendering: printed expressions, every integration setting explicit.
inline std::string normalized(const SystemDefinition& def) {
  auto real = [](double v) { return detail::format_real(v); };
  auto quoted = [](const std::string& s) {
    std::ostringstream os;
    os << toml::value<std::string>(s);
    return os.str();
  };
  std::ostringstream os;
  os << "[system]\n";
  os << "name = " << quoted(def.name) << "\n";
  os << "dim = " << def.dim << "\n";
  os << "kind = " << quoted(std::string(to_string(def.kind))) << "\n";
  os << "scalar = " << quoted(def.scalar.to_string()) << "\n\n";
  os << "[connection]\nN = [";
  for (int i = 0; i < def.dim; ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < def.dim; ++j) os << (j ? ", " : "") << quoted(def.connection(i, j).to_string());
    os << "]";
  }
  os << "]\n\n[params]\n";
  for (const auto& [k, v] : def.params) os << k << " = " << real(v) << "\n";
  os << "\n[dynamics]\nmode = " << quoted(mode_name(def)) << "\n\n";
  const IntegratorConfig& c = def.integrate;
  os << "[integrate]\n";
  os << "method = " << quoted(std::string(to_string(c.method))) << "\n";
  os << "t0 = " << real(c.t0) << "\n";
  os << "t1 = " << real(c.t1) << "\n";
  if (c.method == Method::rk4) {
    os << "step = " << real(c.step) << "\n";
  } else {
    os << "rtol = " << real(c.rtol) << "\n";
    os << "atol = " << real(c.atol) << "\n";
    os << "initial_step = " << real(c.initial_step) << "\n";
  }
  os << "sample_stride = " << c.sample_stride << "\n";
  auto vec = [&](auto v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + real(v(i));
    return s + "]";
  };
  os << "x0 = " << vec(def.initial.x()) << "\n";
  os << "y0 = " << vec(def.initial.y()) << "\n";
  return os.str();
}

}  // namespace adapted_mech
