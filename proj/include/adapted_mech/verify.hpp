#pragma once

// Randomized invariant suite. Each (dimension, check) pair draws from its own
// generator seeded by (seed, n, check id), so results do not depend on the
// order in which checks run.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "expr.hpp"
#include "forms.hpp"
#include "frame.hpp"
#include "hamiltonian.hpp"
#include "integrate.hpp"
#include "lagrangian.hpp"
#include "point.hpp"

namespace adapted_mech {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Random draws

namespace sampling {

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index size, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline BundlePoint random_point(Rng& rng, int n, double box = 2.0) {
  return BundlePoint::from_natural(uniform_vector(rng, 2 * n, -box, box));
}

inline Expression random_coordinate(Rng& rng, int n) {
  const int slot = uniform_int(rng, 0, 2 * n - 1);
  return slot < n ? Expression::x(slot + 1) : Expression::y(slot - n + 1);
}

/// Product of `degree` random coordinates.
inline Expression random_monomial(Rng& rng, int n, int degree) {
  Expression m = random_coordinate(rng, n);
  for (int k = 1; k < degree; ++k) m = m * random_coordinate(rng, n);
  return m;
}

/// c0 + sum of up to `max_terms` monomials of degree 1..max_degree, coefficients in [-scale, scale].
inline Expression random_polynomial(Rng& rng, int n, int max_degree = 2, int max_terms = 3, double scale = 1.0) {
  Expression p = Expression::constant(uniform(rng, -scale, scale));
  const int terms = uniform_int(rng, 0, max_terms);
  for (int t = 0; t < terms; ++t) {
    const Expression c = Expression::constant(uniform(rng, -scale, scale));
    p = p + c * random_monomial(rng, n, uniform_int(rng, 1, max_degree));
  }
  return p;
}

/// Entries are polynomials of total degree <= 2 with coefficients in [-1, 1].
inline Connection random_connection(Rng& rng, int n) {
  Connection N(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) N.set(i, j, random_polynomial(rng, n));
  }
  return N;
}

inline Expression half_sum_of_squares(int n, CoordKind kind) {
  std::optional<Expression> acc;
  for (int i = 1; i <= n; ++i) {
    Expression t = Expression::constant(0.5) * pow(Expression::coordinate(kind, i), Expression::constant(2));
    acc = acc ? *acc + t : t;
  }
  return *acc;
}

/// 1/2|y|^2 - 1/2|x|^2 plus a small cubic perturbation.
inline Expression random_lagrangian(Rng& rng, int n) {
  return half_sum_of_squares(n, CoordKind::y) - half_sum_of_squares(n, CoordKind::x) +
         random_polynomial(rng, n, 3, 3, 0.1);
}

/// 1/2(|x|^2 + |y|^2) plus a small cubic perturbation.
inline Expression random_hamiltonian(Rng& rng, int n) {
  return half_sum_of_squares(n, CoordKind::x) + half_sum_of_squares(n, CoordKind::y) +
         random_polynomial(rng, n, 3, 3, 0.1);
}

/// Random smooth expression over all operators, built so that every
/// subexpression stays inside its evaluation domain. Integer powers only
/// take affine bases, which keeps every draw resolvable by a
/// 1e-5 central difference.
inline Expression random_smooth_expression(Rng& rng, int n, int depth) {
  using E = Expression;
  if (depth <= 0 || uniform(rng, 0.0, 1.0) < 0.2) {
    if (uniform(rng, 0.0, 1.0) < 0.7) return random_coordinate(rng, n);
    return E::constant(std::round(uniform(rng, -2.0, 2.0) * 100.0) / 100.0);
  }
  const E a = random_smooth_expression(rng, n, depth - 1);
  switch (uniform_int(rng, 0, 10)) {
    case 0: return a + random_smooth_expression(rng, n, depth - 1);
    case 1: return a - random_smooth_expression(rng, n, depth - 1);
    case 2:
    case 3: return a * random_smooth_expression(rng, n, depth - 1);
    case 4: return sin(a);
    case 5: return cos(a);
    case 6: return exp(E::constant(0.5) * sin(a));
    case 7: return a + pow(random_polynomial(rng, n, 1, 2), E::constant(uniform_int(rng, 2, 3)));
    case 8: return a / (E::constant(1.5) + pow(random_smooth_expression(rng, n, depth - 1), E::constant(2)));
    case 9: return log(E::constant(2) + sin(a)) + sqrt(E::constant(1) + pow(a, E::constant(2)));
    default: return pow(E::constant(1.5) + sin(a), E::constant(std::round(uniform(rng, -1.5, 1.5) * 100.0) / 100.0 + 0.005));
  }
}

}  // namespace sampling

// ---------------------------------------------------------------------------
// Finite-difference oracles (value-based, independent of the jet code)

namespace fd {

inline Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& z,
                                double h = 1e-5) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    Eigen::VectorXd zp = z, zm = z;
    zp(r) += h;
    zm(r) -= h;
    g(r) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return g;
}

/// Fourth-order second difference along direction u.
inline double second_directional(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& u, double h) {
  return (-f(z + 2 * h * u) + 16 * f(z + h * u) - 30 * f(z) + 16 * f(z - h * u) - f(z - 2 * h * u)) / (12 * h * h);
}

/// Hessian from values; mixed entries by polarisation of directional second
/// differences, Richardson-extrapolated from steps h and h/2.
inline Eigen::MatrixXd hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& z,
                               double h = 1e-3) {
  const auto m = z.size();
  auto at_step = [&](double step) {
    Eigen::MatrixXd H(m, m);
    std::vector<Eigen::VectorXd> e(static_cast<std::size_t>(m), Eigen::VectorXd::Zero(m));
    for (Eigen::Index r = 0; r < m; ++r) {
      e[r](r) = 1.0;
      H(r, r) = second_directional(f, z, e[r], step);
    }
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index s = r + 1; s < m; ++s) {
        const double both = second_directional(f, z, e[r] + e[s], step);
        H(r, s) = H(s, r) = 0.5 * (both - H(r, r) - H(s, s));
      }
    }
    return H;
  };
  return (16.0 * at_step(0.5 * h) - at_step(h)) / 15.0;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace fd

// ---------------------------------------------------------------------------
// Results

struct CheckResult {
  std::string name;
  int n = 0;
  std::uint64_t seed = 0;
  int samples = 0;
  double max_error = 0.0;
  std::optional<double> tolerance;  // absent for report-only checks
  std::optional<bool> pass;         // absent for report-only checks
  std::string notes;

  bool report_only() const { return !pass.has_value(); }
};

inline nlohmann::json to_json(const CheckResult& r) {
  nlohmann::json j{{"name", r.name}, {"n", r.n}, {"seed", r.seed}, {"samples", r.samples}};
  j["max_error"] = std::isfinite(r.max_error) ? nlohmann::json(r.max_error) : nlohmann::json(nullptr);
  j["tolerance"] = r.tolerance ? nlohmann::json(*r.tolerance) : nlohmann::json(nullptr);
  if (r.pass) j["pass"] = *r.pass;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

inline nlohmann::json report_json(const std::vector<CheckResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return arr;
}

inline bool all_pass(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return !r.pass || *r.pass; });
}

// ---------------------------------------------------------------------------
// Suite

enum class Fault { none, transposed_coframe };

struct SuiteOptions {
  std::uint64_t seed = 42;
  std::vector<int> dims{1, 2, 3};
  bool include_report_only = true;
  Fault fault = Fault::none;
};

namespace checks {

struct Context {
  int n;
  std::uint64_t seed;
  Fault fault;
  Rng rng;
};

/// Running maximum that lets NaN win, so a non-finite error is never hidden.
struct MaxTracker {
  double value = 0.0;
  int samples = 0;
  std::string worst;

  void add(double err, std::string_view label = {}) {
    ++samples;
    if (std::isnan(value)) return;
    if (std::isnan(err) || err > value) {
      value = err;
      worst = label;
    }
  }
};

inline CheckResult pass_type(std::string name, const Context& c, const MaxTracker& m, double tol,
                             std::string notes = {}) {
  CheckResult r{std::move(name), c.n, c.seed, m.samples, m.value, tol, std::nullopt, std::move(notes)};
  r.pass = std::isfinite(m.value) && m.value <= tol;
  return r;
}

inline CheckResult report(std::string name, const Context& c, const MaxTracker& m, std::string notes = {}) {
  return {std::move(name), c.n, c.seed, m.samples, m.value, std::nullopt, std::nullopt, std::move(notes)};
}

inline Eigen::MatrixXd coframe(const Eigen::MatrixXd& N, Fault fault) {
  return fault == Fault::transposed_coframe ? coframe_matrix(N.transpose()) : coframe_matrix(N);
}

inline Eigen::MatrixXd random_N_value(Context& c) {
  const Connection N = sampling::random_connection(c.rng, c.n);
  return eval_frame(N, sampling::random_point(c.rng, c.n)).value;
}

inline CheckResult duality_pairing(Context c) {
  MaxTracker m;
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd N = random_N_value(c);
    const Eigen::MatrixXd pairing = coframe(N, c.fault) * frame_matrix(N);
    m.add((pairing - Eigen::MatrixXd::Identity(2 * c.n, 2 * c.n)).cwiseAbs().maxCoeff());
  }
  return pass_type("duality_pairing", c, m, 1e-12);
}

inline CheckResult operator_identities(Context c) {
  MaxTracker m;
  const auto dim = 2 * c.n;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd N = random_N_value(c);
    const Eigen::MatrixXd h = operator_matrix(VectorOperator::h, N);
    const Eigen::MatrixXd v = operator_matrix(VectorOperator::v, N);
    const Eigen::MatrixXd P = operator_matrix(VectorOperator::P, N);
    const Eigen::MatrixXd J = operator_matrix(VectorOperator::J, N);
    // Dual operators rebuilt from the (possibly faulty) coframe.
    const Eigen::MatrixXd Th = coframe(N, c.fault).transpose();
    const Eigen::MatrixXd Ps = Th * detail::adapted_action(CovectorOperator::P_star, c.n) * frame_matrix(N).transpose();
    const Eigen::MatrixXd Js = Th * detail::adapted_action(CovectorOperator::J_star, c.n) * frame_matrix(N).transpose();

    const Eigen::VectorXd a = sampling::uniform_vector(c.rng, dim);
    const Eigen::VectorXd w = sampling::uniform_vector(c.rng, dim);
    const std::array<std::pair<const char*, double>, 14> ids{{
        {"h+v=I", ((h + v) * a - a).cwiseAbs().maxCoeff()},
        {"P=2h-I", (P * a - (2 * h * a - a)).cwiseAbs().maxCoeff()},
        {"P=h-v", (P * a - (h * a - v * a)).cwiseAbs().maxCoeff()},
        {"P=I-2v", (P * a - (a - 2 * v * a)).cwiseAbs().maxCoeff()},
        {"P^2=I", (P * (P * a) - a).cwiseAbs().maxCoeff()},
        {"h^2=h", (h * (h * a) - h * a).cwiseAbs().maxCoeff()},
        {"v^2=v", (v * (v * a) - v * a).cwiseAbs().maxCoeff()},
        {"hv=vh=0", std::max((h * (v * a)).cwiseAbs().maxCoeff(), (v * (h * a)).cwiseAbs().maxCoeff())},
        {"J^2=0", (J * (J * a)).cwiseAbs().maxCoeff()},
        {"JP=J", (J * (P * a) - J * a).cwiseAbs().maxCoeff()},
        {"PJ=-J", (P * (J * a) + J * a).cwiseAbs().maxCoeff()},
        {"P*^2=I", (Ps * (Ps * w) - w).cwiseAbs().maxCoeff()},
        {"J*P*=J*", (Js * (Ps * w) - Js * w).cwiseAbs().maxCoeff()},
        {"P*J*=-J*", (Ps * (Js * w) + Js * w).cwiseAbs().maxCoeff()},
    }};
    for (const auto& [label, err] : ids) m.add(err, label);
  }
  m.samples /= 14;
  return pass_type("operator_identities", c, m, 1e-12, m.worst.empty() ? "" : "worst identity: " + m.worst);
}

inline CheckResult ad_vs_fd(Context c) {
  MaxTracker m;
  for (int k = 0; k < 200; ++k) {
    const Expression e = sampling::random_smooth_expression(c.rng, c.n, 3);
    const BundlePoint p = sampling::random_point(c.rng, c.n);
    const Jet2 jet = eval_jet(e, p);
    auto f = [&](const Eigen::VectorXd& z) { return eval_value(e, BundlePoint::from_natural(z)); };
    const Eigen::VectorXd g = fd::gradient(f, p.natural());
    const Eigen::MatrixXd H = fd::hessian(f, p.natural());
    double worst = 0.0;
    for (Eigen::Index r = 0; r < g.size(); ++r) {
      worst = std::max(worst, fd::relative_error(jet.gradient(r), g(r)));
      for (Eigen::Index s = 0; s < g.size(); ++s) worst = std::max(worst, fd::relative_error(jet.hessian(r, s), H(r, s)));
    }
    m.add(worst, e.to_string());
  }
  return pass_type("ad_vs_fd", c, m, 1e-6);
}

inline CheckResult exterior_dd_zero(Context c) {
  MaxTracker m;
  for (int k = 0; k < 50; ++k) {
    const Expression e = sampling::random_smooth_expression(c.rng, c.n, 3);
    const BundlePoint p = sampling::random_point(c.rng, c.n);
    const ScalarField f = ScalarField::from_expression(e, {});
    const OneFormField df{f.gradient, {}};
    m.add(d_oneform(df, p).comps.cwiseAbs().maxCoeff(), e.to_string());
  }
  return pass_type("exterior_dd_zero", c, m, 1e-6);
}

struct LagrangianDraw {
  LagrangianSystem sys;
  BundlePoint p;
};

inline LagrangianDraw random_lagrangian_draw(Context& c) {
  return {{c.n, sampling::random_lagrangian(c.rng, c.n), sampling::random_connection(c.rng, c.n), {}},
          sampling::random_point(c.rng, c.n)};
}

/// d(d_P L) by differences of the jet-evaluated d_P L field, natural basis.
inline Eigen::MatrixXd fd_d_of_dP(const LagrangianSystem& sys, const BundlePoint& p) {
  return d_oneform(d_P_field(sys.lagrangian, sys.connection, sys.params), p).comps;
}

inline CheckResult fundamental_form_consistency(Context c) {
  MaxTracker m;
  for (int k = 0; k < 50; ++k) {
    const auto [sys, p] = random_lagrangian_draw(c);
    const Eigen::MatrixXd lhs = fd_d_of_dP(sys, p);
    const Eigen::MatrixXd rhs = -fundamental_form(sys, p).to_natural().comps;
    m.add((lhs - rhs).cwiseAbs().maxCoeff());
  }
  return pass_type("fundamental_form_consistency", c, m, 1e-6, "d(d_P L) + Phi_L with Phi_L assembled term by term");
}

inline CheckResult fundamental_form_exterior(Context c) {
  MaxTracker m;
  for (int k = 0; k < 50; ++k) {
    const auto [sys, p] = random_lagrangian_draw(c);
    const Eigen::MatrixXd lhs = fd_d_of_dP(sys, p);
    const Eigen::MatrixXd rhs = -exterior_fundamental_form(sys, p).to_natural().comps;
    m.add((lhs - rhs).cwiseAbs().maxCoeff());
  }
  return pass_type("fundamental_form_exterior", c, m, 1e-6, "d(d_P L) by differences vs the analytic -d d_P L");
}

inline CheckResult hamilton_form_residual(Context c) {
  MaxTracker m;
  for (int k = 0; k < 100; ++k) {
    const HamiltonianSystem sys{c.n, sampling::random_hamiltonian(c.rng, c.n), sampling::random_connection(c.rng, c.n),
                                {}};
    m.add(adapted_mech::hamilton_form_residual(sys, sampling::random_point(c.rng, c.n)));
  }
  return pass_type("hamilton_form_residual", c, m, 1e-12);
}

inline CheckResult semispray_backsubstitution(Context c) {
  MaxTracker m;
  int degenerate = 0;
  for (int attempts = 0; m.samples < 100 && attempts < 1000; ++attempts) {
    const auto [sys, p] = random_lagrangian_draw(c);
    const AdaptedDerivatives ad = adapted_derivatives(sys.lagrangian, sys.connection, p);
    SemisprayValue s;
    try {
      s = semispray_solve(ad, p);
    } catch (const DegenerateLagrangian&) {
      ++degenerate;
      continue;
    }
    // Coefficient equations written out directly.
    Eigen::VectorXd res(2 * c.n);
    res << ad.dd * s.X + ad.vd * s.Xdot - ad.dx_adapted, ad.dv * s.X + ad.vv * s.Xdot + ad.dy;
    double scale = 1.0;
    scale = std::max(scale, ad.dx_adapted.cwiseAbs().maxCoeff());
    scale = std::max(scale, ad.dy.cwiseAbs().maxCoeff());
    const double a = std::max({ad.dd.cwiseAbs().maxCoeff(), ad.vd.cwiseAbs().maxCoeff(), ad.dv.cwiseAbs().maxCoeff(),
                               ad.vv.cwiseAbs().maxCoeff()});
    scale = std::max(scale, a * std::max(s.X.cwiseAbs().maxCoeff(), s.Xdot.cwiseAbs().maxCoeff()));
    m.add(res.cwiseAbs().maxCoeff() / scale);
  }
  return pass_type("semispray_backsubstitution", c, m, 1e-10,
                   degenerate ? std::to_string(degenerate) + " degenerate draws skipped" : "");
}

inline IntegratorConfig tight_rk45(double t0, double t1) {
  IntegratorConfig cfg;
  cfg.method = Method::rk45;
  cfg.t0 = t0;
  cfg.t1 = t1;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-10;
  cfg.initial_step = 1e-3;
  return cfg;
}

/// State after flowing p by dt (dt may be negative).
inline std::optional<BundlePoint> flow(const Rhs& rhs, const BundlePoint& p, double dt) {
  Rhs f = rhs;
  if (dt < 0) f = [rhs](const BundlePoint& q) { return Eigen::VectorXd(-rhs(q)); };
  const Trajectory t = integrate(f, p, tight_rk45(0.0, std::abs(dt)));
  if (!t.termination.completed) return std::nullopt;
  return t.states.back();
}

/// dH/dt at p along rhs by a five-point stencil over integrated probes.
inline std::optional<double> measured_rate(const Rhs& rhs, const Expression& H, const BundlePoint& p,
                                           double delta = 1e-3) {
  std::array<double, 4> vals{};
  const std::array<double, 4> offsets{-2 * delta, -delta, delta, 2 * delta};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto q = flow(rhs, p, offsets[k]);
    if (!q) return std::nullopt;
    vals[k] = eval_value(H, *q);
  }
  return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * delta);
}

inline CheckResult energy_drift_law(Context c) {
  MaxTracker m;
  int aborted = 0;
  for (int k = 0; k < 5; ++k) {
    const HamiltonianSystem sys{c.n, sampling::random_hamiltonian(c.rng, c.n), sampling::random_connection(c.rng, c.n),
                                {}, HamiltonianMode::paper};
    const BundlePoint p0 = sampling::random_point(c.rng, c.n, 1.0);
    const Rhs f = rhs(sys);
    IntegratorConfig cfg = tight_rk45(0.0, 0.5);
    const Trajectory traj = integrate(f, p0, cfg);
    if (!traj.termination.completed) ++aborted;
    const std::size_t stride = std::max<std::size_t>(1, traj.size() / 5);
    for (std::size_t s = 0; s < traj.size(); s += stride) {
      const auto measured = measured_rate(f, sys.hamiltonian, traj.states[s]);
      if (!measured) continue;
      m.add(fd::relative_error(*measured, energy_drift_rate(sys, traj.states[s])));
    }
  }
  return pass_type("energy_drift_law", c, m, 1e-6,
                   aborted ? std::to_string(aborted) + " trajectories ended early" : "");
}

inline CheckResult frame_consistent_conservation(Context c) {
  MaxTracker m;
  std::string notes;
  for (int k = 0; k < 5; ++k) {
    const HamiltonianSystem sys{c.n, sampling::half_sum_of_squares(c.n, CoordKind::x) +
                                         sampling::half_sum_of_squares(c.n, CoordKind::y),
                                sampling::random_connection(c.rng, c.n), {}, HamiltonianMode::frame_consistent};
    const BundlePoint p0 = sampling::random_point(c.rng, c.n);
    const Trajectory traj = integrate(rhs(sys), p0, tight_rk45(0.0, 10.0));
    if (!traj.termination.completed) {
      m.add(std::numeric_limits<double>::quiet_NaN());
      notes = "aborted: " + traj.termination.reason;
      continue;
    }
    const double h0 = eval_value(sys.hamiltonian, p0);
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max(worst, std::abs(eval_value(sys.hamiltonian, s) - h0));
    m.add(worst);
  }
  return pass_type("frame_consistent_conservation", c, m, 1e-8, notes);
}

/// -d(lambda) against phi_H for N = 0.
inline CheckResult liouville_exactness_flat(Context c) {
  MaxTracker m;
  for (int k = 0; k < 20; ++k) {
    const HamiltonianSystem sys{c.n, sampling::random_hamiltonian(c.rng, c.n), Connection::zero(c.n), {}};
    const BundlePoint p = sampling::random_point(c.rng, c.n);
    const Eigen::MatrixXd minus_dlambda = -d_oneform(liouville_lambda_field(sys), p).comps;
    m.add((minus_dlambda - canonical_twoform(sys, p).to_natural().comps).cwiseAbs().maxCoeff());
  }
  return pass_type("liouville_exactness_flat", c, m, 1e-6);
}

// Report-only diagnostics.

inline CheckResult lagrangian_form_residual(Context c) {
  MaxTracker m;
  for (int attempts = 0; m.samples < 20 && attempts < 200; ++attempts) {
    const auto [sys, p] = random_lagrangian_draw(c);
    try {
      m.add(el_form_residual(sys, p));
    } catch (const DegenerateLagrangian&) {
    }
  }
  return report("lagrangian_form_residual", c, m, "max |i_X Phi_L - dE_L|");
}

inline CheckResult mode_discrepancy(Context c) {
  MaxTracker m;
  for (int attempts = 0; m.samples < 20 && attempts < 200; ++attempts) {
    const auto [sys, p] = random_lagrangian_draw(c);
    try {
      m.add(adapted_mech::mode_discrepancy(sys, p));
    } catch (const DegenerateLagrangian&) {
    }
  }
  return report("mode_discrepancy", c, m, "max |rhs_cm - rhs_el|");
}

inline CheckResult canonical_form_closedness(Context c) {
  MaxTracker m;
  for (int attempts = 0; m.samples < 20 && attempts < 200; ++attempts) {
    const Connection N = sampling::random_connection(c.rng, c.n);
    if (!N.depends_on_coordinates()) continue;
    const HamiltonianSystem sys{c.n, sampling::random_hamiltonian(c.rng, c.n), N, {}};
    m.add(adapted_mech::canonical_form_closedness(sys, sampling::random_point(c.rng, c.n)));
  }
  return report("canonical_form_closedness", c, m, "max |d phi_H| for coordinate-dependent N");
}

inline CheckResult fundamental_form_gap(Context c) {
  MaxTracker m;
  for (int k = 0; k < 20; ++k) {
    const auto [sys, p] = random_lagrangian_draw(c);
    m.add((exterior_fundamental_form(sys, p).comps - fundamental_form(sys, p).comps).cwiseAbs().maxCoeff());
  }
  return report("fundamental_form_gap", c, m, "max |(-d d_P L) - Phi_L|, adapted basis");
}

using CheckFn = CheckResult (*)(Context);

struct Entry {
  const char* name;
  CheckFn fn;
  bool report_only;
};

inline const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      {"duality_pairing", duality_pairing, false},
      {"operator_identities", operator_identities, false},
      {"ad_vs_fd", ad_vs_fd, false},
      {"exterior_dd_zero", exterior_dd_zero, false},
      {"fundamental_form_consistency", fundamental_form_consistency, false},
      {"fundamental_form_exterior", fundamental_form_exterior, false},
      {"hamilton_form_residual", hamilton_form_residual, false},
      {"semispray_backsubstitution", semispray_backsubstitution, false},
      {"energy_drift_law", energy_drift_law, false},
      {"frame_consistent_conservation", frame_consistent_conservation, false},
      {"liouville_exactness_flat", liouville_exactness_flat, false},
      {"lagrangian_form_residual", lagrangian_form_residual, true},
      {"mode_discrepancy", mode_discrepancy, true},
      {"canonical_form_closedness", canonical_form_closedness, true},
      {"fundamental_form_gap", fundamental_form_gap, true},
  };
  return entries;
}

}  // namespace checks

inline std::vector<std::string> check_names(bool include_report_only = true) {
  std::vector<std::string> out;
  for (const auto& e : checks::registry()) {
    if (include_report_only || !e.report_only) out.emplace_back(e.name);
  }
  return out;
}

/// Runs every check once per dimension. Results are sorted by check name, then
/// dimension. A check that throws is recorded as failed.
inline std::vector<CheckResult> run_suite(const SuiteOptions& opts) {
  struct Job {
    int n;
    std::size_t id;
    std::future<CheckResult> result;
  };
  std::vector<Job> jobs;
  const auto& reg = checks::registry();
  for (int n : opts.dims) {
    if (n < 1) throw std::invalid_argument("verify: dimensions must be >= 1");
    for (std::size_t id = 0; id < reg.size(); ++id) {
      if (reg[id].report_only && !opts.include_report_only) continue;
      std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                        static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(id)};
      checks::Context ctx{n, opts.seed, opts.fault, Rng(seq)};
      auto fn = reg[id].fn;
      jobs.push_back({n, id, std::async(std::launch::async, [fn, ctx]() mutable { return fn(std::move(ctx)); })});
    }
  }
  std::vector<CheckResult> out;
  out.reserve(jobs.size());
  for (auto& job : jobs) {
    try {
      out.push_back(job.result.get());
    } catch (const std::exception& e) {
      CheckResult r;
      r.name = reg[job.id].name;
      r.n = job.n;
      r.seed = opts.seed;
      r.max_error = std::numeric_limits<double>::quiet_NaN();
      if (!reg[job.id].report_only) r.pass = false;
      r.notes = std::string("exception: ") + e.what();
      out.push_back(std::move(r));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CheckResult& a, const CheckResult& b) { return std::tie(a.name, a.n) < std::tie(b.name, b.n); });
  return out;
}

inline std::vector<CheckResult> run_suite(std::uint64_t seed, std::vector<int> dims, bool include_report_only = true) {
  return run_suite(SuiteOptions{seed, std::move(dims), include_report_only, Fault::none});
}

}  // namespace adapted_mech
