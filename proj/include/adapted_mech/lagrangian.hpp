#pragma once

// Lagrangian dynamics on the horizontal/vertical splitting of TM.
//
// Two extraction routes are provided and they are NOT equivalent in general:
//   - coefficient matching: the linear system obtained by equating the dx^j and
//     delta y^j coefficients of i_X Phi_L and dE_L, solved for (X, Xdot);
//   - Euler-Lagrange: d/dt(delta L/delta x^i) = dL/dy^i and
//     d/dt(dL/dy^i) = -delta L/delta x^i, solved for (xdot, ydot) through the
//     chain rule.
// On L = y^2/2 - k x^2/2 with N = 0 they give (x, -y) and (-y/k, k x).

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "expr.hpp"
#include "forms.hpp"
#include "frame.hpp"
#include "point.hpp"

namespace adapted_mech {

/// The linear system defining the dynamics is singular or too ill-conditioned
/// at a point.
class DegenerateLagrangian : public std::runtime_error {
public:
  DegenerateLagrangian(const std::string& what, BundlePoint where, double condition_number)
      : std::runtime_error(what), point_(std::move(where)), condition_number_(condition_number) {}

  const BundlePoint& point() const { return point_; }
  double condition_number() const { return condition_number_; }

private:
  BundlePoint point_;
  double condition_number_;
};

/// Singular chain-rule matrix in the Euler-Lagrange route.
class DegenerateEulerLagrange : public DegenerateLagrangian {
public:
  using DegenerateLagrangian::DegenerateLagrangian;
};

inline constexpr double kMaxConditionNumber = 1e12;

struct LagrangianSystem {
  int n;
  Expression lagrangian;
  Connection connection;
  ParameterTable params;
};

struct Gravity {
  double g;
  Expression height;
};

/// L = T - P with T = 1/2 sum_i m_i (y^i)^2 and P = potential + g (sum_i m_i) h.
inline Expression mechanical_lagrangian(std::span<const double> masses, const Expression& potential,
                                        const std::optional<Gravity>& gravity = std::nullopt) {
  if (masses.empty()) throw std::invalid_argument("mechanical lagrangian: at least one mass is required");
  if (references_fiber(potential)) {
    throw std::invalid_argument("mechanical lagrangian: potential must depend on x only, got '" +
                                potential.to_string() + "'");
  }
  if (gravity && references_fiber(gravity->height)) {
    throw std::invalid_argument("mechanical lagrangian: height must depend on x only");
  }
  const int n = static_cast<int>(masses.size());
  if (potential.node().max_x_index > n) {
    throw std::invalid_argument("mechanical lagrangian: potential references coordinates beyond dimension");
  }

  std::optional<Expression> kinetic;
  double total_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = masses[static_cast<std::size_t>(i)];
    if (!(m > 0.0)) throw std::invalid_argument("mechanical lagrangian: masses must be positive");
    total_mass += m;
    Expression term = Expression::constant(0.5 * m) * pow(Expression::y(i + 1), Expression::constant(2));
    kinetic = kinetic ? *kinetic + term : term;
  }

  Expression L = *kinetic;
  const auto* c = std::get_if<node::Constant>(&potential.node().data);
  if (!(c && c->value == 0.0)) L = L - potential;
  if (gravity) L = L - Expression::constant(gravity->g * total_mass) * gravity->height;
  return L;
}

// ---------------------------------------------------------------------------
// Forms

/// Phi_L assembled term by term from the expansion
///   dd dx^j^dx^i - dv dx^j^dy^i - vd dy^j^dx^i + vv dy^j^dy^i
/// (delta y in place of dy). Adapted basis. Identically zero when N = 0.
inline TwoFormValue fundamental_form(const AdaptedDerivatives& ad, const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::MatrixXd C(2 * n, 2 * n);
  C << ad.dd, -ad.dv, -ad.vd, ad.vv;
  // sum_rs C(r,s) theta^r ^ theta^s has matrix C - C^T.
  return TwoFormValue::from_matrix(2.0 * C, Basis::adapted, N);
}

inline TwoFormValue fundamental_form(const LagrangianSystem& sys, const BundlePoint& p) {
  const FrameEval frame = eval_frame(sys.connection, p, sys.params);
  return fundamental_form(adapted_derivatives(eval_jet(sys.lagrangian, p, sys.params), frame), frame.value);
}

/// -d(d_P L) computed exactly from jets, including the d(delta y) terms of the
/// anholonomic coframe. Adapted basis.
inline TwoFormValue exterior_fundamental_form(const LagrangianSystem& sys, const BundlePoint& p) {
  const int n = sys.n;
  const FrameEval frame = eval_frame(sys.connection, p, sys.params);
  const AdaptedDerivatives ad = adapted_derivatives(eval_jet(sys.lagrangian, p, sys.params), frame);
  const Eigen::MatrixXd& H = ad.jet.hessian;

  // Natural components of d_P L: alpha = g - N L_y, beta = -L_y.
  Eigen::MatrixXd jac(2 * n, 2 * n);  // (s, r) = d w_s / dz^r
  jac.topRows(n) = ad.horizontal_jacobian - frame.value * H.bottomRows(n);
  for (int r = 0; r < 2 * n; ++r) jac.block(0, r, n, 1) -= frame.d_dz(r) * ad.dy;
  jac.bottomRows(n) = -H.bottomRows(n);

  TwoFormValue d = TwoFormValue::from_matrix(2.0 * jac.transpose(), Basis::natural, frame.value);
  d.comps = -d.comps;
  return d.to_adapted();
}

// ---------------------------------------------------------------------------
// Semispray

struct SemisprayValue {
  Eigen::VectorXd X;     // horizontal coefficients
  Eigen::VectorXd Xdot;  // vertical coefficients
  double condition_number = 0.0;
  double residual = 0.0;  // max |M s - b| of the solved system
};

namespace detail {

inline double condition_number(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

inline std::string format_condition(double c) {
  return std::isfinite(c) ? std::to_string(c) : std::string("inf");
}

}  // namespace detail

/// Coefficient matrix and right side of the semispray system at a point:
///   sum_i X^i dd[j][i] + Xdot^i vd[j][i] = delta L / delta x^j
///   sum_i X^i dv[j][i] + Xdot^i vv[j][i] = -dL/dy^j
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> semispray_system(const AdaptedDerivatives& ad) {
  const auto n = ad.dy.size();
  Eigen::MatrixXd M(2 * n, 2 * n);
  M << ad.dd, ad.vd, ad.dv, ad.vv;
  Eigen::VectorXd b(2 * n);
  b << ad.dx_adapted, -ad.dy;
  return {M, b};
}

inline SemisprayValue semispray_solve(const AdaptedDerivatives& ad, const BundlePoint& p) {
  const auto n = ad.dy.size();
  auto [M, b] = semispray_system(ad);
  const double cond = detail::condition_number(M);
  if (!(cond <= kMaxConditionNumber)) {
    throw DegenerateLagrangian("DegenerateLagrangian: semispray system is singular at " + p.to_string() +
                                   " (condition number " + detail::format_condition(cond) + ")",
                               p, cond);
  }
  const Eigen::VectorXd s = M.partialPivLu().solve(b);
  return {s.head(n), s.tail(n), cond, (M * s - b).cwiseAbs().maxCoeff()};
}

inline SemisprayValue semispray_solve(const LagrangianSystem& sys, const BundlePoint& p) {
  return semispray_solve(adapted_derivatives(sys.lagrangian, sys.connection, p, sys.params), p);
}

/// V = P(X): adapted components (X, -Xdot).
inline Eigen::VectorXd liouville_field(const LagrangianSystem& sys, const BundlePoint& p) {
  const SemisprayValue s = semispray_solve(sys, p);
  Eigen::VectorXd V(2 * sys.n);
  V << s.X, -s.Xdot;
  return V;
}

/// E_L = V(L) - L = X^i delta L/delta x^i - Xdot^i dL/dy^i - L.
inline double lagrangian_energy(const LagrangianSystem& sys, const BundlePoint& p) {
  const AdaptedDerivatives ad = adapted_derivatives(sys.lagrangian, sys.connection, p, sys.params);
  const SemisprayValue s = semispray_solve(ad, p);
  return s.X.dot(ad.dx_adapted) - s.Xdot.dot(ad.dy) - ad.jet.value;
}

/// dE_L term by term:
///   dx^j:      X^i dd[j][i] - Xdot^i dv[j][i] - delta L/delta x^j
///   delta y^j: X^i vd[j][i] - Xdot^i vv[j][i] - dL/dy^j
inline OneFormValue denergy(const AdaptedDerivatives& ad, const SemisprayValue& s, const Eigen::MatrixXd& N) {
  const auto n = ad.dy.size();
  Eigen::VectorXd comps(2 * n);
  comps << ad.dd * s.X - ad.dv * s.Xdot - ad.dx_adapted, ad.vd * s.X - ad.vv * s.Xdot - ad.dy;
  return {comps, Basis::adapted, N};
}

inline OneFormValue denergy(const LagrangianSystem& sys, const BundlePoint& p) {
  const FrameEval frame = eval_frame(sys.connection, p, sys.params);
  const AdaptedDerivatives ad = adapted_derivatives(eval_jet(sys.lagrangian, p, sys.params), frame);
  return denergy(ad, semispray_solve(ad, p), frame.value);
}

// ---------------------------------------------------------------------------
// Dynamics

/// xdot = X(p), ydot = Xdot(p) from the semispray system.
inline Rhs rhs_coefficient_matching(const LagrangianSystem& sys) {
  return [sys](const BundlePoint& p) {
    const SemisprayValue s = semispray_solve(sys, p);
    Eigen::VectorXd out(2 * sys.n);
    out << s.X, s.Xdot;
    return out;
  };
}

/// Chain-rule matrix A and right side b with A (xdot, ydot) = b:
///   rows j:   [d_x(delta L/delta x^j), d_y(delta L/delta x^j)],  b_j = dL/dy^j
///   rows n+j: [d_x(dL/dy^j),           d_y(dL/dy^j)],            b_{n+j} = -delta L/delta x^j
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> euler_lagrange_system(const AdaptedDerivatives& ad) {
  const auto n = ad.dy.size();
  Eigen::MatrixXd A(2 * n, 2 * n);
  A.topRows(n) = ad.horizontal_jacobian;
  A.bottomRows(n) = ad.jet.hessian.bottomRows(n);
  Eigen::VectorXd b(2 * n);
  b << ad.dy, -ad.dx_adapted;
  return {A, b};
}

inline Rhs rhs_euler_lagrange(const LagrangianSystem& sys) {
  return [sys](const BundlePoint& p) {
    const AdaptedDerivatives ad = adapted_derivatives(sys.lagrangian, sys.connection, p, sys.params);
    auto [A, b] = euler_lagrange_system(ad);
    const double cond = detail::condition_number(A);
    if (!(cond <= kMaxConditionNumber)) {
      throw DegenerateEulerLagrange("DegenerateEulerLagrange (DegenerateLagrangian): chain-rule matrix is singular at " +
                                        p.to_string() + " (condition number " + detail::format_condition(cond) + ")",
                                    p, cond);
    }
    return Eigen::VectorXd(A.partialPivLu().solve(b));
  };
}

/// i_X Phi_L - dE_L in the adapted coframe, X the semispray.
inline OneFormValue el_form_residual_form(const LagrangianSystem& sys, const BundlePoint& p) {
  const FrameEval frame = eval_frame(sys.connection, p, sys.params);
  const AdaptedDerivatives ad = adapted_derivatives(eval_jet(sys.lagrangian, p, sys.params), frame);
  const SemisprayValue s = semispray_solve(ad, p);
  Eigen::VectorXd X(2 * sys.n);
  X << s.X, s.Xdot;
  OneFormValue lhs = interior(X, fundamental_form(ad, frame.value));
  lhs.comps -= denergy(ad, s, frame.value).comps;
  return lhs;
}

/// max-norm of i_X Phi_L - dE_L. Diagnostic only.
inline double el_form_residual(const LagrangianSystem& sys, const BundlePoint& p) {
  return el_form_residual_form(sys, p).comps.cwiseAbs().maxCoeff();
}

/// max |rhs_cm(p) - rhs_el(p)|.
inline double mode_discrepancy(const LagrangianSystem& sys, const BundlePoint& p) {
  return (rhs_coefficient_matching(sys)(p) - rhs_euler_lagrange(sys)(p)).cwiseAbs().maxCoeff();
}

}  // namespace adapted_mech
