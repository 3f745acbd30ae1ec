#pragma once

#include <Eigen/Dense>

#include "expr.hpp"
#include "forms.hpp"
#include "frame.hpp"
#include "point.hpp"

namespace adapted_mech {

/// How the integral-curve identification reads the adapted-basis coefficients.
///   paper:            xdot^i = dH/dy^i, ydot^i = -delta H/delta x^i
///   frame_consistent: X_H expanded in the natural frame,
///                     ydot^j = -delta H/delta x^j - sum_i (dH/dy^i) N[i][j]
enum class HamiltonianMode { paper, frame_consistent };

struct HamiltonianSystem {
  int n;
  Expression hamiltonian;
  Connection connection;
  ParameterTable params;
  HamiltonianMode mode = HamiltonianMode::paper;
};

struct LiouvilleForms {
  OneFormValue omega;   // 1/2 (y^i dx^i + x^i delta y^i)
  OneFormValue lambda;  // P*(omega)
};

inline LiouvilleForms liouville_forms(const HamiltonianSystem& sys, const BundlePoint& p) {
  const Eigen::MatrixXd N = eval_frame(sys.connection, p, sys.params).value;
  Eigen::VectorXd omega(2 * sys.n);
  omega << 0.5 * p.y(), 0.5 * p.x();
  // P* acts as diag(I, -I) on adapted coframe components.
  Eigen::VectorXd lambda = omega;
  lambda.tail(sys.n) *= -1.0;
  return {{omega, Basis::adapted, N}, {lambda, Basis::adapted, N}};
}

/// phi_H = -delta y^i ^ dx^i = dx^i ^ delta y^i, adapted basis.
inline TwoFormValue canonical_twoform(const HamiltonianSystem& sys, const BundlePoint& p) {
  const int n = sys.n;
  const Eigen::MatrixXd N = eval_frame(sys.connection, p, sys.params).value;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  W.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  W.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return {W, Basis::adapted, N};
}

/// p -> natural components of phi_H.
inline TwoFormField canonical_twoform_field(const HamiltonianSystem& sys) {
  return [sys](const BundlePoint& p) { return canonical_twoform(sys, p).to_natural().comps; };
}

/// max-norm of d(phi_H). Zero for constant N; generally not otherwise.
inline double canonical_form_closedness(const HamiltonianSystem& sys, const BundlePoint& p) {
  return exterior_derivative_max_norm(canonical_twoform_field(sys), p);
}

/// p -> natural components of lambda, for differentiating.
inline OneFormField liouville_lambda_field(const HamiltonianSystem& sys) {
  return {[sys](const BundlePoint& p) { return liouville_forms(sys, p).lambda.to_natural().comps; }, {}};
}

/// dH in the adapted coframe: delta H/delta x^i on dx^i, dH/dy^i on delta y^i.
inline OneFormValue hamiltonian_differential(const HamiltonianSystem& sys, const BundlePoint& p) {
  const FrameEval frame = eval_frame(sys.connection, p, sys.params);
  const Jet2 jet = eval_jet(sys.hamiltonian, p, sys.params);
  const int n = sys.n;
  const Eigen::VectorXd hy = jet.gradient.tail(n);
  Eigen::VectorXd comps(2 * n);
  comps << jet.gradient.head(n) - frame.value * hy, hy;
  return {comps, Basis::adapted, frame.value};
}

/// X_H adapted components: (dH/dy^i on delta/delta x^i, -delta H/delta x^i on d/dy^i).
inline Eigen::VectorXd hamiltonian_vector_field(const HamiltonianSystem& sys, const BundlePoint& p) {
  const OneFormValue dH = hamiltonian_differential(sys, p);
  const int n = sys.n;
  Eigen::VectorXd X(2 * n);
  X << dH.comps.tail(n), -dH.comps.head(n);
  return X;
}

/// i_{X_H} phi_H - dH, evaluated in the natural basis so that the frame
/// conversions are exercised; returns the max-norm.
inline double hamilton_form_residual(const HamiltonianSystem& sys, const BundlePoint& p) {
  const TwoFormValue phi = canonical_twoform(sys, p).to_natural();
  const Eigen::VectorXd X = vector_to_natural(hamiltonian_vector_field(sys, p), phi.connection);
  const Eigen::VectorXd dH = eval_jet(sys.hamiltonian, p, sys.params).gradient;
  return (interior(X, phi).comps - dH).cwiseAbs().maxCoeff();
}

inline Rhs rhs(const HamiltonianSystem& sys) {
  return [sys](const BundlePoint& p) {
    const int n = sys.n;
    const FrameEval frame = eval_frame(sys.connection, p, sys.params);
    const Jet2 jet = eval_jet(sys.hamiltonian, p, sys.params);
    const Eigen::VectorXd hy = jet.gradient.tail(n);
    const Eigen::VectorXd horizontal = jet.gradient.head(n) - frame.value * hy;
    Eigen::VectorXd out(2 * n);
    out.head(n) = hy;
    out.tail(n) = -horizontal;
    if (sys.mode == HamiltonianMode::frame_consistent) out.tail(n) -= frame.value.transpose() * hy;
    return out;
  };
}

/// dH/dt along the flow of the selected mode: sum_ij N[i][j] (dH/dy^i)(dH/dy^j)
/// in paper mode, zero in frame-consistent mode.
inline double energy_drift_rate(const HamiltonianSystem& sys, const BundlePoint& p) {
  if (sys.mode == HamiltonianMode::frame_consistent) return 0.0;
  const Eigen::MatrixXd N = eval_frame(sys.connection, p, sys.params).value;
  const Eigen::VectorXd hy = eval_jet(sys.hamiltonian, p, sys.params).gradient.tail(sys.n);
  return hy.dot(N * hy);
}

}  // namespace adapted_mech
