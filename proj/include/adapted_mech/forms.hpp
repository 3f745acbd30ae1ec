#pragma once

// Pointwise exterior calculus on the 2n-dimensional chart.
//
// Exterior derivatives are always taken in the natural coframe, where
// d(dx) = d(dy) = 0. The adapted coframe is anholonomic once N depends on the
// coordinates, so adapted representations are produced by conversion only.

#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

#include "expr.hpp"
#include "frame.hpp"
#include "point.hpp"

namespace adapted_mech {

enum class Basis { natural, adapted };

class BasisMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Exact antisymmetrisation: (r, s) = (M(r,s) - M(s,r)) / 2, zero diagonal.
inline Eigen::MatrixXd antisymmetric_part(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(M.rows(), M.cols());
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index s = r + 1; s < M.cols(); ++s) {
      const double v = 0.5 * (M(r, s) - M(s, r));
      W(r, s) = v;
      W(s, r) = -v;
    }
  }
  return W;
}

/// 1-form at a point. `connection` is N at that point, needed for basis changes.
struct OneFormValue {
  Eigen::VectorXd comps;
  Basis basis = Basis::natural;
  Eigen::MatrixXd connection;

  int dim() const { return static_cast<int>(comps.size() / 2); }

  OneFormValue to_natural() const {
    if (basis == Basis::natural) return *this;
    return {covector_to_natural(comps, connection), Basis::natural, connection};
  }

  OneFormValue to_adapted() const {
    if (basis == Basis::adapted) return *this;
    return {covector_to_adapted(comps, connection), Basis::adapted, connection};
  }

  OneFormValue in(Basis b) const { return b == Basis::natural ? to_natural() : to_adapted(); }
};

/// 2-form at a point, stored as an antisymmetric matrix w(r, s) = w(e_r, e_s).
struct TwoFormValue {
  Eigen::MatrixXd comps;
  Basis basis = Basis::natural;
  Eigen::MatrixXd connection;

  static TwoFormValue from_matrix(const Eigen::MatrixXd& M, Basis basis, Eigen::MatrixXd connection) {
    return {antisymmetric_part(M), basis, std::move(connection)};
  }

  int dim() const { return static_cast<int>(comps.rows() / 2); }

  TwoFormValue to_natural() const {
    if (basis == Basis::natural) return *this;
    const Eigen::MatrixXd A = coframe_matrix(connection).transpose();
    return from_matrix(A * comps * A.transpose(), Basis::natural, connection);
  }

  TwoFormValue to_adapted() const {
    if (basis == Basis::adapted) return *this;
    const Eigen::MatrixXd B = frame_matrix(connection).transpose();
    return from_matrix(B * comps * B.transpose(), Basis::adapted, connection);
  }

  TwoFormValue in(Basis b) const { return b == Basis::natural ? to_natural() : to_adapted(); }
};

inline TwoFormValue wedge(const OneFormValue& a, const OneFormValue& b) {
  if (a.basis != b.basis) throw BasisMismatch("wedge: operands are in different bases");
  if (a.comps.size() != b.comps.size()) throw std::invalid_argument("wedge: shape mismatch");
  const auto m = a.comps.size();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index s = r + 1; s < m; ++s) {
      const double v = a.comps(r) * b.comps(s) - a.comps(s) * b.comps(r);
      W(r, s) = v;
      W(s, r) = -v;
    }
  }
  return {W, a.basis, a.connection};
}

/// i_X w, with X given by components in the same basis as w.
inline OneFormValue interior(const Eigen::VectorXd& vec, const TwoFormValue& w) {
  if (vec.size() != w.comps.rows()) throw std::invalid_argument("interior: shape mismatch");
  return {w.comps.transpose() * vec, w.basis, w.connection};
}

// ---------------------------------------------------------------------------
// Fields

/// Scalar field with its natural gradient.
struct ScalarField {
  std::function<double(const BundlePoint&)> value;
  std::function<Eigen::VectorXd(const BundlePoint&)> gradient;

  static ScalarField from_expression(Expression e, ParameterTable params) {
    return {[e, params](const BundlePoint& p) { return eval_value(e, p, params); },
            [e, params](const BundlePoint& p) { return eval_jet(e, p, params).gradient; }};
  }
};

/// 1-form field given by natural components. `jacobian(p)(s, r)` is d w_s / dz^r;
/// when absent it is taken by central differences.
struct OneFormField {
  std::function<Eigen::VectorXd(const BundlePoint&)> natural_components;
  std::function<Eigen::MatrixXd(const BundlePoint&)> jacobian;
};

inline constexpr double kFieldDifferenceStep = 1e-5;

/// Central-difference Jacobian (s, r) = d f_s / dz^r of a vector-valued rule.
inline Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const BundlePoint&)>& f,
                                        const BundlePoint& p, double step = kFieldDifferenceStep) {
  const Eigen::VectorXd& z = p.natural();
  Eigen::MatrixXd J;
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    Eigen::VectorXd zp = z, zm = z;
    zp(r) += step;
    zm(r) -= step;
    Eigen::VectorXd col = (f(BundlePoint::from_natural(zp)) - f(BundlePoint::from_natural(zm))) / (2.0 * step);
    if (J.size() == 0) J.resize(col.size(), z.size());
    J.col(r) = col;
  }
  return J;
}

namespace detail {
inline Eigen::MatrixXd provenance(const Eigen::MatrixXd& connection, int n) {
  return connection.size() == 0 ? Eigen::MatrixXd::Zero(n, n) : connection;
}
}  // namespace detail

/// df in the natural coframe. `connection` (N at p) is recorded for later
/// basis conversion; zero when omitted.
inline OneFormValue d_scalar(const ScalarField& f, const BundlePoint& p, const Eigen::MatrixXd& connection = {}) {
  return {f.gradient(p), Basis::natural, detail::provenance(connection, p.dim())};
}

/// dw in the natural coframe: (r, s) = d_r w_s - d_s w_r.
inline TwoFormValue d_oneform(const OneFormField& w, const BundlePoint& p, const Eigen::MatrixXd& connection = {}) {
  const Eigen::MatrixXd J = w.jacobian ? w.jacobian(p) : central_jacobian(w.natural_components, p);
  // J(s, r) = d_r w_s, so d_r w_s - d_s w_r = J^T(r, s) - J(r, s).
  return TwoFormValue::from_matrix(2.0 * J.transpose(), Basis::natural, detail::provenance(connection, p.dim()));
}

/// Field of 2-forms by natural components.
using TwoFormField = std::function<Eigen::MatrixXd(const BundlePoint&)>;

/// max |(dw)_{rst}| over r < s < t, dw_{rst} = d_r w_st + d_s w_tr + d_t w_rs,
/// by central differences over the component field.
inline double exterior_derivative_max_norm(const TwoFormField& w, const BundlePoint& p,
                                           double step = kFieldDifferenceStep) {
  const Eigen::VectorXd& z = p.natural();
  const auto m = z.size();
  std::vector<Eigen::MatrixXd> dw(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    Eigen::VectorXd zp = z, zm = z;
    zp(r) += step;
    zm(r) -= step;
    dw[r] = (w(BundlePoint::from_natural(zp)) - w(BundlePoint::from_natural(zm))) / (2.0 * step);
  }
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index s = r + 1; s < m; ++s) {
      for (Eigen::Index t = s + 1; t < m; ++t) {
        const double c = dw[r](s, t) + dw[s](t, r) + dw[t](r, s);
        worst = std::max(worst, std::abs(c));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Vertical derivation and differential

namespace detail {

inline Eigen::MatrixXd product_structure_in(Basis basis, const Eigen::MatrixXd& N) {
  if (basis == Basis::natural) return operator_matrix(VectorOperator::P, N);
  const auto n = N.rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  P.bottomRightCorner(n, n) *= -1.0;
  return P;
}

}  // namespace detail

/// (i_P w)(X) = w(PX).
inline OneFormValue i_P(const OneFormValue& w) {
  const Eigen::MatrixXd P = detail::product_structure_in(w.basis, w.connection);
  return {P.transpose() * w.comps, w.basis, w.connection};
}

/// (i_P w)(X1, X2) = w(PX1, X2) + w(X1, PX2).
inline TwoFormValue i_P(const TwoFormValue& w) {
  const Eigen::MatrixXd P = detail::product_structure_in(w.basis, w.connection);
  return TwoFormValue::from_matrix(P.transpose() * w.comps + w.comps * P, w.basis, w.connection);
}

/// d_P f = i_P df for scalars (i_P f = 0); adapted components (delta f/delta x, -df/dy).
inline OneFormValue d_P_scalar(const Expression& f, const Connection& N, const BundlePoint& p,
                               const ParameterTable& params = {}) {
  const FrameEval frame = eval_frame(N, p, params);
  const Jet2 jet = eval_jet(f, p, params);
  const auto n = p.dim();
  const Eigen::VectorXd fy = jet.gradient.tail(n);
  Eigen::VectorXd comps(2 * n);
  comps << jet.gradient.head(n) - frame.value * fy, -fy;
  return {comps, Basis::adapted, frame.value};
}

/// The field p -> d_P f(p) in natural components (first derivatives only).
inline OneFormField d_P_field(const Expression& f, const Connection& N, const ParameterTable& params = {}) {
  return {[f, N, params](const BundlePoint& p) { return d_P_scalar(f, N, p, params).to_natural().comps; }, {}};
}

}  // namespace adapted_mech
