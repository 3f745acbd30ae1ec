#pragma once

// Nonlinear connection, adapted frame/coframe and the structure operators
// h, v, P, J (and duals P*, J*) as dense matrices at a point.
//
// Index convention:
//   delta/delta x^i = d/dx^i - sum_j N[i][j] d/dy^j
//   delta y^i       = dy^i   + sum_j N[j][i] dx^j
// With this pairing {dx^i, delta y^i} is exactly dual to {delta/delta x^i, d/dy^i}.
//
// Vector components are columns in the natural basis (d/dx, d/dy); covector
// components are columns in the natural coframe (dx, dy). Adapted components
// are (a, b) on (delta/delta x, d/dy) for vectors and (p, q) on (dx, delta y)
// for covectors.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "expr.hpp"
#include "point.hpp"

namespace adapted_mech {

/// n x n matrix of expressions N[i][j] (0-based in code).
class Connection {
public:
  explicit Connection(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("connection dimension must be >= 1");
    entries_.reserve(static_cast<std::size_t>(n * n));
    for (int k = 0; k < n * n; ++k) entries_.push_back(Expression::constant(0.0));
  }

  static Connection zero(int n) { return Connection(n); }

  /// Row-major texts, rows[i][j] holding N[i][j].
  static Connection parse(const std::vector<std::vector<std::string>>& rows, int n, const ParameterSet& params = {}) {
    if (static_cast<int>(rows.size()) != n) {
      throw std::invalid_argument("connection must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    Connection c(n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != n) {
        throw std::invalid_argument("connection must be " + std::to_string(n) + "x" + std::to_string(n));
      }
      for (int j = 0; j < n; ++j) c.set(i, j, adapted_mech::parse(rows[i][j], n, params));
    }
    return c;
  }

  int dim() const { return n_; }

  const Expression& operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i * n_ + j)]; }

  void set(int i, int j, Expression e) {
    if (e.node().max_x_index > n_ || e.node().max_y_index > n_) {
      throw std::invalid_argument("connection entry references coordinates beyond dimension " + std::to_string(n_));
    }
    entries_[static_cast<std::size_t>(i * n_ + j)] = std::move(e);
  }

  bool depends_on_coordinates() const {
    for (const auto& e : entries_) {
      if (e.node().depends_on_coordinates) return true;
    }
    return false;
  }

private:
  int n_;
  std::vector<Expression> entries_;
};

/// Connection data at one point.
struct FrameEval {
  Eigen::MatrixXd value;              // N[i][j]
  std::vector<Eigen::MatrixXd> d_dx;  // d_dx[k](i, j) = dN[i][j]/dx^k
  std::vector<Eigen::MatrixXd> d_dy;  // d_dy[k](i, j) = dN[i][j]/dy^k

  int dim() const { return static_cast<int>(value.rows()); }

  /// dN/dz^r for natural slot r in [0, 2n).
  const Eigen::MatrixXd& d_dz(int r) const { return r < dim() ? d_dx[r] : d_dy[r - dim()]; }
};

inline FrameEval eval_frame(const Connection& N, const BundlePoint& p, const ParameterTable& params = {}) {
  const int n = N.dim();
  if (p.dim() != n) throw EvaluationError("bundle point dimension does not match connection");
  FrameEval f{Eigen::MatrixXd::Zero(n, n), std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n)),
              std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n))};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Expression& e = N(i, j);
      if (!e.node().depends_on_coordinates) {
        f.value(i, j) = eval_value(e, p, params);
        continue;
      }
      const Jet2 jet = eval_jet(e, p, params);
      f.value(i, j) = jet.value;
      for (int k = 0; k < n; ++k) {
        f.d_dx[k](i, j) = jet.gradient(k);
        f.d_dy[k](i, j) = jet.gradient(n + k);
      }
    }
  }
  return f;
}

/// Adapted first and second derivatives of a scalar field.
struct AdaptedDerivatives {
  Jet2 jet;                             // natural value/gradient/hessian of f
  Eigen::VectorXd dx_adapted;           // delta f / delta x^i
  Eigen::VectorXd dy;                   // df / dy^i
  Eigen::MatrixXd dd;                   // (j, i): delta_{x^j} delta_{x^i} f
  Eigen::MatrixXd dv;                   // (j, i): delta_{x^j} d_{y^i} f
  Eigen::MatrixXd vd;                   // (j, i): d_{y^j} delta_{x^i} f
  Eigen::MatrixXd vv;                   // (j, i): d_{y^j} d_{y^i} f
  Eigen::MatrixXd horizontal_jacobian;  // (i, r): natural partial d/dz^r of delta f / delta x^i
};

/// Assembles adapted derivatives analytically from the natural jet of f and
/// first derivatives of the connection.
inline AdaptedDerivatives adapted_derivatives(const Jet2& f, const FrameEval& frame) {
  const int n = frame.dim();
  const Eigen::MatrixXd& N = frame.value;
  const Eigen::VectorXd fy = f.gradient.tail(n);

  AdaptedDerivatives out;
  out.jet = f;
  out.dy = fy;
  out.dx_adapted = f.gradient.head(n) - N * fy;

  Eigen::MatrixXd G = f.hessian.topRows(n) - N * f.hessian.bottomRows(n);
  for (int r = 0; r < 2 * n; ++r) G.col(r) -= frame.d_dz(r) * fy;
  out.horizontal_jacobian = G;

  const Eigen::MatrixXd Gx = G.leftCols(n);
  const Eigen::MatrixXd Gy = G.rightCols(n);
  out.vd = Gy.transpose();
  out.dd = Gx.transpose() - N * Gy.transpose();
  out.dv = f.hessian.topRightCorner(n, n) - N * f.hessian.bottomRightCorner(n, n);
  out.vv = f.hessian.bottomRightCorner(n, n);
  return out;
}

inline AdaptedDerivatives adapted_derivatives(const Expression& f, const Connection& N, const BundlePoint& p,
                                              const ParameterTable& params = {}) {
  return adapted_derivatives(eval_jet(f, p, params), eval_frame(N, p, params));
}

// ---------------------------------------------------------------------------
// Adapted frame and coframe

/// Columns are the natural components of delta/delta x^1..n, d/dy^1..n.
inline Eigen::MatrixXd frame_matrix(const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  E.bottomLeftCorner(n, n) = -N.transpose();
  return E;
}

/// Rows are the natural components of dx^1..n, delta y^1..n.
inline Eigen::MatrixXd coframe_matrix(const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::MatrixXd Theta = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  Theta.bottomLeftCorner(n, n) = N.transpose();
  return Theta;
}

inline Eigen::VectorXd vector_to_natural(const Eigen::VectorXd& adapted, const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::VectorXd out = adapted;
  out.tail(n) -= N.transpose() * adapted.head(n);
  return out;
}

inline Eigen::VectorXd vector_to_adapted(const Eigen::VectorXd& natural, const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::VectorXd out = natural;
  out.tail(n) += N.transpose() * natural.head(n);
  return out;
}

inline Eigen::VectorXd covector_to_natural(const Eigen::VectorXd& adapted, const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::VectorXd out = adapted;
  out.head(n) += N * adapted.tail(n);
  return out;
}

inline Eigen::VectorXd covector_to_adapted(const Eigen::VectorXd& natural, const Eigen::MatrixXd& N) {
  const auto n = N.rows();
  Eigen::VectorXd out = natural;
  out.head(n) -= N * natural.tail(n);
  return out;
}

// ---------------------------------------------------------------------------
// Structure operators

enum class VectorOperator { h, v, P, J };
enum class CovectorOperator { P_star, J_star };

namespace detail {

inline Eigen::MatrixXd adapted_action(VectorOperator kind, Eigen::Index n) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  switch (kind) {
    case VectorOperator::h: D.topLeftCorner(n, n) = I; break;
    case VectorOperator::v: D.bottomRightCorner(n, n) = I; break;
    case VectorOperator::P:
      D.topLeftCorner(n, n) = I;
      D.bottomRightCorner(n, n) = -I;
      break;
    case VectorOperator::J: D.bottomLeftCorner(n, n) = I; break;  // (a, b) -> (0, a)
  }
  return D;
}

inline Eigen::MatrixXd adapted_action(CovectorOperator kind, Eigen::Index n) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  switch (kind) {
    case CovectorOperator::P_star:
      D.topLeftCorner(n, n) = I;
      D.bottomRightCorner(n, n) = -I;
      break;
    case CovectorOperator::J_star: D.bottomLeftCorner(n, n) = I; break;  // dx^i -> delta y^i
  }
  return D;
}

}  // namespace detail

/// Natural-basis matrix of h, v, P or J given the connection value at a point.
inline Eigen::MatrixXd operator_matrix(VectorOperator kind, const Eigen::MatrixXd& N) {
  return frame_matrix(N) * detail::adapted_action(kind, N.rows()) * coframe_matrix(N);
}

/// Natural-coframe matrix of P* or J* acting on covector component columns.
inline Eigen::MatrixXd dual_operator_matrix(CovectorOperator kind, const Eigen::MatrixXd& N) {
  return coframe_matrix(N).transpose() * detail::adapted_action(kind, N.rows()) * frame_matrix(N).transpose();
}

inline Eigen::VectorXd apply_operator(VectorOperator kind, const Eigen::VectorXd& vec, const Connection& N,
                                      const BundlePoint& p, const ParameterTable& params = {}) {
  return operator_matrix(kind, eval_frame(N, p, params).value) * vec;
}

inline Eigen::VectorXd apply_dual_operator(CovectorOperator kind, const Eigen::VectorXd& cov, const Connection& N,
                                           const BundlePoint& p, const ParameterTable& params = {}) {
  return dual_operator_matrix(kind, eval_frame(N, p, params).value) * cov;
}

}  // namespace adapted_mech
