#pragma once

// Reference computations for the tests. Nothing here calls the jet evaluator
// or the frame/coframe matrices: derivatives come from differences of plain
// values and the adapted objects are spelled out entry by entry.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include <adapted_mech/expr.hpp>
#include <adapted_mech/frame.hpp>

namespace oracle {

using Field = std::function<double(const Eigen::VectorXd&)>;

inline double central(const Field& f, const Eigen::VectorXd& z, Eigen::Index r, double h) {
  Eigen::VectorXd zp = z, zm = z;
  zp(r) += h;
  zm(r) -= h;
  return (f(zp) - f(zm)) / (2 * h);
}

inline Eigen::VectorXd gradient(const Field& f, const Eigen::VectorXd& z, double h = 1e-5) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) g(r) = central(f, z, r, h);
  return g;
}

/// Second partial d_r d_s f, fourth-order stencil in each direction.
inline double second_partial(const Field& f, const Eigen::VectorXd& z, Eigen::Index r, Eigen::Index s, double h) {
  auto shifted = [&](double a, double b) {
    Eigen::VectorXd w = z;
    w(r) += a * h;
    w(s) += b * h;
    return f(w);
  };
  if (r == s) {
    return (-shifted(2, 0) + 16 * shifted(1, 0) - 30 * f(z) + 16 * shifted(-1, 0) - shifted(-2, 0)) / (12 * h * h);
  }
  const double c1 = shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1);
  const double c2 = shifted(2, 2) - shifted(2, -2) - shifted(-2, 2) + shifted(-2, -2);
  return (16 * c1 - c2) / (48 * h * h);
}

inline Eigen::MatrixXd hessian(const Field& f, const Eigen::VectorXd& z, double h = 1e-3) {
  Eigen::MatrixXd H(z.size(), z.size());
  for (Eigen::Index r = 0; r < z.size(); ++r) {
    for (Eigen::Index s = 0; s < z.size(); ++s) H(r, s) = second_partial(f, z, r, s, h);
  }
  return H;
}

/// Richardson step on top of the fourth-order stencil: (16 H(h/2) - H(h)) / 15.
inline Eigen::MatrixXd hessian_extrapolated(const Field& f, const Eigen::VectorXd& z, double h = 1e-2) {
  return (16.0 * hessian(f, z, h / 2) - hessian(f, z, h)) / 15.0;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline Field value_of(const adapted_mech::Expression& e, const adapted_mech::ParameterTable& params = {}) {
  return [e, params](const Eigen::VectorXd& z) {
    return adapted_mech::eval_value(e, adapted_mech::BundlePoint::from_natural(z), params);
  };
}

/// N(z) entry by entry from values.
inline Eigen::MatrixXd connection_value(const adapted_mech::Connection& N, const Eigen::VectorXd& z,
                                        const adapted_mech::ParameterTable& params = {}) {
  const int n = N.dim();
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out(i, j) = value_of(N(i, j), params)(z);
  }
  return out;
}

/// The field z -> delta f / delta x^i, from differences of values.
inline Field horizontal(const Field& f, const adapted_mech::Connection& N, int i, double h = 1e-5) {
  return [f, N, i, h](const Eigen::VectorXd& z) {
    const int n = N.dim();
    const Eigen::MatrixXd Nv = connection_value(N, z);
    double v = central(f, z, i, h);
    for (int j = 0; j < n; ++j) v -= Nv(i, j) * central(f, z, n + j, h);
    return v;
  };
}

inline Field vertical(const Field& f, int n, int i, double h = 1e-5) {
  return [f, n, i, h](const Eigen::VectorXd& z) { return central(f, z, n + i, h); };
}

struct AdaptedBlocks {
  Eigen::MatrixXd dd, dv, vd, vv;
};

/// Nested differences of the first-order adapted derivative fields.
inline AdaptedBlocks adapted_blocks(const Field& f, const adapted_mech::Connection& N, const Eigen::VectorXd& z,
                                    double outer = 1e-4) {
  const int n = N.dim();
  const Eigen::MatrixXd Nv = connection_value(N, z);
  AdaptedBlocks b{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (int i = 0; i < n; ++i) {
    const Field gi = horizontal(f, N, i);
    const Field fi = vertical(f, n, i);
    for (int j = 0; j < n; ++j) {
      // delta_{x^j} u = d_{x^j} u - N[j][k] d_{y^k} u
      double ddv = central(gi, z, j, outer), dvv = central(fi, z, j, outer);
      for (int k = 0; k < n; ++k) {
        ddv -= Nv(j, k) * central(gi, z, n + k, outer);
        dvv -= Nv(j, k) * central(fi, z, n + k, outer);
      }
      b.dd(j, i) = ddv;
      b.dv(j, i) = dvv;
      b.vd(j, i) = central(gi, z, n + j, outer);
      b.vv(j, i) = central(fi, z, n + j, outer);
    }
  }
  return b;
}

/// Natural components of delta/delta x^i (vectors) and delta y^i (covectors).
inline Eigen::VectorXd horizontal_vector(const Eigen::MatrixXd& N, int i) {
  const auto n = N.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * n);
  v(i) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) v(n + j) = -N(i, j);
  return v;
}

inline Eigen::VectorXd vertical_vector(Eigen::Index n, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * n);
  v(n + i) = 1.0;
  return v;
}

inline Eigen::VectorXd dx_covector(Eigen::Index n, int i) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * n);
  w(i) = 1.0;
  return w;
}

inline Eigen::VectorXd delta_y_covector(const Eigen::MatrixXd& N, int i) {
  const auto n = N.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * n);
  w(n + i) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) w(j) = N(j, i);
  return w;
}

/// Natural matrix of sum_ij C(i, j) a^i ^ b^j for covector lists a, b.
inline Eigen::MatrixXd wedge_sum(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                                 const Eigen::MatrixXd& C) {
  const auto m = a.front().size();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) W += C(i, j) * (a[i] * b[j].transpose() - b[j] * a[i].transpose());
  }
  return W;
}

// Closed-form flows.

/// x' = y, y' = -x from (x0, y0).
inline Eigen::Vector2d rotation(double x0, double y0, double t) {
  return {x0 * std::cos(t) + y0 * std::sin(t), -x0 * std::sin(t) + y0 * std::cos(t)};
}

/// x' = x, y' = -y.
inline Eigen::Vector2d hyperbolic(double x0, double y0, double t) { return {x0 * std::exp(t), y0 * std::exp(-t)}; }

/// x' = -y/k, y' = k x.
inline Eigen::Vector2d scaled_rotation(double x0, double y0, double k, double t) {
  return {x0 * std::cos(t) - (y0 / k) * std::sin(t), k * x0 * std::sin(t) + y0 * std::cos(t)};
}

}  // namespace oracle
