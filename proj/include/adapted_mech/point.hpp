#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace adapted_mech {

/// A point (x^1..x^n, y^1..y^n) of the 2n-dimensional bundle chart.
///
/// Coordinates are stored stacked in natural order: base coordinates first,
/// then fiber coordinates (velocities on TM, momenta on T*M).
class BundlePoint {
public:
  BundlePoint() = default;

  BundlePoint(const Eigen::VectorXd& x, const Eigen::VectorXd& y) : coords_(x.size() + y.size()) {
    if (x.size() != y.size()) {
      throw std::invalid_argument("bundle point: x and y must have the same length");
    }
    coords_ << x, y;
  }

  static BundlePoint from_natural(Eigen::VectorXd z) {
    if (z.size() % 2 != 0) {
      throw std::invalid_argument("bundle point: natural coordinate vector must have even length");
    }
    BundlePoint p;
    p.coords_ = std::move(z);
    return p;
  }

  static BundlePoint zero(int n) { return from_natural(Eigen::VectorXd::Zero(2 * n)); }

  int dim() const { return static_cast<int>(coords_.size() / 2); }

  auto x() const { return coords_.head(dim()); }
  auto y() const { return coords_.tail(dim()); }
  auto x() { return coords_.head(dim()); }
  auto y() { return coords_.tail(dim()); }

  /// 1-based accessors, matching the x1..xn / y1..yn naming of the expression DSL.
  double x(int i) const { return coords_(i - 1); }
  double y(int i) const { return coords_(dim() + i - 1); }

  const Eigen::VectorXd& natural() const { return coords_; }

  bool finite() const { return coords_.allFinite(); }

  std::string to_string() const {
    std::string out = "(x=";
    for (int i = 0; i < dim(); ++i) out += (i ? "," : "") + std::to_string(x(i + 1));
    out += "; y=";
    for (int i = 0; i < dim(); ++i) out += (i ? "," : "") + std::to_string(y(i + 1));
    return out + ")";
  }

private:
  Eigen::VectorXd coords_;
};

/// Right-hand side of a first-order system on the bundle: p -> (xdot, ydot), stacked.
using Rhs = std::function<Eigen::VectorXd(const BundlePoint&)>;

}  // namespace adapted_mech
