#pragma once

// Binds a loaded definition to its dynamics and per-sample diagnostics.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "hamiltonian.hpp"
#include "integrate.hpp"
#include "lagrangian.hpp"

namespace adapted_mech {

struct Model {
  Rhs rhs;
  std::function<double(const BundlePoint&)> energy;      // E_L or H
  std::function<double(const BundlePoint&)> drift_rate;  // d(energy)/dt along rhs
  std::function<double(const BundlePoint&)> residual;    // i_X phi - d(energy), max-norm

  std::vector<Diagnostic> diagnostics() const {
    return {{"energy", energy}, {"drift_rate", drift_rate}, {"residual", residual}};
  }
};

/// (f(p + h v) - f(p - h v)) / 2h with h scaled to |v|.
inline double directional_derivative(const std::function<double(const BundlePoint&)>& f, const BundlePoint& p,
                                     const Eigen::VectorXd& v) {
  const double norm = v.lpNorm<Eigen::Infinity>();
  if (norm == 0.0) return 0.0;
  const double h = 1e-6 * std::max(1.0, p.natural().lpNorm<Eigen::Infinity>()) / norm;
  return (f(BundlePoint::from_natural(p.natural() + h * v)) - f(BundlePoint::from_natural(p.natural() - h * v))) /
         (2.0 * h);
}

inline Model build_model(const SystemDefinition& def) {
  Model m;
  if (def.kind == SystemKind::lagrangian) {
    const LagrangianSystem sys = def.lagrangian_system();
    m.rhs = def.lagrangian_mode == LagrangianMode::coefficient_matching ? rhs_coefficient_matching(sys)
                                                                         : rhs_euler_lagrange(sys);
    m.energy = [sys](const BundlePoint& p) { return lagrangian_energy(sys, p); };
    m.drift_rate = [sys, rhs = m.rhs, energy = m.energy](const BundlePoint& p) {
      return directional_derivative(energy, p, rhs(p));
    };
    m.residual = [sys](const BundlePoint& p) { return el_form_residual(sys, p); };
  } else {
    const HamiltonianSystem sys = def.hamiltonian_system();
    m.rhs = rhs(sys);
    m.energy = [sys](const BundlePoint& p) { return eval_value(sys.hamiltonian, p, sys.params); };
    m.drift_rate = [sys, rhs = m.rhs](const BundlePoint& p) {
      return eval_jet(sys.hamiltonian, p, sys.params).gradient.dot(rhs(p));
    };
    m.residual = [sys](const BundlePoint& p) { return hamilton_form_residual(sys, p); };
  }
  return m;
}

}  // namespace adapted_mech
