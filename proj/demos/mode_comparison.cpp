// Energy along the two Hamiltonian readings for H = (x^2 + y^2)/2 with a
// constant connection c, and the two Lagrangian routes for the oscillator.
//
//   ./mode_comparison [c]

#include <cstdio>
#include <cstdlib>

#include <adapted_mech/adapted_mech.hpp>

namespace am = adapted_mech;

int main(int argc, char** argv) {
  const double c = argc > 1 ? std::atof(argv[1]) : 0.1;
  const am::ParameterTable params{{"c", c}};
  const am::Expression H = am::parse("0.5*(x1^2 + y1^2)", 1);
  am::Connection N(1);
  N.set(0, 0, am::parse("c", 1, {"c"}));

  am::IntegratorConfig cfg;
  cfg.method = am::Method::rk45;
  cfg.t1 = 5.0;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;

  const am::BundlePoint p0(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
  std::printf("H = %s, N = c = %g\n", H.to_string().c_str(), c);
  std::printf("%8s %16s %16s %16s\n", "t", "H paper", "H frame", "dH/dt (paper)");
  const am::HamiltonianSystem paper{1, H, N, params, am::HamiltonianMode::paper};
  const am::HamiltonianSystem frame{1, H, N, params, am::HamiltonianMode::frame_consistent};
  const auto a = am::integrate(am::rhs(paper), p0, cfg);
  const auto b = am::integrate(am::rhs(frame), p0, cfg);
  for (double t : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
    auto nearest = [t](const am::Trajectory& tr) {
      std::size_t k = 0;
      while (k + 1 < tr.size() && tr.times[k + 1] <= t) ++k;
      return k;
    };
    const auto& pa = a.states[nearest(a)];
    const auto& pb = b.states[nearest(b)];
    std::printf("%8.3f %16.10f %16.10f %16.10f\n", a.times[nearest(a)], am::eval_value(H, pa),
                am::eval_value(H, pb), am::energy_drift_rate(paper, pa));
  }

  // Oscillator Lagrangian: the two routes give different vector fields.
  const am::LagrangianSystem ho{1, am::parse("0.5*y1^2 - 0.5*x1^2", 1), am::Connection::zero(1), {}};
  const am::BundlePoint q(Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 2.0));
  const Eigen::VectorXd cm = am::rhs_coefficient_matching(ho)(q);
  const Eigen::VectorXd el = am::rhs_euler_lagrange(ho)(q);
  std::printf("\nL = y^2/2 - x^2/2 at (0.5, 2):\n");
  std::printf("  coefficient matching: (%g, %g)\n", cm(0), cm(1));
  std::printf("  euler-lagrange:       (%g, %g)\n", el(0), el(1));
  return 0;
}
