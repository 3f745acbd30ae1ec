#pragma once

// Fixed-step classical RK4 and adaptive Dormand-Prince 5(4) with PI step
// control. Failures mid-trajectory end the run with an aborted status; the
// partial trajectory is returned.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "expr.hpp"
#include "point.hpp"

namespace adapted_mech {

enum class Method { rk4, rk45 };

struct IntegratorConfig {
  Method method = Method::rk4;
  double t0 = 0.0;
  double t1 = 1.0;
  double step = 1e-3;          // rk4
  double rtol = 1e-8;          // rk45
  double atol = 1e-10;         // rk45
  double initial_step = 1e-3;  // rk45
  int sample_stride = 1;
  double min_step = 1e-14;
  std::size_t max_steps = 50'000'000;

  void validate() const {
    if (!std::isfinite(t0) || !std::isfinite(t1)) throw std::invalid_argument("integration bounds must be finite");
    if (t1 < t0) throw std::invalid_argument("integration requires t1 >= t0");
    if (sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
    if (method == Method::rk4 && !(step > 0.0)) throw std::invalid_argument("step must be > 0");
    if (method == Method::rk45) {
      if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("tolerances must be > 0");
      if (!(initial_step > 0.0)) throw std::invalid_argument("initial_step must be > 0");
    }
  }
};

struct Diagnostic {
  std::string name;
  std::function<double(const BundlePoint&)> eval;
};

struct Termination {
  bool completed = true;
  std::string reason;
  double time = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<BundlePoint> states;
  std::vector<std::string> diagnostic_names;
  std::vector<std::vector<double>> diagnostics;  // one row per sample, ordered as diagnostic_names
  Termination termination;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  std::size_t size() const { return times.size(); }

  /// Diagnostic value by name at sample k; NaN when the diagnostic failed there.
  double diagnostic(std::string_view name, std::size_t k) const {
    auto it = std::find(diagnostic_names.begin(), diagnostic_names.end(), name);
    if (it == diagnostic_names.end()) throw std::out_of_range("no diagnostic named " + std::string(name));
    return diagnostics.at(k)[static_cast<std::size_t>(it - diagnostic_names.begin())];
  }
};

namespace detail {

class Recorder {
public:
  Recorder(Trajectory& traj, std::span<const Diagnostic> diags) : traj_(traj), diags_(diags) {
    for (const auto& d : diags) traj_.diagnostic_names.push_back(d.name);
  }

  void record(double t, const Eigen::VectorXd& z) {
    BundlePoint p = BundlePoint::from_natural(z);
    std::vector<double> row;
    row.reserve(diags_.size());
    for (const auto& d : diags_) {
      double v = std::numeric_limits<double>::quiet_NaN();
      try {
        v = d.eval(p);
      } catch (const std::exception&) {
      }
      row.push_back(v);
    }
    traj_.times.push_back(t);
    traj_.states.push_back(std::move(p));
    traj_.diagnostics.push_back(std::move(row));
  }

private:
  Trajectory& traj_;
  std::span<const Diagnostic> diags_;
};

inline void abort_run(Trajectory& traj, std::string reason, double t) {
  traj.termination = {false, std::move(reason), t};
}

/// Evaluates rhs, converting exceptions and non-finite output into an abort.
inline bool evaluate(const Rhs& rhs, const Eigen::VectorXd& z, double t, Eigen::VectorXd& out, Trajectory& traj) {
  try {
    out = rhs(BundlePoint::from_natural(z));
  } catch (const std::exception& e) {
    abort_run(traj, e.what(), t);
    return false;
  }
  if (out.size() != z.size()) {
    abort_run(traj, "rhs returned a vector of the wrong size", t);
    return false;
  }
  if (!out.allFinite()) {
    abort_run(traj, "non-finite rhs value", t);
    return false;
  }
  return true;
}

inline void integrate_rk4(const Rhs& rhs, Eigen::VectorXd z, const IntegratorConfig& cfg, Recorder& rec,
                          Trajectory& traj) {
  const double span = cfg.t1 - cfg.t0;
  const double ratio = span / cfg.step;
  const double nearest = std::round(ratio);
  const auto steps = static_cast<std::size_t>(std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)
                                                  ? nearest
                                                  : std::ceil(ratio));
  Eigen::VectorXd k1, k2, k3, k4;
  double t = cfg.t0;
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t_next = i == steps ? cfg.t1 : cfg.t0 + static_cast<double>(i) * cfg.step;
    const double h = t_next - t;
    if (!evaluate(rhs, z, t, k1, traj)) return;
    if (!evaluate(rhs, z + 0.5 * h * k1, t, k2, traj)) return;
    if (!evaluate(rhs, z + 0.5 * h * k2, t, k3, traj)) return;
    if (!evaluate(rhs, z + h * k3, t, k4, traj)) return;
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t_next;
    ++traj.accepted_steps;
    if (!z.allFinite()) {
      abort_run(traj, "non-finite state", t);
      return;
    }
    if (i == steps || i % static_cast<std::size_t>(cfg.sample_stride) == 0) rec.record(t, z);
  }
}

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // b - b_hat
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline void integrate_rk45(const Rhs& rhs, Eigen::VectorXd z, const IntegratorConfig& cfg, Recorder& rec,
                           Trajectory& traj) {
  using T = DormandPrince;
  constexpr double safety = 0.9, beta = 0.04, expo = 0.2 - 0.75 * beta;
  constexpr double fac_min = 0.2, fac_max = 10.0;

  double t = cfg.t0;
  double h = std::min(cfg.initial_step, cfg.t1 - cfg.t0);
  double err_old = 1e-4;
  std::size_t accepted = 0;
  Eigen::VectorXd k1, k2, k3, k4, k5, k6, k7, z_new;
  if (!evaluate(rhs, z, t, k1, traj)) return;

  while (t < cfg.t1) {
    if (accepted + traj.rejected_steps >= cfg.max_steps) {
      abort_run(traj, "maximum number of steps exceeded", t);
      return;
    }
    const double remaining = cfg.t1 - t;
    bool last = false;
    if (h >= remaining || remaining - h <= 1e-14 * std::max(1.0, std::abs(cfg.t1))) {
      h = remaining;
      last = true;
    }
    if (h < cfg.min_step && !last) {
      abort_run(traj, "step size underflow", t);
      return;
    }

    if (!evaluate(rhs, z + h * (T::a21 * k1), t, k2, traj)) return;
    if (!evaluate(rhs, z + h * (T::a31 * k1 + T::a32 * k2), t, k3, traj)) return;
    if (!evaluate(rhs, z + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3), t, k4, traj)) return;
    if (!evaluate(rhs, z + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4), t, k5, traj)) return;
    if (!evaluate(rhs, z + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5), t, k6, traj))
      return;
    z_new = z + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
    if (!evaluate(rhs, z_new, t, k7, traj)) return;

    const Eigen::VectorXd err_vec = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
    const Eigen::ArrayXd scale = cfg.atol + cfg.rtol * z.cwiseAbs().cwiseMax(z_new.cwiseAbs()).array();
    const double err = std::sqrt((err_vec.array() / scale).square().mean());
    if (!std::isfinite(err)) {
      abort_run(traj, "non-finite error estimate", t);
      return;
    }

    const double fac11 = std::pow(err, expo);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(err_old, beta);
      fac = std::clamp(fac / safety, 1.0 / fac_max, 1.0 / fac_min);
      err_old = std::max(err, 1e-4);
      t = last ? cfg.t1 : t + h;
      z = z_new;
      k1 = k7;
      ++accepted;
      ++traj.accepted_steps;
      if (!z.allFinite()) {
        abort_run(traj, "non-finite state", t);
        return;
      }
      const bool done = t >= cfg.t1;
      if (done || accepted % static_cast<std::size_t>(cfg.sample_stride) == 0) rec.record(t, z);
      if (done) return;
      h = h / fac;
    } else {
      ++traj.rejected_steps;
      h = h / std::min(1.0 / fac_min, fac11 / safety);
    }
  }
}

}  // namespace detail

/// Integrates rhs from p0 over [cfg.t0, cfg.t1]. The initial point is always
/// the first sample; diagnostics are evaluated at retained samples only and
/// are NaN where their evaluator throws.
inline Trajectory integrate(const Rhs& rhs, const BundlePoint& p0, const IntegratorConfig& cfg,
                            std::span<const Diagnostic> diagnostics = {}) {
  cfg.validate();
  Trajectory traj;
  detail::Recorder rec(traj, diagnostics);
  if (!p0.finite()) {
    detail::abort_run(traj, "non-finite initial state", cfg.t0);
    return traj;
  }
  Eigen::VectorXd probe;
  if (!detail::evaluate(rhs, p0.natural(), cfg.t0, probe, traj)) return traj;
  rec.record(cfg.t0, p0.natural());
  if (cfg.t1 == cfg.t0) return traj;
  if (cfg.method == Method::rk4) {
    detail::integrate_rk4(rhs, p0.natural(), cfg, rec, traj);
  } else {
    detail::integrate_rk45(rhs, p0.natural(), cfg, rec, traj);
  }
  return traj;
}

struct SweepItem {
  BundlePoint initial;
  ParameterTable overrides;
};

struct SweepJob {
  Rhs rhs;
  std::vector<Diagnostic> diagnostics;
};

/// Runs one trajectory per item. `make_job(item)` builds the rhs and
/// diagnostics for that item; if it throws, the item is recorded as aborted at
/// t0. Results are in input order.
template <class JobFactory>
std::vector<Trajectory> sweep(std::span<const SweepItem> items, const IntegratorConfig& cfg, JobFactory make_job,
                              unsigned max_threads = 0) {
  cfg.validate();
  std::vector<Trajectory> results(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        SweepJob job = make_job(items[i]);
        results[i] = integrate(job.rhs, items[i].initial, cfg, job.diagnostics);
      } catch (const std::exception& e) {
        results[i].termination = {false, e.what(), cfg.t0};
      }
    }
  };
  unsigned threads = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, items.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace adapted_mech
