#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "calf/noise.hpp"
#include "calf/rng.hpp"
#include "calf/systems.hpp"

// Sample-and-hold closed-loop integrator: piecewise-constant actions on the
// delta grid, explicit Euler on the substep grid, noise advanced on the same
// fine grid, one trajectory row per fine step.

namespace calf {

struct SamplingConfig {
  double delta = 0.05;    // controller sampling time, s
  int substeps = 10;      // fine integration steps per delta
  double horizon = 120.0; // total run time, s
  double escape_bound = 0.0;  // 0 = auto: 100 x max(initial composite norm, 1)

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("SamplingConfig: delta must be > 0");
    if (substeps < 1) throw std::invalid_argument("SamplingConfig: substeps must be >= 1");
    const double steps = horizon / delta;
    if (!(horizon > 0.0) || std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      throw std::invalid_argument("SamplingConfig: horizon must be a positive multiple of delta");
  }
  int major_steps() const { return static_cast<int>(std::round(horizon / delta)); }
};

enum class RunStatus { Completed, Escaped };

struct TrajectoryRow {
  double t = 0.0;
  CartState x{};
  CartAction u{};
  double r = 0.0;       // running cost rate, cost/s
  double j_hat = 0.0;   // critic value at the governing delta step
  double lyap = 0.0;    // Lyapunov value at the governing delta step
  std::array<double, 5> c{0, 0, 0, 0, 0};  // constraint rows at the decision
  std::uint8_t constraint_ok = 1;
  std::uint8_t fallback = 0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  RunStatus status = RunStatus::Completed;
  double fine_dt = 0.0;
  int substeps = 1;
};

struct NonFiniteDynamics : std::runtime_error {
  CartState state;
  CartAction action;
  NonFiniteDynamics(const CartState& x, const CartAction& u)
      : std::runtime_error("dynamics returned a non-finite derivative"), state(x), action(u) {}
};

using Dynamics = std::function<std::array<double, 3>(const CartState&, const CartAction&)>;
using StepPolicy = std::function<CartAction(int k, const CartState&)>;
using CostRate = std::function<double(const CartState&, const CartAction&)>;

inline CartState euler_predict(const CartState& x, const CartAction& u, double delta,
                               const Dynamics& f) {
  if (!(delta > 0.0)) throw std::invalid_argument("euler_predict: delta must be > 0");
  const auto d = f(x, u);
  if (!std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
    throw NonFiniteDynamics(x, u);
  return CartState{x.x1 + delta * d[0], x.x2 + delta * d[1], x.x3 + delta * d[2]};
}

inline Trajectory integrate_sample_hold(const CartState& x0, const StepPolicy& policy,
                                        const Dynamics& f, const NoiseProcess& noise_model,
                                        const SamplingConfig& cfg, const CostRate& cost,
                                        std::uint64_t noise_seed = 0) {
  cfg.validate();
  if (!x0.finite()) throw std::invalid_argument("integrate_sample_hold: x0 must be finite");

  const int n_major = cfg.major_steps();
  const double dt = cfg.delta / cfg.substeps;
  const double escape =
      cfg.escape_bound > 0.0 ? cfg.escape_bound : 100.0 * std::max(composite_norm(x0), 1.0);

  Trajectory traj;
  traj.fine_dt = dt;
  traj.substeps = cfg.substeps;
  traj.rows.reserve(static_cast<std::size_t>(n_major) * cfg.substeps + 1);

  Rng rng(derive_seed(noise_seed, 0x6E6F6973ULL));
  NoiseProcess noise = noise_model;
  CartState x = x0;
  x.x3 = wrap_angle(x.x3);
  CartAction u{};

  for (int k = 0; k < n_major; ++k) {
    u = policy(k, x);
    for (int i = 0; i < cfg.substeps; ++i) {
      const double t = (static_cast<double>(k) * cfg.substeps + i) * dt;
      TrajectoryRow row;
      row.t = t;
      row.x = x;
      row.u = u;
      row.r = cost(x, u);
      traj.rows.push_back(row);

      auto d = f(x, u);
      if (!std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
        throw NonFiniteDynamics(x, u);
      // mixing matrix sigma = I/sqrt(d), so |sigma Z'| <= amplitude in 2-norm
      const auto& z = noise.state();
      const double amp = noise.params().amplitude / std::sqrt(3.0);
      x.x1 += dt * (d[0] + amp * z[0]);
      x.x2 += dt * (d[1] + amp * z[1]);
      x.x3 = wrap_angle(x.x3 + dt * (d[2] + amp * z[2]));
      if (noise.kind() != NoiseKind::None) noise.advance(dt, rng);

      if (composite_norm(x) > escape) {
        TrajectoryRow last;
        last.t = t + dt;
        last.x = x;
        last.u = u;
        last.r = cost(x, u);
        traj.rows.push_back(last);
        traj.status = RunStatus::Escaped;
        return traj;
      }
    }
  }
  TrajectoryRow last;
  last.t = cfg.horizon;
  last.x = x;
  last.u = u;
  last.r = cost(x, u);
  traj.rows.push_back(last);
  return traj;
}

// Left-rectangle time integral of the running-cost column.
inline double accumulated_cost(const Trajectory& traj) {
  if (traj.rows.empty()) throw std::invalid_argument("accumulated_cost: empty trajectory");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < traj.rows.size(); ++i)
    total += traj.rows[i].r * (traj.rows[i + 1].t - traj.rows[i].t);
  return total;
}

struct LipschitzEstimates {
  double f_bar = 0.0;     // sup-norm bound on the drift
  double lip_f = 0.0;     // Lipschitz constant of f in x
  double lip_J = 0.0;     // Lipschitz constant of the critic over the operating ball
  double lip_Z = 0.0;     // bound on the noise value norm
  double sigma_max = 0.0; // operator-norm bound on the mixing matrix

  void validate() const {
    if (f_bar < 0 || lip_f < 0 || lip_J < 0 || lip_Z < 0 || sigma_max < 0)
      throw std::invalid_argument("LipschitzEstimates: all fields must be nonnegative");
  }
};

// chi_1(delta) = lip_f (f_bar + sigma_max lip_Z) delta^2 + sigma_max lip_Z delta:
// bound on the one-step gap between the true noisy state and its Euler estimate.
inline double prediction_error_bound(const LipschitzEstimates& est, double delta) {
  if (delta < 0.0) throw std::invalid_argument("prediction_error_bound: delta must be >= 0");
  est.validate();
  const double noise_rate = est.sigma_max * est.lip_Z;
  return est.lip_f * (est.f_bar + noise_rate) * delta * delta + noise_rate * delta;
}

// Wrap-aware distance between two cart states.
inline double state_distance(const CartState& a, const CartState& b) {
  const double d1 = a.x1 - b.x1, d2 = a.x2 - b.x2, d3 = wrap_angle(a.x3 - b.x3);
  return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
}

}  // namespace calf
