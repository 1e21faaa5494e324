#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "calf/agents.hpp"
#include "calf/critic.hpp"
#include "calf/lyapunov.hpp"
#include "calf/rng.hpp"
#include "calf/sim.hpp"
#include "calf/systems.hpp"

// Post-hoc auditors: the framework's stability and feasibility claims as
// empirical pass/fail checks over run logs, plus Lipschitz-constant estimation
// by sampling. Audits are pure functions of logs + config.

namespace calf {

struct AuditCheck {
  std::string name;
  bool pass = true;
  double margin = 0.0;  // worst observed slack; positive means violated by that much
  long samples = 0;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void add(const std::string& name, bool ok, double margin, long samples) {
    checks.push_back(AuditCheck{name, ok, margin, samples});
  }
};

// Uniform-ish sample in the composite-norm ball (heading clamped to (-pi, pi]).
inline CartState sample_error_state(Rng& rng, double radius) {
  for (;;) {
    CartState e{rng.uniform(-radius, radius), rng.uniform(-radius, radius),
                rng.uniform(-std::min(radius, kPi), std::min(radius, kPi))};
    if (composite_norm(e) <= radius) return e;
  }
}

// Random state on the composite-norm sphere of the given radius.
inline CartState sample_error_state_at(Rng& rng, double radius) {
  for (;;) {
    const double a = rng.gaussian(), b = rng.gaussian(), c = rng.gaussian();
    const double n = std::sqrt(a * a + b * b + c * c);
    if (n < 1e-12) continue;
    const CartState e{radius * a / n, radius * b / n, radius * c / n};
    if (std::abs(e.x3) <= kPi) return e;
  }
}

// Max finite-difference ratios over random pairs, inflated by 1.5 (sampling
// underestimates suprema). lip_Z and sigma_max are analytic: the disturbance
// enters through the mixing matrix I/sqrt(dim), so sigma_max = 1 and the
// 2-norm of sigma Z' is bounded by the amplitude, lip_Z = amplitude.
inline LipschitzEstimates estimate_lipschitz(const Dynamics& f, const ActionBounds& bounds,
                                             const CriticModel* critic, double ball_radius,
                                             int samples, std::uint64_t seed,
                                             double noise_amplitude = 0.0, int noise_dim = 3) {
  if (samples < 2) throw std::invalid_argument("estimate_lipschitz: need at least 2 samples");
  if (!(ball_radius > 0.0)) throw std::invalid_argument("estimate_lipschitz: degenerate domain");
  Rng rng(derive_seed(seed, 0x4C495053ULL));

  const double safety = 1.5;
  double f_bar = 0.0;
  double lip_f = 0.0;
  double lip_j = 0.0;

  std::vector<CriticWeights> probe_weights;
  if (critic) {
    const auto& b = critic->box;
    for (double w0 : {b.w0_min, b.w0_max})
      for (double w1 : {b.w1_min, b.w1_max}) {
        CriticWeights w;
        w.w0 = w0;
        w.w1 = w1;
        probe_weights.push_back(w);
      }
    for (int i = 0; i < 8; ++i) {
      CriticWeights w;
      w.w0 = rng.uniform(b.w0_min, b.w0_max);
      w.w1 = rng.uniform(b.w1_min, b.w1_max);
      for (auto& c : w.w_phi) c = rng.uniform(b.phi_min, b.phi_max);
      probe_weights.push_back(w);
    }
  }

  for (int i = 0; i < samples; ++i) {
    const CartState x = sample_error_state(rng, ball_radius);
    const CartAction u{rng.uniform(-bounds.v_max, bounds.v_max),
                       rng.uniform(-bounds.omega_max, bounds.omega_max)};
    const auto d = f(x, u);
    f_bar = std::max(f_bar, std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]));

    // one near pair and one far pair per sample
    for (int pair = 0; pair < 2; ++pair) {
      CartState y;
      if (pair == 0) {
        const double h = 1e-4;
        y = CartState{x.x1 + rng.uniform(-h, h), x.x2 + rng.uniform(-h, h),
                      x.x3 + rng.uniform(-h, h)};
      } else {
        y = sample_error_state(rng, ball_radius);
      }
      const double dist = state_distance(x, y);
      if (dist < 1e-12) continue;
      const auto dy = f(y, u);
      const double df = std::sqrt((d[0] - dy[0]) * (d[0] - dy[0]) + (d[1] - dy[1]) * (d[1] - dy[1]) +
                                  (d[2] - dy[2]) * (d[2] - dy[2]));
      lip_f = std::max(lip_f, df / dist);
      if (critic) {
        const auto px = critic->precompute(x);
        const auto py = critic->precompute(y);
        for (const auto& w : probe_weights) {
          const double dj = std::abs(critic->eval_pre(w, px) - critic->eval_pre(w, py));
          lip_j = std::max(lip_j, dj / dist);
        }
      }
    }
  }

  (void)noise_dim;
  LipschitzEstimates est;
  est.f_bar = safety * f_bar;
  est.lip_f = safety * lip_f;
  est.lip_J = safety * lip_j;
  est.sigma_max = 1.0;
  est.lip_Z = noise_amplitude;
  return est;
}

// Worst-case one-step nominal decay rate nu(x) on radial shells, the input to
// estimate_core_radius.
inline std::vector<std::pair<double, double>> sample_nu_profile(
    const LyapunovFn& lyap, const ActionBounds& bounds, double delta, double r_min, double r_max,
    int shells, int per_shell, std::uint64_t seed, int nominal_grid = 15) {
  std::vector<std::pair<double, double>> profile;
  Rng rng(derive_seed(seed, 0x4E55ULL));
  const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  for (int i = 0; i < shells; ++i) {
    const double r = r_min + (r_max - r_min) * i / std::max(1, shells - 1);
    double nu_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < per_shell; ++j) {
      CartState dir = sample_error_state(rng, 1.0);
      const double n = composite_norm(dir);
      if (n < 1e-9) continue;
      CartState x{dir.x1 * r / n, dir.x2 * r / n, dir.x3 * r / n};
      if (std::abs(x.x3) > kPi) continue;
      const CartAction u = nominal_policy(x, lyap, bounds, delta, nominal_grid);
      const double drop = lyap.cart(x) - lyap.cart(euler_predict(x, u, delta, dyn));
      nu_min = std::min(nu_min, drop / delta);
    }
    if (std::isfinite(nu_min)) profile.emplace_back(r, nu_min);
  }
  return profile;
}

// Accepted-step critic decrements must obey
//   J_{k+1} - J_k <= -delta nu_bar + lip_J chi_1(delta) + eps
// and the accepted-value sequence outside the core ball must strictly decrease.
inline AuditReport audit_decay(const std::vector<DecisionRecord>& records,
                               const ConstraintParams& params, const LipschitzEstimates& est,
                               double core_ball_radius) {
  AuditReport report;
  const double bound = -params.delta * params.nu_bar +
                       est.lip_J * prediction_error_bound(est, params.delta) + params.epsilon;

  double worst_step = -std::numeric_limits<double>::infinity();
  long pairs = 0;
  bool ok_steps = true;
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = records[i + 1];
    if (!a.accepted || !b.accepted) continue;
    if (composite_norm(a.err) <= core_ball_radius || composite_norm(b.err) <= core_ball_radius)
      continue;
    ++pairs;
    const double inc = b.j_hat - a.j_hat;
    worst_step = std::max(worst_step, inc - bound);
    if (inc > bound + params.tol) ok_steps = false;
  }
  report.add("consecutive_accepted_decay", ok_steps, pairs ? worst_step : 0.0, pairs);

  bool ok_seq = true;
  double worst_seq = -std::numeric_limits<double>::infinity();
  long count = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (!r.accepted || composite_norm(r.err) <= core_ball_radius) continue;
    if (count > 0) {
      worst_seq = std::max(worst_seq, r.j_hat - prev);
      if (r.j_hat >= prev) ok_seq = false;
    }
    prev = r.j_hat;
    ++count;
  }
  report.add("accepted_sequence_strictly_decreasing", ok_seq, count > 1 ? worst_seq : 0.0, count);
  return report;
}

// Practical stability: enters the s*-ball within the horizon and remains inside
// the 2 s* envelope afterwards.
inline AuditReport audit_reaching(const Trajectory& traj, const CartState& target, double s_star,
                                  double horizon, double envelope_factor = 2.0) {
  AuditReport report;
  double reach_t = -1.0;
  double max_after = 0.0;
  for (const auto& row : traj.rows) {
    const double n = composite_norm(error_state(row.x, target));
    if (reach_t < 0.0) {
      if (n <= s_star && row.t <= horizon) reach_t = row.t;
    } else {
      max_after = std::max(max_after, n);
    }
  }
  report.add("reaches_ball", reach_t >= 0.0, reach_t >= 0.0 ? reach_t : horizon,
             static_cast<long>(traj.rows.size()));
  const double env = envelope_factor * s_star;
  report.add("stays_in_envelope", reach_t >= 0.0 && max_after <= env, max_after - env,
             static_cast<long>(traj.rows.size()));
  return report;
}

// Feasibility audit: the stationary candidate pair (w#, eta(x)) must satisfy
// C1-C4 at every logged step outside the core ball, by direct substitution,
// independent of any solver.
inline AuditReport audit_feasibility(const std::vector<DecisionRecord>& records,
                                     const CriticModel& model, const LyapunovFn& lyap,
                                     const ActionBounds& bounds, const ConstraintParams& params,
                                     double core_ball_radius, int nominal_grid = 15) {
  AuditReport report;
  const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  const CriticWeights wsharp = model.box.w_sharp(1.0);
  double worst = -std::numeric_limits<double>::infinity();
  long audited = 0;
  bool ok = true;
  for (const auto& rec : records) {
    if (composite_norm(rec.err) <= core_ball_radius) continue;
    ++audited;
    const CartAction eta = nominal_policy(rec.err, lyap, bounds, params.delta, nominal_grid);
    const CartState pred = euler_predict(rec.err, eta, params.delta, dyn);
    const auto rows = constraint_G(model, wsharp, wsharp, pred, rec.err, params);
    for (double r : rows) {
      worst = std::max(worst, r);
      if (r > params.tol) ok = false;
    }
  }
  report.add("candidate_admissible", ok, audited ? worst : 0.0, audited);
  return report;
}

// Criterion-2 style audit: re-derives the agent's own accepted-step constraint
// rows from logged states and weights and checks them against the tolerance.
inline AuditReport audit_constraints(const std::vector<DecisionRecord>& records, AgentKind kind,
                                     const CriticModel& model, const ConstraintParams& params,
                                     double core_ball_radius) {
  AuditReport report;
  const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  double worst = -std::numeric_limits<double>::infinity();
  long audited = 0;
  bool ok = true;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!rec.accepted || rec.suspended) continue;
    if (composite_norm(rec.err) <= core_ball_radius) continue;

    std::vector<double> rows;
    if (kind == AgentKind::CalfFallback) {
      const double j = model.eval(rec.w_after, rec.err);
      const double norm = composite_norm(rec.err);
      rows = {j - (rec.j_prev - params.nu_bar * params.delta), model.alpha_low(norm) - j,
              j - model.alpha_up(norm)};
    } else if (kind == AgentKind::CalfSarsa) {
      if (i == 0) continue;
      const auto g =
          constraint_G(model, rec.w_after, rec.w_before, rec.err, records[i - 1].err, params);
      rows.assign(g.begin(), g.end());
    } else if (kind == AgentKind::CalfActorCritic) {
      const CartState pred = euler_predict(rec.err, rec.u, params.delta, dyn);
      const auto g = constraint_G(model, rec.w_after, rec.w_before, pred, rec.err, params);
      rows.assign(g.begin(), g.end());
    } else {
      continue;  // baselines carry no constraints
    }

    ++audited;
    for (double r : rows) {
      worst = std::max(worst, r);
      if (r > params.tol) ok = false;
    }
  }
  report.add("accepted_rows_within_tol", ok, audited ? worst : 0.0, audited);
  return report;
}

}  // namespace calf
