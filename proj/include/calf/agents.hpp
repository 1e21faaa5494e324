#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calf/critic.hpp"
#include "calf/lyapunov.hpp"
#include "calf/noise.hpp"
#include "calf/optimize.hpp"
#include "calf/rng.hpp"
#include "calf/sim.hpp"
#include "calf/systems.hpp"

// The CALF agents and the two baselines, driven step-by-step at each delta
// boundary. All solver failures degrade to the nominal stabilizing policy;
// constraints are suspended inside the core ball, where a minimum-norm
// Lyapunov-descent law holds the plant parked.

namespace calf {

enum class AgentKind { NominalOnly, CalfSarsa, CalfActorCritic, CalfFallback, UnconstrainedAC };

inline const char* agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::NominalOnly: return "nominal";
    case AgentKind::CalfSarsa: return "calf_sarsa";
    case AgentKind::CalfActorCritic: return "calf_ac";
    case AgentKind::CalfFallback: return "calf_fallback";
    case AgentKind::UnconstrainedAC: return "unconstrained_ac";
  }
  return "?";
}

struct AgentConfig {
  AgentKind kind = AgentKind::NominalOnly;
  int n_mc = 32;              // Monte-Carlo rollouts for the actor-critic expectation
  int replay_capacity = 10;   // experience replay size M
  double beta = 0.0;          // critic regularization weight
  double gamma = 1.0;         // discount; 1 = undiscounted
  double cost_scale = 1.0;    // plain multiplier on the running cost inside losses
  double zeta = 1.0;          // critic initialized at w#_zeta
  double core_ball_radius = 0.3;
  SolveBudget budget{250, 1, 1e-8};
  int nominal_grid = 15;
  double delta = 0.05;
  int substeps = 10;

  void validate() const {
    if (n_mc < 1) throw std::invalid_argument("AgentConfig: n_mc must be >= 1");
    if (replay_capacity < 1) throw std::invalid_argument("AgentConfig: replay capacity must be >= 1");
    if (beta < 0.0) throw std::invalid_argument("AgentConfig: beta must be >= 0");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("AgentConfig: gamma in (0,1]");
    if (!(core_ball_radius >= 0.0))
      throw std::invalid_argument("AgentConfig: core_ball_radius must be >= 0");
    budget.validate();
  }
};

struct AgentCounters {
  long accepted_updates = 0;
  long fallback_invocations = 0;  // every eta-sourced step (failures and core-ball holds)
  long constraint_violations = 0; // accepted updates that fail the exact recheck; expected 0
};

struct AgentState {
  CriticWeights w;        // current weights w_k
  CriticWeights w_prev;   // last admissible weights
  CartState x_prev{};     // last admissible state (error frame)
  double j_prev = 0.0;    // J_hat^{w_prev}(x_prev)
  double r_prev = 0.0;    // accumulated delta-scaled cost since the last accepted update
  ReplayBuffer replay{10};
  AgentCounters counters;
  double core_ball_radius = 0.3;
};

// Everything an audit needs to re-derive the step's constraint rows from scratch.
struct DecisionRecord {
  int k = 0;
  double t = 0.0;
  CartState world{};
  CartState err{};
  CartAction u{};
  double r_rate = 0.0;
  double j_hat = 0.0;
  double lyap = 0.0;
  std::array<double, 5> g{0, 0, 0, 0, 0};
  bool accepted = false;
  bool fallback = false;
  bool suspended = false;
  bool violated = false;  // accepted but failed the exact recheck; expected never
  CriticWeights w_before;
  CriticWeights w_after;
  CartState x_prev{};
  double j_prev = 0.0;
};

class CalfAgent {
 public:
  CalfAgent(const AgentConfig& cfg, const RunningCostSpec& cost, const ActionBounds& bounds,
            const LyapunovFn* lyap, const CriticModel& model, const ConstraintParams& params,
            NoiseKind noise_kind, const NoiseParams& noise_params, std::uint64_t seed)
      : cfg_(cfg),
        cost_(cost),
        bounds_(bounds),
        lyap_(lyap),
        model_(model),
        params_(params),
        noise_kind_(noise_kind),
        noise_params_(noise_params),
        seed_(seed) {
    cfg_.validate();
    cost_.validate();
    state_.w = model_.box.w_sharp(cfg_.zeta);
    state_.w_prev = state_.w;
    state_.replay = ReplayBuffer(static_cast<std::size_t>(cfg_.replay_capacity));
    state_.core_ball_radius = cfg_.core_ball_radius;
  }

  const AgentState& state() const { return state_; }
  const std::vector<DecisionRecord>& records() const { return records_; }
  const ConstraintParams& params() const { return params_; }

  CartAction step(int k, const CartState& world) {
    const CartState e = error_state(world, cost_.target);
    const auto pre = model_.precompute(e);

    DecisionRecord rec;
    rec.k = k;
    rec.t = k * cfg_.delta;
    rec.world = world;
    rec.err = e;
    rec.lyap = pre.lyap;
    rec.w_before = state_.w;
    rec.x_prev = state_.x_prev;
    rec.j_prev = state_.j_prev;

    CartAction u{};
    switch (cfg_.kind) {
      case AgentKind::NominalOnly:
        u = nominal_action(e);
        rec.fallback = true;
        ++state_.counters.fallback_invocations;
        break;
      case AgentKind::CalfFallback:
        u = step_fallback(k, world, e, pre, rec);
        break;
      case AgentKind::UnconstrainedAC:
        u = step_unconstrained(k, world, e, pre, rec);
        break;
      case AgentKind::CalfSarsa:
        u = step_sarsa(k, world, e, pre, rec);
        break;
      case AgentKind::CalfActorCritic:
        u = step_actor_critic(k, world, e, pre, rec);
        break;
    }

    rec.u = u;
    rec.r_rate = running_cost(world, u, cost_);
    rec.j_hat = model_.eval_pre(state_.w, pre);
    rec.w_after = state_.w;
    records_.push_back(rec);
    last_u_ = u;
    return u;
  }

  // Greedy actor target: delta-scaled cost plus critic at the Euler prediction.
  double greedy_objective(const CriticWeights& w, const CartState& e, const CartState& world,
                          const CartAction& u) const {
    return actor_objective(model_, w, e, u, cost_, cfg_.delta, world, cfg_.cost_scale);
  }

  CartAction nominal_action(const CartState& e) const {
    return nominal_policy(e, *lyap_, bounds_, cfg_.delta, cfg_.nominal_grid);
  }

  // One-step model: Euler drift plus the integrated noise value over the
  // interval, pre-sampled once per step so the expectation is cheap inside the
  // solver and deterministic for a fixed seed.
  std::vector<std::array<double, 3>> sample_noise_integrals(int k) const {
    std::vector<std::array<double, 3>> shifts(static_cast<std::size_t>(cfg_.n_mc), {0.0, 0.0, 0.0});
    if (noise_kind_ == NoiseKind::None || noise_params_.amplitude == 0.0) return shifts;
    const double dtf = cfg_.delta / cfg_.substeps;
    const double amp = noise_params_.amplitude / std::sqrt(3.0);  // sigma = I/sqrt(d)
    for (int i = 0; i < cfg_.n_mc; ++i) {
      Rng rng(derive_seed(seed_, 0x4D43ULL, k, i));
      NoiseProcess n = NoiseProcess::make(noise_kind_, noise_params_, 3);
      auto& s = shifts[static_cast<std::size_t>(i)];
      for (int j = 0; j < cfg_.substeps; ++j) {
        const auto& z = n.state();
        for (int c = 0; c < 3; ++c) s[c] += dtf * amp * z[c];
        n.advance(dtf, rng);
      }
    }
    return shifts;
  }

  double mc_mean_critic(const CriticWeights& w, const CartState& pred,
                        const std::vector<std::array<double, 3>>& shifts) const {
    if (shifts.empty()) return model_.eval(w, pred);
    double sum = 0.0;
    for (const auto& s : shifts) {
      const CartState x{pred.x1 + s[0], pred.x2 + s[1], pred.x3 + s[2]};
      sum += model_.eval(w, x);
    }
    return sum / static_cast<double>(shifts.size());
  }

 private:
  bool in_core_ball(const CriticModel::StateEval& pre) const {
    return pre.norm <= state_.core_ball_radius;
  }

  // Damping on the parking law's action norm. Large enough to keep the parked
  // plant from chasing noise, small enough that lateral repairs engage before
  // the heading transient of the repair maneuver can leave the 2x envelope.
  static constexpr double kParkDamping = 1e-4;

  // Inside the core ball constraints are suspended and the action setting is
  // free. Parking quality decides the accumulated cost here, and a learned
  // critic offers no guarantees this close to the origin, so the held law is
  // continuous minimum-norm Lyapunov descent: the continuous-action analog of
  // the nominal policy and of its smallest-action tie-break. Before any
  // accepted update the nominal grid policy itself is held.
  CartAction suspended_action(int k, const CartState& e, const CartState& world,
                              const CriticModel::StateEval& pre, DecisionRecord& rec) {
    (void)pre;
    (void)world;
    rec.suspended = true;
    if (state_.counters.accepted_updates == 0) {
      rec.fallback = true;
      ++state_.counters.fallback_invocations;
      return nominal_action(e);
    }
    const VecD lo{-bounds_.v_max, -bounds_.omega_max};
    const VecD hi{bounds_.v_max, bounds_.omega_max};
    const Objective obj = [&](const VecD& v) {
      const CartAction u{v[0], v[1]};
      return lyap_->cart(euler_predict_cart(e, u)) + kParkDamping * u.norm2();
    };
    Rng rng = solver_rng(k, 2);
    const VecD u0{std::clamp(last_u_.u1, lo[0], hi[0]), std::clamp(last_u_.u2, lo[1], hi[1])};
    const VecD u = solve_box(obj, u0, lo, hi, cfg_.budget, &rng);
    return CartAction{u[0], u[1]};
  }

  Rng solver_rng(int k, int phase) const { return Rng(derive_seed(seed_, 0x534F4C56ULL, k, phase)); }

  CartAction greedy_action(int k, const CartState& e, const CartState& world) {
    const VecD lo{-bounds_.v_max, -bounds_.omega_max};
    const VecD hi{bounds_.v_max, bounds_.omega_max};
    const Objective obj = [&](const VecD& v) {
      return greedy_objective(state_.w, e, world, CartAction{v[0], v[1]});
    };
    Rng rng = solver_rng(k, 1);
    const VecD u0{std::clamp(last_u_.u1, lo[0], hi[0]), std::clamp(last_u_.u2, lo[1], hi[1])};
    const VecD u = solve_box(obj, u0, lo, hi, cfg_.budget, &rng);
    return CartAction{u[0], u[1]};
  }

  // Algorithm: critic first against the previous admissible pair, greedy actor
  // on success, stabilizing action on failure.
  CartAction step_fallback(int k, const CartState& world, const CartState& e,
                           const CriticModel::StateEval& pre, DecisionRecord& rec) {
    if (k == 0) {
      anchor(e, pre);
      state_.r_prev = 0.0;
    }
    if (in_core_ball(pre)) {
      const CartAction u = suspended_action(k, e, world, pre, rec);
      state_.r_prev += cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_);
      return u;
    }
    if (k == 0) {
      rec.fallback = true;
      ++state_.counters.fallback_invocations;
      const CartAction u = nominal_action(e);
      state_.r_prev = cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_);
      return u;
    }

    // TD target against the previous admissible pair, with the accumulated cost.
    const double target = state_.r_prev + cfg_.gamma * model_.eval_pre(state_.w, pre);
    const CriticWeights anchor_w = state_.w;
    const Objective loss = [&](const VecD& v) {
      const CriticWeights w = CriticWeights::unflatten(v);
      const double err = model_.eval_pre(w, prev_pre_) - target;
      return regularized(err * err, w, anchor_w, cfg_.beta);
    };
    const double ladder = state_.j_prev - params_.nu_bar * params_.delta;
    const ConstraintFn g = [&](const VecD& v) {
      const CriticWeights w = CriticWeights::unflatten(v);
      const double j = model_.eval_pre(w, pre);
      return VecD{j - ladder, model_.alpha_low(pre.norm) - j, j - model_.alpha_up(pre.norm)};
    };
    Rng rng = solver_rng(k, 0);
    auto [wv, feasible] =
        solve_constrained(loss, g, state_.w.flatten(), model_.box.lower(), model_.box.upper(),
                          cfg_.budget, &rng);
    if (!feasible) {
      rec.fallback = true;
      ++state_.counters.fallback_invocations;
      const CartAction u = nominal_action(e);
      state_.r_prev += cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_);
      return u;
    }

    state_.w = CriticWeights::unflatten(wv);
    const auto rows = g(wv);
    rec.g = {rows[0], 0.0, 0.0, rows[1], rows[2]};
    rec.accepted = true;
    ++state_.counters.accepted_updates;
    if (!std::all_of(rows.begin(), rows.end(), [&](double r) { return r <= params_.tol; })) {
      ++state_.counters.constraint_violations;
      rec.violated = true;
    }

    const CartAction u = greedy_action(k, e, world);
    anchor(e, pre);
    state_.r_prev = cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_);
    return u;
  }

  // Same loop stripped of constraints and of the stabilizing fallback.
  CartAction step_unconstrained(int k, const CartState& world, const CartState& e,
                                const CriticModel::StateEval& pre, DecisionRecord& rec) {
    if (k == 0) {
      anchor(e, pre);
      state_.r_prev = 0.0;
    } else {
      const double target = state_.r_prev + cfg_.gamma * model_.eval_pre(state_.w, pre);
      const CriticWeights anchor_w = state_.w;
      const Objective loss = [&](const VecD& v) {
        const CriticWeights w = CriticWeights::unflatten(v);
        const double err = model_.eval_pre(w, prev_pre_) - target;
        return regularized(err * err, w, anchor_w, cfg_.beta);
      };
      Rng rng = solver_rng(k, 0);
      const VecD wv = solve_box(loss, state_.w.flatten(), model_.box.lower(), model_.box.upper(),
                                cfg_.budget, &rng);
      state_.w = CriticWeights::unflatten(wv);
      rec.accepted = true;
      ++state_.counters.accepted_updates;
    }
    const CartAction u = greedy_action(k, e, world);
    anchor(e, pre);
    state_.r_prev = cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_);
    return u;
  }

  // Joint (u, w) actor solve under the full constraint function G; the w slot
  // exists only to witness constraint satisfiability and is discarded.
  std::pair<CartAction, bool> joint_actor(int k, const CartState& e, const Objective& obj) {
    VecD lo{-bounds_.v_max, -bounds_.omega_max};
    VecD hi{bounds_.v_max, bounds_.omega_max};
    const VecD wlo = model_.box.lower(), whi = model_.box.upper();
    lo.insert(lo.end(), wlo.begin(), wlo.end());
    hi.insert(hi.end(), whi.begin(), whi.end());

    const ConstraintFn g = [&](const VecD& v) {
      const CartAction u{v[0], v[1]};
      const CriticWeights w = CriticWeights::unflatten(VecD(v.begin() + 2, v.end()));
      const auto rows = constraint_G(model_, w, state_.w, euler_predict_cart(e, u), e, params_);
      return VecD(rows.begin(), rows.end());
    };

    const CartAction eta = nominal_action(e);
    VecD x0{eta.u1, eta.u2};
    const VecD wsharp = model_.box.w_sharp(cfg_.zeta).flatten();
    x0.insert(x0.end(), wsharp.begin(), wsharp.end());

    Rng rng = solver_rng(k, 1);
    auto [v, feasible] = solve_constrained(obj, g, x0, lo, hi, cfg_.budget, &rng);
    if (!feasible) return {eta, false};
    return {CartAction{v[0], v[1]}, true};
  }

  // Deferred critic: the transition that ended at the current state is resolved
  // against the observed x_k, with the loss summed over the experience replay.
  CartAction step_sarsa(int k, const CartState& world, const CartState& e,
                        const CriticModel::StateEval& pre, DecisionRecord& rec) {
    if (in_core_ball(pre)) {
      pending_.reset();
      return suspended_action(k, e, world, pre, rec);
    }

    if (pending_) {
      const Pending p = *pending_;
      state_.replay.push(ReplayItem{p.err, p.u, p.dr, e});
      replay_pre_.push_back(p.pre);
      if (replay_pre_.size() > state_.replay.capacity()) replay_pre_.erase(replay_pre_.begin());

      std::vector<double> targets(state_.replay.size());
      for (std::size_t j = 0; j < state_.replay.size(); ++j)
        targets[j] =
            state_.replay[j].dr + cfg_.gamma * model_.eval(state_.w, state_.replay[j].x_next);

      const CriticWeights anchor_w = state_.w;
      const Objective loss = [&](const VecD& v) {
        const CriticWeights w = CriticWeights::unflatten(v);
        double sum = 0.0;
        for (std::size_t j = 0; j < state_.replay.size(); ++j) {
          const double err = model_.eval_pre(w, replay_pre_[j]) - targets[j];
          sum += err * err;
        }
        return regularized(sum, w, anchor_w, cfg_.beta);
      };
      const ConstraintFn g = [&](const VecD& v) {
        const CriticWeights w = CriticWeights::unflatten(v);
        const auto rows = constraint_G(model_, w, state_.w, e, p.err, params_);
        return VecD(rows.begin(), rows.end());
      };
      if (accept_critic(k, loss, g, rec)) anchor(p.err, p.pre);
    }

    const Objective obj = [&](const VecD& v) {
      return greedy_objective(state_.w, e, world, CartAction{v[0], v[1]});
    };
    auto [u, feasible] = joint_actor(k, e, obj);
    if (!feasible) {
      rec.fallback = true;
      ++state_.counters.fallback_invocations;
    }
    pending_ =
        Pending{e, pre, world, u, cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_)};
    return u;
  }

  // Model-based variant: both objectives use the Monte-Carlo mean of the critic
  // over one-step noise rollouts; the critic is resolved in the same step and
  // its constraint checks the Euler prediction of the executed action.
  CartAction step_actor_critic(int k, const CartState& world, const CartState& e,
                               const CriticModel::StateEval& pre, DecisionRecord& rec) {
    if (in_core_ball(pre)) {
      return suspended_action(k, e, world, pre, rec);
    }

    const auto shifts = sample_noise_integrals(k);

    const Objective obj = [&](const VecD& v) {
      const CartAction u{v[0], v[1]};
      return cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_) +
             mc_mean_critic(state_.w, euler_predict_cart(e, u), shifts);
    };
    auto [u, feasible] = joint_actor(k, e, obj);
    if (!feasible) {
      rec.fallback = true;
      ++state_.counters.fallback_invocations;
    }

    const CartState pred = euler_predict_cart(e, u);
    const double target = cfg_.delta * cfg_.cost_scale * running_cost(world, u, cost_) +
                          cfg_.gamma * mc_mean_critic(state_.w, pred, shifts);
    const CriticWeights anchor_w = state_.w;
    const Objective loss = [&](const VecD& v) {
      const CriticWeights w = CriticWeights::unflatten(v);
      const double err = model_.eval_pre(w, pre) - target;
      return regularized(err * err, w, anchor_w, cfg_.beta);
    };
    const ConstraintFn g = [&](const VecD& v) {
      const CriticWeights w = CriticWeights::unflatten(v);
      const auto rows = constraint_G(model_, w, state_.w, pred, e, params_);
      return VecD(rows.begin(), rows.end());
    };
    if (accept_critic(k, loss, g, rec)) anchor(e, pre);
    return u;
  }

  bool accept_critic(int k, const Objective& loss, const ConstraintFn& g, DecisionRecord& rec) {
    Rng rng = solver_rng(k, 0);
    auto [wv, feasible] = solve_constrained(loss, g, state_.w.flatten(), model_.box.lower(),
                                            model_.box.upper(), cfg_.budget, &rng);
    if (!feasible) return false;
    const auto rows = g(wv);  // rows must be taken against the pre-update weights
    state_.w = CriticWeights::unflatten(wv);
    state_.w_prev = state_.w;
    std::copy(rows.begin(), rows.end(), rec.g.begin());
    rec.accepted = true;
    ++state_.counters.accepted_updates;
    bool ok = true;
    for (double r : rows) ok = ok && r <= params_.tol;
    if (!ok) {
      ++state_.counters.constraint_violations;
      rec.violated = true;
    }
    return true;
  }

  CartState euler_predict_cart(const CartState& x, const CartAction& u) const {
    const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
    return euler_predict(x, u, cfg_.delta, dyn);
  }

  void anchor(const CartState& e, const CriticModel::StateEval& pre) {
    state_.x_prev = e;
    prev_pre_ = pre;
    state_.w_prev = state_.w;
    state_.j_prev = model_.eval_pre(state_.w, pre);
  }

  struct Pending {
    CartState err{};
    CriticModel::StateEval pre{};
    CartState world{};
    CartAction u{};
    double dr = 0.0;
  };

  AgentConfig cfg_;
  RunningCostSpec cost_;
  ActionBounds bounds_;
  const LyapunovFn* lyap_;
  CriticModel model_;
  ConstraintParams params_;
  NoiseKind noise_kind_;
  NoiseParams noise_params_;
  std::uint64_t seed_;

  AgentState state_;
  CartAction last_u_{0.0, 0.0};
  CriticModel::StateEval prev_pre_{};
  std::optional<Pending> pending_;
  std::vector<CriticModel::StateEval> replay_pre_;
  std::vector<DecisionRecord> records_;
};

struct CoreRadiusEstimate {
  double radius = 0.0;
  bool warning = false;  // threshold never cleared; outermost radius returned
};

// Smallest shell radius whose worst-case decay rate exceeds
// 6 lip_J sigma_max lip_Z; the configured floor in the noiseless case.
inline CoreRadiusEstimate estimate_core_radius(const LipschitzEstimates& est,
                                               std::vector<std::pair<double, double>> nu_profile,
                                               double floor_radius = 0.05) {
  if (nu_profile.empty()) throw std::invalid_argument("estimate_core_radius: empty profile");
  const double threshold = 6.0 * est.lip_J * est.sigma_max * est.lip_Z;
  if (threshold <= 0.0) return {floor_radius, false};
  std::sort(nu_profile.begin(), nu_profile.end());
  // suffix minima: inf over all shells at radius >= r
  std::vector<double> suffix(nu_profile.size());
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = nu_profile.size(); i-- > 0;) {
    running = std::min(running, nu_profile[i].second);
    suffix[i] = running;
  }
  for (std::size_t i = 0; i < nu_profile.size(); ++i)
    if (suffix[i] > threshold) return {nu_profile[i].first, false};
  return {nu_profile.back().first, true};
}

}  // namespace calf
