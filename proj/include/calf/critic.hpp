#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "calf/lyapunov.hpp"
#include "calf/optimize.hpp"
#include "calf/systems.hpp"

// Critic J_hat^w(x) = w0 * phi(x; w_phi) + w1 * L(x), the stabilizing constraint
// function G (C1-C4), and the actor/critic losses with experience replay,
// regularization, and optional discounting.

namespace calf {

inline constexpr int kNumPhiWeights = 9;  // monomials of degree <= 2 in 3 coordinates

struct CriticWeights {
  double w0 = 0.0;
  double w1 = 1.0;
  std::vector<double> w_phi = std::vector<double>(kNumPhiWeights, 0.0);

  VecD flatten() const {
    VecD v;
    v.reserve(2 + w_phi.size());
    v.push_back(w0);
    v.push_back(w1);
    v.insert(v.end(), w_phi.begin(), w_phi.end());
    return v;
  }
  static CriticWeights unflatten(const VecD& v) {
    CriticWeights w;
    w.w0 = v[0];
    w.w1 = v[1];
    w.w_phi.assign(v.begin() + 2, v.end());
    return w;
  }
};

// The compact weight box W with w1 bounded away from 0 (so 0 is not in W).
struct WeightBox {
  double w0_min = 0.0, w0_max = 5.0;
  double w1_min = 0.05, w1_max = 2.5;
  double phi_min = -2.0, phi_max = 2.0;

  VecD lower() const {
    VecD v{w0_min, w1_min};
    v.insert(v.end(), kNumPhiWeights, phi_min);
    return v;
  }
  VecD upper() const {
    VecD v{w0_max, w1_max};
    v.insert(v.end(), kNumPhiWeights, phi_max);
    return v;
  }
  // w#_zeta: the weights at which the critic equals zeta * L exactly.
  CriticWeights w_sharp(double zeta = 1.0) const {
    if (zeta < w1_min || zeta > w1_max)
      throw std::invalid_argument("WeightBox: zeta outside the admissible w1 range");
    CriticWeights w;
    w.w0 = 0.0;
    w.w1 = zeta;
    return w;
  }
};

inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

struct CriticModel {
  const LyapunovFn* lyap = nullptr;
  KappaFunction alpha_low{1.0, 2.0};
  KappaFunction alpha_up{1.0, 2.0};
  WeightBox box{};

  static std::array<double, kNumPhiWeights> monomials(const CartState& e) {
    const double a = e.x1, b = e.x2, c = wrap_angle(e.x3);
    return {a, b, c, a * a, b * b, c * c, a * b, a * c, b * c};
  }

  // phi >= 0 for every weight choice, so the w1 L term alone carries the lower sandwich.
  static double phi(const std::vector<double>& w_phi, const std::array<double, kNumPhiWeights>& m) {
    double s = 0.0;
    for (int i = 0; i < kNumPhiWeights; ++i) s += w_phi[i] * m[i];
    return softplus(s);
  }

  // Per-state quantities that do not depend on the weights.
  struct StateEval {
    double lyap = 0.0;
    double norm = 0.0;
    std::array<double, kNumPhiWeights> mono{};
  };

  StateEval precompute(const CartState& e) const {
    StateEval s;
    s.lyap = lyap->cart(e);
    s.norm = composite_norm(e);
    s.mono = monomials(e);
    return s;
  }

  double eval_pre(const CriticWeights& w, const StateEval& s) const {
    return w.w0 * phi(w.w_phi, s.mono) + w.w1 * s.lyap;
  }

  double eval(const CriticWeights& w, const CartState& e) const { return eval_pre(w, precompute(e)); }
};

inline double critic_eval(const CriticModel& model, const CriticWeights& w, const CartState& x) {
  return model.eval(w, x);
}

struct ConstraintParams {
  double epsilon = 0.0;  // C1 slack
  double nu_bar = 1e-3;  // decay rate
  double delta = 0.05;   // sampling time
  double tol = 1e-8;     // "<= 0" check tolerance

  void validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("ConstraintParams: epsilon must be >= 0");
    if (!(nu_bar > 0.0)) throw std::invalid_argument("ConstraintParams: nu_bar must be > 0");
    if (!(epsilon < nu_bar)) throw std::invalid_argument("ConstraintParams: epsilon must be < nu_bar");
    if (!(delta > 0.0)) throw std::invalid_argument("ConstraintParams: delta must be > 0");
  }
};

// Rows of G; satisfaction means every row <= tol.
//   [ J^w(x) - J^{w_prev}(x) - delta eps
//     L(x_next) - J^w(x_next)
//     J^w(x_next) - J^w(x) + delta nu_bar
//     alpha_low(|x|) - J^w(x)
//     J^w(x) - alpha_up(|x|) ]
inline std::array<double, 5> constraint_G(const CriticModel& model, const CriticWeights& w,
                                          const CriticWeights& w_prev, const CartState& x_next,
                                          const CartState& x, const ConstraintParams& p) {
  const auto sx = model.precompute(x);
  const auto sn = model.precompute(x_next);
  const double j_x = model.eval_pre(w, sx);
  const double j_next = model.eval_pre(w, sn);
  const double j_prev_x = model.eval_pre(w_prev, sx);
  return {
      j_x - j_prev_x - p.delta * p.epsilon,
      sn.lyap - j_next,
      j_next - j_x + p.delta * p.nu_bar,
      model.alpha_low(sx.norm) - j_x,
      j_x - model.alpha_up(sx.norm),
  };
}

inline bool constraint_satisfied(const std::array<double, 5>& rows, double tol = 1e-8) {
  for (double r : rows)
    if (r > tol) return false;
  return true;
}

// One transition; dr is the delta-scaled running cost over the step.
struct ReplayItem {
  CartState x{};
  CartAction u{};
  double dr = 0.0;
  CartState x_next{};
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10) : capacity_(capacity) {
    if (capacity_ < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  }
  void push(const ReplayItem& item) {
    items_.push_back(item);
    if (items_.size() > capacity_) items_.pop_front();
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  // chronological, oldest first
  const ReplayItem& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::deque<ReplayItem> items_;
};

// delta-scaled per-step cost plus the critic at the Euler prediction.
inline double actor_objective(const CriticModel& model, const CriticWeights& w_k,
                              const CartState& x_k, const CartAction& u,
                              const RunningCostSpec& cost_spec, double delta,
                              const CartState& world_x, double cost_scale = 1.0) {
  const Dynamics f = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  const CartState pred = euler_predict(x_k, u, delta, f);
  return delta * cost_scale * running_cost(world_x, u, cost_spec) + model.eval(w_k, pred);
}

// sum_j (J^w(x_j) - dr_j - gamma J^{w_k}(x'_j))^2; gamma = 1 is the undiscounted form.
inline double critic_td_loss(const CriticModel& model, const CriticWeights& w,
                             const ReplayBuffer& replay, const CriticWeights& w_k, double gamma) {
  if (replay.empty()) throw std::invalid_argument("critic_td_loss: replay is empty");
  if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("critic_td_loss: gamma in (0,1]");
  double loss = 0.0;
  for (std::size_t j = 0; j < replay.size(); ++j) {
    const auto& it = replay[j];
    const double e = model.eval(w, it.x) - it.dr - gamma * model.eval(w_k, it.x_next);
    loss += e * e;
  }
  return loss;
}

inline double regularized(double loss, const CriticWeights& w, const CriticWeights& w_anchor,
                          double beta) {
  if (beta < 0.0) throw std::invalid_argument("regularized: beta must be >= 0");
  if (beta == 0.0) return loss;
  double d = 0.0;
  const double d0 = w.w0 - w_anchor.w0, d1 = w.w1 - w_anchor.w1;
  d += d0 * d0 + d1 * d1;
  for (int i = 0; i < kNumPhiWeights; ++i) {
    const double di = w.w_phi[i] - w_anchor.w_phi[i];
    d += di * di;
  }
  return loss + beta * d;
}

}  // namespace calf
