#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

// Kinematic cart (unicycle) environment, the nonholonomic integrator it is
// diffeomorphic to, the coordinate/action conjugacy between them, and the
// quadratic running cost.

namespace calf {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r <= -kPi)
    r += 2.0 * kPi;
  else if (r > kPi)
    r -= 2.0 * kPi;
  return r;
}

struct CartState {
  double x1 = 0.0;  // m
  double x2 = 0.0;  // m
  double x3 = 0.0;  // rad

  bool finite() const { return std::isfinite(x1) && std::isfinite(x2) && std::isfinite(x3); }
};

struct ActionBounds {
  double v_max = 0.22;      // m/s
  double omega_max = 2.84;  // rad/s
};

struct CartAction {
  double u1 = 0.0;  // m/s
  double u2 = 0.0;  // rad/s

  static CartAction saturated(double u1, double u2, const ActionBounds& b) {
    CartAction a;
    a.u1 = std::clamp(u1, -b.v_max, b.v_max);
    a.u2 = std::clamp(u2, -b.omega_max, b.omega_max);
    return a;
  }
  double norm2() const { return u1 * u1 + u2 * u2; }
};

struct NIState {
  double z1 = 0.0, z2 = 0.0, z3 = 0.0;
};

struct NIAction {
  double v1 = 0.0, v2 = 0.0;
};

inline std::array<double, 3> cart_dynamics(const CartState& x, const CartAction& u) {
  return {u.u1 * std::cos(x.x3), u.u1 * std::sin(x.x3), u.u2};
}

inline std::array<double, 3> ni_dynamics(const NIState& z, const NIAction& v) {
  return {v.v1, v.v2, z.z1 * v.v2 - z.z2 * v.v1};
}

// Chained-form/Brockett conjugacy for the unicycle:
//   z1 = x3
//   z2 = x1 cos x3 + x2 sin x3
//   z3 = z1 z2 - 2 (x1 sin x3 - x2 cos x3)
// which pushes cart_dynamics onto ni_dynamics exactly under the matching
// action map v = (u2, u1 - s u2), s = x1 sin x3 - x2 cos x3.
inline NIState cart_to_ni(const CartState& x) {
  const double c = std::cos(x.x3), s = std::sin(x.x3);
  NIState z;
  z.z1 = x.x3;
  z.z2 = x.x1 * c + x.x2 * s;
  const double lat = x.x1 * s - x.x2 * c;
  z.z3 = z.z1 * z.z2 - 2.0 * lat;
  return z;
}

inline CartState ni_to_cart(const NIState& z) {
  CartState x;
  x.x3 = z.z1;
  const double c = std::cos(x.x3), s = std::sin(x.x3);
  const double lat = 0.5 * (z.z1 * z.z2 - z.z3);
  x.x1 = z.z2 * c + lat * s;
  x.x2 = z.z2 * s - lat * c;
  return x;
}

inline NIAction cart_action_to_ni(const CartState& x, const CartAction& u) {
  const double s = x.x1 * std::sin(x.x3) - x.x2 * std::cos(x.x3);
  return {u.u2, u.u1 - s * u.u2};
}

inline CartAction ni_action_to_cart(const CartState& x, const NIAction& v) {
  const double s = x.x1 * std::sin(x.x3) - x.x2 * std::cos(x.x3);
  CartAction u;
  u.u1 = v.v2 + s * v.v1;
  u.u2 = v.v1;
  return u;
}

// chi = [x - x*, u] with the heading difference wrapped; r = chi^T H chi.
struct RunningCostSpec {
  std::array<double, 5> H{10.0, 10.0, 10.0, 1.0, 1.0};  // diagonal
  CartState target{};

  void validate() const {
    double state_weight = 0.0;
    for (int i = 0; i < 5; ++i) {
      if (H[i] < 0.0) throw std::invalid_argument("RunningCostSpec: H entries must be >= 0");
      if (i < 3) state_weight += H[i];
    }
    if (state_weight <= 0.0)
      throw std::invalid_argument("RunningCostSpec: at least one state weight must be > 0");
  }
};

inline std::array<double, 5> h_preset(int which) {
  switch (which) {
    case 1: return {10, 10, 10, 0, 0};
    case 2: return {10, 10, 10, 1, 1};
    case 3: return {10, 10, 100, 0, 0};
    case 4: return {10, 100, 10, 0, 0};
    case 5: return {100, 10, 10, 0, 0};
    default: throw std::invalid_argument("h_preset: index must be 1..5, got " + std::to_string(which));
  }
}

inline double running_cost(const CartState& x, const CartAction& u, const RunningCostSpec& spec) {
  const double d1 = x.x1 - spec.target.x1;
  const double d2 = x.x2 - spec.target.x2;
  const double d3 = wrap_angle(x.x3 - spec.target.x3);
  return spec.H[0] * d1 * d1 + spec.H[1] * d2 * d2 + spec.H[2] * d3 * d3 + spec.H[3] * u.u1 * u.u1 +
         spec.H[4] * u.u2 * u.u2;
}

// Relative pose of x in the target's frame. The error obeys cart_dynamics under
// the same action and vanishes exactly at the target, so L and the critic are
// evaluated on it.
inline CartState error_state(const CartState& x, const CartState& target) {
  const double c = std::cos(target.x3), s = std::sin(target.x3);
  const double dx = x.x1 - target.x1, dy = x.x2 - target.x2;
  CartState e;
  e.x1 = c * dx + s * dy;
  e.x2 = -s * dx + c * dy;
  e.x3 = wrap_angle(x.x3 - target.x3);
  return e;
}

// Position + wrapped-heading composite norm.
inline double composite_norm(const CartState& e) {
  const double a = wrap_angle(e.x3);
  return std::sqrt(e.x1 * e.x1 + e.x2 * e.x2 + a * a);
}

}  // namespace calf
