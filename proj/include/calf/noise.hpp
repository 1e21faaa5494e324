#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "calf/rng.hpp"

// Bounded stochastic disturbance processes Z', advanced on the fine integration
// grid by Euler-Maruyama. Every model confines each component to (-1, 1)
// (sine-Wiener: [-1, 1]); the emitted value is amplitude * state.

namespace calf {

enum class NoiseKind { None, SineWiener, DCL, TSB, KS };

struct NoiseParams {
  double b1 = 1.0;
  double b2 = 0.0;
  double tau_a = 1.0;      // sine-Wiener autocorrelation time
  double amplitude = 0.0;  // output scale
};

inline const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::None: return "none";
    case NoiseKind::SineWiener: return "sine_wiener";
    case NoiseKind::DCL: return "dcl";
    case NoiseKind::TSB: return "tsb";
    case NoiseKind::KS: return "ks";
  }
  return "?";
}

class NoiseProcess {
 public:
  NoiseProcess() = default;

  static NoiseProcess make(NoiseKind kind, const NoiseParams& p, int dim) {
    if (dim < 1) throw std::invalid_argument("NoiseProcess: dim must be >= 1");
    if (p.amplitude < 0.0) throw std::invalid_argument("NoiseProcess: amplitude must be >= 0");
    switch (kind) {
      case NoiseKind::None: break;
      case NoiseKind::SineWiener:
        if (p.tau_a <= 0.0) throw std::invalid_argument("sine-Wiener: tau_a must be > 0");
        break;
      case NoiseKind::DCL:
        if (p.b1 <= 0.0) throw std::invalid_argument("DCL: b1 must be > 0");
        if (p.b2 <= -1.0) throw std::invalid_argument("DCL: b2 must be > -1");
        break;
      case NoiseKind::TSB:
        if (p.b1 <= 0.0) throw std::invalid_argument("TSB: b1 must be > 0");
        if (p.b2 >= 1.0) throw std::invalid_argument("TSB: b2 must be < 1");
        break;
      case NoiseKind::KS:
        if (p.b1 <= 0.0) throw std::invalid_argument("KS: b1 must be > 0");
        if (p.b2 < 0.0) throw std::invalid_argument("KS: b2 must be >= 0");
        break;
    }
    NoiseProcess n;
    n.kind_ = kind;
    n.params_ = p;
    n.state_.assign(static_cast<std::size_t>(dim), 0.0);
    n.brownian_.assign(static_cast<std::size_t>(dim), 0.0);
    return n;
  }

  NoiseKind kind() const { return kind_; }
  const NoiseParams& params() const { return params_; }
  int dim() const { return static_cast<int>(state_.size()); }
  const std::vector<double>& state() const { return state_; }

  // b3 = (2 b2 + 1) / (b2 + 1), fixed by the KS model.
  double ks_b3() const { return (2.0 * params_.b2 + 1.0) / (params_.b2 + 1.0); }

  void advance(double dt, Rng& rng) {
    if (dt <= 0.0) throw std::invalid_argument("NoiseProcess::advance: dt must be > 0");
    const double sqdt = std::sqrt(dt);
    switch (kind_) {
      case NoiseKind::None:
        return;
      case NoiseKind::SineWiener: {
        const double freq = std::sqrt(2.0 / params_.tau_a);
        for (std::size_t i = 0; i < state_.size(); ++i) {
          brownian_[i] += sqdt * rng.gaussian();
          state_[i] = std::sin(freq * brownian_[i]);
        }
        return;
      }
      case NoiseKind::DCL: {
        const double diff = 1.0 / (params_.b1 * (params_.b2 + 1.0));
        for (double& z : state_) {
          const double drift = -z / params_.b1;
          const double g = std::sqrt(std::max(0.0, (1.0 - z * z) * diff));
          z = clamp_open(z + drift * dt + g * sqdt * rng.gaussian());
        }
        return;
      }
      case NoiseKind::TSB: {
        const double g = std::sqrt((1.0 - params_.b2) / params_.b1);
        for (double& z : state_) {
          const double drift = -z / (params_.b1 * (1.0 - z * z));
          z = clamp_open(z + drift * dt + g * sqdt * rng.gaussian());
        }
        return;
      }
      case NoiseKind::KS: {
        const double g = 2.0 / (kPiNoise * std::sqrt(params_.b1 * (params_.b2 + 1.0)));
        const double b3 = ks_b3();
        for (double& z : state_) {
          // tan argument kept away from +-pi/2
          const double arg =
              std::clamp(0.5 * kPiNoise * z, -(0.5 * kPiNoise - 1e-6), 0.5 * kPiNoise - 1e-6);
          const double drift = -(b3 / (kPiNoise * params_.b1)) * std::tan(arg);
          z = clamp_open(z + drift * dt + g * sqdt * rng.gaussian());
        }
        return;
      }
    }
  }

 private:
  static constexpr double kPiNoise = 3.141592653589793238462643383279502884;
  static constexpr double kBoundaryMargin = 1e-9;

  static double clamp_open(double z) {
    return std::clamp(z, -1.0 + kBoundaryMargin, 1.0 - kBoundaryMargin);
  }

  NoiseKind kind_ = NoiseKind::None;
  NoiseParams params_{};
  std::vector<double> state_;
  std::vector<double> brownian_;  // sine-Wiener accumulator
};

inline NoiseProcess step_noise(const NoiseProcess& p, double dt, Rng& rng) {
  NoiseProcess out = p;
  out.advance(dt, rng);
  return out;
}

inline std::vector<double> current_value(const NoiseProcess& p) {
  std::vector<double> v(p.state());
  for (double& x : v) x *= p.params().amplitude;
  return v;
}

}  // namespace calf
