#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "calf/sim.hpp"
#include "calf/systems.hpp"

// The NI Lyapunov function
//   L(z) = min_{zeta in [-rho, rho]} z1^4 + z2^4 + |z3|^3 / (z1 cos zeta + z2 sin zeta + sqrt|z3|)^2,
// its pullback to cart coordinates, power-law class-Kinf sandwich bounds, and the
// nominal parking policy realized as one-step descent of L over an action grid.

namespace calf {

// s -> a * s^p, strictly increasing, zero at zero, unbounded.
struct KappaFunction {
  double a = 1.0;
  double p = 1.0;

  double operator()(double s) const { return s <= 0.0 ? 0.0 : a * std::pow(s, p); }
  double inverse(double v) const { return v <= 0.0 ? 0.0 : std::pow(v / a, 1.0 / p); }
};

struct LyapunovSpec {
  double zeta_search_radius = kPi;  // the min-search interval half-width
  int grid_points = 720;
  double denominator_floor = 1e-12;

  void validate() const {
    if (grid_points < 3) throw std::invalid_argument("LyapunovSpec: grid_points must be >= 3");
    if (!(zeta_search_radius > 0.0))
      throw std::invalid_argument("LyapunovSpec: zeta_search_radius must be > 0");
    if (!(denominator_floor > 0.0))
      throw std::invalid_argument("LyapunovSpec: denominator_floor must be > 0");
  }
};

// Caches the zeta grid so repeated evaluations don't pay for cos/sin.
class LyapunovFn {
 public:
  explicit LyapunovFn(const LyapunovSpec& spec = {}) : spec_(spec) {
    spec_.validate();
    const int n = spec_.grid_points;
    zeta_.resize(n);
    cz_.resize(n);
    sz_.resize(n);
    const double rho = spec_.zeta_search_radius;
    for (int i = 0; i < n; ++i) {
      zeta_[i] = -rho + 2.0 * rho * i / (n - 1);
      cz_[i] = std::cos(zeta_[i]);
      sz_[i] = std::sin(zeta_[i]);
    }
  }

  const LyapunovSpec& spec() const { return spec_; }

  double ni(const NIState& z) const {
    const double base = z.z1 * z.z1 * z.z1 * z.z1 + z.z2 * z.z2 * z.z2 * z.z2;
    if (z.z3 == 0.0) return base;  // the fraction is defined as 0 there
    const double a3 = std::abs(z.z3);
    const double num = a3 * a3 * a3;
    const double root = std::sqrt(a3);

    const auto frac = [&](double c, double s) {
      const double d = z.z1 * c + z.z2 * s + root;
      const double d2 = std::max(d * d, spec_.denominator_floor);
      return num / d2;
    };

    int best = 0;
    double best_v = frac(cz_[0], sz_[0]);
    for (int i = 1; i < static_cast<int>(zeta_.size()); ++i) {
      const double v = frac(cz_[i], sz_[i]);
      if (v < best_v) {
        best_v = v;
        best = i;
      }
    }

    // Golden-section refinement on the bracketing interval around the best grid node.
    const double rho = spec_.zeta_search_radius;
    const double h = 2.0 * rho / (spec_.grid_points - 1);
    double lo = std::max(-rho, zeta_[best] - h);
    double hi = std::min(rho, zeta_[best] + h);
    const double gr = 0.61803398874989484820458683436564;
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = frac(std::cos(x1), std::sin(x1));
    double f2 = frac(std::cos(x2), std::sin(x2));
    for (int it = 0; it < 64 && (hi - lo) > 1e-13; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = frac(std::cos(x1), std::sin(x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = frac(std::cos(x2), std::sin(x2));
      }
    }
    best_v = std::min(best_v, std::min(f1, f2));
    return base + best_v;
  }

  double cart(const CartState& e) const { return ni(cart_to_ni(e)); }

 private:
  LyapunovSpec spec_;
  std::vector<double> zeta_, cz_, sz_;
};

inline double lyapunov_ni(const NIState& z, const LyapunovSpec& spec) {
  return LyapunovFn(spec).ni(z);
}

inline double lyapunov_cart(const CartState& e, const LyapunovSpec& spec) {
  return LyapunovFn(spec).cart(e);
}

// One-step Lyapunov descent over a uniform action grid; ties broken by smallest
// action norm, then lexicographically.
inline CartAction nominal_policy(const CartState& e, const LyapunovFn& lyap,
                                 const ActionBounds& bounds, double delta_nominal,
                                 int grid_n = 15) {
  if (grid_n < 2) throw std::invalid_argument("nominal_policy: grid must have >= 2 points");
  const Dynamics f = [](const CartState& x, const CartAction& u) { return cart_dynamics(x, u); };
  CartAction best{0.0, 0.0};
  double best_l = std::numeric_limits<double>::infinity();
  double best_n = std::numeric_limits<double>::infinity();
  const double tol = 1e-12;
  for (int i = 0; i < grid_n; ++i) {
    const double u1 = -bounds.v_max + 2.0 * bounds.v_max * i / (grid_n - 1);
    for (int j = 0; j < grid_n; ++j) {
      const double u2 = -bounds.omega_max + 2.0 * bounds.omega_max * j / (grid_n - 1);
      const CartAction u{u1, u2};
      const double l = lyap.cart(euler_predict(e, u, delta_nominal, f));
      const double n = u.norm2();
      bool take = false;
      if (l < best_l - tol) {
        take = true;
      } else if (l <= best_l + tol) {
        if (n < best_n - tol)
          take = true;
        else if (n <= best_n + tol && (u1 < best.u1 || (u1 == best.u1 && u2 < best.u2)))
          take = true;
      }
      if (take) {
        best = u;
        best_l = std::min(best_l, l);
        best_n = n;
      }
    }
  }
  return best;
}

namespace detail_kappa {

inline double envelope_exponent(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int n = static_cast<int>(pts.size());
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) throw std::invalid_argument("sandwich_bounds: degenerate samples");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace detail_kappa

// Fits hat_alpha_low <= L <= hat_alpha_up as power laws. The two exponents are
// fitted separately through log-binned sample minima/maxima (the function is
// strongly anisotropic, so one shared slope would pin the whole envelope to a
// single radius), then the coefficients are set on the exact sample envelope,
// deflated/inflated by 1.2.
inline std::pair<KappaFunction, KappaFunction> sandwich_bounds(
    const std::vector<std::pair<double, double>>& samples) {
  double s_min = std::numeric_limits<double>::infinity(), s_max = 0.0;
  int valid = 0;
  for (const auto& [s, l] : samples) {
    if (s <= 1e-12 || l <= 0.0) continue;
    s_min = std::min(s_min, s);
    s_max = std::max(s_max, s);
    ++valid;
  }
  if (valid < 2 || !(s_max > s_min))
    throw std::invalid_argument("sandwich_bounds: degenerate samples");

  constexpr int kBins = 24;
  const double log_lo = std::log(s_min), log_hi = std::log(s_max);
  std::vector<double> bin_min(kBins, std::numeric_limits<double>::infinity());
  std::vector<double> bin_max(kBins, 0.0);
  std::vector<double> bin_min_s(kBins, 0.0), bin_max_s(kBins, 0.0);
  for (const auto& [s, l] : samples) {
    if (s <= 1e-12 || l <= 0.0) continue;
    int b = static_cast<int>((std::log(s) - log_lo) / (log_hi - log_lo) * kBins);
    b = std::clamp(b, 0, kBins - 1);
    if (l < bin_min[b]) {
      bin_min[b] = l;
      bin_min_s[b] = s;
    }
    if (l > bin_max[b]) {
      bin_max[b] = l;
      bin_max_s[b] = s;
    }
  }
  // envelope points anchored at the radii where the extrema occur
  std::vector<std::pair<double, double>> lo_pts, up_pts;
  for (int b = 0; b < kBins; ++b) {
    if (!std::isfinite(bin_min[b]) || bin_max[b] <= 0.0) continue;
    lo_pts.emplace_back(std::log(bin_min_s[b]), std::log(bin_min[b]));
    up_pts.emplace_back(std::log(bin_max_s[b]), std::log(bin_max[b]));
  }
  if (lo_pts.size() < 2) throw std::invalid_argument("sandwich_bounds: degenerate samples");

  const double p_low = std::max(detail_kappa::envelope_exponent(lo_pts), 1e-3);
  const double p_up = std::max(detail_kappa::envelope_exponent(up_pts), 1e-3);

  double r_low = std::numeric_limits<double>::infinity();
  double r_up = 0.0;
  for (const auto& [s, l] : samples) {
    if (s <= 1e-12 || l <= 0.0) continue;
    r_low = std::min(r_low, l / std::pow(s, p_low));
    r_up = std::max(r_up, l / std::pow(s, p_up));
  }
  const double safety = 1.2;
  return {KappaFunction{r_low / safety, p_low}, KappaFunction{r_up * safety, p_up}};
}

}  // namespace calf
