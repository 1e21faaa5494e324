#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "calf/rng.hpp"

// Derivative-free constrained local solver: Nelder-Mead restricted to a box,
// and the penalty + post-hoc exact check + reset strategy for constraints.
// max_evals == 0 is the "solver disabled" sentinel: solve_box returns x0,
// solve_constrained reports infeasible.

namespace calf {

using VecD = std::vector<double>;
using Objective = std::function<double(const VecD&)>;
using ConstraintFn = std::function<VecD(const VecD&)>;

struct SolveBudget {
  int max_evals = 200;
  int restarts = 1;
  double constraint_tol = 1e-8;

  void validate() const {
    if (max_evals < 0) throw std::invalid_argument("SolveBudget: max_evals must be >= 0");
    if (restarts < 0) throw std::invalid_argument("SolveBudget: restarts must be >= 0");
  }
};

namespace detail {

inline void clamp_to_box(VecD& x, const VecD& lo, const VecD& hi) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

// Nelder-Mead with simplex points projected onto the box. Returns the best
// point evaluated (including the start).
inline std::pair<VecD, double> nelder_mead(const Objective& f, const VecD& start, const VecD& lo,
                                           const VecD& hi, int max_evals) {
  const std::size_t n = start.size();
  int evals = 0;
  const auto eval = [&](VecD& x) {
    clamp_to_box(x, lo, hi);
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  VecD best = start;
  clamp_to_box(best, lo, hi);
  double best_f = eval(best);
  if (n == 0 || max_evals <= 1) return {best, best_f};

  std::vector<VecD> pts(n + 1, best);
  VecD fv(n + 1);
  fv[0] = best_f;
  for (std::size_t i = 0; i < n; ++i) {
    VecD p = best;
    double step = 0.05 * (hi[i] - lo[i]);
    if (step <= 0.0) step = 1e-3;
    p[i] += (p[i] + step <= hi[i]) ? step : -step;
    pts[i + 1] = p;
    fv[i + 1] = eval(pts[i + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  while (evals < max_evals) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t lo_i = order[0], hi_i = order[n], hi2_i = order[n - 1];
    if (fv[lo_i] < best_f) {
      best_f = fv[lo_i];
      best = pts[lo_i];
    }

    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      spread = std::max(spread, std::abs(pts[hi_i][i] - pts[lo_i][i]));
    if (spread < 1e-12 && std::abs(fv[hi_i] - fv[lo_i]) < 1e-15) break;

    VecD centroid(n, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
      if (j == hi_i) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[j][i];
    }
    for (std::size_t i = 0; i < n; ++i) centroid[i] /= static_cast<double>(n);

    const auto blend = [&](double coef) {
      VecD p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + coef * (centroid[i] - pts[hi_i][i]);
      return p;
    };

    VecD refl = blend(1.0);
    const double f_refl = eval(refl);
    if (f_refl < fv[lo_i]) {
      VecD expa = blend(2.0);
      const double f_expa = eval(expa);
      if (f_expa < f_refl) {
        pts[hi_i] = std::move(expa);
        fv[hi_i] = f_expa;
      } else {
        pts[hi_i] = std::move(refl);
        fv[hi_i] = f_refl;
      }
    } else if (f_refl < fv[hi2_i]) {
      pts[hi_i] = std::move(refl);
      fv[hi_i] = f_refl;
    } else {
      VecD contr = blend(f_refl < fv[hi_i] ? 0.5 : -0.5);
      const double f_contr = eval(contr);
      if (f_contr < std::min(f_refl, fv[hi_i])) {
        pts[hi_i] = std::move(contr);
        fv[hi_i] = f_contr;
      } else {
        // shrink toward the best vertex
        for (std::size_t j = 0; j <= n; ++j) {
          if (j == lo_i) continue;
          for (std::size_t i = 0; i < n; ++i) pts[j][i] = pts[lo_i][i] + 0.5 * (pts[j][i] - pts[lo_i][i]);
          fv[j] = eval(pts[j]);
          if (evals >= max_evals) break;
        }
      }
    }
  }
  for (std::size_t i = 0; i <= n; ++i) {
    if (fv[i] < best_f) {
      best_f = fv[i];
      best = pts[i];
    }
  }
  return {best, best_f};
}

}  // namespace detail

inline VecD solve_box(const Objective& f, const VecD& x0, const VecD& lo, const VecD& hi,
                      const SolveBudget& budget, Rng* restart_rng = nullptr) {
  budget.validate();
  if (x0.size() != lo.size() || x0.size() != hi.size())
    throw std::invalid_argument("solve_box: dimension mismatch");
  for (std::size_t i = 0; i < x0.size(); ++i)
    if (x0[i] < lo[i] - 1e-12 || x0[i] > hi[i] + 1e-12)
      throw std::invalid_argument("solve_box: x0 outside bounds");
  if (budget.max_evals == 0) return x0;
  if (!std::isfinite(f(x0))) throw std::invalid_argument("solve_box: objective not finite at x0");

  Rng local_rng(0x50455254ULL);
  Rng& rng = restart_rng ? *restart_rng : local_rng;

  auto [best, best_f] = detail::nelder_mead(f, x0, lo, hi, budget.max_evals);
  for (int r = 0; r < budget.restarts; ++r) {
    VecD start = best;
    for (std::size_t i = 0; i < start.size(); ++i)
      start[i] += 0.05 * (hi[i] - lo[i]) * (2.0 * rng.uniform01() - 1.0);
    detail::clamp_to_box(start, lo, hi);
    auto [cand, cand_f] = detail::nelder_mead(f, start, lo, hi, budget.max_evals);
    if (cand_f < best_f) {
      best_f = cand_f;
      best = std::move(cand);
    }
  }
  return best;
}

// Penalized unconstrained descent followed by an exact feasibility check; on
// violation the caller's initial solution is returned untouched.
inline std::pair<VecD, bool> solve_constrained(const Objective& f, const ConstraintFn& g,
                                               const VecD& x0, const VecD& lo, const VecD& hi,
                                               const SolveBudget& budget, Rng* restart_rng = nullptr) {
  budget.validate();
  if (budget.max_evals == 0) return {x0, false};

  Rng local_rng(0x434E5354ULL);
  Rng& rng = restart_rng ? *restart_rng : local_rng;

  const double tol = budget.constraint_tol;
  const double margin = 10.0 * tol;

  const auto feasible_exact = [&](const VecD& x) {
    for (double v : g(x))
      if (v > tol) return false;
    return true;
  };

  VecD best_feas;
  double best_feas_f = std::numeric_limits<double>::infinity();
  const auto consider = [&](const VecD& x) {
    if (!feasible_exact(x)) return;
    const double v = f(x);
    if (v < best_feas_f) {
      best_feas_f = v;
      best_feas = x;
    }
  };

  VecD start = x0;
  detail::clamp_to_box(start, lo, hi);
  consider(start);

  static constexpr double kPenalty[3] = {10.0, 1e3, 1e5};
  VecD cand = start;
  for (int r = 0; r <= budget.restarts; ++r) {
    const double pen = kPenalty[std::min(r, 2)];
    // every feasible iterate seen along the way is a valid candidate
    const Objective penalized = [&](const VecD& x) {
      const double fv = f(x);
      double v = fv;
      bool feas = true;
      for (double gi : g(x)) {
        if (gi > tol) feas = false;
        const double viol = std::max(0.0, gi + margin);
        v += pen * viol * viol;
      }
      if (feas && fv < best_feas_f) {
        best_feas_f = fv;
        best_feas = x;
      }
      return v;
    };
    VecD s = (r == 0) ? start : cand;
    if (r > 0) {
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] += 0.05 * (hi[i] - lo[i]) * (2.0 * rng.uniform01() - 1.0);
      detail::clamp_to_box(s, lo, hi);
    }
    cand = detail::nelder_mead(penalized, s, lo, hi, budget.max_evals).first;
  }

  if (!feasible_exact(cand)) {
    // restoration: pure violation descent from the penalized endpoint
    const Objective violation = [&](const VecD& x) {
      double v = 0.0;
      for (double gi : g(x)) {
        const double viol = std::max(0.0, gi + margin);
        v += viol * viol;
      }
      return v;
    };
    cand = detail::nelder_mead(violation, cand, lo, hi, std::max(1, budget.max_evals / 2)).first;
    consider(cand);
  }

  if (!best_feas.empty()) return {best_feas, true};
  return {x0, false};
}

}  // namespace calf
