#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "calf/optimize.hpp"
#include "calf/rng.hpp"

using namespace calf;

TEST_CASE("convex quadratic on a box") {
  const Objective f = [](const VecD& v) { return (v[0] - 1.0) * (v[0] - 1.0); };
  SECTION("interior minimum") {
    const VecD r = solve_box(f, {-1.5}, {-2}, {2}, SolveBudget{200, 1});
    CHECK_THAT(r[0], Catch::Matchers::WithinAbs(1.0, 1e-4));
  }
  SECTION("active bound") {
    const VecD r = solve_box(f, {-1.5}, {-2}, {0.5}, SolveBudget{300, 1});
    CHECK_THAT(r[0], Catch::Matchers::WithinAbs(0.5, 1e-6));
  }
  SECTION("budget zero returns the start") {
    const VecD r = solve_box(f, {-1.5}, {-2}, {2}, SolveBudget{0, 0});
    CHECK(r[0] == -1.5);
  }
  SECTION("start outside the box is rejected") {
    CHECK_THROWS_AS(solve_box(f, {5.0}, {-2}, {2}, SolveBudget{100, 0}), std::invalid_argument);
  }
  SECTION("non-finite objective at start is rejected") {
    const Objective bad = [](const VecD&) { return std::nan(""); };
    CHECK_THROWS_AS(solve_box(bad, {0.0}, {-2}, {2}, SolveBudget{100, 0}), std::invalid_argument);
  }
}

TEST_CASE("rosenbrock reference run") {
  const Objective f = [](const VecD& v) {
    const double a = 1.0 - v[0];
    const double b = v[1] - v[0] * v[0];
    return a * a + 100.0 * b * b;
  };
  const VecD r = solve_box(f, {-1.0, 1.0}, {-5, -5}, {5, 5}, SolveBudget{2000, 2});
  CHECK(f(r) < 0.1);
}

TEST_CASE("objective never worsens relative to the start") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(0.5, 3.0);
    const Objective f = [a, b](const VecD& v) {
      return b * (v[0] - a) * (v[0] - a) + std::sin(3 * v[0]);
    };
    const VecD x0{rng.uniform(-2, 2)};
    const VecD r = solve_box(f, x0, {-2}, {2}, SolveBudget{150, 1});
    CHECK(f(r) <= f(x0) + 1e-12);
  }
}

TEST_CASE("always-satisfied constraint behaves as a box solve") {
  const Objective f = [](const VecD& v) { return (v[0] - 1.0) * (v[0] - 1.0); };
  const ConstraintFn g = [](const VecD&) { return VecD{-1.0}; };
  const auto [r, feasible] = solve_constrained(f, g, {-1.5}, {-2}, {2}, SolveBudget{300, 1});
  CHECK(feasible);
  CHECK_THAT(r[0], Catch::Matchers::WithinAbs(1.0, 1e-3));
}

TEST_CASE("active inequality constraint") {
  const Objective f = [](const VecD& v) { return v[0] * v[0]; };
  const ConstraintFn g = [](const VecD& v) { return VecD{1.0 - v[0]}; };  // u >= 1
  const auto [r, feasible] = solve_constrained(f, g, {1.8}, {-2}, {2}, SolveBudget{400, 2});
  CHECK(feasible);
  CHECK_THAT(r[0], Catch::Matchers::WithinAbs(1.0, 1e-3));
  CHECK(g(r)[0] <= 1e-8);
}

TEST_CASE("contradictory constraints signal infeasibility and return the start") {
  const Objective f = [](const VecD& v) { return v[0] * v[0]; };
  const ConstraintFn g = [](const VecD& v) { return VecD{v[0] + 1.0, 1.0 - v[0]}; };
  const VecD x0{0.25};
  const auto [r, feasible] = solve_constrained(f, g, x0, {-2}, {2}, SolveBudget{300, 2});
  CHECK_FALSE(feasible);
  CHECK(r[0] == 0.25);
}

TEST_CASE("never reports feasible when a true row is violated") {
  Rng rng(5150);
  for (int trial = 0; trial < 200; ++trial) {
    const double c0 = rng.uniform(-1, 1), c1 = rng.uniform(-1, 1), c2 = rng.uniform(-0.5, 0.5);
    const double t0 = rng.uniform(-0.8, 0.8);
    const Objective f = [c0](const VecD& v) { return (v[0] - c0) * (v[0] - c0) + v[1] * v[1]; };
    const ConstraintFn g = [c1, c2, t0](const VecD& v) {
      return VecD{std::sin(3 * v[0]) + c1 * v[1] - c2, v[0] * v[0] + v[1] * v[1] - 1.0,
                  t0 - v[0]};
    };
    const auto [r, feasible] =
        solve_constrained(f, g, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, {-1.5, -1.5}, {1.5, 1.5},
                          SolveBudget{120, 1});
    if (feasible)
      for (double row : g(r)) CHECK(row <= 1e-8);
  }
}

TEST_CASE("deterministic given identical inputs and seeds") {
  const Objective f = [](const VecD& v) {
    return std::cos(4 * v[0]) + v[0] * v[0] + (v[1] - 0.3) * (v[1] - 0.3);
  };
  const ConstraintFn g = [](const VecD& v) { return VecD{v[0] + v[1] - 1.0}; };
  Rng r1(42), r2(42);
  const auto a = solve_constrained(f, g, {0.1, 0.1}, {-2, -2}, {2, 2}, SolveBudget{250, 2}, &r1);
  const auto b = solve_constrained(f, g, {0.1, 0.1}, {-2, -2}, {2, 2}, SolveBudget{250, 2}, &r2);
  CHECK(a.second == b.second);
  CHECK(a.first == b.first);
}

TEST_CASE("budget zero is the disabled-solver sentinel") {
  const Objective f = [](const VecD& v) { return v[0] * v[0]; };
  const ConstraintFn g = [](const VecD&) { return VecD{-1.0}; };
  const auto [r, feasible] = solve_constrained(f, g, {0.7}, {-2}, {2}, SolveBudget{0, 0});
  CHECK_FALSE(feasible);
  CHECK(r[0] == 0.7);
}
