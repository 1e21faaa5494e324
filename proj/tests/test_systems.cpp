#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "calf/rng.hpp"
#include "calf/systems.hpp"

using namespace calf;

namespace {

// central-difference Jacobian of the cart->NI state transform
std::array<std::array<double, 3>, 3> transform_jacobian_fd(const CartState& x, double h = 1e-6) {
  std::array<std::array<double, 3>, 3> J{};
  for (int c = 0; c < 3; ++c) {
    CartState xp = x, xm = x;
    (c == 0 ? xp.x1 : c == 1 ? xp.x2 : xp.x3) += h;
    (c == 0 ? xm.x1 : c == 1 ? xm.x2 : xm.x3) -= h;
    const NIState zp = cart_to_ni(xp), zm = cart_to_ni(xm);
    J[0][c] = (zp.z1 - zm.z1) / (2 * h);
    J[1][c] = (zp.z2 - zm.z2) / (2 * h);
    J[2][c] = (zp.z3 - zm.z3) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("cart dynamics matches the stated vector field") {
  auto d = cart_dynamics(CartState{0, 0, 0}, CartAction{1, 0});
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 0.0);

  d = cart_dynamics(CartState{0.3, -0.2, 0.7}, CartAction{0, 1});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 1.0);

  d = cart_dynamics(CartState{0, 0, kPi / 3}, CartAction{2, 0});
  CHECK_THAT(d[0], Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(d[1], Catch::Matchers::WithinAbs(std::sqrt(3.0), 1e-15));
  CHECK(d[2] == 0.0);
}

TEST_CASE("NI dynamics") {
  auto d = ni_dynamics(NIState{0, 0, 0}, NIAction{1, 1});
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 1.0);
  CHECK(d[2] == 0.0);

  d = ni_dynamics(NIState{1, 0, 0}, NIAction{0, 1});
  CHECK(d[2] == 1.0);

  d = ni_dynamics(NIState{2, 3, -5}, NIAction{5, 7});
  CHECK(d[0] == 5.0);
  CHECK(d[1] == 7.0);
  CHECK(d[2] == 2.0 * 7.0 - 3.0 * 5.0);  // = -1
  CHECK(d[2] == -1.0);
}

TEST_CASE("transform fixes the shared equilibrium") {
  const NIState z = cart_to_ni(CartState{0, 0, 0});
  CHECK(z.z1 == 0.0);
  CHECK(z.z2 == 0.0);
  CHECK(z.z3 == 0.0);
  const CartState x = ni_to_cart(NIState{0, 0, 0});
  CHECK(x.x1 == 0.0);
  CHECK(x.x2 == 0.0);
  CHECK(x.x3 == 0.0);
}

TEST_CASE("transform round trip on random states") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const CartState x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    const CartState back = ni_to_cart(cart_to_ni(x));
    CHECK_THAT(back.x1, Catch::Matchers::WithinAbs(x.x1, 1e-12));
    CHECK_THAT(back.x2, Catch::Matchers::WithinAbs(x.x2, 1e-12));
    CHECK_THAT(back.x3, Catch::Matchers::WithinAbs(x.x3, 1e-12));
  }
}

TEST_CASE("chain rule: the transform conjugates the two vector fields") {
  Rng rng(23);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CartState x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    const CartAction u{rng.uniform(-1, 1), rng.uniform(-2, 2)};
    const auto J = transform_jacobian_fd(x);
    const auto fc = cart_dynamics(x, u);
    const auto fn = ni_dynamics(cart_to_ni(x), cart_action_to_ni(x, u));
    for (int r = 0; r < 3; ++r) {
      const double pushed = J[r][0] * fc[0] + J[r][1] * fc[1] + J[r][2] * fc[2];
      worst = std::max(worst, std::abs(pushed - fn[r]));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("action transform inverts") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const CartState x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    const CartAction u{rng.uniform(-1, 1), rng.uniform(-2, 2)};
    const CartAction back = ni_action_to_cart(x, cart_action_to_ni(x, u));
    CHECK_THAT(back.u1, Catch::Matchers::WithinAbs(u.u1, 1e-12));
    CHECK_THAT(back.u2, Catch::Matchers::WithinAbs(u.u2, 1e-12));
  }
}

TEST_CASE("running cost") {
  RunningCostSpec spec;
  spec.target = CartState{0, 0, 0};

  SECTION("zero at the target with zero action") {
    spec.H = h_preset(1);
    CHECK(running_cost(CartState{0, 0, 0}, CartAction{0, 0}, spec) == 0.0);
  }
  SECTION("H1 unit offset") {
    spec.H = h_preset(1);
    CHECK(running_cost(CartState{1, 0, 0}, CartAction{0, 0}, spec) == 10.0);
  }
  SECTION("H2 all-ones chi") {
    spec.H = h_preset(2);
    CHECK(running_cost(CartState{1, 1, 1}, CartAction{1, 1}, spec) == 32.0);
  }
  SECTION("positive whenever a weighted component is nonzero") {
    spec.H = h_preset(3);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const CartState x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double r = running_cost(x, CartAction{0, 0}, spec);
      if (x.x1 != 0 || x.x2 != 0 || x.x3 != 0) CHECK(r > 0.0);
    }
  }
  SECTION("heading difference is wrapped") {
    spec.H = h_preset(1);
    const double r1 = running_cost(CartState{0, 0, kPi - 0.1}, CartAction{0, 0}, spec);
    const double r2 = running_cost(CartState{0, 0, -kPi + 0.1}, CartAction{0, 0}, spec);
    CHECK_THAT(r1, Catch::Matchers::WithinAbs(r2, 1e-9));
  }
}

TEST_CASE("H presets match the experiment matrices") {
  CHECK(h_preset(1) == std::array<double, 5>{10, 10, 10, 0, 0});
  CHECK(h_preset(2) == std::array<double, 5>{10, 10, 10, 1, 1});
  CHECK(h_preset(3) == std::array<double, 5>{10, 10, 100, 0, 0});
  CHECK(h_preset(4) == std::array<double, 5>{10, 100, 10, 0, 0});
  CHECK(h_preset(5) == std::array<double, 5>{100, 10, 10, 0, 0});
  CHECK_THROWS_AS(h_preset(6), std::invalid_argument);
}

TEST_CASE("running cost spec validation") {
  RunningCostSpec spec;
  spec.H = {0, 0, 0, 1, 1};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.H = {10, 0, 0, -1, 0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("angle wrap lands in (-pi, pi]") {
  CHECK(wrap_angle(kPi) == kPi);
  CHECK(wrap_angle(-kPi) == kPi);
  CHECK_THAT(wrap_angle(3 * kPi), Catch::Matchers::WithinAbs(kPi, 1e-12));
  CHECK_THAT(wrap_angle(2.5 * kPi), Catch::Matchers::WithinAbs(0.5 * kPi, 1e-12));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(rng.uniform(-50, 50));
    CHECK(w > -kPi);
    CHECK(w <= kPi);
  }
}

TEST_CASE("error state is the relative pose in the target frame") {
  const CartState target{1, 2, kPi / 2};
  const CartState at_target = error_state(target, target);
  CHECK_THAT(composite_norm(at_target), Catch::Matchers::WithinAbs(0.0, 1e-15));

  // error dynamics equal cart dynamics in the error frame
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const CartState x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)};
    const CartAction u{rng.uniform(-0.2, 0.2), rng.uniform(-2, 2)};
    const double h = 1e-7;
    const auto d = cart_dynamics(x, u);
    const CartState x2{x.x1 + h * d[0], x.x2 + h * d[1], x.x3 + h * d[2]};
    const CartState e1 = error_state(x, target), e2 = error_state(x2, target);
    const auto de = cart_dynamics(e1, u);
    CHECK_THAT((e2.x1 - e1.x1) / h, Catch::Matchers::WithinAbs(de[0], 1e-5));
    CHECK_THAT((e2.x2 - e1.x2) / h, Catch::Matchers::WithinAbs(de[1], 1e-5));
    CHECK_THAT(wrap_angle(e2.x3 - e1.x3) / h, Catch::Matchers::WithinAbs(de[2], 1e-5));
  }
}

TEST_CASE("action saturation") {
  const ActionBounds b;
  const CartAction a = CartAction::saturated(1.0, -5.0, b);
  CHECK(a.u1 == b.v_max);
  CHECK(a.u2 == -b.omega_max);
}
