#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "calf/noise.hpp"
#include "calf/rng.hpp"

using namespace calf;

TEST_CASE("degenerate model stays at zero") {
  NoiseProcess p = NoiseProcess::make(NoiseKind::None, NoiseParams{1, 0, 1, 0.3}, 3);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) p.advance(1e-2, rng);
  for (double z : p.state()) CHECK(z == 0.0);
}

TEST_CASE("sine-Wiener output stays within the unit bound") {
  NoiseParams params;
  params.tau_a = 0.7;
  params.amplitude = 1.0;
  NoiseProcess p = NoiseProcess::make(NoiseKind::SineWiener, params, 2);
  Rng rng(42);
  for (int i = 0; i < 20000; ++i) {
    p.advance(1e-3, rng);
    for (double z : p.state()) CHECK(std::abs(z) <= 1.0);
  }
}

TEST_CASE("DCL stays strictly inside (-1, 1)") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    NoiseProcess p = NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, 0, 1, 1}, 1);
    Rng rng(seed);
    double max_abs = 0.0;
    for (int i = 0; i < 10000; ++i) {
      p.advance(1e-3, rng);
      max_abs = std::max(max_abs, std::abs(p.state()[0]));
    }
    CHECK(max_abs < 1.0);
  }
}

TEST_CASE("DCL long-run sample mean reverts to zero") {
  NoiseProcess p = NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, 0, 1, 1}, 1);
  Rng rng(2024);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    p.advance(1e-2, rng);  // 10^4 s of simulated time against a 1 s correlation time
    sum += p.state()[0];
  }
  CHECK(std::abs(sum / n) < 0.05);
}

TEST_CASE("current value scales by the amplitude") {
  SECTION("zero amplitude gives the zero vector") {
    NoiseProcess p = NoiseProcess::make(NoiseKind::TSB, NoiseParams{1, 0, 1, 0.0}, 3);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) p.advance(1e-3, rng);
    for (double v : current_value(p)) CHECK(v == 0.0);
  }
  SECTION("amplitude acts linearly for identical seeds") {
    NoiseParams a{1, 0, 1, 0.2}, b{1, 0, 1, 0.6};
    NoiseProcess pa = NoiseProcess::make(NoiseKind::DCL, a, 2);
    NoiseProcess pb = NoiseProcess::make(NoiseKind::DCL, b, 2);
    Rng ra(9), rb(9);
    for (int i = 0; i < 500; ++i) {
      pa.advance(1e-3, ra);
      pb.advance(1e-3, rb);
    }
    const auto va = current_value(pa), vb = current_value(pb);
    for (int i = 0; i < 2; ++i) CHECK_THAT(vb[i], Catch::Matchers::WithinAbs(3.0 * va[i], 1e-12));
  }
  SECTION("sup norm stays within the amplitude") {
    NoiseProcess p = NoiseProcess::make(NoiseKind::KS, NoiseParams{1, 0.5, 1, 0.2}, 3);
    Rng rng(77);
    for (int i = 0; i < 5000; ++i) {
      p.advance(1e-3, rng);
      for (double v : current_value(p)) CHECK(std::abs(v) <= 0.2);
    }
  }
}

TEST_CASE("parameter invariants are enforced at construction") {
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::DCL, NoiseParams{0, 0, 1, 0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, -1, 1, 0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::TSB, NoiseParams{1, 1, 1, 0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::KS, NoiseParams{1, -0.1, 1, 0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::SineWiener, NoiseParams{1, 0, 0, 0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, 0, 1, -0.1}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, 0, 1, 0}, 0),
                  std::invalid_argument);
}

TEST_CASE("KS couples b3 to b2") {
  const NoiseProcess p = NoiseProcess::make(NoiseKind::KS, NoiseParams{2, 0.5, 1, 0}, 1);
  CHECK_THAT(p.ks_b3(), Catch::Matchers::WithinAbs((2 * 0.5 + 1) / (0.5 + 1), 1e-15));
}

TEST_CASE("step_noise is value-semantic") {
  const NoiseProcess p = NoiseProcess::make(NoiseKind::DCL, NoiseParams{1, 0, 1, 1}, 1);
  Rng rng(3);
  const NoiseProcess q = step_noise(p, 1e-3, rng);
  CHECK(p.state()[0] == 0.0);
  CHECK(q.state()[0] != 0.0);
}
