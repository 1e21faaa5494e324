#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "calf/harness.hpp"
#include "calf/plots.hpp"

using namespace calf;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig smoke_config(const std::string& label) {
  ExperimentConfig cfg;
  cfg.label = label;
  cfg.agent.kind = AgentKind::NominalOnly;
  cfg.targets = {CartState{0.6, 0, 0}};
  cfg.seeds = {0};
  cfg.sampling.horizon = 20.0;
  cfg.noise_kind = NoiseKind::None;
  cfg.noise.amplitude = 0.0;
  cfg.calibration_samples = 800;
  cfg.lipschitz_samples = 400;
  return cfg;
}

const char* kGoodConfig = R"(# comparison run
run.label = demo
agent.kind = calf_fallback
agent.replay = 8
cost.H = H2
targets = 0,1,1.5707963267948966
seeds = 0..3
sampling.delta = 0.05
sampling.horizon = 30
noise.kind = dcl
noise.amplitude = 0.05
solver.max_evals = 120
)";

}  // namespace

TEST_CASE("config parsing") {
  SECTION("well-formed file") {
    const ExperimentConfig cfg = parse_experiment_config(kGoodConfig);
    CHECK(cfg.label == "demo");
    CHECK(cfg.agent.kind == AgentKind::CalfFallback);
    CHECK(cfg.agent.replay_capacity == 8);
    CHECK(cfg.h_label == "H2");
    CHECK(cfg.seeds.size() == 4);
    CHECK(cfg.targets.size() == 1);
    CHECK_THAT(cfg.targets[0].x3, Catch::Matchers::WithinAbs(kPi / 2, 1e-9));
    CHECK(cfg.sampling.horizon == 30.0);
    CHECK(cfg.agent.budget.max_evals == 120);
  }
  SECTION("unknown keys are errors with line diagnostics") {
    try {
      parse_experiment_config("run.label = x\nagentt.kind = nominal\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(e.issues().size() == 1);
      CHECK(e.issues()[0].line == 2);
      CHECK(e.issues()[0].key == "agentt.kind");
    }
  }
  SECTION("bad values are reported per key") {
    try {
      parse_experiment_config("sampling.delta = soon\nnoise.kind = pink\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.issues().size() == 2);
    }
  }
  SECTION("ring8 preset") {
    const ExperimentConfig cfg = parse_experiment_config("targets = ring8\n");
    REQUIRE(cfg.targets.size() == 8);
    CHECK_THAT(cfg.targets[2].x3, Catch::Matchers::WithinAbs(kPi / 2, 1e-12));
  }
  SECTION("explicit H diagonal") {
    const ExperimentConfig cfg = parse_experiment_config("cost.H = 1,2,3,4,5\n");
    CHECK(cfg.H == std::array<double, 5>{1, 2, 3, 4, 5});
    CHECK(cfg.h_label == "custom");
  }
}

TEST_CASE("single nominal run produces a consistent record") {
  const auto out = std::filesystem::temp_directory_path() / "calf_test_smoke";
  std::filesystem::remove_all(out);
  ExperimentConfig cfg = smoke_config("smoke");
  RunOptions opts;
  opts.out_dir = out.string();
  opts.parallel = 1;
  const RunSummary summary = run_experiment(cfg, opts);

  REQUIRE(summary.runs.size() == 1);
  const RunRecord& rec = summary.runs[0];
  CHECK(rec.total_cost > 0.0);
  CHECK(rec.reach_time >= 0.0);
  CHECK(rec.reach_time < 20.0);
  CHECK_FALSE(rec.escaped);
  CHECK(std::filesystem::exists(out / rec.csv));
  CHECK(std::filesystem::exists(out / "smoke_summary.json"));
}

TEST_CASE("identical config and seeds give byte-identical outputs") {
  ExperimentConfig cfg = parse_experiment_config(kGoodConfig);
  cfg.seeds = {0, 1};
  cfg.calibration_samples = 800;
  cfg.lipschitz_samples = 400;

  const auto out_a = std::filesystem::temp_directory_path() / "calf_test_det_a";
  const auto out_b = std::filesystem::temp_directory_path() / "calf_test_det_b";
  std::filesystem::remove_all(out_a);
  std::filesystem::remove_all(out_b);

  RunOptions opts_a;
  opts_a.out_dir = out_a.string();
  opts_a.parallel = 2;
  RunOptions opts_b;
  opts_b.out_dir = out_b.string();
  opts_b.parallel = 1;  // thread count must not affect the bytes
  run_experiment(cfg, opts_a);
  run_experiment(cfg, opts_b);

  CHECK(slurp(out_a / "demo_summary.json") == slurp(out_b / "demo_summary.json"));
  CHECK(slurp(out_a / "demo_t0_s0.csv") == slurp(out_b / "demo_t0_s0.csv"));
  CHECK(slurp(out_a / "demo_t0_s1.csv") == slurp(out_b / "demo_t0_s1.csv"));
}

TEST_CASE("summary statistics are recomputable from the per-run CSVs") {
  const auto out = std::filesystem::temp_directory_path() / "calf_test_stats";
  std::filesystem::remove_all(out);
  ExperimentConfig cfg = smoke_config("stats");
  cfg.targets = {CartState{0.6, 0, 0}, CartState{0, 0.6, kPi / 2}};
  cfg.seeds = {0, 1, 2};
  cfg.agent.kind = AgentKind::NominalOnly;
  cfg.noise_kind = NoiseKind::DCL;
  cfg.noise.amplitude = 0.03;
  RunOptions opts;
  opts.out_dir = out.string();
  const RunSummary summary = run_experiment(cfg, opts);

  REQUIRE(summary.runs.size() == cfg.targets.size() * cfg.seeds.size());

  std::vector<double> recomputed;
  for (const auto& rec : summary.runs) {
    const CsvTable table = read_csv((out / rec.csv).string());
    Trajectory traj;
    const int ct = table.column("t"), cr = table.column("r");
    for (const auto& row : table.rows) {
      TrajectoryRow tr;
      tr.t = row[ct];
      tr.r = row[cr];
      traj.rows.push_back(tr);
    }
    recomputed.push_back(accumulated_cost(traj));
  }
  REQUIRE(recomputed.size() == summary.runs.size());
  for (std::size_t i = 0; i < recomputed.size(); ++i)
    CHECK(recomputed[i] == summary.runs[i].total_cost);

  const Stats again = compute_stats(recomputed);
  CHECK(again.q1 == summary.cost_stats.q1);
  CHECK(again.median == summary.cost_stats.median);
  CHECK(again.q3 == summary.cost_stats.q3);
  CHECK(again.whisker_lo == summary.cost_stats.whisker_lo);
  CHECK(again.whisker_hi == summary.cost_stats.whisker_hi);
  // whisker definition
  CHECK(again.whisker_lo == again.q1 - 1.5 * (again.q3 - again.q1));
  CHECK(again.whisker_hi == again.q3 + 1.5 * (again.q3 - again.q1));
}

TEST_CASE("re-scoring identical trajectories under H2 dominates H1") {
  const auto out = std::filesystem::temp_directory_path() / "calf_test_rescore";
  std::filesystem::remove_all(out);
  ExperimentConfig cfg = smoke_config("rescore");
  cfg.targets = {CartState{0, 0.8, kPi / 2}};
  RunOptions opts;
  opts.out_dir = out.string();
  const RunSummary summary = run_experiment(cfg, opts);
  const CsvTable table = read_csv((out / summary.runs[0].csv).string());

  RunningCostSpec h1, h2;
  h1.H = h_preset(1);
  h2.H = h_preset(2);
  h1.target = h2.target = cfg.targets[0];
  const int cx1 = table.column("x1"), cx2 = table.column("x2"), cx3 = table.column("x3");
  const int cu1 = table.column("u1"), cu2 = table.column("u2"), ct = table.column("t");
  double total1 = 0.0, total2 = 0.0;
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const CartState x{row[cx1], row[cx2], row[cx3]};
    const CartAction u{row[cu1], row[cu2]};
    const double dt = table.rows[i + 1][ct] - row[ct];
    total1 += running_cost(x, u, h1) * dt;
    total2 += running_cost(x, u, h2) * dt;
  }
  CHECK(total2 >= total1);
}

TEST_CASE("comparison requires a shared task and emits rows") {
  const auto out = std::filesystem::temp_directory_path() / "calf_test_compare";
  std::filesystem::remove_all(out);
  ExperimentConfig a = smoke_config("cmp_nominal");
  ExperimentConfig b = smoke_config("cmp_nominal_2");
  a.seeds = b.seeds = {0, 1};
  RunOptions opts;
  opts.out_dir = out.string();
  const auto rows = compare_agents({a, b}, opts);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].cost.median == rows[1].cost.median);  // identical agents, identical rows
  CHECK(std::filesystem::exists(out / "comparison.json"));
  const std::string table = comparison_table(rows);
  CHECK(table.find("nominal") != std::string::npos);

  ExperimentConfig c = smoke_config("cmp_bad");
  c.seeds = {5};
  CHECK_THROWS_AS(compare_agents({a, c}, opts), std::invalid_argument);
  CHECK_THROWS_AS(compare_agents({a}, opts), std::invalid_argument);
}

TEST_CASE("plot emission") {
  const auto out = std::filesystem::temp_directory_path() / "calf_test_plots";
  std::filesystem::remove_all(out);
  ExperimentConfig cfg = smoke_config("plotme");
  cfg.seeds = {0, 1, 2, 3};
  RunOptions opts;
  opts.out_dir = out.string();
  run_experiment(cfg, opts);

  SECTION("files appear for a real summary") {
    nlohmann::json summary;
    std::ifstream in(out / "plotme_summary.json");
    in >> summary;
    const auto written = emit_plots(summary, out, out / "plots");
    REQUIRE(written.size() == 3);
    for (const auto& w : written) {
      CHECK(std::filesystem::exists(w));
      CHECK(std::filesystem::file_size(w) > 200);
    }
  }
  SECTION("an empty summary yields no files and a warning") {
    nlohmann::json empty;
    empty["runs"] = nlohmann::json::array();
    const auto written = emit_plots(empty, out, out / "plots_empty");
    CHECK(written.empty());
  }
}
