// Command-line front end: run experiment batches, compare agents on a shared
// task, audit runs against the stability/feasibility checks, and render plots.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "calf/harness.hpp"
#include "calf/plots.hpp"
#include "calf/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAuditFailure = 3;

struct CommonOpts {
  std::string out_dir = "out";
  std::uint64_t seed_base = 0;
  int parallel = 0;
};

calf::RunOptions make_run_options(const CommonOpts& common) {
  calf::RunOptions opts;
  opts.out_dir = common.out_dir;
  opts.seed_base = common.seed_base;
  opts.parallel = common.parallel;
  return opts;
}

int cmd_simulate(const std::string& config_path, const CommonOpts& common) {
  const calf::ExperimentConfig cfg = calf::load_experiment_config(config_path);
  const calf::RunSummary summary = calf::run_experiment(cfg, make_run_options(common));
  std::cout << "label=" << cfg.label << " agent=" << calf::agent_kind_name(cfg.agent.kind)
            << " runs=" << summary.runs.size() << "\n"
            << "  nu_bar=" << summary.nu_bar << " epsilon=" << summary.epsilon << "\n"
            << "  cost median=" << summary.cost_stats.median << " q1=" << summary.cost_stats.q1
            << " q3=" << summary.cost_stats.q3 << " mean=" << summary.cost_stats.mean << "\n"
            << "  summary: " << (std::filesystem::path(common.out_dir) / (cfg.label + "_summary.json")).string()
            << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths, const CommonOpts& common) {
  std::vector<calf::ExperimentConfig> cfgs;
  for (const auto& p : config_paths) cfgs.push_back(calf::load_experiment_config(p));
  const auto rows = calf::compare_agents(cfgs, make_run_options(common));
  std::cout << calf::comparison_table(rows);
  std::cout << "comparison: " << (std::filesystem::path(common.out_dir) / "comparison.json").string()
            << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& config_path, const CommonOpts& common) {
  const calf::ExperimentConfig cfg = calf::load_experiment_config(config_path);
  const calf::RunPrep prep = calf::prepare_run(cfg);

  nlohmann::json audits = nlohmann::json::array();
  bool all_pass = true;

  calf::RunOptions opts = make_run_options(common);
  opts.on_run = [&](const calf::RunArtifacts& art) {
    const calf::CartState target = cfg.targets[static_cast<std::size_t>(art.target_index)];
    nlohmann::json entry;
    entry["target"] = art.target_index;
    entry["seed"] = art.seed;

    const auto add_report = [&](const char* name, const calf::AuditReport& report) {
      nlohmann::json checks = nlohmann::json::array();
      for (const auto& c : report.checks) {
        checks.push_back(
            {{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"samples", c.samples}});
        if (!c.pass) all_pass = false;
      }
      entry[name] = checks;
    };

    add_report("reaching", calf::audit_reaching(art.traj, target, cfg.reach_radius,
                                                cfg.sampling.horizon));
    if (cfg.agent.kind == calf::AgentKind::CalfSarsa ||
        cfg.agent.kind == calf::AgentKind::CalfActorCritic ||
        cfg.agent.kind == calf::AgentKind::CalfFallback) {
      add_report("constraints", calf::audit_constraints(art.decisions, cfg.agent.kind, prep.model,
                                                        prep.params, cfg.agent.core_ball_radius));
      if (cfg.agent.kind == calf::AgentKind::CalfFallback)
        add_report("decay", calf::audit_decay(art.decisions, prep.params, prep.lipschitz,
                                              cfg.agent.core_ball_radius));
      if (cfg.noise.amplitude == 0.0)
        add_report("feasibility",
                   calf::audit_feasibility(art.decisions, prep.model, *prep.lyap, cfg.bounds,
                                           prep.params, cfg.agent.core_ball_radius,
                                           cfg.agent.nominal_grid));
    }
    audits.push_back(entry);
  };

  calf::run_experiment(cfg, opts);

  nlohmann::json report;
  report["label"] = cfg.label;
  report["pass"] = all_pass;
  report["runs"] = audits;
  const auto path = std::filesystem::path(common.out_dir) / (cfg.label + "_audit.json");
  std::ofstream f(path, std::ios::binary);
  f << report.dump(2) << "\n";

  std::cout << (all_pass ? "PASS" : "FAIL") << " audit report: " << path.string() << "\n";
  return all_pass ? kExitOk : kExitAuditFailure;
}

int cmd_plot(const std::string& summary_path, const CommonOpts& common) {
  std::ifstream in(summary_path);
  if (!in) {
    std::cerr << "cannot open summary: " << summary_path << "\n";
    return kExitConfig;
  }
  nlohmann::json summary;
  in >> summary;
  const auto written = calf::emit_plots(summary, std::filesystem::path(summary_path).parent_path(),
                                        common.out_dir);
  for (const auto& w : written) std::cout << "wrote " << w << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sample-and-hold simulation framework for constraint-stabilized online RL agents"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--out-dir", common.out_dir, "output directory");
  app.add_option("--seed-base", common.seed_base, "offset added to every configured seed");
  app.add_option("--parallel", common.parallel, "worker threads (0 = hardware)");

  std::string config_path;
  std::vector<std::string> config_paths;
  std::string summary_path;

  auto* simulate = app.add_subcommand("simulate", "run one experiment config");
  simulate->add_option("config", config_path, "config file")->required();

  auto* compare = app.add_subcommand("compare", "run several configs on a shared task");
  compare->add_option("configs", config_paths, "config files")->required()->expected(-2);

  auto* verify = app.add_subcommand("verify", "run a config and audit the logs");
  verify->add_option("config", config_path, "config file")->required();

  auto* plot = app.add_subcommand("plot", "render plots from a summary json");
  plot->add_option("summary", summary_path, "summary json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, common);
    if (compare->parsed()) return cmd_compare(config_paths, common);
    if (verify->parsed()) return cmd_verify(config_path, common);
    if (plot->parsed()) return cmd_plot(summary_path, common);
  } catch (const calf::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
