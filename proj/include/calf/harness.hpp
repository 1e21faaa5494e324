#pragma once

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "calf/agents.hpp"
#include "calf/critic.hpp"
#include "calf/lyapunov.hpp"
#include "calf/noise.hpp"
#include "calf/sim.hpp"
#include "calf/stats.hpp"
#include "calf/systems.hpp"
#include "calf/verify.hpp"

// Experiment runner: multi-seed batches over target poses and H matrices,
// quartile statistics, CSV/JSON logs. Config files are flat UTF-8 key=value
// text with dotted keys; unknown keys are errors.

namespace calf {

struct ConfigIssue {
  int line = 0;
  std::string key;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(format(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string format(const std::vector<ConfigIssue>& issues) {
    std::ostringstream os;
    os << "config error:";
    for (const auto& i : issues)
      os << "\n  line " << i.line << " [" << i.key << "]: " << i.message;
    return os.str();
  }
  std::vector<ConfigIssue> issues_;
};

struct ExperimentConfig {
  std::string label = "run";
  AgentConfig agent{};
  std::string h_label = "H2";
  std::array<double, 5> H = h_preset(2);
  std::vector<CartState> targets;
  CartState start{0.0, 0.0, 0.0};
  std::vector<std::uint64_t> seeds{0};
  SamplingConfig sampling{};
  NoiseKind noise_kind = NoiseKind::DCL;
  NoiseParams noise{1.0, 0.0, 1.0, 0.05};
  std::string nu_bar_mode = "auto";
  double nu_bar_value = 0.0;
  double nu_bar_cap = 0.05;
  std::string epsilon_mode = "auto";
  double epsilon_value = 0.0;
  double constraint_tol = 1e-8;
  LyapunovSpec lyap_spec{};
  ActionBounds bounds{};
  double calibration_radius = 4.0;
  int calibration_samples = 2000;
  int lipschitz_samples = 1500;
  double reach_radius = 0.1;

  static std::vector<CartState> ring8() {
    std::vector<CartState> t;
    for (int i = 0; i < 8; ++i) {
      const double phi = 2.0 * kPi * i / 8.0;
      t.push_back(CartState{std::cos(phi), std::sin(phi), wrap_angle(phi)});
    }
    return t;
  }

  void validate_resolved() const {
    if (targets.empty()) throw std::invalid_argument("ExperimentConfig: targets must be non-empty");
    if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: seeds must be non-empty");
    sampling.validate();
    agent.validate();
  }
};

namespace detail_cfg {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KV {
  int line;
  std::string key;
  std::string value;
};

inline std::vector<KV> tokenize(const std::string& text, std::vector<ConfigIssue>& issues) {
  std::vector<KV> kvs;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({line_no, line, "expected key = value"});
      continue;
    }
    kvs.push_back({line_no, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  return kvs;
}

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_int(const std::string& s, int& out) {
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail_cfg

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  using namespace detail_cfg;
  std::vector<ConfigIssue> issues;
  ExperimentConfig cfg;

  const auto kvs = tokenize(text, issues);
  for (const auto& kv : kvs) {
    const auto bad = [&](const std::string& msg) { issues.push_back({kv.line, kv.key, msg}); };
    const auto as_double = [&](double& out) {
      if (!parse_double(kv.value, out)) bad("expected a number, got '" + kv.value + "'");
    };
    const auto as_int = [&](int& out) {
      if (!parse_int(kv.value, out)) bad("expected an integer, got '" + kv.value + "'");
    };

    if (kv.key == "run.label") cfg.label = kv.value;
    else if (kv.key == "agent.kind") {
      if (kv.value == "nominal") cfg.agent.kind = AgentKind::NominalOnly;
      else if (kv.value == "calf_sarsa") cfg.agent.kind = AgentKind::CalfSarsa;
      else if (kv.value == "calf_ac") cfg.agent.kind = AgentKind::CalfActorCritic;
      else if (kv.value == "calf_fallback") cfg.agent.kind = AgentKind::CalfFallback;
      else if (kv.value == "unconstrained_ac") cfg.agent.kind = AgentKind::UnconstrainedAC;
      else bad("unknown agent kind '" + kv.value + "'");
    } else if (kv.key == "agent.n_mc") as_int(cfg.agent.n_mc);
    else if (kv.key == "agent.replay") as_int(cfg.agent.replay_capacity);
    else if (kv.key == "agent.beta") as_double(cfg.agent.beta);
    else if (kv.key == "agent.gamma") as_double(cfg.agent.gamma);
    else if (kv.key == "agent.cost_scale") as_double(cfg.agent.cost_scale);
    else if (kv.key == "agent.zeta") as_double(cfg.agent.zeta);
    else if (kv.key == "cost.H") {
      if (kv.value.size() == 2 && kv.value[0] == 'H' && kv.value[1] >= '1' && kv.value[1] <= '5') {
        cfg.H = h_preset(kv.value[1] - '0');
        cfg.h_label = kv.value;
      } else {
        const auto parts = split(kv.value, ',');
        if (parts.size() != 5) {
          bad("expected H1..H5 or five comma-separated diagonal entries");
        } else {
          bool ok = true;
          for (int i = 0; i < 5; ++i) ok = ok && parse_double(parts[i], cfg.H[i]);
          if (!ok) bad("bad diagonal entry in '" + kv.value + "'");
          cfg.h_label = "custom";
        }
      }
    } else if (kv.key == "targets") {
      if (kv.value == "ring8") {
        cfg.targets = ExperimentConfig::ring8();
      } else {
        cfg.targets.clear();
        for (const auto& pose : split(kv.value, ';')) {
          const auto c = split(pose, ',');
          CartState t;
          if (c.size() != 3 || !parse_double(c[0], t.x1) || !parse_double(c[1], t.x2) ||
              !parse_double(c[2], t.x3)) {
            bad("expected 'x,y,theta' pose, got '" + pose + "'");
            continue;
          }
          cfg.targets.push_back(t);
        }
      }
    } else if (kv.key == "start") {
      const auto c = split(kv.value, ',');
      if (c.size() != 3 || !parse_double(c[0], cfg.start.x1) || !parse_double(c[1], cfg.start.x2) ||
          !parse_double(c[2], cfg.start.x3))
        bad("expected 'x,y,theta' pose");
    } else if (kv.key == "seeds") {
      cfg.seeds.clear();
      const auto dots = kv.value.find("..");
      if (dots != std::string::npos) {
        int a = 0, b = 0;
        if (!parse_int(kv.value.substr(0, dots), a) || !parse_int(kv.value.substr(dots + 2), b) ||
            b < a)
          bad("expected 'first..last' seed range");
        else
          for (int s = a; s <= b; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
      } else {
        for (const auto& s : split(kv.value, ',')) {
          int v = 0;
          if (!parse_int(s, v))
            bad("bad seed '" + s + "'");
          else
            cfg.seeds.push_back(static_cast<std::uint64_t>(v));
        }
      }
    } else if (kv.key == "sampling.delta") as_double(cfg.sampling.delta);
    else if (kv.key == "sampling.substeps") as_int(cfg.sampling.substeps);
    else if (kv.key == "sampling.horizon") as_double(cfg.sampling.horizon);
    else if (kv.key == "sampling.escape_bound") as_double(cfg.sampling.escape_bound);
    else if (kv.key == "noise.kind") {
      if (kv.value == "none") cfg.noise_kind = NoiseKind::None;
      else if (kv.value == "sine_wiener") cfg.noise_kind = NoiseKind::SineWiener;
      else if (kv.value == "dcl") cfg.noise_kind = NoiseKind::DCL;
      else if (kv.value == "tsb") cfg.noise_kind = NoiseKind::TSB;
      else if (kv.value == "ks") cfg.noise_kind = NoiseKind::KS;
      else bad("unknown noise kind '" + kv.value + "'");
    } else if (kv.key == "noise.b1") as_double(cfg.noise.b1);
    else if (kv.key == "noise.b2") as_double(cfg.noise.b2);
    else if (kv.key == "noise.tau_a") as_double(cfg.noise.tau_a);
    else if (kv.key == "noise.amplitude") as_double(cfg.noise.amplitude);
    else if (kv.key == "constraint.nu_bar") {
      if (kv.value == "auto") cfg.nu_bar_mode = "auto";
      else if (parse_double(kv.value, cfg.nu_bar_value)) cfg.nu_bar_mode = "fixed";
      else bad("expected 'auto' or a number");
    } else if (kv.key == "constraint.nu_bar_cap") as_double(cfg.nu_bar_cap);
    else if (kv.key == "constraint.epsilon") {
      if (kv.value == "auto") cfg.epsilon_mode = "auto";
      else if (parse_double(kv.value, cfg.epsilon_value)) cfg.epsilon_mode = "fixed";
      else bad("expected 'auto' or a number");
    } else if (kv.key == "constraint.core_ball_radius") as_double(cfg.agent.core_ball_radius);
    else if (kv.key == "constraint.tol") as_double(cfg.constraint_tol);
    else if (kv.key == "solver.max_evals") as_int(cfg.agent.budget.max_evals);
    else if (kv.key == "solver.restarts") as_int(cfg.agent.budget.restarts);
    else if (kv.key == "lyapunov.grid_points") as_int(cfg.lyap_spec.grid_points);
    else if (kv.key == "lyapunov.zeta_radius") as_double(cfg.lyap_spec.zeta_search_radius);
    else if (kv.key == "lyapunov.denominator_floor") as_double(cfg.lyap_spec.denominator_floor);
    else if (kv.key == "bounds.v_max") as_double(cfg.bounds.v_max);
    else if (kv.key == "bounds.omega_max") as_double(cfg.bounds.omega_max);
    else if (kv.key == "nominal.grid") as_int(cfg.agent.nominal_grid);
    else if (kv.key == "calibration.radius") as_double(cfg.calibration_radius);
    else if (kv.key == "calibration.samples") as_int(cfg.calibration_samples);
    else if (kv.key == "lipschitz.samples") as_int(cfg.lipschitz_samples);
    else if (kv.key == "verify.reach_radius") as_double(cfg.reach_radius);
    else issues.push_back({kv.line, kv.key, "unknown key"});
  }

  if (cfg.targets.empty()) cfg.targets = ExperimentConfig::ring8();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  cfg.agent.delta = cfg.sampling.delta;
  cfg.agent.substeps = cfg.sampling.substeps;
  cfg.agent.budget.constraint_tol = cfg.constraint_tol;
  cfg.validate_resolved();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{0, path, "cannot open config file"}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

// ---------------------------------------------------------------------------
// run products

struct RunRecord {
  int target_index = 0;
  std::uint64_t seed = 0;
  double total_cost = 0.0;
  double reach_time = -1.0;            // first entry into the reach ball, -1 if never
  double max_norm_after_reach = 0.0;
  double max_prediction_deviation = 0.0;  // over delta steps, |x_{k+1} - Lambda_u(x_k)|
  double fallback_fraction = 0.0;
  long accepted_updates = 0;
  long fallback_invocations = 0;
  long constraint_violations = 0;
  bool escaped = false;
  std::string csv;  // relative to the out dir
};

struct RunArtifacts {
  int target_index = 0;
  std::uint64_t seed = 0;
  Trajectory traj;
  std::vector<DecisionRecord> decisions;
  RunRecord rec;
};

struct RunPrep {
  std::unique_ptr<LyapunovFn> lyap;
  CriticModel model;
  LipschitzEstimates lipschitz;
  ConstraintParams params;
};

struct RunSummary {
  ExperimentConfig cfg;
  double nu_bar = 0.0;
  double epsilon = 0.0;
  LipschitzEstimates lipschitz;
  KappaFunction alpha_low, alpha_up;
  std::vector<RunRecord> runs;
  Stats cost_stats;
};

inline RunPrep prepare_run(const ExperimentConfig& cfg) {
  RunPrep prep;
  prep.lyap = std::make_unique<LyapunovFn>(cfg.lyap_spec);

  // log-radius-stratified calibration so the envelope is tight near the core ball too
  Rng rng(0xCA11B5EEDULL);
  std::vector<std::pair<double, double>> samples;
  samples.reserve(static_cast<std::size_t>(cfg.calibration_samples));
  const double log_lo = std::log(0.01), log_hi = std::log(cfg.calibration_radius);
  for (int i = 0; i < cfg.calibration_samples; ++i) {
    const double r = std::exp(rng.uniform(log_lo, log_hi));
    const CartState e = sample_error_state_at(rng, r);
    samples.emplace_back(composite_norm(e), prep.lyap->cart(e));
  }
  const auto [lo, up] = sandwich_bounds(samples);

  prep.model.lyap = prep.lyap.get();
  prep.model.alpha_low = lo;
  prep.model.alpha_up = up;

  const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  prep.lipschitz = estimate_lipschitz(dyn, cfg.bounds, &prep.model, cfg.calibration_radius,
                                      cfg.lipschitz_samples, 0x11F5C417ULL, cfg.noise.amplitude, 3);

  double nu_bar = cfg.nu_bar_value;
  if (cfg.nu_bar_mode == "auto") {
    nu_bar = 4.0 * prep.lipschitz.lip_J * prep.lipschitz.sigma_max * prep.lipschitz.lip_Z;
    nu_bar = std::clamp(nu_bar, 1e-3, std::max(cfg.nu_bar_cap, 1e-3));
  }
  double epsilon = cfg.epsilon_mode == "auto" ? (2.0 / 3.0) * nu_bar : cfg.epsilon_value;
  prep.params = ConstraintParams{epsilon, nu_bar, cfg.sampling.delta, cfg.constraint_tol};
  prep.params.validate();
  return prep;
}

// ---------------------------------------------------------------------------
// CSV

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,x1,x2,x3,u1,u2,r,J_hat,L,c1,c2,c3,c4a,c4b,constraint_ok,fallback\n";
  out.reserve(out.size() + traj.rows.size() * 140);
  for (const auto& row : traj.rows) {
    append_double(out, row.t);
    out.push_back(',');
    append_double(out, row.x.x1);
    out.push_back(',');
    append_double(out, row.x.x2);
    out.push_back(',');
    append_double(out, row.x.x3);
    out.push_back(',');
    append_double(out, row.u.u1);
    out.push_back(',');
    append_double(out, row.u.u2);
    out.push_back(',');
    append_double(out, row.r);
    out.push_back(',');
    append_double(out, row.j_hat);
    out.push_back(',');
    append_double(out, row.lyap);
    out.push_back(',');
    for (int i = 0; i < 5; ++i) {
      append_double(out, row.c[i]);
      out.push_back(',');
    }
    out.push_back(row.constraint_ok ? '1' : '0');
    out.push_back(',');
    out.push_back(row.fallback ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("csv: no column named " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  for (const auto& h : detail_cfg::split(line, ',')) table.header.push_back(h);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      row.push_back(v);
      p = res.ptr;
      if (p < end && *p == ',') ++p;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// experiment driver

struct RunOptions {
  std::string out_dir = "out";
  std::uint64_t seed_base = 0;
  int parallel = 0;  // 0 = hardware concurrency
  bool write_csv = true;
  std::function<void(const RunArtifacts&)> on_run;  // called under a lock, any thread
};

inline RunArtifacts execute_single_run(const ExperimentConfig& cfg, const RunPrep& prep,
                                       int target_index, std::uint64_t seed) {
  RunningCostSpec cost;
  cost.H = cfg.H;
  cost.target = cfg.targets[static_cast<std::size_t>(target_index)];
  cost.validate();

  const std::uint64_t run_seed = derive_seed(seed, 0x52554EULL, static_cast<std::uint64_t>(target_index));
  CalfAgent agent(cfg.agent, cost, cfg.bounds, prep.lyap.get(), prep.model, prep.params,
                  cfg.noise_kind, cfg.noise, run_seed);

  const NoiseProcess noise = NoiseProcess::make(cfg.noise_kind, cfg.noise, 3);
  const Dynamics dyn = [](const CartState& s, const CartAction& a) { return cart_dynamics(s, a); };
  const CostRate cost_fn = [&cost](const CartState& x, const CartAction& u) {
    return running_cost(x, u, cost);
  };
  const StepPolicy policy = [&agent](int k, const CartState& x) { return agent.step(k, x); };

  RunArtifacts art;
  art.target_index = target_index;
  art.seed = seed;
  art.traj = integrate_sample_hold(cfg.start, policy, dyn, noise, cfg.sampling, cost_fn,
                                   derive_seed(run_seed, 0x4E4F49ULL));
  art.decisions = agent.records();

  // merge per-decision values onto the fine rows of the governing delta block
  const int sub = cfg.sampling.substeps;
  for (std::size_t i = 0; i < art.traj.rows.size(); ++i) {
    const std::size_t k = std::min(i / static_cast<std::size_t>(sub), art.decisions.size() - 1);
    const auto& d = art.decisions[k];
    auto& row = art.traj.rows[i];
    row.j_hat = d.j_hat;
    row.lyap = d.lyap;
    row.c = d.g;
    row.constraint_ok = d.violated ? 0 : 1;
    row.fallback = d.fallback ? 1 : 0;
  }

  RunRecord rec;
  rec.target_index = target_index;
  rec.seed = seed;
  rec.total_cost = accumulated_cost(art.traj);
  rec.escaped = art.traj.status == RunStatus::Escaped;
  const auto& counters = agent.state().counters;
  rec.accepted_updates = counters.accepted_updates;
  rec.fallback_invocations = counters.fallback_invocations;
  rec.constraint_violations = counters.constraint_violations;
  rec.fallback_fraction =
      static_cast<double>(counters.fallback_invocations) / cfg.sampling.major_steps();

  for (const auto& row : art.traj.rows) {
    const double n = composite_norm(error_state(row.x, cost.target));
    if (rec.reach_time < 0.0) {
      if (n <= cfg.reach_radius) rec.reach_time = row.t;
    } else {
      rec.max_norm_after_reach = std::max(rec.max_norm_after_reach, n);
    }
  }
  for (std::size_t k = 0; k + 1 < art.decisions.size(); ++k) {
    const CartState& xk = art.decisions[k].world;
    const CartState pred = euler_predict(xk, art.decisions[k].u, cfg.sampling.delta, dyn);
    rec.max_prediction_deviation =
        std::max(rec.max_prediction_deviation, state_distance(art.decisions[k + 1].world, pred));
  }

  art.rec = rec;
  return art;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["label"] = s.cfg.label;
  j["agent"] = agent_kind_name(s.cfg.agent.kind);
  j["h"] = s.cfg.h_label;
  j["h_diag"] = s.cfg.H;
  j["delta"] = s.cfg.sampling.delta;
  j["substeps"] = s.cfg.sampling.substeps;
  j["horizon"] = s.cfg.sampling.horizon;
  j["noise"] = {{"kind", noise_kind_name(s.cfg.noise_kind)},
                {"b1", s.cfg.noise.b1},
                {"b2", s.cfg.noise.b2},
                {"tau_a", s.cfg.noise.tau_a},
                {"amplitude", s.cfg.noise.amplitude}};
  j["nu_bar"] = s.nu_bar;
  j["epsilon"] = s.epsilon;
  j["core_ball_radius"] = s.cfg.agent.core_ball_radius;
  j["reach_radius"] = s.cfg.reach_radius;
  j["lipschitz"] = {{"f_bar", s.lipschitz.f_bar},
                    {"lip_f", s.lipschitz.lip_f},
                    {"lip_J", s.lipschitz.lip_J},
                    {"lip_Z", s.lipschitz.lip_Z},
                    {"sigma_max", s.lipschitz.sigma_max}};
  j["alpha_low"] = {{"a", s.alpha_low.a}, {"p", s.alpha_low.p}};
  j["alpha_up"] = {{"a", s.alpha_up.a}, {"p", s.alpha_up.p}};
  j["cost"] = {{"n", s.cost_stats.n},         {"mean", s.cost_stats.mean},
               {"q1", s.cost_stats.q1},       {"median", s.cost_stats.median},
               {"q3", s.cost_stats.q3},       {"whisker_lo", s.cost_stats.whisker_lo},
               {"whisker_hi", s.cost_stats.whisker_hi}};
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) {
    runs.push_back({{"target", r.target_index},
                    {"seed", r.seed},
                    {"total_cost", r.total_cost},
                    {"reach_time", r.reach_time},
                    {"max_norm_after_reach", r.max_norm_after_reach},
                    {"max_prediction_deviation", r.max_prediction_deviation},
                    {"fallback_fraction", r.fallback_fraction},
                    {"accepted_updates", r.accepted_updates},
                    {"fallback_invocations", r.fallback_invocations},
                    {"constraint_violations", r.constraint_violations},
                    {"escaped", r.escaped},
                    {"csv", r.csv}});
  }
  j["runs"] = runs;
  return j;
}

inline RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate_resolved();
  const RunPrep prep = prepare_run(cfg);

  struct Job {
    int target_index;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int ti = 0; ti < static_cast<int>(cfg.targets.size()); ++ti)
    for (const auto s : cfg.seeds) jobs.push_back({ti, s + opts.seed_base});

  std::vector<RunRecord> records(jobs.size());
  std::filesystem::path out_dir(opts.out_dir);
  if (opts.write_csv) std::filesystem::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        RunArtifacts art = execute_single_run(cfg, prep, jobs[i].target_index, jobs[i].seed);
        if (opts.write_csv) {
          const std::string name = cfg.label + "_t" + std::to_string(art.target_index) + "_s" +
                                   std::to_string(art.seed) + ".csv";
          const std::string csv = trajectory_csv(art.traj);
          std::ofstream f(out_dir / name, std::ios::binary);
          if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
          f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
          art.rec.csv = name;
        }
        records[i] = art.rec;
        if (opts.on_run) {
          std::lock_guard<std::mutex> lock(sink_mutex);
          opts.on_run(art);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_threads = opts.parallel > 0 ? opts.parallel
                                    : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  RunSummary summary;
  summary.cfg = cfg;
  summary.nu_bar = prep.params.nu_bar;
  summary.epsilon = prep.params.epsilon;
  summary.lipschitz = prep.lipschitz;
  summary.alpha_low = prep.model.alpha_low;
  summary.alpha_up = prep.model.alpha_up;
  summary.runs = std::move(records);
  std::vector<double> costs;
  costs.reserve(summary.runs.size());
  for (const auto& r : summary.runs) costs.push_back(r.total_cost);
  summary.cost_stats = compute_stats(costs);

  if (opts.write_csv) {
    std::ofstream f(out_dir / (cfg.label + "_summary.json"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write summary json");
    f << summary_to_json(summary).dump(2) << "\n";
  }
  return summary;
}

// Shared-task comparison: mean and median total cost per agent, plus the
// per-(agent, H) quartile rows.
struct ComparisonRow {
  std::string label;
  std::string agent;
  std::string h;
  Stats cost;
};

inline nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json j;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"label", r.label},
                   {"agent", r.agent},
                   {"h", r.h},
                   {"n", r.cost.n},
                   {"mean", r.cost.mean},
                   {"q1", r.cost.q1},
                   {"median", r.cost.median},
                   {"q3", r.cost.q3},
                   {"whisker_lo", r.cost.whisker_lo},
                   {"whisker_hi", r.cost.whisker_hi}});
  }
  j["rows"] = arr;
  return j;
}

inline std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  char buf[160];
  std::string out = "agent                     H        mean      median        Q1        Q3\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %-6s %9.3f %11.3f %9.3f %9.3f\n", r.agent.c_str(),
                  r.h.c_str(), r.cost.mean, r.cost.median, r.cost.q1, r.cost.q3);
    out += buf;
  }
  return out;
}

inline std::vector<ComparisonRow> compare_agents(const std::vector<ExperimentConfig>& cfgs,
                                                 const RunOptions& opts,
                                                 std::vector<RunSummary>* out_summaries = nullptr) {
  if (cfgs.size() < 2) throw std::invalid_argument("compare_agents: need at least 2 configs");
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (cfgs[i].targets.size() != cfgs[0].targets.size() || cfgs[i].seeds != cfgs[0].seeds ||
        cfgs[i].sampling.delta != cfgs[0].sampling.delta ||
        cfgs[i].sampling.horizon != cfgs[0].sampling.horizon)
      throw std::invalid_argument("compare_agents: configs must share targets, seeds, delta, horizon");
  }
  std::vector<ComparisonRow> rows;
  for (const auto& cfg : cfgs) {
    RunSummary s = run_experiment(cfg, opts);
    rows.push_back(ComparisonRow{cfg.label, agent_kind_name(cfg.agent.kind), cfg.h_label,
                                 s.cost_stats});
    if (out_summaries) out_summaries->push_back(std::move(s));
  }
  if (opts.write_csv) {
    std::ofstream f(std::filesystem::path(opts.out_dir) / "comparison.json", std::ios::binary);
    f << comparison_to_json(rows).dump(2) << "\n";
  }
  return rows;
}

}  // namespace calf
