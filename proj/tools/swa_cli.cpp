// swa: run scenarios, analyze safe jitter ranges, generate and validate
// schedules. Exit codes: 0 ok, 1 invariant violation, 2 config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "swa/swa.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw swa::ConfigError("cannot write " + p.string());
  return out;
}

struct RunArgs {
  std::string config;
  std::string preset = "none";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> periods;
  swa::SweepOptions sweep;
  std::string out = "out";
  bool trace = false;
  bool serial = false;
};

int cmd_run(const RunArgs& a) {
  swa::Config cfg = swa::apply_preset(swa::load_config(a.config), swa::parse_preset(a.preset));
  if (a.seed) cfg.scenario.seed = *a.seed;
  if (a.periods) cfg.scenario.periods = *a.periods;

  const auto violations = swa::validate_config(cfg);
  if (!violations.empty()) {
    for (const auto& v : violations)
      std::cerr << "schedule: " << swa::to_string(v.kind) << " flow " << v.flow_id << " at " << v.vertex << ": "
                << v.message << "\n";
    return kConfigError;
  }

  fs::path dir = a.out;
  if (const char* env = std::getenv("SWA_OUT_DIR"); env && *env) dir = env;
  fs::create_directories(dir);

  swa::SweepOptions opts = a.sweep;
  opts.parallel = !a.serial;
  opts.trace = a.trace;
  const auto steps = swa::run_sweep(cfg, opts);

  {
    auto o = open_out(dir / "prett.csv");
    swa::write_arm_csv(o, steps, false);
  }
  {
    auto o = open_out(dir / "swa.csv");
    swa::write_arm_csv(o, steps, true);
  }
  {
    auto o = open_out(dir / "summary.csv");
    swa::write_summary_csv(o, steps);
  }
  {
    auto o = open_out(dir / "drops.csv");
    swa::write_drops_csv(o, steps);
  }
  if (a.trace) {
    for (const auto& s : steps) {
      auto p = open_out(dir / ("trace_prett_" + std::to_string(s.rate_mbps) + ".csv"));
      swa::write_trace_csv(p, s.prett);
      auto w = open_out(dir / ("trace_swa_" + std::to_string(s.rate_mbps) + ".csv"));
      swa::write_trace_csv(w, s.swa);
    }
  }

  int rc = kOk;
  for (const auto& s : steps) {
    for (const auto* arm : {&s.prett, &s.swa}) {
      const char* name = arm == &s.prett ? "prett" : "swa";
      for (const auto& f : arm->faults) {
        std::cerr << name << " @" << s.rate_mbps << " Mbps: " << f << "\n";
        rc = kViolation;
      }
      for (const auto& f : arm->flows)
        if (f.order_violations > 0 || f.max_copies > 1) rc = kViolation;
    }
  }

  std::cout << "flow  rate  prett_max  swa_min  swa_max  swa_jitter\n";
  for (const auto& s : steps)
    for (std::size_t i = 0; i < s.swa.flows.size(); ++i)
      std::cout << s.swa.flows[i].flow_id << "  " << s.rate_mbps << "  " << s.prett.flows[i].lat_max << "  "
                << s.swa.flows[i].lat_min << "  " << s.swa.flows[i].lat_max << "  " << s.swa.flows[i].jitter << "\n";
  std::cout << "wrote " << (dir / "prett.csv").string() << ", swa.csv, summary.csv, drops.csv\n";
  return rc;
}

int cmd_analyze(const std::string& config, const std::string& port) {
  const swa::Config cfg = swa::load_config(config);
  std::vector<swa::PortJitterReport> reports;
  if (port.empty()) {
    reports = swa::analyze_filter_ports(cfg);
  } else {
    const auto colon = port.rfind(':');
    if (colon == std::string::npos) throw swa::ConfigError("--port must be vertex:port");
    const auto v = cfg.topology.require(port.substr(0, colon));
    const auto p = static_cast<swa::PortId>(std::stoul(port.substr(colon + 1)));
    reports.push_back({v, p, swa::safe_jitter_upper(swa::port_flow_set(cfg, v, p))});
  }

  std::cout << "vertex,port,flow_id,upper_ns,attained_by,gap_ns,published_ns,status\n";
  for (const auto& r : reports) {
    for (const auto& e : r.report.flows) {
      std::cout << cfg.topology.name(r.vertex) << ',' << r.port << ',' << e.flow_id << ',' << e.upper << ','
                << (e.attained_by ? std::to_string(*e.attained_by) : "period") << ',' << e.attaining_gap << ',';
      const auto pub = cfg.published_upper.find(e.flow_id);
      if (pub == cfg.published_upper.end())
        std::cout << ",-\n";
      else
        std::cout << pub->second << ',' << (pub->second == e.upper ? "reproduced" : "unreproduced") << '\n';
    }
  }
  return kOk;
}

int cmd_schedule(const std::string& config, const std::string& out, bool no_eq1, swa::TimeNs alignment) {
  swa::Config cfg = swa::load_config(config);
  swa::ScheduleProblem problem;
  problem.topology = cfg.topology;
  problem.flows = cfg.flows;
  problem.enforce_eq1 = !no_eq1 && cfg.scenario.enforce_eq1;
  problem.alignment = alignment;
  const auto sol = swa::schedule(problem);
  if (!sol.feasible) {
    for (const auto& d : sol.diagnostics) std::cerr << "infeasible: " << d << "\n";
    return kViolation;
  }
  cfg.schedule = sol.rows;
  cfg.scenario.enforce_eq1 = problem.enforce_eq1;
  if (out.empty() || out == "-") {
    swa::write_config(std::cout, cfg);
  } else {
    auto o = open_out(out);
    swa::write_config(o, cfg);
  }
  return kOk;
}

int cmd_validate(const std::string& solution) {
  const swa::Config cfg = swa::load_config(solution);
  const auto violations = swa::validate_config(cfg);
  for (const auto& v : violations)
    std::cout << swa::to_string(v.kind) << ",flow " << v.flow_id << "," << v.vertex << "," << v.message << "\n";
  std::cout << violations.size() << " violation(s)\n";
  return violations.empty() ? kOk : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SWA time-triggered switch simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "sweep a scenario over disturbance rates, PreTT and SWA arms");
  run_cmd->add_option("--config", run.config, "scenario config")->required();
  run_cmd->add_option("--preset", run.preset, "one|two|three|four|none");
  run_cmd->add_option("--seed", run.seed, "disturbance seed");
  run_cmd->add_option("--rate-min", run.sweep.rate_min, "Mbps");
  run_cmd->add_option("--rate-max", run.sweep.rate_max, "Mbps");
  run_cmd->add_option("--rate-step", run.sweep.rate_step, "Mbps");
  run_cmd->add_option("--periods", run.periods, "hyperperiods per rate step");
  run_cmd->add_option("--out", run.out, "output directory (SWA_OUT_DIR overrides)");
  run_cmd->add_flag("--trace", run.trace, "write per-event traces");
  run_cmd->add_flag("--serial", run.serial, "run rate steps one after another");

  std::string analyze_config, analyze_port;
  auto* analyze_cmd = app.add_subcommand("analyze-jitter", "safe jitter ranges at the filter ports");
  analyze_cmd->add_option("--config", analyze_config)->required();
  analyze_cmd->add_option("--port", analyze_port, "vertex:port, default every filter port");

  std::string sched_config, sched_out;
  bool no_eq1 = false;
  swa::TimeNs alignment = 1024;
  auto* sched_cmd = app.add_subcommand("schedule", "generate offsets for the flows of a config");
  sched_cmd->add_option("--config", sched_config)->required();
  sched_cmd->add_option("--out", sched_out, "solution file, - for stdout");
  sched_cmd->add_flag("--no-eq1", no_eq1, "do not enforce the self-recovery bound");
  sched_cmd->add_option("--alignment", alignment, "offset grid in ns");

  std::string solution;
  auto* validate_cmd = app.add_subcommand("validate", "check a schedule for violations");
  validate_cmd->add_option("--solution,--config", solution)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*analyze_cmd) return cmd_analyze(analyze_config, analyze_port);
    if (*sched_cmd) return cmd_schedule(sched_config, sched_out, no_eq1, alignment);
    if (*validate_cmd) return cmd_validate(solution);
  } catch (const swa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const swa::AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
