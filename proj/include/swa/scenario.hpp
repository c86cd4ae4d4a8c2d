#pragma once

// Scenario presets, rate sweeps over paired PreTT/SWA runs, CSV output and
// the analysis glue used by the command-line front end.

#include <future>
#include <ostream>
#include <string>
#include <vector>

#include "swa/config.hpp"
#include "swa/jitter_analysis.hpp"
#include "swa/scheduler.hpp"
#include "swa/sim_engine.hpp"

namespace swa {

enum class Preset { kNone, kOne, kTwo, kThree, kFour };

inline Preset parse_preset(const std::string& s) {
  if (s.empty() || s == "none") return Preset::kNone;
  if (s == "one" || s == "1") return Preset::kOne;
  if (s == "two" || s == "2") return Preset::kTwo;
  if (s == "three" || s == "3") return Preset::kThree;
  if (s == "four" || s == "4") return Preset::kFour;
  throw ConfigError("unknown preset '" + s + "'");
}

inline constexpr TimeNs kPresetJitter = 10'000;

// one: copies above the broadcast disturbance. two: same priority.
// three: as two, unicast disturbance. four: as two, 10 us jitter everywhere.
inline Config apply_preset(Config cfg, Preset p) {
  auto& s = cfg.scenario;
  if (p == Preset::kNone) return cfg;
  s.priority_levels = std::max(s.priority_levels, 2u);
  s.jitter_all.reset();
  s.jitter.clear();
  s.pattern = DisturbanceSpec::Pattern::kBroadcast;
  s.disturbance_priority = 1;
  s.copy_priority = 1;
  switch (p) {
    case Preset::kOne: s.copy_priority = 0; break;
    case Preset::kTwo: break;
    case Preset::kThree:
      if (s.unicast_route.empty()) throw ConfigError("preset three needs scenario field unicast-route");
      s.pattern = DisturbanceSpec::Pattern::kUnicast;
      break;
    case Preset::kFour: s.jitter_all = JitterConfig::bounded(kPresetJitter); break;
    case Preset::kNone: break;
  }
  return cfg;
}

inline SimConfig make_sim_config(const Config& cfg, std::uint64_t rate_mbps, bool copies) {
  const auto& s = cfg.scenario;
  SimConfig sc;
  sc.topology = cfg.topology;
  sc.flows = cfg.flows;
  sc.schedule = cfg.schedule;
  sc.copies_enabled = copies;
  sc.restore_iscopy = s.restore_iscopy;
  sc.priority_levels = s.priority_levels;
  sc.copy_priority = s.copy_priority;
  sc.queue_capacity = s.queue_capacity;
  sc.sync_error = s.sync_error;
  sc.seed = s.seed;
  sc.hyperperiods = s.periods;
  sc.warmup_hyperperiods = s.warmup;
  for (const auto& f : cfg.flows) {
    if (const auto it = s.jitter.find(f.id); it != s.jitter.end())
      sc.jitter[f.id] = it->second;
    else if (s.jitter_all)
      sc.jitter[f.id] = *s.jitter_all;
  }
  if (rate_mbps > 0) {
    if (s.disturbance_source.empty()) throw ConfigError("disturbance rate given but no disturbance-source");
    DisturbanceSpec d;
    d.pattern = s.pattern;
    d.source = cfg.topology.require(s.disturbance_source);
    if (s.pattern == DisturbanceSpec::Pattern::kUnicast)
      for (const auto& v : s.unicast_route) d.route.push_back(cfg.topology.require(v));
    d.length_bytes = s.disturbance_length;
    d.rate_mbps = rate_mbps;
    d.priority = s.disturbance_priority;
    sc.disturbances.push_back(std::move(d));
  }
  return sc;
}

inline std::vector<Violation> validate_config(const Config& cfg) {
  ScheduleSolution sol{cfg.schedule, true, {}};
  ValidateOptions opts;
  opts.enforce_eq1 = cfg.scenario.enforce_eq1;
  return validate(sol, cfg.topology, cfg.flows, opts);
}

// ---------------------------------------------------------------------------
// Sweeps

struct StepResult {
  std::uint64_t rate_mbps = 0;
  ScenarioResult prett;
  ScenarioResult swa;
};

struct SweepOptions {
  std::uint64_t rate_min = 0;
  std::uint64_t rate_max = 100;
  std::uint64_t rate_step = 10;
  bool parallel = true;
  bool trace = false;
};

inline std::vector<std::uint64_t> sweep_rates(const SweepOptions& o) {
  if (o.rate_step == 0) throw ConfigError("rate-step must be positive");
  if (o.rate_min > o.rate_max) throw ConfigError("rate-min above rate-max");
  std::vector<std::uint64_t> out;
  for (std::uint64_t r = o.rate_min; r <= o.rate_max; r += o.rate_step) out.push_back(r);
  return out;
}

inline ScenarioResult run_arm(const Config& cfg, std::uint64_t rate, bool copies, bool trace = false) {
  SimConfig sc = make_sim_config(cfg, rate, copies);
  sc.trace = trace;
  Simulation sim(std::move(sc));
  return sim.run();
}

// Results are ordered by rate whatever the execution order.
inline std::vector<StepResult> run_sweep(const Config& cfg, const SweepOptions& o) {
  const auto rates = sweep_rates(o);
  for (const auto r : rates) make_sim_config(cfg, r, true);  // config errors surface before any run
  std::vector<StepResult> steps(rates.size());
  if (!o.parallel) {
    for (std::size_t i = 0; i < rates.size(); ++i)
      steps[i] = {rates[i], run_arm(cfg, rates[i], false, o.trace), run_arm(cfg, rates[i], true, o.trace)};
    return steps;
  }
  std::vector<std::future<ScenarioResult>> pre, swa;
  for (const auto r : rates) {
    pre.push_back(std::async(std::launch::async, [&cfg, r, &o] { return run_arm(cfg, r, false, o.trace); }));
    swa.push_back(std::async(std::launch::async, [&cfg, r, &o] { return run_arm(cfg, r, true, o.trace); }));
  }
  for (std::size_t i = 0; i < rates.size(); ++i) steps[i] = {rates[i], pre[i].get(), swa[i].get()};
  return steps;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_arm_header(std::ostream& out) {
  out << "flow_id,rate_mbps,lat_min_ns,lat_avg_ns,lat_max_ns,jitter_ns,delivered";
  for (const auto n : kDropReasonNames) {
    out << ",dropped_";
    for (const char c : n) out << (c == '-' ? '_' : c);
  }
  out << ",order_violations,max_copies\n";
}

inline void write_arm_rows(std::ostream& out, std::uint64_t rate, const ScenarioResult& r) {
  for (const auto& f : r.flows) {
    out << f.flow_id << ',' << rate << ',' << f.lat_min << ',' << f.lat_avg << ',' << f.lat_max << ',' << f.jitter
        << ',' << f.delivered;
    for (const auto d : f.drops) out << ',' << d;
    out << ',' << f.order_violations << ',' << f.max_copies << '\n';
  }
}

inline void write_arm_csv(std::ostream& out, const std::vector<StepResult>& steps, bool swa_arm) {
  write_arm_header(out);
  for (const auto& s : steps) write_arm_rows(out, s.rate_mbps, swa_arm ? s.swa : s.prett);
}

inline void write_summary_csv(std::ostream& out, const std::vector<StepResult>& steps) {
  out << "flow_id,rate_mbps,prett_min_ns,prett_max_ns,swa_min_ns,swa_avg_ns,swa_max_ns,swa_jitter_ns,"
         "swa_max_le_prett_min,copies_delivered\n";
  for (const auto& s : steps) {
    for (std::size_t i = 0; i < s.swa.flows.size(); ++i) {
      const auto& p = s.prett.flows[i];
      const auto& w = s.swa.flows[i];
      out << w.flow_id << ',' << s.rate_mbps << ',' << p.lat_min << ',' << p.lat_max << ',' << w.lat_min << ','
          << w.lat_avg << ',' << w.lat_max << ',' << w.jitter << ',' << (w.lat_max <= p.lat_min ? 1 : 0) << ','
          << w.delivered_copies << '\n';
    }
  }
}

inline void write_drops_csv(std::ostream& out, const std::vector<StepResult>& steps) {
  out << "arm,rate_mbps,vertex,flow_id";
  for (const auto n : kDropReasonNames) {
    out << ',';
    for (const char c : n) out << (c == '-' ? '_' : c);
  }
  out << '\n';
  for (const auto& s : steps) {
    for (const auto* arm : {&s.prett, &s.swa}) {
      for (const auto& [key, counts] : arm->drops_by_vertex) {
        out << (arm == &s.prett ? "prett" : "swa") << ',' << s.rate_mbps << ',' << key.first << ',' << key.second;
        for (const auto c : counts) out << ',' << c;
        out << '\n';
      }
    }
  }
}

inline void write_trace_csv(std::ostream& out, const ScenarioResult& r) {
  out << "time_ns,vertex,flow_id,sequence,copy,action,reason\n";
  for (const auto& t : r.trace)
    out << t.time << ',' << t.vertex << ',' << t.flow_id << ',' << t.sequence << ',' << (t.copy ? 1 : 0) << ','
        << t.action << ',' << t.reason << '\n';
}

// ---------------------------------------------------------------------------
// Jitter analysis over a config

struct PortJitterReport {
  VertexId vertex = 0;
  PortId port = 0;
  SafeJitterReport report;
};

inline PortFlowSet port_flow_set(const Config& cfg, VertexId v, PortId p) {
  PortFlowSet set;
  const Link* l = cfg.topology.out_link(v, p);
  if (!l) throw ConfigError("no link leaves " + cfg.topology.name(v) + ":" + std::to_string(p));
  for (const auto& r : cfg.schedule) {
    if (r.vertex != v || r.output_port != p) continue;
    const FlowSpec& f = cfg.flow(r.flow_id);
    set.push_back({f.id, f.period, r.offset, transmission_time(f.length_bytes, l->rate)});
  }
  return set;
}

// One report per output port that hosts the arrival filter of some flow, i.e.
// the egress of each flow's last switch.
inline std::vector<PortJitterReport> analyze_filter_ports(const Config& cfg) {
  std::set<std::pair<VertexId, PortId>> ports;
  for (const auto& f : cfg.flows) {
    const VertexId last = f.path[f.path.size() - 2];
    const Link* l = cfg.topology.link_between(last, f.path.back());
    ports.insert({last, l->from_port});
  }
  std::vector<PortJitterReport> out;
  for (const auto& [v, p] : ports) out.push_back({v, p, safe_jitter_upper(port_flow_set(cfg, v, p))});
  return out;
}

}  // namespace swa
