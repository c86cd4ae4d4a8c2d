#pragma once

// Line-oriented scenario config. Sections are introduced by `[name]`; inside
// `[topology]`, `[flows]`, `[schedules]` and `[analysis]` every non-blank line
// is one record of space-separated key=value fields (topology records start
// with a bare `vertex` or `link` keyword). `[scenario]` holds one key=value
// per line. `#` starts a comment.
//
//   [flows]
//   flow-id=1 period=524288 length=128 path=IXIA-0,TTS-1,TTS-2,TTS-3,IXIA-3
//   [schedules]
//   switch=TTS-1 flow-id=1 input-port=4 output-port=7 arrival-start=400 arrival-end=1400 offset=22528

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "swa/core_model.hpp"
#include "swa/sim_engine.hpp"

namespace swa {

struct ScenarioSettings {
  unsigned copy_priority = 1;
  unsigned priority_levels = 2;
  std::size_t queue_capacity = 16;
  std::uint64_t seed = 1;
  std::uint64_t periods = 200;  // hyperperiods per rate step
  std::uint64_t warmup = 2;
  SyncError sync_error = SyncError::kNone;
  bool restore_iscopy = false;
  bool enforce_eq1 = true;

  DisturbanceSpec::Pattern pattern = DisturbanceSpec::Pattern::kBroadcast;
  std::string disturbance_source;
  std::vector<std::string> unicast_route;
  std::uint32_t disturbance_length = 64;
  unsigned disturbance_priority = 1;

  std::optional<JitterConfig> jitter_all;
  std::map<FlowId, JitterConfig> jitter;
};

struct Config {
  Topology topology;
  std::vector<FlowSpec> flows;
  std::vector<LinkSchedule> schedule;
  ScenarioSettings scenario;
  std::map<FlowId, TimeNs> published_upper;  // figures to compare analysis output against

  const FlowSpec& flow(FlowId id) const {
    for (const auto& f : flows)
      if (f.id == id) return f;
    throw ConfigError("unknown flow-id " + std::to_string(id));
  }
};

namespace detail {

struct Fields {
  std::string keyword;
  std::vector<std::pair<std::string, std::string>> kv;
  std::string where;

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    return std::nullopt;
  }
  std::string need(std::string_view key) const {
    if (auto v = get(key)) return *v;
    throw ConfigError(where + ": missing field '" + std::string(key) + "'");
  }
};

inline std::uint64_t to_u64(const std::string& s, const std::string& where, std::string_view field) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(where + ": field '" + std::string(field) + "': expected unsigned integer, got '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::pair<VertexId, PortId> endpoint(const Topology& t, const std::string& s, const std::string& where) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError(where + ": endpoint '" + s + "' must be vertex:port");
  const auto v = t.find(s.substr(0, colon));
  if (!v) throw ConfigError(where + ": unknown vertex '" + s.substr(0, colon) + "'");
  return {*v, static_cast<PortId>(to_u64(s.substr(colon + 1), where, "port"))};
}

inline JitterConfig parse_jitter(const std::string& s, const std::string& where) {
  if (s == "unconstrained") return JitterConfig::unconstrained();
  if (s == "tt-only") return JitterConfig::tt_only();
  return JitterConfig::bounded(to_u64(s, where, "jitter"));
}

inline std::string jitter_text(const JitterConfig& j) {
  switch (j.mode) {
    case JitterConfig::Mode::kUnconstrained: return "unconstrained";
    case JitterConfig::Mode::kTtOnly: return "tt-only";
    case JitterConfig::Mode::kBounded: return std::to_string(j.value);
  }
  return "unconstrained";
}

inline bool to_bool(const std::string& s, const std::string& where, std::string_view field) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(where + ": field '" + std::string(field) + "': expected true/false");
}

inline Rate rate_of(const Fields& f) {
  if (auto m = f.get("rate-mbps")) return Rate::from_mbps(to_u64(*m, f.where, "rate-mbps"));
  if (auto b = f.get("rate-bits")) {
    const auto ns = to_u64(f.need("rate-ns"), f.where, "rate-ns");
    if (ns == 0) throw ConfigError(f.where + ": rate must be positive");
    return Rate{to_u64(*b, f.where, "rate-bits"), ns};
  }
  return Rate{};
}

}  // namespace detail

inline Config parse_config(std::istream& in, const std::string& name = "<config>") {
  using detail::Fields;
  Config cfg;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  std::vector<Fields> flows, schedules;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = name + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;

    if (tokens.front().front() == '[') {
      if (tokens.size() != 1 || tokens.front().back() != ']') throw ConfigError(where + ": malformed section header");
      section = tokens.front().substr(1, tokens.front().size() - 2);
      if (section != "topology" && section != "flows" && section != "schedules" && section != "scenario" &&
          section != "analysis")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) throw ConfigError(where + ": content before first section");

    Fields f;
    f.where = where;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos) {
        if (i != 0 || !f.keyword.empty()) throw ConfigError(where + ": expected key=value, got '" + tokens[i] + "'");
        f.keyword = tokens[i];
        continue;
      }
      f.kv.emplace_back(tokens[i].substr(0, eq), tokens[i].substr(eq + 1));
    }

    if (section == "topology") {
      auto& t = cfg.topology;
      if (f.keyword == "vertex") {
        const std::string kind = f.need("kind");
        if (kind != "switch" && kind != "end-system") throw ConfigError(where + ": kind must be switch or end-system");
        const auto pdelay = f.get("pdelay") ? detail::to_u64(*f.get("pdelay"), where, "pdelay") : 0;
        try {
          t.add_vertex(f.need("name"), kind == "switch" ? VertexKind::kSwitch : VertexKind::kEndSystem,
                       static_cast<std::uint32_t>(detail::to_u64(f.need("ports"), where, "ports")), pdelay);
        } catch (const ConfigError& e) {
          throw ConfigError(where + ": " + e.what());
        }
      } else if (f.keyword == "link") {
        const auto [from, fp] = detail::endpoint(t, f.need("from"), where);
        const auto [to, tp] = detail::endpoint(t, f.need("to"), where);
        const TimeNs delay = f.get("delay") ? detail::to_u64(*f.get("delay"), where, "delay") : 400;
        try {
          t.add_link(from, fp, to, tp, detail::rate_of(f), delay);
        } catch (const ConfigError& e) {
          throw ConfigError(where + ": " + e.what());
        }
      } else if (f.keyword.empty() && f.kv.size() == 1) {
        const auto& [k, v] = f.kv.front();
        if (k == "sync-accuracy")
          t.sync_accuracy = detail::to_u64(v, where, k);
        else if (k == "min-forwarding-time")
          t.min_forwarding_time = detail::to_u64(v, where, k);
        else if (k == "anchoring") {
          if (v == "nominal-start")
            t.anchoring = WindowAnchoring::kNominalStart;
          else if (v == "centered")
            t.anchoring = WindowAnchoring::kCentered;
          else
            throw ConfigError(where + ": anchoring must be nominal-start or centered");
        } else {
          throw ConfigError(where + ": unknown topology field '" + k + "'");
        }
      } else {
        throw ConfigError(where + ": expected vertex, link or a single key=value");
      }
    } else if (section == "flows") {
      flows.push_back(std::move(f));
    } else if (section == "schedules") {
      schedules.push_back(std::move(f));
    } else if (section == "analysis") {
      if (f.keyword != "published-upper") throw ConfigError(where + ": expected published-upper record");
      cfg.published_upper[static_cast<FlowId>(detail::to_u64(f.need("flow-id"), where, "flow-id"))] =
          detail::to_u64(f.need("value"), where, "value");
    } else {  // scenario
      if (!f.keyword.empty() || f.kv.size() != 1) throw ConfigError(where + ": expected one key=value");
      const auto& [k, v] = f.kv.front();
      auto& s = cfg.scenario;
      if (k == "copy-priority")
        s.copy_priority = static_cast<unsigned>(detail::to_u64(v, where, k));
      else if (k == "priority-levels")
        s.priority_levels = static_cast<unsigned>(detail::to_u64(v, where, k));
      else if (k == "queue-capacity")
        s.queue_capacity = detail::to_u64(v, where, k);
      else if (k == "seed")
        s.seed = detail::to_u64(v, where, k);
      else if (k == "periods")
        s.periods = detail::to_u64(v, where, k);
      else if (k == "warmup")
        s.warmup = detail::to_u64(v, where, k);
      else if (k == "sync-error") {
        if (v == "none")
          s.sync_error = SyncError::kNone;
        else if (v == "uniform")
          s.sync_error = SyncError::kUniform;
        else
          throw ConfigError(where + ": sync-error must be none or uniform");
      } else if (k == "restore-iscopy")
        s.restore_iscopy = detail::to_bool(v, where, k);
      else if (k == "enforce-eq1")
        s.enforce_eq1 = detail::to_bool(v, where, k);
      else if (k == "disturbance") {
        if (v == "broadcast")
          s.pattern = DisturbanceSpec::Pattern::kBroadcast;
        else if (v == "unicast")
          s.pattern = DisturbanceSpec::Pattern::kUnicast;
        else
          throw ConfigError(where + ": disturbance must be broadcast or unicast");
      } else if (k == "disturbance-source")
        s.disturbance_source = v;
      else if (k == "unicast-route")
        s.unicast_route = detail::split(v, ',');
      else if (k == "disturbance-length")
        s.disturbance_length = static_cast<std::uint32_t>(detail::to_u64(v, where, k));
      else if (k == "disturbance-priority")
        s.disturbance_priority = static_cast<unsigned>(detail::to_u64(v, where, k));
      else if (k == "jitter")
        s.jitter_all = detail::parse_jitter(v, where);
      else if (k.rfind("jitter.", 0) == 0)
        s.jitter[static_cast<FlowId>(detail::to_u64(k.substr(7), where, k))] = detail::parse_jitter(v, where);
      else
        throw ConfigError(where + ": unknown scenario field '" + k + "'");
    }
  }

  for (const auto& f : flows) {
    FlowSpec spec;
    spec.id = static_cast<FlowId>(detail::to_u64(f.need("flow-id"), f.where, "flow-id"));
    spec.period = detail::to_u64(f.need("period"), f.where, "period");
    spec.length_bytes = static_cast<std::uint32_t>(detail::to_u64(f.need("length"), f.where, "length"));
    for (const auto& v : detail::split(f.need("path"), ',')) {
      const auto id = cfg.topology.find(v);
      if (!id) throw ConfigError(f.where + ": field 'path': unknown vertex '" + v + "'");
      spec.path.push_back(*id);
    }
    if (auto l = f.get("latency")) spec.e2e_latency_bound = detail::to_u64(*l, f.where, "latency");
    try {
      check_flow(cfg.topology, spec);
    } catch (const ConfigError& e) {
      throw ConfigError(f.where + ": " + e.what());
    }
    for (const auto& other : cfg.flows)
      if (other.id == spec.id) throw ConfigError(f.where + ": duplicate flow-id " + std::to_string(spec.id));
    cfg.flows.push_back(std::move(spec));
  }

  for (const auto& f : schedules) {
    LinkSchedule r;
    auto vname = f.get("switch");
    if (!vname) vname = f.get("vertex");
    if (!vname) throw ConfigError(f.where + ": missing field 'switch'");
    const auto v = cfg.topology.find(*vname);
    if (!v) throw ConfigError(f.where + ": unknown vertex '" + *vname + "'");
    r.vertex = *v;
    r.flow_id = static_cast<FlowId>(detail::to_u64(f.need("flow-id"), f.where, "flow-id"));
    cfg.flow(r.flow_id);
    if (auto p = f.get("input-port")) r.input_port = static_cast<PortId>(detail::to_u64(*p, f.where, "input-port"));
    r.output_port = static_cast<PortId>(detail::to_u64(f.need("output-port"), f.where, "output-port"));
    r.offset = detail::to_u64(f.need("offset"), f.where, "offset");
    if (cfg.topology.is_switch(r.vertex)) {
      r.arrival_start = detail::to_u64(f.need("arrival-start"), f.where, "arrival-start");
      r.arrival_end = detail::to_u64(f.need("arrival-end"), f.where, "arrival-end");
      if (r.arrival_start > r.arrival_end) throw ConfigError(f.where + ": arrival-start after arrival-end");
    }
    cfg.schedule.push_back(r);
  }
  return cfg;
}

inline Config parse_config_string(const std::string& text, const std::string& name = "<string>") {
  std::istringstream in(text);
  return parse_config(in, name);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

inline std::string rate_text(const Rate& r) {
  if (1000 % r.ns == 0) return "rate-mbps=" + std::to_string(r.bits * (1000 / r.ns));
  return "rate-bits=" + std::to_string(r.bits) + " rate-ns=" + std::to_string(r.ns);
}

inline void write_config(std::ostream& out, const Config& cfg) {
  const Topology& t = cfg.topology;
  out << "[topology]\n";
  out << "sync-accuracy=" << t.sync_accuracy << "\n";
  out << "min-forwarding-time=" << t.min_forwarding_time << "\n";
  out << "anchoring=" << (t.anchoring == WindowAnchoring::kCentered ? "centered" : "nominal-start") << "\n";
  for (const auto& v : t.vertices)
    out << "vertex name=" << v.name << " kind=" << (v.kind == VertexKind::kSwitch ? "switch" : "end-system")
        << " ports=" << v.port_count << " pdelay=" << v.processing_delay << "\n";
  for (const auto& l : t.links)
    out << "link from=" << t.name(l.from) << ":" << l.from_port << " to=" << t.name(l.to) << ":" << l.to_port << " "
        << rate_text(l.rate) << " delay=" << l.delay << "\n";

  out << "\n[flows]\n";
  for (const auto& f : cfg.flows) {
    out << "flow-id=" << f.id << " period=" << f.period << " length=" << f.length_bytes << " path=";
    for (std::size_t i = 0; i < f.path.size(); ++i) out << (i ? "," : "") << t.name(f.path[i]);
    if (f.e2e_latency_bound != kNever) out << " latency=" << f.e2e_latency_bound;
    out << "\n";
  }

  out << "\n[schedules]\n";
  for (const auto& r : cfg.schedule) {
    if (t.is_switch(r.vertex)) {
      out << "switch=" << t.name(r.vertex) << " flow-id=" << r.flow_id << " input-port=" << r.input_port
          << " output-port=" << r.output_port << " arrival-start=" << r.arrival_start
          << " arrival-end=" << r.arrival_end << " offset=" << r.offset << "\n";
    } else {
      out << "vertex=" << t.name(r.vertex) << " flow-id=" << r.flow_id << " output-port=" << r.output_port
          << " offset=" << r.offset << "\n";
    }
  }

  const auto& s = cfg.scenario;
  out << "\n[scenario]\n";
  out << "copy-priority=" << s.copy_priority << "\n";
  out << "priority-levels=" << s.priority_levels << "\n";
  out << "queue-capacity=" << s.queue_capacity << "\n";
  out << "seed=" << s.seed << "\n";
  out << "periods=" << s.periods << "\n";
  out << "warmup=" << s.warmup << "\n";
  out << "sync-error=" << (s.sync_error == SyncError::kUniform ? "uniform" : "none") << "\n";
  out << "restore-iscopy=" << (s.restore_iscopy ? "true" : "false") << "\n";
  out << "enforce-eq1=" << (s.enforce_eq1 ? "true" : "false") << "\n";
  out << "disturbance=" << (s.pattern == DisturbanceSpec::Pattern::kUnicast ? "unicast" : "broadcast") << "\n";
  if (!s.disturbance_source.empty()) out << "disturbance-source=" << s.disturbance_source << "\n";
  if (!s.unicast_route.empty()) {
    out << "unicast-route=";
    for (std::size_t i = 0; i < s.unicast_route.size(); ++i) out << (i ? "," : "") << s.unicast_route[i];
    out << "\n";
  }
  out << "disturbance-length=" << s.disturbance_length << "\n";
  out << "disturbance-priority=" << s.disturbance_priority << "\n";
  if (s.jitter_all) out << "jitter=" << detail::jitter_text(*s.jitter_all) << "\n";
  for (const auto& [id, j] : s.jitter) out << "jitter." << id << "=" << detail::jitter_text(j) << "\n";

  if (!cfg.published_upper.empty()) {
    out << "\n[analysis]\n";
    for (const auto& [id, v] : cfg.published_upper) out << "published-upper flow-id=" << id << " value=" << v << "\n";
  }
}

inline std::string config_to_string(const Config& cfg) {
  std::ostringstream out;
  write_config(out, cfg);
  return out.str();
}

}  // namespace swa
