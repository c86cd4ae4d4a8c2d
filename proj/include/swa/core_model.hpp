#pragma once

// Domain types shared by every layer: time, rates, frames, flows, topology and
// the four per-switch forwarding tables.

#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swa {

using TimeNs = std::uint64_t;
using FlowId = std::uint32_t;
using VertexId = std::uint32_t;
using PortId = std::uint32_t;

inline constexpr PortId kNoPort = std::numeric_limits<PortId>::max();
inline constexpr TimeNs kNever = std::numeric_limits<TimeNs>::max();

// CRC (4) + preamble/SFD (8) + minimum inter-frame gap (12). Frame lengths
// everywhere in this library exclude these bytes.
inline constexpr std::uint64_t kWireOverheadBytes = 24;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact link rate as a (bits, ns) ratio. 100 Mbps is {1, 10}.
struct Rate {
  std::uint64_t bits = 1;
  std::uint64_t ns = 10;

  static Rate from_mbps(std::uint64_t mbps) {
    if (mbps == 0) throw ConfigError("link rate must be positive");
    const std::uint64_t g = std::gcd(mbps, std::uint64_t{1000});
    return Rate{mbps / g, 1000 / g};
  }

  friend bool operator==(const Rate&, const Rate&) = default;
};

inline TimeNs ceil_div(std::uint64_t num, std::uint64_t den) {
  return num / den + (num % den != 0 ? 1 : 0);
}

// Time one frame occupies the wire, overhead included. Rounded up when the
// rate does not divide evenly so the result stays integral.
inline TimeNs transmission_time(std::uint64_t length_bytes, Rate rate) {
  if (rate.bits == 0 || rate.ns == 0) throw ConfigError("link rate must be positive");
  const std::uint64_t bits = (length_bytes + kWireOverheadBytes) * 8;
  return ceil_div(bits * rate.ns, rate.bits);
}

enum class WindowAnchoring { kNominalStart, kCentered };

struct ArrivalWindow {
  TimeNs start = 0;
  TimeNs end = 0;
  friend bool operator==(const ArrivalWindow&, const ArrivalWindow&) = default;
};

// Admissible ingress interval for a TT frame departing its previous hop at
// `offset`. The window is always 2*sync_accuracy wide.
inline ArrivalWindow arrival_window(TimeNs offset, TimeNs pdelay, TimeNs ldelay, TimeNs sync_accuracy,
                                    WindowAnchoring anchoring = WindowAnchoring::kNominalStart) {
  const TimeNs nominal = offset + pdelay + ldelay;
  if (anchoring == WindowAnchoring::kCentered) {
    const TimeNs start = nominal >= sync_accuracy ? nominal - sync_accuracy : 0;
    return {start, start + 2 * sync_accuracy};
  }
  return {nominal, nominal + 2 * sync_accuracy};
}

// A TT frame, its BE clone, or a background (disturbance) frame in flight.
struct Frame {
  FlowId flow_id = 0;
  std::uint64_t sequence = 0;
  std::uint32_t length_bytes = 0;
  PortId input_port = kNoPort;
  TimeNs arrival_time = 0;
  bool iscopy = false;
  TimeNs src_send_time = 0;

  // Simulation bookkeeping, not part of the forwarding decision.
  bool background = false;
  std::uint64_t uid = 0;
  std::uint32_t route = 0;  // background: index of the disturbance that emitted it
  std::uint32_t hop = 0;
};

struct FlowSpec {
  FlowId id = 0;
  TimeNs period = 0;
  std::uint32_t length_bytes = 0;
  std::vector<VertexId> path;  // end-system, switches..., end-system
  TimeNs e2e_latency_bound = kNever;
};

// One row of a flow's schedule: departure from `vertex` plus the window in
// which the frame must arrive there. Source end-systems have no window.
struct LinkSchedule {
  FlowId flow_id = 0;
  VertexId vertex = 0;
  PortId input_port = kNoPort;
  PortId output_port = kNoPort;
  TimeNs offset = 0;
  TimeNs arrival_start = 0;
  TimeNs arrival_end = 0;

  friend bool operator==(const LinkSchedule&, const LinkSchedule&) = default;
};

enum class VertexKind { kEndSystem, kSwitch };

struct Vertex {
  std::string name;
  VertexKind kind = VertexKind::kSwitch;
  std::uint32_t port_count = 0;
  TimeNs processing_delay = 0;  // departure instant to first bit on the wire
};

struct Link {
  VertexId from = 0;
  PortId from_port = 0;
  VertexId to = 0;
  PortId to_port = 0;
  Rate rate;
  TimeNs delay = 400;
};

struct Topology {
  std::vector<Vertex> vertices;
  std::vector<Link> links;
  TimeNs sync_accuracy = 500;
  TimeNs min_forwarding_time = 7920;
  WindowAnchoring anchoring = WindowAnchoring::kNominalStart;

  VertexId add_vertex(std::string name, VertexKind kind, std::uint32_t ports, TimeNs pdelay = 0) {
    if (find(name)) throw ConfigError("duplicate vertex '" + name + "'");
    vertices.push_back(Vertex{std::move(name), kind, ports, pdelay});
    return static_cast<VertexId>(vertices.size() - 1);
  }

  void add_link(VertexId from, PortId from_port, VertexId to, PortId to_port, Rate rate = {}, TimeNs delay = 400) {
    if (from >= vertices.size() || to >= vertices.size()) throw ConfigError("link references unknown vertex");
    if (from_port >= vertices[from].port_count || to_port >= vertices[to].port_count)
      throw ConfigError("link references port outside " + vertices[from].name + "/" + vertices[to].name);
    if (rate.bits == 0 || rate.ns == 0) throw ConfigError("link rate must be positive");
    if (out_link(from, from_port)) throw ConfigError("port " + vertices[from].name + ":" + std::to_string(from_port) + " already has an outgoing link");
    links.push_back(Link{from, from_port, to, to_port, rate, delay});
  }

  std::optional<VertexId> find(const std::string& name) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].name == name) return static_cast<VertexId>(i);
    return std::nullopt;
  }

  VertexId require(const std::string& name) const {
    if (auto id = find(name)) return *id;
    throw ConfigError("unknown vertex '" + name + "'");
  }

  const Link* out_link(VertexId v, PortId port) const {
    for (const auto& l : links)
      if (l.from == v && l.from_port == port) return &l;
    return nullptr;
  }

  const Link* link_between(VertexId from, VertexId to) const {
    const Link* found = nullptr;
    for (const auto& l : links) {
      if (l.from == from && l.to == to) {
        if (found) throw ConfigError("multiple links between " + vertices[from].name + " and " + vertices[to].name);
        found = &l;
      }
    }
    return found;
  }

  bool is_switch(VertexId v) const { return vertices.at(v).kind == VertexKind::kSwitch; }
  const std::string& name(VertexId v) const { return vertices.at(v).name; }
};

// Resolves a flow's vertex path into its directed dataflow links.
inline std::vector<const Link*> path_links(const Topology& topo, const FlowSpec& flow) {
  std::vector<const Link*> out;
  for (std::size_t k = 0; k + 1 < flow.path.size(); ++k) {
    const Link* l = topo.link_between(flow.path[k], flow.path[k + 1]);
    if (!l)
      throw ConfigError("flow " + std::to_string(flow.id) + ": no link " + topo.name(flow.path[k]) + " -> " +
                        topo.name(flow.path[k + 1]));
    out.push_back(l);
  }
  return out;
}

inline void check_flow(const Topology& topo, const FlowSpec& flow) {
  const std::string id = "flow " + std::to_string(flow.id);
  if (flow.period == 0) throw ConfigError(id + ": period must be positive");
  if (flow.length_bytes == 0) throw ConfigError(id + ": length must be positive");
  if (flow.path.size() < 2) throw ConfigError(id + ": path needs at least two vertices");
  for (std::size_t i = 0; i < flow.path.size(); ++i) {
    if (flow.path[i] >= topo.vertices.size()) throw ConfigError(id + ": path references unknown vertex");
    for (std::size_t j = 0; j < i; ++j)
      if (flow.path[i] == flow.path[j]) throw ConfigError(id + ": path repeats vertex " + topo.name(flow.path[i]));
    const bool endpoint = i == 0 || i + 1 == flow.path.size();
    if (endpoint == topo.is_switch(flow.path[i]))
      throw ConfigError(id + ": path must run end-system, switches, end-system");
  }
  path_links(topo, flow);
}

// ---------------------------------------------------------------------------
// Forwarding tables

struct ScheduleRow {
  FlowId flow_id = 0;
  std::uint64_t sequence = 0;
  TimeNs period = 0;
  std::uint32_t length_bytes = 0;
  PortId input_port = kNoPort;
  PortId output_port = kNoPort;
  TimeNs arrival_start = 0;
  TimeNs arrival_end = 0;
  TimeNs offset = 0;
};

struct StaticRouteRow {
  std::uint32_t length_bytes = 0;
  PortId input_port = kNoPort;
  PortId output_port = kNoPort;
  friend bool operator==(const StaticRouteRow&, const StaticRouteRow&) = default;
};

struct SequenceRow {
  std::uint64_t sequence = 0;
  friend bool operator==(const SequenceRow&, const SequenceRow&) = default;
};

// Configured jitter of the hold extension. Negative and over-period values
// of the original field are represented by explicit modes.
struct JitterConfig {
  enum class Mode { kUnconstrained, kTtOnly, kBounded };
  Mode mode = Mode::kUnconstrained;
  TimeNs value = 0;

  static JitterConfig unconstrained() { return {}; }
  static JitterConfig tt_only() { return {Mode::kTtOnly, 0}; }
  static JitterConfig bounded(TimeNs j) { return {Mode::kBounded, j}; }
  friend bool operator==(const JitterConfig&, const JitterConfig&) = default;
};

struct FilterRow {
  std::uint64_t sequence = 0;
  JitterConfig jitter;
  bool enabled = false;
  friend bool operator==(const FilterRow&, const FilterRow&) = default;
};

using ScheduleTable = std::map<FlowId, ScheduleRow>;
using StaticRouteTable = std::map<FlowId, StaticRouteRow>;
using SequenceTable = std::map<FlowId, SequenceRow>;
using FilterTable = std::map<FlowId, FilterRow>;

inline ScheduleTable make_schedule_table(const std::vector<ScheduleRow>& rows) {
  ScheduleTable table;
  for (const auto& r : rows) {
    if (r.arrival_start > r.arrival_end)
      throw ConfigError("flow " + std::to_string(r.flow_id) + ": arrival-start after arrival-end");
    if (!table.emplace(r.flow_id, r).second)
      throw ConfigError("duplicate flow-id " + std::to_string(r.flow_id) + " in schedule table");
  }
  return table;
}

struct DerivedTables {
  StaticRouteTable routes;
  SequenceTable sequences;
  FilterTable filters;
};

inline DerivedTables derive_tables(const ScheduleTable& schedule) {
  DerivedTables out;
  for (const auto& [id, row] : schedule) {
    out.routes.emplace(id, StaticRouteRow{row.length_bytes, row.input_port, row.output_port});
    out.sequences.emplace(id, SequenceRow{0});
    out.filters.emplace(id, FilterRow{0, JitterConfig::unconstrained(), false});
  }
  return out;
}

inline TimeNs gcd_time(TimeNs a, TimeNs b) { return std::gcd(a, b); }

// Exact LCM; throws once the result no longer fits in 64 bits.
inline TimeNs checked_lcm(TimeNs a, TimeNs b) {
  if (a == 0 || b == 0) throw ConfigError("period must be positive");
  const TimeNs g = std::gcd(a, b);
  const TimeNs q = a / g;
  if (q > std::numeric_limits<TimeNs>::max() / b) throw ConfigError("hyperperiod exceeds 64 bits");
  return q * b;
}

}  // namespace swa
