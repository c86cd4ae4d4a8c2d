#pragma once

// Deterministic discrete-event simulator of a TT network of SWA switches.
//
// Egress model: each output port has a TT lane that fires exactly at the
// scheduled instants and a BE lane with strict-priority FIFO queues. A BE
// frame may start only if it ends before the next TT slot reserved on the
// port (non-preemptive guard band). A copy is exempt from the slots of its
// own flow: it carries the same frame the slot is reserved for. At switches
// without a filter the TT frame still leaves on time, so copy and TT frame
// may share the link for a while; the two lanes are not serialized.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "swa/core_model.hpp"
#include "swa/switch_pipeline.hpp"

namespace swa {

inline constexpr FlowId kBackgroundFlow = 0;

enum class SyncError { kNone, kUniform };

struct DisturbanceSpec {
  enum class Pattern { kBroadcast, kUnicast };
  Pattern pattern = Pattern::kBroadcast;
  VertexId source = 0;
  std::vector<VertexId> route;  // unicast only: source ... destination
  std::uint32_t length_bytes = 64;
  std::uint64_t rate_mbps = 0;
  unsigned priority = 1;
};

struct FaultSpec {
  VertexId switch_id = 0;
  FlowId flow_id = 0;
  std::set<std::uint64_t> sequences;
  bool all = false;
};

struct SimConfig {
  Topology topology;
  std::vector<FlowSpec> flows;
  std::vector<LinkSchedule> schedule;

  bool copies_enabled = true;
  bool restore_iscopy = false;
  unsigned priority_levels = 2;
  unsigned copy_priority = 1;
  std::size_t queue_capacity = 16;
  std::map<FlowId, JitterConfig> jitter;         // applied at each flow's last switch
  std::set<std::pair<VertexId, FlowId>> extra_filters;  // filters at interior switches
  std::vector<DisturbanceSpec> disturbances;
  std::vector<FaultSpec> faults;
  SyncError sync_error = SyncError::kNone;

  std::uint64_t seed = 1;
  std::uint64_t hyperperiods = 200;
  std::uint64_t warmup_hyperperiods = 2;
  bool trace = false;
};

// ---------------------------------------------------------------------------
// Disturbance stream

// Frames of `length_bytes` at an exact average of `rate_mbps`. Slot k spans
// [floor(k*S), floor((k+1)*S)) with S the mean spacing; each frame starts at
// a seeded random phase inside its slot that still leaves room to finish.
class DisturbanceStream {
 public:
  DisturbanceStream(std::uint32_t length_bytes, std::uint64_t rate_mbps, Rate line, std::uint64_t seed,
                    TimeNs start = 0)
      : rate_mbps_(rate_mbps), start_(start), rng_(seed) {
    tx_ = transmission_time(length_bytes, line);
    // spacing in ns = (bits on the wire) * 1000 / rate_mbps
    spacing_num_ = (length_bytes + kWireOverheadBytes) * 8 * 1000;
    if (rate_mbps_ > 0 && ceil_div(spacing_num_, rate_mbps_) < tx_)
      throw ConfigError("disturbance rate exceeds line rate");
  }

  bool empty() const { return rate_mbps_ == 0; }
  TimeNs transmission() const { return tx_; }
  TimeNs mean_spacing_num() const { return spacing_num_; }

  TimeNs next() {
    const TimeNs lo = slot_start(index_);
    const TimeNs hi = slot_start(index_ + 1);
    ++index_;
    const TimeNs slack = hi - lo > tx_ ? hi - lo - tx_ : 0;
    const TimeNs phase = slack == 0 ? 0 : rng_() % (slack + 1);
    return start_ + lo + phase;
  }

 private:
  TimeNs slot_start(std::uint64_t k) const { return static_cast<TimeNs>((static_cast<unsigned __int128>(k) * spacing_num_) / rate_mbps_); }

  std::uint64_t rate_mbps_;
  TimeNs start_;
  TimeNs tx_ = 0;
  std::uint64_t spacing_num_ = 0;
  std::uint64_t index_ = 0;
  std::mt19937_64 rng_;
};

inline std::vector<TimeNs> generate_disturbance(const DisturbanceSpec& spec, Rate line, std::uint64_t seed,
                                                TimeNs horizon) {
  std::vector<TimeNs> out;
  if (spec.rate_mbps == 0) return out;
  DisturbanceStream s(spec.length_bytes, spec.rate_mbps, line, seed);
  for (TimeNs t = s.next(); t < horizon; t = s.next()) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct DeliveryRecord {
  FlowId flow_id = 0;
  std::uint64_t sequence = 0;
  TimeNs sent = 0;
  TimeNs received = 0;  // first bit at the destination
  bool copy = false;
  TimeNs latency() const { return received - sent; }
};

struct TtDeparture {
  VertexId vertex = 0;
  FlowId flow_id = 0;
  std::uint64_t sequence = 0;
  TimeNs time = 0;
  friend bool operator==(const TtDeparture&, const TtDeparture&) = default;
};

struct TraceRecord {
  TimeNs time = 0;
  std::string vertex;
  FlowId flow_id = 0;
  std::uint64_t sequence = 0;
  bool copy = false;
  std::string action;
  std::string reason;
};

using ReasonCounts = std::array<std::uint64_t, kDropReasonCount>;

struct FlowStats {
  FlowId flow_id = 0;
  TimeNs lat_min = 0;
  TimeNs lat_avg = 0;
  TimeNs lat_max = 0;
  TimeNs jitter = 0;
  std::uint64_t delivered = 0;
  std::uint64_t delivered_copies = 0;
  ReasonCounts drops{};
  std::uint64_t order_violations = 0;
  std::uint64_t max_copies = 0;
  std::uint64_t gap_drops = 0;  // copy m+1 rejected because m never passed
};

struct ScenarioResult {
  std::vector<FlowStats> flows;
  std::map<std::pair<std::string, FlowId>, ReasonCounts> drops_by_vertex;
  std::vector<DeliveryRecord> deliveries;  // measured window only
  std::vector<TtDeparture> tt_departures;
  std::map<std::string, std::uint64_t> background_received;  // per end-system
  std::vector<std::string> faults;
  std::vector<TraceRecord> trace;
  std::uint64_t events = 0;

  const FlowStats& flow(FlowId id) const {
    for (const auto& f : flows)
      if (f.flow_id == id) return f;
    throw std::out_of_range("no stats for flow " + std::to_string(id));
  }

  std::uint64_t total_drops(DropReason r) const {
    std::uint64_t n = 0;
    for (const auto& [k, c] : drops_by_vertex) n += c[static_cast<std::size_t>(r)];
    return n;
  }
};

// ---------------------------------------------------------------------------

class Simulation {
 public:
  explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)) { build(); }

  void inject_fault(VertexId sw, FlowId flow, std::set<std::uint64_t> sequences) {
    if (started_) throw std::logic_error("inject_fault after start");
    auto it = switches_.find(sw);
    if (it == switches_.end()) throw ConfigError("fault target is not a switch");
    it->second.inject_fault(flow, std::move(sequences));
  }

  void inject_fault_all(VertexId sw, FlowId flow) {
    if (started_) throw std::logic_error("inject_fault after start");
    auto it = switches_.find(sw);
    if (it == switches_.end()) throw ConfigError("fault target is not a switch");
    it->second.inject_fault_all(flow);
  }

  const SwitchState& switch_state(VertexId v) const { return switches_.at(v); }

  ScenarioResult run();

 private:
  enum class Kind : std::uint8_t { kTimerFire, kIngress, kTxComplete, kTtSource, kDisturbance, kHoldRelease, kWake };

  struct Event {
    TimeNs time = 0;
    std::uint8_t rank = 1;
    std::uint64_t seqno = 0;
    Kind kind = Kind::kWake;
    VertexId vertex = 0;
    PortId port = 0;
    std::uint64_t index = 0;  // flow index, disturbance index or period index
    FlowId flow = 0;
    Frame frame;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.rank != b.rank) return a.rank > b.rank;
      return a.seqno > b.seqno;
    }
  };

  struct Gate {
    FlowId flow;
    TimeNs offset;  // reduced modulo period
    TimeNs period;
    TimeNs length;
  };

  struct Queued {
    Frame frame;
  };

  struct Port {
    VertexId vertex = 0;
    PortId port = 0;
    const Link* link = nullptr;
    std::vector<std::deque<Queued>> queues;
    std::vector<Gate> gates;
    TimeNs be_busy_until = 0;
    FlowId be_flow = kBackgroundFlow;
    bool be_is_copy = false;
    TimeNs tt_busy_until = 0;
    TimeNs wake_at = kNever;
  };

  struct CopyTicket {
    FlowId flow;
    std::uint64_t sequence;
    VertexId next;
  };

  void build();
  void push(Event e) {
    e.seqno = next_seqno_++;
    events_.push(std::move(e));
  }
  Port& port(VertexId v, PortId p) { return ports_.at({v, p}); }

  void on_ingress(const Event& e);
  void on_timer(const Event& e);
  void on_tt_source(const Event& e);
  void on_disturbance(const Event& e);
  void on_hold_release(const Event& e);

  void enqueue(Port& p, const Frame& f, unsigned priority, TimeNs now);
  void try_transmit(Port& p, TimeNs now);
  std::optional<TimeNs> earliest_start(const Port& p, const Frame& f, TimeNs now) const;
  void send_be(Port& p, const Frame& f, TimeNs now);
  void send_tt(Port& p, const Frame& f, TimeNs now);
  void deliver_to_link(const Port& p, Frame f, TimeNs start, TimeNs tx);
  void forward_background(VertexId v, const Frame& f, TimeNs now);

  void register_copy(const Frame& f, VertexId next);
  void unregister_copy(const Frame& f);
  std::uint64_t live_copies(FlowId flow, std::uint64_t seq) const;

  void drop(VertexId v, const Frame& f, DropReason r, TimeNs now, std::uint64_t table_sequence = 0);
  void trace(TimeNs now, VertexId v, const Frame& f, const char* action, std::string_view reason = {});
  void fault(TimeNs now, const std::string& what);
  TimeNs sync_offset(VertexId v, FlowId flow, std::uint64_t seq) const;
  std::size_t flow_index(FlowId id) const { return flow_index_.at(id); }

  SimConfig cfg_;
  bool started_ = false;
  TimeNs hyper_ = 1;
  TimeNs end_ = 0;
  TimeNs warmup_end_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t next_seqno_ = 0;
  std::uint64_t next_uid_ = 1;

  std::map<VertexId, SwitchState> switches_;
  std::map<std::pair<VertexId, PortId>, Port> ports_;
  std::map<FlowId, std::size_t> flow_index_;
  std::vector<LinkSchedule> source_rows_;  // per flow index
  std::vector<VertexId> destination_;      // per flow index
  std::vector<DisturbanceStream> streams_;

  std::unordered_map<std::uint64_t, CopyTicket> tickets_;
  std::map<std::pair<FlowId, std::uint64_t>, std::set<std::uint64_t>> copies_by_frame_;

  std::vector<std::uint64_t> last_delivered_;
  std::set<std::pair<FlowId, std::uint64_t>> delivered_set_;
  ScenarioResult result_;
  std::vector<std::uint64_t> sum_latency_;
};

// ---------------------------------------------------------------------------

inline void Simulation::build() {
  const Topology& topo = cfg_.topology;
  if (cfg_.priority_levels < 1) throw ConfigError("need at least one priority level");
  if (cfg_.copy_priority >= cfg_.priority_levels) throw ConfigError("copy priority outside priority levels");

  for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
    const FlowSpec& f = cfg_.flows[i];
    if (f.id == kBackgroundFlow) throw ConfigError("flow-id 0 is reserved");
    check_flow(topo, f);
    if (!flow_index_.emplace(f.id, i).second) throw ConfigError("duplicate flow-id " + std::to_string(f.id));
    hyper_ = checked_lcm(hyper_, f.period);
  }
  if (cfg_.hyperperiods <= cfg_.warmup_hyperperiods) throw ConfigError("run shorter than warm-up");
  end_ = hyper_ * cfg_.hyperperiods;
  warmup_end_ = hyper_ * cfg_.warmup_hyperperiods;

  for (const auto& l : topo.links) {
    Port p;
    p.vertex = l.from;
    p.port = l.from_port;
    p.link = &l;
    p.queues.resize(cfg_.priority_levels);
    ports_.emplace(std::make_pair(l.from, l.from_port), std::move(p));
  }

  std::map<VertexId, std::vector<ScheduleRow>> per_switch;
  source_rows_.resize(cfg_.flows.size());
  destination_.resize(cfg_.flows.size());
  std::vector<bool> has_source(cfg_.flows.size(), false);
  const TimeNs slip = cfg_.sync_error == SyncError::kUniform ? 2 * topo.sync_accuracy : 0;
  for (const auto& r : cfg_.schedule) {
    const auto it = flow_index_.find(r.flow_id);
    if (it == flow_index_.end()) throw ConfigError("schedule row for unknown flow " + std::to_string(r.flow_id));
    const FlowSpec& f = cfg_.flows[it->second];
    const Link* out = topo.out_link(r.vertex, r.output_port);
    if (!out) throw ConfigError("schedule row uses unconnected port on " + topo.name(r.vertex));
    auto& port = ports_.at({r.vertex, r.output_port});
    port.gates.push_back(Gate{f.id, r.offset % f.period, f.period, transmission_time(f.length_bytes, out->rate) + slip});
    if (topo.is_switch(r.vertex)) {
      per_switch[r.vertex].push_back(ScheduleRow{f.id, 0, f.period, f.length_bytes, r.input_port, r.output_port,
                                                 r.arrival_start, r.arrival_end, r.offset});
    } else if (r.vertex == f.path.front()) {
      source_rows_[it->second] = r;
      has_source[it->second] = true;
    }
  }
  for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
    const FlowSpec& f = cfg_.flows[i];
    if (!has_source[i]) throw ConfigError("flow " + std::to_string(f.id) + " has no source schedule row");
    destination_[i] = f.path.back();
  }

  const SwitchConfig sc{cfg_.copies_enabled, cfg_.restore_iscopy};
  for (auto& [v, rows] : per_switch) switches_.emplace(v, SwitchState(v, make_schedule_table(rows), sc));

  for (const auto& f : cfg_.flows) {
    const VertexId last = f.path[f.path.size() - 2];
    auto sw = switches_.find(last);
    if (sw == switches_.end()) throw ConfigError("flow " + std::to_string(f.id) + " not scheduled on its last switch");
    const auto j = cfg_.jitter.find(f.id);
    sw->second.enable_filter(f.id, j == cfg_.jitter.end() ? JitterConfig::unconstrained() : j->second);
  }
  for (const auto& [v, flow] : cfg_.extra_filters) {
    auto sw = switches_.find(v);
    if (sw == switches_.end()) throw ConfigError("filter on a vertex that is not a scheduled switch");
    const auto j = cfg_.jitter.find(flow);
    sw->second.enable_filter(flow, j == cfg_.jitter.end() ? JitterConfig::unconstrained() : j->second);
  }

  for (const auto& fs : cfg_.faults) {
    auto sw = switches_.find(fs.switch_id);
    if (sw == switches_.end()) throw ConfigError("fault target is not a scheduled switch");
    if (fs.all)
      sw->second.inject_fault_all(fs.flow_id);
    else
      sw->second.inject_fault(fs.flow_id, fs.sequences);
  }

  for (std::size_t d = 0; d < cfg_.disturbances.size(); ++d) {
    const auto& spec = cfg_.disturbances[d];
    if (spec.source >= topo.vertices.size() || topo.is_switch(spec.source))
      throw ConfigError("disturbance source must be an end-system");
    if (spec.priority >= cfg_.priority_levels) throw ConfigError("disturbance priority outside priority levels");
    const Link* first = nullptr;
    if (spec.pattern == DisturbanceSpec::Pattern::kUnicast) {
      if (spec.route.size() < 2 || spec.route.front() != spec.source)
        throw ConfigError("unicast disturbance route must start at its source");
      for (std::size_t k = 0; k + 1 < spec.route.size(); ++k)
        if (!topo.link_between(spec.route[k], spec.route[k + 1])) throw ConfigError("disturbance route has no link");
      first = topo.link_between(spec.route[0], spec.route[1]);
    } else {
      for (const auto& l : topo.links)
        if (l.from == spec.source) {
          first = &l;
          break;
        }
      if (!first) throw ConfigError("disturbance source has no outgoing link");
    }
    streams_.emplace_back(spec.length_bytes, spec.rate_mbps, first->rate, cfg_.seed * 0x9E3779B97F4A7C15ULL + d + 1);
  }

  last_delivered_.assign(cfg_.flows.size(), 0);
  sum_latency_.assign(cfg_.flows.size(), 0);
  result_.flows.resize(cfg_.flows.size());
  for (std::size_t i = 0; i < cfg_.flows.size(); ++i) result_.flows[i].flow_id = cfg_.flows[i].id;
}

inline ScenarioResult Simulation::run() {
  if (started_) throw std::logic_error("simulation already ran");
  started_ = true;

  for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
    Event e;
    e.time = source_rows_[i].offset;
    e.kind = Kind::kTtSource;
    e.index = i;
    e.flow = cfg_.flows[i].id;
    e.frame.sequence = 1;
    push(e);
  }
  for (std::size_t d = 0; d < streams_.size(); ++d) {
    if (streams_[d].empty()) continue;
    Event e;
    e.time = streams_[d].next();
    e.kind = Kind::kDisturbance;
    e.index = d;
    if (e.time < end_) push(e);
  }

  const TimeNs horizon = end_ + hyper_;
  while (!events_.empty()) {
    Event e = events_.top();
    events_.pop();
    if (e.time > horizon) break;
    ++result_.events;
    switch (e.kind) {
      case Kind::kTimerFire: on_timer(e); break;
      case Kind::kIngress: on_ingress(e); break;
      case Kind::kTxComplete:
      case Kind::kWake: {
        Port& p = port(e.vertex, e.port);
        if (e.kind == Kind::kWake && p.wake_at == e.time) p.wake_at = kNever;
        try_transmit(p, e.time);
        break;
      }
      case Kind::kTtSource: on_tt_source(e); break;
      case Kind::kDisturbance: on_disturbance(e); break;
      case Kind::kHoldRelease: on_hold_release(e); break;
    }
  }

  for (std::size_t i = 0; i < cfg_.flows.size(); ++i) {
    FlowStats& s = result_.flows[i];
    if (s.delivered > 0) {
      s.lat_avg = sum_latency_[i] / s.delivered;
      s.jitter = s.lat_max - s.lat_min;
    }
    for (const auto& [key, counts] : result_.drops_by_vertex)
      if (key.second == s.flow_id)
        for (std::size_t r = 0; r < kDropReasonCount; ++r) s.drops[r] += counts[r];
  }
  return std::move(result_);
}

inline void Simulation::on_tt_source(const Event& e) {
  const FlowSpec& f = cfg_.flows[e.index];
  const LinkSchedule& row = source_rows_[e.index];
  Frame fr;
  fr.flow_id = f.id;
  fr.sequence = e.frame.sequence;
  fr.length_bytes = f.length_bytes;
  fr.src_send_time = e.time + cfg_.topology.vertices[row.vertex].processing_delay;
  fr.uid = next_uid_++;
  send_tt(port(row.vertex, row.output_port), fr, e.time);

  const TimeNs next = e.time + f.period;
  if (next < end_) {
    Event n = e;
    n.time = next;
    n.frame.sequence = e.frame.sequence + 1;
    push(n);
  }
}

inline void Simulation::on_disturbance(const Event& e) {
  const auto& spec = cfg_.disturbances[e.index];
  Frame fr;
  fr.flow_id = kBackgroundFlow;
  fr.background = true;
  fr.length_bytes = spec.length_bytes;
  fr.uid = next_uid_++;
  fr.src_send_time = e.time;
  fr.route = static_cast<std::uint32_t>(e.index);
  fr.hop = 0;
  if (spec.pattern == DisturbanceSpec::Pattern::kUnicast) {
    const Link* l = cfg_.topology.link_between(spec.route[0], spec.route[1]);
    enqueue(port(l->from, l->from_port), fr, spec.priority, e.time);
  } else {
    for (const auto& l : cfg_.topology.links)
      if (l.from == spec.source) enqueue(port(l.from, l.from_port), fr, spec.priority, e.time);
  }
  Event n = e;
  n.time = streams_[e.index].next();
  if (n.time < end_) push(n);
}

inline void Simulation::forward_background(VertexId v, const Frame& f, TimeNs now) {
  const Topology& topo = cfg_.topology;
  const auto& spec = cfg_.disturbances.at(f.route);
  Frame out = f;
  ++out.hop;
  if (spec.pattern == DisturbanceSpec::Pattern::kUnicast) {
    if (out.hop + 1 >= spec.route.size() || spec.route[out.hop] != v) {
      fault(now, "background frame off its route at " + topo.name(v));
      return;
    }
    const Link* l = topo.link_between(v, spec.route[out.hop + 1]);
    enqueue(port(l->from, l->from_port), out, spec.priority, now);
    return;
  }
  if (out.hop > topo.vertices.size()) return;  // flood horizon
  for (const auto& l : topo.links)
    if (l.from == v && l.from_port != f.input_port) enqueue(port(l.from, l.from_port), out, spec.priority, now);
}

inline void Simulation::on_ingress(const Event& e) {
  const VertexId v = e.vertex;
  const Frame& f = e.frame;
  if (f.iscopy) unregister_copy(f);

  if (f.background) {
    if (cfg_.topology.is_switch(v))
      forward_background(v, f, e.time);
    else
      ++result_.background_received[cfg_.topology.name(v)];
    return;
  }

  if (!cfg_.topology.is_switch(v)) {
    const std::size_t i = flow_index(f.flow_id);
    if (destination_[i] != v) return;
    trace(e.time, v, f, "receive");
    if (f.sequence <= last_delivered_[i]) {
      ++result_.flows[i].order_violations;
      fault(e.time, "flow " + std::to_string(f.flow_id) + " delivered sequence " + std::to_string(f.sequence) +
                        " after " + std::to_string(last_delivered_[i]));
    }
    last_delivered_[i] = std::max(last_delivered_[i], f.sequence);
    if (f.src_send_time >= warmup_end_ && f.src_send_time < end_) {
      FlowStats& s = result_.flows[i];
      const TimeNs lat = f.arrival_time - f.src_send_time;
      if (s.delivered == 0 || lat < s.lat_min) s.lat_min = lat;
      if (s.delivered == 0 || lat > s.lat_max) s.lat_max = lat;
      ++s.delivered;
      if (f.iscopy) ++s.delivered_copies;
      sum_latency_[i] += lat;
      result_.deliveries.push_back({f.flow_id, f.sequence, f.src_send_time, f.arrival_time, f.iscopy});
    }
    return;
  }

  SwitchState& sw = switches_.at(v);
  const Actions actions = sw.on_ingress(f, e.time);
  for (const auto& a : actions) {
    if (const auto* t = std::get_if<SetTimer>(&a)) {
      trace(e.time, v, t->frame, "accept");
      Event te;
      te.time = t->fire_time;
      te.rank = 0;
      te.kind = Kind::kTimerFire;
      te.vertex = v;
      te.flow = t->flow_id;
      te.index = t->period_index;
      if (te.time < e.time) {
        fault(e.time, "TT frame of flow " + std::to_string(t->flow_id) + " accepted after its departure at " +
                          cfg_.topology.name(v));
        te.time = e.time;
      }
      push(te);
    } else if (const auto* q = std::get_if<EnqueueEgress>(&a)) {
      Frame c = q->frame;
      c.uid = next_uid_++;
      Port& p = port(v, q->port);
      register_copy(c, p.link->to);
      const auto live = live_copies(c.flow_id, c.sequence);
      FlowStats& s = result_.flows[flow_index(c.flow_id)];
      s.max_copies = std::max<std::uint64_t>(s.max_copies, live);
      if (live > 1)
        fault(e.time, "flow " + std::to_string(c.flow_id) + " sequence " + std::to_string(c.sequence) + " has " +
                          std::to_string(live) + " live copies");
      trace(e.time, v, c, "enqueue");
      enqueue(p, c, cfg_.copy_priority, e.time);
    } else if (const auto* d = std::get_if<Drop>(&a)) {
      if (d->reason == DropReason::kSequenceStale && d->frame.iscopy && d->frame.sequence > d->table_sequence + 1)
        ++result_.flows[flow_index(d->frame.flow_id)].gap_drops;
      drop(v, d->frame, d->reason, e.time, d->table_sequence);
    }
  }
}

inline void Simulation::on_timer(const Event& e) {
  SwitchState& sw = switches_.at(e.vertex);
  const PipelineAction a = sw.on_timer(e.flow, e.index, e.time);
  if (const auto* q = std::get_if<EnqueueEgress>(&a)) {
    send_tt(port(e.vertex, q->port), q->frame, e.time);
  } else if (const auto* d = std::get_if<Deliver>(&a)) {
    send_tt(port(e.vertex, d->port), d->frame, e.time);
  } else if (const auto* dr = std::get_if<Drop>(&a)) {
    drop(e.vertex, dr->frame, dr->reason, e.time, dr->table_sequence);
  }
}

inline void Simulation::on_hold_release(const Event& e) {
  Port& p = port(e.vertex, e.port);
  trace(e.time, e.vertex, e.frame, "release");
  enqueue(p, e.frame, 0, e.time);
}

inline void Simulation::enqueue(Port& p, const Frame& f, unsigned priority, TimeNs now) {
  auto& q = p.queues.at(priority);
  if (q.size() >= cfg_.queue_capacity) {
    if (f.iscopy) unregister_copy(f);
    drop(p.vertex, f, DropReason::kQueueOverflow, now);
    return;
  }
  q.push_back(Queued{f});
  try_transmit(p, now);
}

// Earliest instant >= now at which `f` can start on the BE lane without
// running into a TT slot that it is not exempt from.
inline std::optional<TimeNs> Simulation::earliest_start(const Port& p, const Frame& f, TimeNs now) const {
  const TimeNs tx = transmission_time(f.length_bytes, p.link->rate);
  TimeNs t = now;
  for (int guard = 0; guard < 64; ++guard) {
    bool moved = false;
    for (const Gate& g : p.gates) {
      if (f.iscopy && g.flow == f.flow_id) continue;
      // slot in progress at t, else the next one
      TimeNs slot = g.offset;
      if (t >= g.offset) slot = g.offset + ((t - g.offset) / g.period) * g.period;
      if (slot <= t && t < slot + g.length) {
        t = slot + g.length;
        moved = true;
        continue;
      }
      if (slot <= t) slot += g.period;
      if (t + tx > slot) {
        t = slot + g.length;
        moved = true;
      }
    }
    if (!moved) return t;
  }
  return std::nullopt;
}

inline void Simulation::try_transmit(Port& p, TimeNs now) {
  if (p.be_busy_until > now) return;
  const bool is_switch = cfg_.topology.is_switch(p.vertex);
  TimeNs wake = kNever;
  for (;;) {
    bool sent = false;
    bool retry = false;
    wake = kNever;
    for (auto& q : p.queues) {
      if (q.empty()) continue;
      const Frame& head = q.front().frame;
      const auto start = earliest_start(p, head, now);
      if (!start) {
        fault(now, "no admissible transmission start on " + cfg_.topology.name(p.vertex));
        q.pop_front();
        retry = true;
        break;
      }
      if (*start > now) {
        wake = std::min(wake, *start);
        continue;
      }
      Frame f = head;
      q.pop_front();
      if (f.iscopy && is_switch) {
        const PipelineAction a = switches_.at(p.vertex).on_transmit(f, p.port, now);
        if (const auto* h = std::get_if<HoldUntil>(&a)) {
          trace(now, p.vertex, f, "hold");
          Event he;
          he.time = h->time;
          he.kind = Kind::kHoldRelease;
          he.vertex = p.vertex;
          he.port = p.port;
          he.frame = f;
          push(he);
          retry = true;
          break;
        }
        if (const auto* d = std::get_if<Drop>(&a)) {
          unregister_copy(f);
          drop(p.vertex, d->frame, d->reason, now, d->table_sequence);
          retry = true;
          break;
        }
        if (const auto* dl = std::get_if<Deliver>(&a)) {
          const auto uid = f.uid;
          f = dl->frame;
          f.uid = uid;
        }
      }
      send_be(p, f, now);
      sent = true;
      break;
    }
    if (sent) return;
    if (!retry) break;
  }
  if (wake != kNever && wake < p.wake_at) {
    p.wake_at = wake;
    Event w;
    w.time = wake;
    w.kind = Kind::kWake;
    w.vertex = p.vertex;
    w.port = p.port;
    push(w);
  }
}

inline void Simulation::deliver_to_link(const Port& p, Frame f, TimeNs start, TimeNs tx) {
  const TimeNs first_bit = start + cfg_.topology.vertices[p.vertex].processing_delay + p.link->delay;
  f.arrival_time = first_bit;
  f.input_port = p.link->to_port;
  Event in;
  in.time = first_bit + tx;
  in.kind = Kind::kIngress;
  in.vertex = p.link->to;
  in.frame = std::move(f);
  push(std::move(in));
}

inline void Simulation::send_be(Port& p, const Frame& f, TimeNs now) {
  const TimeNs tx = transmission_time(f.length_bytes, p.link->rate);
  p.be_busy_until = now + tx;
  p.be_flow = f.flow_id;
  p.be_is_copy = f.iscopy;
  trace(now, p.vertex, f, f.background ? "send-be" : "send-copy");
  Event done;
  done.time = now + tx;
  done.kind = Kind::kTxComplete;
  done.vertex = p.vertex;
  done.port = p.port;
  push(done);
  deliver_to_link(p, f, now, tx);
}

inline void Simulation::send_tt(Port& p, const Frame& f, TimeNs now) {
  const TimeNs tx = transmission_time(f.length_bytes, p.link->rate);
  const TimeNs start = now + (cfg_.topology.is_switch(p.vertex) ? sync_offset(p.vertex, f.flow_id, f.sequence) : 0);
  if (start < p.tt_busy_until)
    fault(now, "TT transmissions overlap on " + cfg_.topology.name(p.vertex) + ":" + std::to_string(p.port));
  if (p.be_busy_until > start && !(p.be_is_copy && p.be_flow == f.flow_id))
    fault(now, "guard band breached on " + cfg_.topology.name(p.vertex) + ":" + std::to_string(p.port));
  p.tt_busy_until = start + tx;
  result_.tt_departures.push_back({p.vertex, f.flow_id, f.sequence, start});
  trace(start, p.vertex, f, "send-tt");
  deliver_to_link(p, f, start, tx);
}

inline void Simulation::register_copy(const Frame& f, VertexId next) {
  tickets_[f.uid] = CopyTicket{f.flow_id, f.sequence, next};
  copies_by_frame_[{f.flow_id, f.sequence}].insert(f.uid);
}

inline void Simulation::unregister_copy(const Frame& f) {
  const auto it = tickets_.find(f.uid);
  if (it == tickets_.end()) return;
  const auto key = std::make_pair(it->second.flow, it->second.sequence);
  auto s = copies_by_frame_.find(key);
  if (s != copies_by_frame_.end()) {
    s->second.erase(f.uid);
    if (s->second.empty()) copies_by_frame_.erase(s);
  }
  tickets_.erase(it);
}

// Copies that can still pass the sequence check of the switch they head to.
// A copy bound for a switch that has already seen this sequence is doomed and
// not counted.
inline std::uint64_t Simulation::live_copies(FlowId flow, std::uint64_t seq) const {
  const auto s = copies_by_frame_.find({flow, seq});
  if (s == copies_by_frame_.end()) return 0;
  std::uint64_t n = 0;
  for (const auto uid : s->second) {
    const CopyTicket& t = tickets_.at(uid);
    const auto sw = switches_.find(t.next);
    if (sw == switches_.end()) {
      ++n;
      continue;
    }
    const auto& seqs = sw->second.sequences();
    const auto row = seqs.find(flow);
    if (row == seqs.end() || row->second.sequence < seq) ++n;
  }
  return n;
}

inline void Simulation::drop(VertexId v, const Frame& f, DropReason r, TimeNs now, std::uint64_t table_sequence) {
  (void)table_sequence;
  const FlowId flow = f.background ? kBackgroundFlow : f.flow_id;
  ++result_.drops_by_vertex[{cfg_.topology.name(v), flow}][static_cast<std::size_t>(r)];
  trace(now, v, f, "drop", to_string(r));
}

inline void Simulation::trace(TimeNs now, VertexId v, const Frame& f, const char* action, std::string_view reason) {
  if (!cfg_.trace) return;
  result_.trace.push_back(
      {now, cfg_.topology.name(v), f.background ? kBackgroundFlow : f.flow_id, f.sequence, f.iscopy, action, std::string(reason)});
}

inline void Simulation::fault(TimeNs now, const std::string& what) {
  if (result_.faults.size() < 1000) result_.faults.push_back("t=" + std::to_string(now) + " " + what);
}

// Deterministic per-departure clock slip in [0, 2*sync_accuracy].
inline TimeNs Simulation::sync_offset(VertexId v, FlowId flow, std::uint64_t seq) const {
  if (cfg_.sync_error == SyncError::kNone || cfg_.topology.sync_accuracy == 0) return 0;
  std::uint64_t x = cfg_.seed ^ (static_cast<std::uint64_t>(v) << 48) ^ (static_cast<std::uint64_t>(flow) << 32) ^ seq;
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x % (2 * cfg_.topology.sync_accuracy + 1);
}

}  // namespace swa
