#pragma once

// Per-switch forwarding state machine: classifier, BE process, TT process,
// sequence checking and arrival filtering, plus the jitter-hold extension.
// Every stage is a deterministic (state, frame) -> actions transition.

#include <array>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "swa/core_model.hpp"

namespace swa {

enum class DropReason : std::uint8_t {
  kSequenceStale,
  kWindowMiss,
  kRouteMismatch,
  kFilterLate,
  kQueueOverflow,
  kFaultInjected,
};
inline constexpr std::size_t kDropReasonCount = 6;

inline constexpr std::array<std::string_view, kDropReasonCount> kDropReasonNames = {
    "sequence-stale", "window-miss", "route-mismatch", "filter-late", "queue-overflow", "fault-injected"};

inline std::string_view to_string(DropReason r) { return kDropReasonNames[static_cast<std::size_t>(r)]; }

enum class TrafficClass : std::uint8_t { kTimeTriggered, kCopy };

struct EnqueueEgress {
  PortId port = kNoPort;
  Frame frame;
  TrafficClass cls = TrafficClass::kCopy;
};

struct Drop {
  Frame frame;
  DropReason reason = DropReason::kRouteMismatch;
  std::uint64_t table_sequence = 0;  // table value the frame was checked against
};

struct SetTimer {
  TimeNs fire_time = 0;
  FlowId flow_id = 0;
  std::uint64_t period_index = 0;
  Frame frame;
};

struct HoldUntil {
  TimeNs time = 0;
  Frame frame;
};

struct Deliver {
  PortId port = kNoPort;
  Frame frame;
};

using PipelineAction = std::variant<EnqueueEgress, Drop, SetTimer, HoldUntil, Deliver>;
using Actions = std::vector<PipelineAction>;

// ---------------------------------------------------------------------------
// Stage functions

struct ClassifierOutput {
  std::vector<Frame> tts;
  std::vector<Frame> copies;
};

// Every TT frame is cloned; the clone joins the copy stream behind any copies
// that arrived earlier, so FIFO ingress order is kept on both outputs.
inline ClassifierOutput classify(std::span<const Frame> frames, bool cloning_enabled = true) {
  ClassifierOutput out;
  for (const Frame& f : frames) {
    if (f.iscopy) {
      out.copies.push_back(f);
    } else {
      out.tts.push_back(f);
      if (cloning_enabled) {
        Frame clone = f;
        clone.iscopy = true;
        out.copies.push_back(clone);
      }
    }
  }
  return out;
}

inline ClassifierOutput classify(const Frame& frame, bool cloning_enabled = true) {
  return classify(std::span<const Frame>(&frame, 1), cloning_enabled);
}

inline PipelineAction be_process(const Frame& frame, const StaticRouteTable& routes) {
  const auto it = routes.find(frame.flow_id);
  if (it == routes.end() || it->second.length_bytes != frame.length_bytes ||
      it->second.input_port != frame.input_port)
    return Drop{frame, DropReason::kRouteMismatch, 0};
  return EnqueueEgress{it->second.output_port, frame, TrafficClass::kCopy};
}

// Strict successor rule for copies.
inline PipelineAction sequence_check(const Frame& frame, PortId port, SequenceTable& sequences) {
  auto it = sequences.find(frame.flow_id);
  if (it == sequences.end()) return Drop{frame, DropReason::kRouteMismatch, 0};
  if (frame.sequence != it->second.sequence + 1) return Drop{frame, DropReason::kSequenceStale, it->second.sequence};
  it->second.sequence = frame.sequence;
  return EnqueueEgress{port, frame, TrafficClass::kCopy};
}

// Period index of a frame arriving at `arrival` for a row whose window starts
// at `arrival_start`.
inline std::uint64_t period_index(TimeNs arrival, TimeNs arrival_start, TimeNs period) {
  return arrival <= arrival_start ? 0 : (arrival - arrival_start) / period;
}

// Admission half of the TT process: window, route and freshness checks.
inline PipelineAction tt_accept(const Frame& frame, const ScheduleTable& schedule) {
  const auto it = schedule.find(frame.flow_id);
  if (it == schedule.end()) return Drop{frame, DropReason::kRouteMismatch, 0};
  const ScheduleRow& row = it->second;
  if (row.length_bytes != frame.length_bytes || row.input_port != frame.input_port)
    return Drop{frame, DropReason::kRouteMismatch, row.sequence};
  const std::uint64_t m = period_index(frame.arrival_time, row.arrival_start, row.period);
  const TimeNs shift = m * row.period;
  if (frame.arrival_time < row.arrival_start + shift || frame.arrival_time > row.arrival_end + shift)
    return Drop{frame, DropReason::kWindowMiss, row.sequence};
  if (frame.sequence <= row.sequence) return Drop{frame, DropReason::kSequenceStale, row.sequence};
  return SetTimer{row.offset + shift, frame.flow_id, m, frame};
}

// Timer half of the TT process. Also restores the copy-path sequence table
// when the TT frame is ahead of it.
inline EnqueueEgress tt_fire(const Frame& frame, ScheduleTable& schedule, SequenceTable& sequences) {
  ScheduleRow& row = schedule.at(frame.flow_id);
  row.sequence = frame.sequence;
  auto& strow = sequences[frame.flow_id];
  if (frame.sequence > strow.sequence) strow.sequence = frame.sequence;
  return EnqueueEgress{row.output_port, frame, TrafficClass::kTimeTriggered};
}

inline Actions tt_process(const Frame& frame, ScheduleTable& schedule, SequenceTable& sequences, TimeNs now) {
  PipelineAction accepted = tt_accept(frame, schedule);
  if (!std::holds_alternative<SetTimer>(accepted)) return {accepted};
  const auto& timer = std::get<SetTimer>(accepted);
  if (now < timer.fire_time) return {accepted};
  return {accepted, tt_fire(frame, schedule, sequences)};
}

// Earliest scheduled departure of this flow at or after `now`, i.e. the TT
// instance a copy seen at `now` is racing against.
inline TimeNs next_departure(const ScheduleRow& row, TimeNs now) {
  if (now <= row.offset) return row.offset;
  return row.offset + ceil_div(now - row.offset, row.period) * row.period;
}

// First-arrival filter with the jitter hold. Copies that would leave earlier
// than (departure - jitter) are held; TT frames are never held.
inline PipelineAction arrival_filter(const Frame& frame, FilterTable& filters, const ScheduleTable& schedule,
                                     TimeNs now, PortId port, bool restore_iscopy = false) {
  auto it = filters.find(frame.flow_id);
  if (it == filters.end()) return Drop{frame, DropReason::kRouteMismatch, 0};
  FilterRow& row = it->second;
  if (frame.sequence <= row.sequence) return Drop{frame, DropReason::kFilterLate, row.sequence};
  if (frame.iscopy) {
    if (row.jitter.mode == JitterConfig::Mode::kTtOnly) return Drop{frame, DropReason::kFilterLate, row.sequence};
    if (row.jitter.mode == JitterConfig::Mode::kBounded) {
      const TimeNs departure = next_departure(schedule.at(frame.flow_id), now);
      const TimeNs release = departure > row.jitter.value ? departure - row.jitter.value : 0;
      if (now < release) return HoldUntil{release, frame};
    }
  }
  row.sequence = frame.sequence;
  Frame out = frame;
  if (restore_iscopy) out.iscopy = false;
  return Deliver{port, out};
}

// ---------------------------------------------------------------------------

struct SwitchConfig {
  bool cloning_enabled = true;
  bool restore_iscopy = false;
};

using DropCounters = std::map<FlowId, std::array<std::uint64_t, kDropReasonCount>>;

class SwitchState {
 public:
  SwitchState(VertexId id, ScheduleTable schedule, SwitchConfig config = {})
      : switch_id_(id), schedule_(std::move(schedule)), config_(config) {
    auto derived = derive_tables(schedule_);
    routes_ = std::move(derived.routes);
    sequences_ = std::move(derived.sequences);
    filters_ = std::move(derived.filters);
  }

  VertexId id() const { return switch_id_; }
  const ScheduleTable& schedule() const { return schedule_; }
  const StaticRouteTable& routes() const { return routes_; }
  const SequenceTable& sequences() const { return sequences_; }
  const FilterTable& filters() const { return filters_; }
  const DropCounters& drops() const { return drops_; }

  void enable_filter(FlowId flow, JitterConfig jitter) {
    auto& row = filters_.at(flow);
    row.enabled = true;
    row.jitter = jitter;
  }

  bool filter_enabled(FlowId flow) const {
    const auto it = filters_.find(flow);
    return it != filters_.end() && it->second.enabled;
  }

  void inject_fault(FlowId flow, std::set<std::uint64_t> sequences) {
    if (!schedule_.count(flow)) throw ConfigError("fault on flow " + std::to_string(flow) + " not routed through switch");
    auto& s = faults_[flow];
    s.insert(sequences.begin(), sequences.end());
  }
  void inject_fault_all(FlowId flow) {
    if (!schedule_.count(flow)) throw ConfigError("fault on flow " + std::to_string(flow) + " not routed through switch");
    drop_all_copies_.insert(flow);
  }

  // Ingress of a fully received frame. Returns the TT admission decision and
  // the copy-path outcome, in that order.
  Actions on_ingress(const Frame& frame, TimeNs now) {
    Actions out;
    const ClassifierOutput c = classify(frame, config_.cloning_enabled);
    for (const Frame& tt : c.tts) {
      PipelineAction a = tt_accept(tt, schedule_);
      if (auto* t = std::get_if<SetTimer>(&a)) {
        const auto key = std::make_pair(t->flow_id, t->period_index);
        if (pending_.count(key)) {
          a = Drop{tt, DropReason::kSequenceStale, schedule_.at(tt.flow_id).sequence};
        } else {
          pending_.emplace(key, t->frame);
        }
      }
      record(a);
      out.push_back(std::move(a));
    }
    for (const Frame& copy : c.copies) {
      PipelineAction a = be_process(copy, routes_);
      if (auto* e = std::get_if<EnqueueEgress>(&a)) {
        if (faulted(copy)) {
          a = Drop{copy, DropReason::kFaultInjected, sequences_.at(copy.flow_id).sequence};
        } else {
          a = sequence_check(e->frame, e->port, sequences_);
        }
      }
      record(a);
      out.push_back(std::move(a));
    }
    (void)now;
    return out;
  }

  // TT departure instant. With the filter enabled on this flow the result is
  // Deliver or Drop(filter-late); otherwise EnqueueEgress(TT).
  PipelineAction on_timer(FlowId flow, std::uint64_t period_index, TimeNs now) {
    auto node = pending_.extract(std::make_pair(flow, period_index));
    if (node.empty()) throw std::logic_error("timer fired without a pending frame");
    EnqueueEgress e = tt_fire(node.mapped(), schedule_, sequences_);
    PipelineAction a = e;
    if (filter_enabled(flow)) a = arrival_filter(e.frame, filters_, schedule_, now, e.port, config_.restore_iscopy);
    record(a);
    return a;
  }

  // Called when a queued copy is about to start transmission. Copies whose
  // flow has no filter here pass through unchanged.
  PipelineAction on_transmit(const Frame& frame, PortId port, TimeNs now) {
    if (!filter_enabled(frame.flow_id)) return EnqueueEgress{port, frame, TrafficClass::kCopy};
    PipelineAction a = arrival_filter(frame, filters_, schedule_, now, port, config_.restore_iscopy);
    record(a);
    return a;
  }

  void count_drop(FlowId flow, DropReason reason) { ++drops_[flow][static_cast<std::size_t>(reason)]; }

  std::size_t pending_timers() const { return pending_.size(); }

 private:
  bool faulted(const Frame& f) const {
    if (drop_all_copies_.count(f.flow_id)) return true;
    const auto it = faults_.find(f.flow_id);
    return it != faults_.end() && it->second.count(f.sequence);
  }

  void record(const PipelineAction& a) {
    if (const auto* d = std::get_if<Drop>(&a)) count_drop(d->frame.flow_id, d->reason);
  }

  VertexId switch_id_;
  ScheduleTable schedule_;
  StaticRouteTable routes_;
  SequenceTable sequences_;
  FilterTable filters_;
  SwitchConfig config_;
  std::map<std::pair<FlowId, std::uint64_t>, Frame> pending_;
  std::map<FlowId, std::set<std::uint64_t>> faults_;
  std::set<FlowId> drop_all_copies_;
  DropCounters drops_;
};

}  // namespace swa
