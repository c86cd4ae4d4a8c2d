#pragma once

// Safe jitter range of flows sharing one output port, and the end-to-end
// offset constraint that makes dropped copies self-recovering.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swa/core_model.hpp"

namespace swa {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PortFlow {
  FlowId flow_id = 0;
  TimeNs period = 0;
  TimeNs offset = 0;   // departure at the shared output port
  TimeNs tx_time = 0;  // C_i
};

using PortFlowSet = std::vector<PortFlow>;

inline TimeNs hyperperiod(const PortFlowSet& flows) {
  TimeNs h = 1;
  for (const auto& f : flows) {
    try {
      h = checked_lcm(h, f.period);
    } catch (const ConfigError& e) {
      throw AnalysisError(e.what());
    }
  }
  return h;
}

// Positive residue of (a - b) modulo m.
inline TimeNs mod_diff(TimeNs a, TimeNs b, TimeNs m) {
  const TimeNs ra = a % m;
  const TimeNs rb = b % m;
  return ra >= rb ? ra - rb : m - (rb - ra);
}

// True when some transmission of `a` overlaps some transmission of `b`.
// All instance differences lie on (o_b - o_a) + gcd * Z.
inline bool transmissions_conflict(const PortFlow& a, const PortFlow& b) {
  const TimeNs g = gcd_time(a.period, b.period);
  const TimeNs r = mod_diff(b.offset, a.offset, g);  // b starts r after some a
  if (r == 0) return true;
  return r < a.tx_time || g - r < b.tx_time;
}

inline void require_conflict_free(const PortFlowSet& flows) {
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (flows[i].period == 0) throw AnalysisError("flow " + std::to_string(flows[i].flow_id) + ": zero period");
    if (flows[i].tx_time == 0 || flows[i].tx_time > flows[i].period)
      throw AnalysisError("flow " + std::to_string(flows[i].flow_id) + ": transmission time outside (0, period]");
    for (std::size_t j = 0; j < i; ++j)
      if (transmissions_conflict(flows[i], flows[j]))
        throw AnalysisError("flows " + std::to_string(flows[j].flow_id) + " and " + std::to_string(flows[i].flow_id) +
                            " overlap on the shared port");
  }
}

// Smallest distance from a departure of flow j to a later departure of flow i.
// For i == j this is the period of i.
inline TimeNs min_gap(std::size_t i, std::size_t j, const PortFlowSet& flows) {
  const PortFlow& fi = flows.at(i);
  const PortFlow& fj = flows.at(j);
  if (i == j) return fi.period;
  const TimeNs g = gcd_time(fi.period, fj.period);
  const TimeNs r = mod_diff(fi.offset, fj.offset, g);
  return r == 0 ? g : r;
}

struct SafeJitterTerm {
  FlowId other = 0;
  TimeNs gap = 0;
  TimeNs tx_time = 0;
  TimeNs bound = 0;  // gap - tx_time
};

struct SafeJitterEntry {
  FlowId flow_id = 0;
  TimeNs period = 0;
  TimeNs upper = 0;  // safe range is [0, upper]
  std::optional<FlowId> attained_by;  // empty when the period initializer binds
  TimeNs attaining_gap = 0;
  std::vector<SafeJitterTerm> terms;
};

struct SafeJitterReport {
  std::vector<SafeJitterEntry> flows;

  const SafeJitterEntry& at(FlowId id) const {
    for (const auto& e : flows)
      if (e.flow_id == id) return e;
    throw std::out_of_range("flow " + std::to_string(id) + " not in report");
  }
};

inline SafeJitterReport safe_jitter_upper(const PortFlowSet& flows) {
  require_conflict_free(flows);
  hyperperiod(flows);  // guards the 64-bit hyperperiod precondition
  SafeJitterReport report;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    SafeJitterEntry e;
    e.flow_id = flows[i].flow_id;
    e.period = flows[i].period;
    e.upper = flows[i].period;
    for (std::size_t j = 0; j < flows.size(); ++j) {
      const TimeNs gap = min_gap(i, j, flows);
      if (gap < flows[j].tx_time) throw AnalysisError("gap shorter than transmission time; schedule conflicts");
      const TimeNs bound = gap - flows[j].tx_time;
      e.terms.push_back({flows[j].flow_id, gap, flows[j].tx_time, bound});
      if (bound < e.upper) {
        e.upper = bound;
        e.attained_by = flows[j].flow_id;
        e.attaining_gap = gap;
      }
    }
    report.flows.push_back(std::move(e));
  }
  return report;
}

// ---------------------------------------------------------------------------

struct SelfRecoveryResult {
  bool holds = false;          // end-to-end constraint
  TimeNs span = 0;             // last offset - first offset
  TimeNs limit = 0;            // min(period + n*C, latency bound)
  std::size_t switches = 0;    // n
  std::optional<std::size_t> first_link_violation;  // smallest k with offset_k - offset_0 >= period + k*C
  std::string diagnostic;
};

// `rows` holds the flow's schedule rows in path order: the source end-system
// first, then each switch.
inline SelfRecoveryResult check_self_recovery(const FlowSpec& flow, const std::vector<LinkSchedule>& rows,
                                              TimeNs min_forwarding_time) {
  if (rows.empty()) throw AnalysisError("flow " + std::to_string(flow.id) + " has no schedule rows");
  SelfRecoveryResult r;
  r.switches = rows.size() - 1;
  const auto first = static_cast<std::int64_t>(rows.front().offset);
  const auto span = static_cast<std::int64_t>(rows.back().offset) - first;
  r.span = span > 0 ? static_cast<TimeNs>(span) : 0;
  r.limit = std::min<TimeNs>(flow.period + r.switches * min_forwarding_time, flow.e2e_latency_bound);
  r.holds = span < static_cast<std::int64_t>(r.limit);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto d = static_cast<std::int64_t>(rows[k].offset) - first;
    if (d >= static_cast<std::int64_t>(flow.period + k * min_forwarding_time)) {
      r.first_link_violation = k;
      break;
    }
  }
  if (!r.holds) {
    r.diagnostic = "flow " + std::to_string(flow.id) + ": offset span " + std::to_string(span) +
                   " not below " + std::to_string(r.limit);
  } else if (r.first_link_violation) {
    r.diagnostic = "flow " + std::to_string(flow.id) + ": link " + std::to_string(*r.first_link_violation) +
                   " breaks the per-link bound";
  }
  return r;
}

}  // namespace swa
