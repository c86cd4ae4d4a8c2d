#pragma once

// No-wait TT schedule generation and validation. The generator is a greedy
// earliest-offset placer; validate() is the contract every schedule, generated
// or supplied, must satisfy.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swa/core_model.hpp"
#include "swa/jitter_analysis.hpp"

namespace swa {

struct ScheduleProblem {
  Topology topology;
  std::vector<FlowSpec> flows;
  bool enforce_eq1 = true;
  TimeNs alignment = 1024;
  // Extra spacing kept between TT slots of different flows on one port, so a
  // departure that slips by up to 2*sync_accuracy cannot collide.
  std::optional<TimeNs> slot_margin;
};

inline ScheduleProblem make_problem(Topology topology, std::vector<FlowSpec> flows) {
  ScheduleProblem p;
  p.topology = std::move(topology);
  p.flows = std::move(flows);
  return p;
}

struct ScheduleSolution {
  std::vector<LinkSchedule> rows;
  bool feasible = false;
  std::vector<std::string> diagnostics;
};

// Rows of one flow in path order; missing hops are reported as nullopt.
inline std::vector<std::optional<LinkSchedule>> rows_along_path(const std::vector<LinkSchedule>& rows,
                                                                const FlowSpec& flow) {
  std::vector<std::optional<LinkSchedule>> out(flow.path.empty() ? 0 : flow.path.size() - 1);
  for (const auto& r : rows) {
    if (r.flow_id != flow.id) continue;
    for (std::size_t k = 0; k + 1 < flow.path.size(); ++k)
      if (flow.path[k] == r.vertex) out[k] = r;
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class ViolationKind {
  kMissingRow,
  kPortMismatch,
  kWindowMismatch,
  kPrecedence,
  kReception,
  kContention,
  kSelfRecovery,
  kHyperperiod,
};

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kMissingRow: return "missing-row";
    case ViolationKind::kPortMismatch: return "port-mismatch";
    case ViolationKind::kWindowMismatch: return "window-mismatch";
    case ViolationKind::kPrecedence: return "precedence";
    case ViolationKind::kReception: return "reception";
    case ViolationKind::kContention: return "contention";
    case ViolationKind::kSelfRecovery: return "self-recovery";
    case ViolationKind::kHyperperiod: return "hyperperiod";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  FlowId flow_id = 0;
  std::string vertex;
  std::string message;
};

struct ValidateOptions {
  bool enforce_eq1 = true;
  std::uint64_t max_instances = 4'000'000;
};

namespace detail {

struct PortSlot {
  FlowId flow_id;
  TimeNs offset;
  TimeNs period;
  TimeNs tx;
};

// Enumerates every transmission over one hyperperiod and checks pairwise
// disjointness, wraparound included.
inline std::optional<std::string> port_contention(const std::vector<PortSlot>& slots, std::uint64_t max_instances) {
  if (slots.empty()) return std::nullopt;
  TimeNs h = 1;
  for (const auto& s : slots) h = checked_lcm(h, s.period);
  std::uint64_t total = 0;
  for (const auto& s : slots) total += h / s.period;
  if (total > max_instances) throw ConfigError("port hyperperiod too large to enumerate");
  struct Tx {
    TimeNs start;
    TimeNs end;
    FlowId flow;
  };
  std::vector<Tx> txs;
  txs.reserve(total);
  for (const auto& s : slots)
    for (TimeNs k = 0; k < h / s.period; ++k) {
      const TimeNs start = (s.offset + k * s.period) % h;
      txs.push_back({start, start + s.tx, s.flow_id});
    }
  std::sort(txs.begin(), txs.end(), [](const Tx& a, const Tx& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const Tx& a = txs[i];
    const Tx& b = txs[(i + 1) % txs.size()];
    const TimeNs next_start = (i + 1 == txs.size()) ? b.start + h : b.start;
    if (txs.size() == 1 && a.end - a.start > h) return "flow " + std::to_string(a.flow) + " exceeds its own period";
    if (txs.size() > 1 && a.end > next_start)
      return "flows " + std::to_string(a.flow) + " and " + std::to_string(b.flow) + " overlap at " +
             std::to_string(a.start);
  }
  return std::nullopt;
}

}  // namespace detail

inline std::vector<Violation> validate(const ScheduleSolution& solution, const Topology& topo,
                                       const std::vector<FlowSpec>& flows, ValidateOptions opts = {}) {
  std::vector<Violation> out;
  std::map<std::pair<VertexId, PortId>, std::vector<detail::PortSlot>> ports;

  for (const auto& flow : flows) {
    const auto links = path_links(topo, flow);
    const auto rows = rows_along_path(solution.rows, flow);
    bool complete = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::string vname = topo.name(flow.path[k]);
      if (!rows[k]) {
        out.push_back({ViolationKind::kMissingRow, flow.id, vname, "no schedule row"});
        complete = false;
        continue;
      }
      const LinkSchedule& row = *rows[k];
      if (row.output_port != links[k]->from_port)
        out.push_back({ViolationKind::kPortMismatch, flow.id, vname, "output-port does not lead to next hop"});
      if (k > 0 && row.input_port != links[k - 1]->to_port)
        out.push_back({ViolationKind::kPortMismatch, flow.id, vname, "input-port does not match incoming link"});
      const TimeNs tx = transmission_time(flow.length_bytes, links[k]->rate);
      ports[{flow.path[k], row.output_port}].push_back({flow.id, row.offset % flow.period, flow.period, tx});
      if (k == 0 || !rows[k - 1]) continue;
      const LinkSchedule& prev = *rows[k - 1];
      const ArrivalWindow w = arrival_window(prev.offset, topo.vertices[flow.path[k - 1]].processing_delay,
                                             links[k - 1]->delay, topo.sync_accuracy, topo.anchoring);
      if (w.start != row.arrival_start || w.end != row.arrival_end)
        out.push_back({ViolationKind::kWindowMismatch, flow.id, vname,
                       "stored window [" + std::to_string(row.arrival_start) + ", " + std::to_string(row.arrival_end) +
                           "] expected [" + std::to_string(w.start) + ", " + std::to_string(w.end) + "]"});
      if (row.arrival_end >= row.offset) {
        out.push_back({ViolationKind::kPrecedence, flow.id, vname,
                       "arrival-end " + std::to_string(row.arrival_end) + " not before offset " +
                           std::to_string(row.offset)});
      } else {
        const TimeNs rx = transmission_time(flow.length_bytes, links[k - 1]->rate);
        if (row.arrival_end + rx > row.offset)
          out.push_back({ViolationKind::kReception, flow.id, vname, "frame not fully received by its offset"});
      }
    }
    if (complete && opts.enforce_eq1) {
      std::vector<LinkSchedule> ordered;
      for (const auto& r : rows) ordered.push_back(*r);
      const auto sr = check_self_recovery(flow, ordered, topo.min_forwarding_time);
      if (!sr.holds) out.push_back({ViolationKind::kSelfRecovery, flow.id, topo.name(flow.path.front()), sr.diagnostic});
    }
  }

  for (auto& [key, slots] : ports) {
    try {
      if (auto msg = detail::port_contention(slots, opts.max_instances))
        out.push_back({ViolationKind::kContention, 0, topo.name(key.first) + ":" + std::to_string(key.second), *msg});
    } catch (const ConfigError& e) {
      out.push_back({ViolationKind::kHyperperiod, 0, topo.name(key.first), e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

inline ScheduleSolution schedule(const ScheduleProblem& problem) {
  const Topology& topo = problem.topology;
  const TimeNs align = std::max<TimeNs>(problem.alignment, 1);
  const TimeNs margin = problem.slot_margin.value_or(2 * topo.sync_accuracy);
  ScheduleSolution sol;

  std::vector<const FlowSpec*> order;
  TimeNs h = 1;
  for (const auto& f : problem.flows) {
    check_flow(topo, f);
    try {
      h = checked_lcm(h, f.period);
    } catch (const ConfigError&) {
      sol.diagnostics.push_back("hyperperiod overflow");
      return sol;
    }
    order.push_back(&f);
  }
  std::stable_sort(order.begin(), order.end(), [](const FlowSpec* a, const FlowSpec* b) {
    if (a->period != b->period) return a->period > b->period;
    return a->id < b->id;
  });

  std::map<std::pair<VertexId, PortId>, std::vector<PortFlow>> reserved;
  auto fits = [&](VertexId v, PortId p, const PortFlow& cand) {
    const auto it = reserved.find({v, p});
    if (it == reserved.end()) return true;
    for (const auto& r : it->second)
      if (transmissions_conflict(r, cand)) return false;
    return true;
  };
  auto place = [&](VertexId v, PortId p, TimeNs candidate, TimeNs period, TimeNs tx) -> std::optional<TimeNs> {
    for (TimeNs o = candidate; o < candidate + period; o += align)
      if (fits(v, p, PortFlow{0, period, o, tx + margin})) return o;
    return std::nullopt;
  };

  std::vector<LinkSchedule> rows;
  constexpr int kSourceAttempts = 64;
  for (const FlowSpec* f : order) {
    const auto links = path_links(topo, *f);
    std::vector<TimeNs> tx;
    for (const Link* l : links) tx.push_back(transmission_time(f->length_bytes, l->rate));
    if (*std::max_element(tx.begin(), tx.end()) > f->period) {
      sol.diagnostics.push_back("flow " + std::to_string(f->id) + ": transmission longer than period");
      return ScheduleSolution{{}, false, sol.diagnostics};
    }

    std::optional<std::vector<LinkSchedule>> placed;
    std::string last_failure = "no conflict-free offset on " + topo.name(f->path.front());
    TimeNs source_candidate = 0;
    for (int attempt = 0; attempt < kSourceAttempts && source_candidate < f->period; ++attempt) {
      std::vector<LinkSchedule> chain;
      const auto o0 = place(f->path[0], links[0]->from_port, source_candidate, f->period, tx[0]);
      if (!o0) break;
      chain.push_back({f->id, f->path[0], kNoPort, links[0]->from_port, *o0, 0, 0});
      bool ok = true;
      for (std::size_t k = 1; k < links.size(); ++k) {
        const LinkSchedule& prev = chain.back();
        const ArrivalWindow w = arrival_window(prev.offset, topo.vertices[f->path[k - 1]].processing_delay,
                                               links[k - 1]->delay, topo.sync_accuracy, topo.anchoring);
        const TimeNs earliest = w.end + tx[k - 1];
        const TimeNs candidate = (earliest / align + 1) * align;
        const auto ok_offset = place(f->path[k], links[k]->from_port, candidate, f->period, tx[k]);
        if (!ok_offset) {
          ok = false;
          last_failure = "port " + topo.name(f->path[k]) + ":" + std::to_string(links[k]->from_port) + " is full";
          break;
        }
        chain.push_back({f->id, f->path[k], links[k - 1]->to_port, links[k]->from_port, *ok_offset, w.start, w.end});
      }
      if (ok && problem.enforce_eq1) {
        const auto sr = check_self_recovery(*f, chain, topo.min_forwarding_time);
        if (!sr.holds) {
          ok = false;
          last_failure = sr.diagnostic;
        }
      }
      if (ok) {
        placed = std::move(chain);
        break;
      }
      source_candidate = *o0 + align;
    }
    if (!placed) {
      sol.diagnostics.push_back("flow " + std::to_string(f->id) + " infeasible: " + last_failure);
      return ScheduleSolution{{}, false, sol.diagnostics};
    }
    for (std::size_t k = 0; k < placed->size(); ++k)
      reserved[{f->path[k], links[k]->from_port}].push_back(PortFlow{f->id, f->period, (*placed)[k].offset, tx[k] + margin});
    rows.insert(rows.end(), placed->begin(), placed->end());
  }

  // Emit in input flow order for stable output files.
  for (const auto& f : problem.flows)
    for (const auto& r : rows)
      if (r.flow_id == f.id) sol.rows.push_back(r);
  sol.feasible = true;
  return sol;
}

}  // namespace swa
