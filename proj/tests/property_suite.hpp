#pragma once

// Randomized paired runs: a scheduled random network is simulated with copies
// off and on under the same disturbance and seed, with random priorities,
// jitter modes, faults and sync slip. Shared by the property tests and the
// acceptance binary.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "random_network.hpp"

namespace props {

struct Report {
  int runs = 0;
  int skipped_infeasible = 0;
  std::uint64_t frames = 0;
  std::uint64_t copies_won = 0;
  std::uint64_t faults_injected = 0;
  std::string first_failure;

  bool ok() const { return first_failure.empty(); }
};

inline swa::SimConfig random_sim(std::mt19937_64& rng, const randnet::Problem& net,
                                 const std::vector<swa::LinkSchedule>& rows) {
  using namespace swa;
  SimConfig sc;
  sc.topology = net.topology;
  sc.flows = net.flows;
  sc.schedule = rows;
  sc.seed = rng();
  sc.priority_levels = 2 + rng() % 2;
  sc.copy_priority = rng() % sc.priority_levels;
  sc.queue_capacity = 1 + rng() % 16;
  sc.restore_iscopy = rng() % 4 == 0;
  sc.sync_error = rng() % 3 == 0 ? SyncError::kUniform : SyncError::kNone;
  sc.hyperperiods = 5;
  sc.warmup_hyperperiods = 1;

  for (const auto& f : net.flows) {
    switch (rng() % 4) {
      case 0: sc.jitter[f.id] = JitterConfig::tt_only(); break;
      case 1: sc.jitter[f.id] = JitterConfig::bounded(rng() % 50'000); break;
      default: break;
    }
  }

  const std::size_t n_dist = rng() % 3;
  for (std::size_t k = 0; k < n_dist; ++k) {
    DisturbanceSpec d;
    d.source = net.end_systems[rng() % net.end_systems.size()];
    d.length_bytes = 46 + rng() % 1455;
    d.rate_mbps = rng() % 101;
    d.priority = static_cast<unsigned>(rng() % sc.priority_levels);
    if (rng() % 2) {
      auto to = d.source;
      while (to == d.source) to = net.end_systems[rng() % net.end_systems.size()];
      d.pattern = DisturbanceSpec::Pattern::kUnicast;
      d.route = randnet::tree_path(net.topology, d.source, to);
    }
    sc.disturbances.push_back(std::move(d));
  }
  return sc;
}

inline std::map<std::pair<swa::FlowId, std::uint64_t>, swa::DeliveryRecord> by_frame(const swa::ScenarioResult& r) {
  std::map<std::pair<swa::FlowId, std::uint64_t>, swa::DeliveryRecord> out;
  for (const auto& d : r.deliveries) out[{d.flow_id, d.sequence}] = d;
  return out;
}

// TT departures must match between arms, except that at a flow's last switch
// the filter may suppress a TT frame whose copy already left; the ones that
// remain keep their scheduled instants.
inline std::string compare_tt_departures(const std::vector<swa::FlowSpec>& flows, const swa::ScenarioResult& off,
                                         const swa::ScenarioResult& on) {
  using namespace swa;
  std::set<std::pair<VertexId, FlowId>> filtered;
  for (const auto& f : flows) filtered.insert({f.path[f.path.size() - 2], f.id});
  auto split = [&](const ScenarioResult& r, std::vector<TtDeparture>& inner, std::set<std::tuple<VertexId, FlowId, std::uint64_t, TimeNs>>& last) {
    for (const auto& d : r.tt_departures) {
      if (filtered.count({d.vertex, d.flow_id}))
        last.insert({d.vertex, d.flow_id, d.sequence, d.time});
      else
        inner.push_back(d);
    }
  };
  std::vector<TtDeparture> inner_off, inner_on;
  std::set<std::tuple<VertexId, FlowId, std::uint64_t, TimeNs>> last_off, last_on;
  split(off, inner_off, last_off);
  split(on, inner_on, last_on);
  if (inner_off != inner_on) return "TT departures differ between arms";
  for (const auto& d : last_on)
    if (!last_off.count(d)) return "TT departure at a last switch moved";
  return "";
}

// Checks one paired run; returns "" or a description of the first broken
// property.
inline std::string check_pair(const swa::SimConfig& on_cfg, const std::vector<swa::FaultSpec>& faults,
                              Report& rep) {
  using namespace swa;
  SimConfig off_cfg = on_cfg;
  off_cfg.copies_enabled = false;
  SimConfig with_faults = on_cfg;
  with_faults.faults = faults;

  const auto off = Simulation(off_cfg).run();
  const auto on = Simulation(with_faults).run();
  std::ostringstream err;

  for (const auto* r : {&off, &on})
    if (!r->faults.empty()) return "simulator fault: " + r->faults.front();
  if (auto m = compare_tt_departures(on_cfg.flows, off, on); !m.empty()) return m;

  for (const auto& f : on.flows) {
    if (f.order_violations) err << "flow " << f.flow_id << " delivered out of order; ";
    if (f.max_copies > 1) err << "flow " << f.flow_id << " had " << f.max_copies << " live copies; ";
    if (f.gap_drops) err << "flow " << f.flow_id << " dropped " << f.gap_drops << " copies past a gap; ";
  }
  if (!err.str().empty()) return err.str();

  const auto a = by_frame(off), b = by_frame(on);
  if (a.size() != b.size()) return "delivered frame sets differ";
  for (const auto& [key, d] : b) {
    const auto it = a.find(key);
    if (it == a.end()) return "frame delivered only with copies";
    if (d.latency() > it->second.latency()) {
      err << "flow " << key.first << " seq " << key.second << ": copies " << d.latency() << " > PreTT "
          << it->second.latency();
      return err.str();
    }
    ++rep.frames;
    if (d.copy) ++rep.copies_won;
  }
  return "";
}

inline Report run(std::uint64_t seed, int runs) {
  using namespace swa;
  Report rep;
  std::mt19937_64 rng(seed);
  while (rep.runs < runs) {
    const auto net = randnet::make_problem(rng);
    const auto sol = schedule(make_problem(net.topology, net.flows));
    if (!sol.feasible) {
      ++rep.skipped_infeasible;
      continue;
    }
    const auto sc = random_sim(rng, net, sol.rows);

    std::vector<FaultSpec> faults;
    for (const auto& f : net.flows) {
      if (rng() % 3) continue;
      const VertexId sw = f.path[1 + rng() % (f.path.size() - 2)];
      FaultSpec fs{sw, f.id, {}, rng() % 4 == 0};
      for (int k = 0; k < 4; ++k) fs.sequences.insert(rng() % 40);
      faults.push_back(std::move(fs));
      ++rep.faults_injected;
    }

    ++rep.runs;
    const auto msg = check_pair(sc, faults, rep);
    if (!msg.empty() && rep.first_failure.empty())
      rep.first_failure = "run " + std::to_string(rep.runs) + " (seed " + std::to_string(seed) + "): " + msg;
  }
  return rep;
}

}  // namespace props
