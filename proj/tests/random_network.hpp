#pragma once

// Random desk-scale networks: a tree of up to four switches, one or two
// end-systems per switch, up to six flows with power-of-two periods.

#include <random>
#include <string>
#include <vector>

#include "swa/swa.hpp"

namespace randnet {

struct Problem {
  swa::Topology topology;
  std::vector<swa::FlowSpec> flows;
  std::vector<swa::VertexId> end_systems;
};

// Vertex path between two vertices of a tree (links are bidirectional).
inline std::vector<swa::VertexId> tree_path(const swa::Topology& t, swa::VertexId from, swa::VertexId to) {
  std::vector<int> parent(t.vertices.size(), -1);
  std::vector<swa::VertexId> q{from};
  parent[from] = static_cast<int>(from);
  for (std::size_t k = 0; k < q.size(); ++k)
    for (const auto& l : t.links)
      if (l.from == q[k] && parent[l.to] < 0 && (t.is_switch(l.to) || l.to == to)) {
        parent[l.to] = static_cast<int>(q[k]);
        q.push_back(l.to);
      }
  std::vector<swa::VertexId> path;
  if (parent[to] < 0) return path;
  for (swa::VertexId v = to; v != from; v = static_cast<swa::VertexId>(parent[v])) path.push_back(v);
  path.push_back(from);
  return {path.rbegin(), path.rend()};
}

inline Problem make_problem(std::mt19937_64& rng, std::size_t max_switches = 4, std::size_t max_flows = 6) {
  Problem p;
  auto& t = p.topology;
  t.sync_accuracy = 100 * (rng() % 6);
  const std::size_t n_sw = 1 + rng() % max_switches;
  std::vector<swa::VertexId> sw;
  std::vector<swa::PortId> next_port;
  for (std::size_t k = 0; k < n_sw; ++k) {
    sw.push_back(t.add_vertex("S" + std::to_string(k), swa::VertexKind::kSwitch, 8, rng() % 3 * 100));
    next_port.push_back(0);
  }
  const swa::TimeNs delay = 100 + rng() % 5 * 100;
  auto connect = [&](swa::VertexId a, swa::PortId pa, swa::VertexId b, swa::PortId pb) {
    t.add_link(a, pa, b, pb, swa::Rate{}, delay);
    t.add_link(b, pb, a, pa, swa::Rate{}, delay);
  };
  for (std::size_t k = 1; k < n_sw; ++k) {
    const std::size_t parent = rng() % k;
    connect(sw[parent], next_port[parent]++, sw[k], next_port[k]++);
  }
  for (std::size_t k = 0; k < n_sw; ++k) {
    const std::size_t n_es = 1 + rng() % 2;
    for (std::size_t e = 0; e < n_es; ++e) {
      const auto es = t.add_vertex("E" + std::to_string(k) + "_" + std::to_string(e), swa::VertexKind::kEndSystem, 1);
      connect(es, 0, sw[k], next_port[k]++);
      p.end_systems.push_back(es);
    }
  }
  if (p.end_systems.size() < 2) {
    const auto es = t.add_vertex("E_extra", swa::VertexKind::kEndSystem, 1);
    connect(es, 0, sw[0], next_port[0]++);
    p.end_systems.push_back(es);
  }

  const std::size_t n_flows = 1 + rng() % max_flows;
  swa::TimeNs c = swa::kNever;
  for (std::size_t k = 0; k < n_flows; ++k) {
    swa::FlowSpec f;
    f.id = static_cast<swa::FlowId>(k + 1);
    f.period = swa::TimeNs{1} << (18 + rng() % 3);
    f.length_bytes = static_cast<std::uint32_t>(46 + rng() % 467);
    const auto a = p.end_systems[rng() % p.end_systems.size()];
    auto b = a;
    while (b == a) b = p.end_systems[rng() % p.end_systems.size()];
    f.path = tree_path(t, a, b);
    for (std::size_t h = 0; h + 1 < f.path.size(); ++h) {
      const auto* l = t.link_between(f.path[h], f.path[h + 1]);
      c = std::min(c, t.vertices[f.path[h]].processing_delay + l->delay + swa::transmission_time(f.length_bytes, l->rate));
    }
    p.flows.push_back(std::move(f));
  }
  // C is the smallest forwarding step any frame can take, which makes the
  // self-recovery bound match what copies can actually achieve.
  t.min_forwarding_time = c;
  return p;
}

}  // namespace randnet
