#pragma once

// Shared fixtures: the three-switch chain and its published schedule, plus
// small topologies for hand-computable cases.

#include <string>

#include "swa/swa.hpp"

namespace fixture {

inline std::string source_path(const std::string& rel) { return std::string(SWA_SOURCE_DIR) + "/" + rel; }

inline swa::Config fig4() { return swa::load_config(source_path("configs/fig4.cfg")); }

// IXIA-0 -> TTS-1 -> IXIA-3 with the same link parameters as fig4.
inline swa::Config one_switch(std::uint32_t length = 128, swa::TimeNs period = 524288) {
  swa::Config c;
  auto& t = c.topology;
  const auto src = t.add_vertex("SRC", swa::VertexKind::kEndSystem, 1);
  const auto sw = t.add_vertex("SW", swa::VertexKind::kSwitch, 4);
  const auto dst = t.add_vertex("DST", swa::VertexKind::kEndSystem, 1);
  t.add_link(src, 0, sw, 0);
  t.add_link(sw, 1, dst, 0);
  c.flows.push_back({1, period, length, {src, sw, dst}, swa::kNever});
  const swa::TimeNs tx = swa::transmission_time(length, swa::Rate{});
  const swa::TimeNs sw_offset = 400 + 1000 + tx + 1000;
  c.schedule.push_back({1, src, swa::kNoPort, 0, 0, 0, 0});
  c.schedule.push_back({1, sw, 0, 1, sw_offset, 400, 1400});
  return c;
}

}  // namespace fixture
