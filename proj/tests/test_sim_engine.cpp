#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "property_suite.hpp"

using namespace swa;

namespace {

std::map<std::pair<FlowId, std::uint64_t>, TimeNs> latencies(const ScenarioResult& r) {
  std::map<std::pair<FlowId, std::uint64_t>, TimeNs> out;
  for (const auto& d : r.deliveries) out[{d.flow_id, d.sequence}] = d.latency();
  return out;
}

SimConfig fig4_sim(Preset p, std::uint64_t rate, bool copies, std::uint64_t periods = 20) {
  auto cfg = apply_preset(fixture::fig4(), p);
  cfg.scenario.periods = periods;
  return make_sim_config(cfg, rate, copies);
}

std::vector<FlowSpec> pre_cfg_flows() { return fixture::fig4().flows; }

}  // namespace

TEST(Simulation, OneSwitchCopyLatencyClosedForm) {
  const auto cfg = fixture::one_switch();
  auto sc = make_sim_config(cfg, 0, true);
  sc.hyperperiods = 10;
  const auto r = Simulation(sc).run();
  EXPECT_TRUE(r.faults.empty());
  const auto& f = r.flow(1);
  const TimeNs tx = transmission_time(128, Rate{});
  EXPECT_EQ(f.lat_min, 400 + tx + 400);
  EXPECT_EQ(f.lat_max, 400 + tx + 400);
  EXPECT_EQ(f.delivered, 8u);
  EXPECT_EQ(f.delivered_copies, 8u);
}

TEST(Simulation, OneSwitchPreTtLatencyIsScheduled) {
  const auto cfg = fixture::one_switch();
  auto sc = make_sim_config(cfg, 0, false);
  sc.hyperperiods = 10;
  const auto r = Simulation(sc).run();
  const TimeNs sw_offset = cfg.schedule[1].offset;
  EXPECT_EQ(r.flow(1).lat_min, sw_offset + 400);
  EXPECT_EQ(r.flow(1).jitter, 0u);
  EXPECT_EQ(r.flow(1).delivered_copies, 0u);
}

TEST(Simulation, PreTtConstantAcrossRates) {
  for (std::uint64_t rate : {0u, 50u, 100u}) {
    const auto r = Simulation(fig4_sim(Preset::kOne, rate, false)).run();
    EXPECT_TRUE(r.faults.empty()) << r.faults.front();
    EXPECT_EQ(r.flow(1).lat_min, 67984u);
    EXPECT_EQ(r.flow(1).lat_max, 67984u);
    EXPECT_EQ(r.flow(2).lat_max, 98704u);
    EXPECT_EQ(r.flow(3).lat_max, 160144u);
  }
}

TEST(Simulation, PreTtJitterWithinTwiceAccuracyUnderSyncError) {
  auto sc = fig4_sim(Preset::kOne, 60, false);
  sc.sync_error = SyncError::kUniform;
  const auto r = Simulation(sc).run();
  EXPECT_TRUE(r.faults.empty()) << r.faults.front();
  for (const auto& f : r.flows) {
    EXPECT_LE(f.jitter, 2 * 500u);
    EXPECT_GT(f.delivered, 0u);
  }
}

TEST(Simulation, CopyPathOnFig4WithoutDisturbance) {
  const auto r = Simulation(fig4_sim(Preset::kTwo, 0, true)).run();
  // three store-and-forward hops of 400 + tx each, then the last link
  EXPECT_EQ(r.flow(1).lat_max, 3 * (400 + 12160u) + 400);
  EXPECT_EQ(r.flow(2).lat_max, 3 * (400 + 22400u) + 400);
  EXPECT_EQ(r.flow(3).lat_max, 3 * (400 + 42880u) + 400);
}

TEST(Simulation, SaturatingSamePriorityStaysBelowPreTtPerFrame) {
  const auto pre = Simulation(fig4_sim(Preset::kTwo, 100, false)).run();
  const auto swa = Simulation(fig4_sim(Preset::kTwo, 100, true)).run();
  const auto lp = latencies(pre);
  const auto ls = latencies(swa);
  ASSERT_EQ(lp.size(), ls.size());
  for (const auto& [key, lat] : ls) EXPECT_LE(lat, lp.at(key));
  EXPECT_GT(swa.total_drops(DropReason::kQueueOverflow), 0u);
}

TEST(Simulation, TtDeparturesUnaffectedByCopies) {
  for (auto p : {Preset::kOne, Preset::kTwo, Preset::kFour}) {
    const auto pre = Simulation(fig4_sim(p, 80, false)).run();
    const auto swa = Simulation(fig4_sim(p, 80, true)).run();
    EXPECT_EQ(props::compare_tt_departures(pre_cfg_flows(), pre, swa), "");
    EXPECT_LT(swa.tt_departures.size(), pre.tt_departures.size());  // copies won at TTS-3
  }
}

TEST(Simulation, DeterministicForSameSeed) {
  const auto a = Simulation(fig4_sim(Preset::kTwo, 70, true)).run();
  const auto b = Simulation(fig4_sim(Preset::kTwo, 70, true)).run();
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(latencies(a), latencies(b));
  EXPECT_EQ(a.drops_by_vertex, b.drops_by_vertex);
}

TEST(Simulation, SeedChangesDisturbancePhases) {
  auto s1 = fig4_sim(Preset::kTwo, 50, true);
  auto s2 = s1;
  s2.seed = s1.seed + 1;
  EXPECT_NE(latencies(Simulation(s1).run()), latencies(Simulation(s2).run()));
}

TEST(FaultInjection, DroppedCopyDoesNotBreakTheNext) {
  auto sc = fig4_sim(Preset::kTwo, 0, true);
  Simulation sim(sc);
  const auto tts1 = sc.topology.require("TTS-1");
  sim.inject_fault(tts1, 1, {20});
  const auto r = sim.run();
  const auto l = latencies(r);
  EXPECT_EQ(l.at({1, 21}), 38080u);
  EXPECT_EQ(l.at({1, 20}), 48048u);  // re-cloned at TTS-2
  EXPECT_EQ(r.flow(1).gap_drops, 0u);
}

TEST(FaultInjection, CopiesRecoverAtNextSwitch) {
  auto sc = fig4_sim(Preset::kTwo, 0, true);
  Simulation sim(sc);
  sim.inject_fault_all(sc.topology.require("TTS-1"), 1);
  const auto r = sim.run();
  // TT leaves TTS-1 at 22528; the TTS-2 clone then needs two more hops
  EXPECT_EQ(r.flow(1).lat_min, 22528 + 3 * 400 + 2 * 12160u);
  EXPECT_EQ(r.flow(1).lat_max, 22528 + 3 * 400 + 2 * 12160u);
}

TEST(FaultInjection, DroppingEveryCopyEqualsCopiesOff) {
  auto sc = fig4_sim(Preset::kTwo, 60, true);
  Simulation sim(sc);
  for (const char* sw : {"TTS-1", "TTS-2", "TTS-3"})
    for (FlowId f : {1u, 2u, 3u}) sim.inject_fault_all(sc.topology.require(sw), f);
  const auto on = sim.run();
  const auto off = Simulation(fig4_sim(Preset::kTwo, 60, false)).run();
  EXPECT_EQ(latencies(on), latencies(off));
}

TEST(FaultInjection, RejectsUnknownTargets) {
  auto sc = fig4_sim(Preset::kTwo, 0, true);
  Simulation sim(sc);
  EXPECT_THROW(sim.inject_fault(sc.topology.require("IXIA-0"), 1, {1}), ConfigError);
  EXPECT_THROW(sim.inject_fault(sc.topology.require("TTS-1"), 9, {1}), ConfigError);
}

TEST(Disturbance, TenMbpsSpacing) {
  const auto frames = generate_disturbance({DisturbanceSpec::Pattern::kBroadcast, 0, {}, 64, 10, 1}, Rate{}, 3,
                                           100 * 70400);
  ASSERT_EQ(frames.size(), 100u);
  const TimeNs tx = transmission_time(64, Rate{});
  for (std::size_t k = 0; k < frames.size(); ++k) {
    EXPECT_GE(frames[k], k * 70400);
    EXPECT_LE(frames[k] + tx, (k + 1) * 70400);
  }
}

TEST(Disturbance, ZeroRateIsEmpty) {
  EXPECT_TRUE(generate_disturbance({DisturbanceSpec::Pattern::kBroadcast, 0, {}, 64, 0, 1}, Rate{}, 3, 1'000'000).empty());
}

TEST(Disturbance, RateAboveLineRateRejected) {
  EXPECT_THROW(DisturbanceStream(64, 101, Rate{}, 1), ConfigError);
}

TEST(Disturbance, BroadcastReachesEveryEndSystemExceptSource) {
  const auto r = Simulation(fig4_sim(Preset::kTwo, 10, false)).run();
  EXPECT_GT(r.background_received.at("IXIA-2"), 0u);
  EXPECT_EQ(r.background_received.at("IXIA-2"), r.background_received.at("IXIA-3"));
  EXPECT_EQ(r.background_received.count("IXIA-0"), 0u);
}

TEST(Disturbance, UnicastFollowsItsRoute) {
  const auto r = Simulation(fig4_sim(Preset::kThree, 10, false)).run();
  EXPECT_GT(r.background_received.at("IXIA-2"), 0u);
  EXPECT_EQ(r.background_received.count("IXIA-3"), 0u);
}

TEST(Disturbance, SamePriorityFullRateOverflowsQueues) {
  const auto r = Simulation(fig4_sim(Preset::kTwo, 100, true)).run();
  EXPECT_GT(r.total_drops(DropReason::kQueueOverflow), 0u);
}

TEST(JitterHold, DeliveredJitterBoundedByConfiguredValue) {
  for (std::uint64_t rate : {0u, 40u, 100u}) {
    const auto r = Simulation(fig4_sim(Preset::kFour, rate, true)).run();
    EXPECT_TRUE(r.faults.empty());
    for (const auto& f : r.flows) EXPECT_LE(f.jitter, kPresetJitter + 2 * 500);
    EXPECT_EQ(r.flow(1).lat_min, 67984u - kPresetJitter);
  }
}

TEST(JitterHold, TtOnlyDeliversOnlyTtFrames) {
  auto sc = fig4_sim(Preset::kTwo, 0, true);
  for (FlowId f : {1u, 2u, 3u}) sc.jitter[f] = JitterConfig::tt_only();
  const auto r = Simulation(sc).run();
  for (const auto& f : r.flows) EXPECT_EQ(f.delivered_copies, 0u);
  EXPECT_EQ(r.flow(1).lat_max, 67984u);
}

TEST(Census, NeverMoreThanOneLiveCopy) {
  for (auto p : {Preset::kOne, Preset::kTwo, Preset::kThree, Preset::kFour}) {
    const auto r = Simulation(fig4_sim(p, 90, true)).run();
    for (const auto& f : r.flows) {
      EXPECT_EQ(f.max_copies, 1u);
      EXPECT_EQ(f.order_violations, 0u);
    }
    EXPECT_TRUE(r.faults.empty());
  }
}

TEST(Simulation, ConfigErrors) {
  auto sc = fig4_sim(Preset::kTwo, 0, true);
  sc.copy_priority = 5;
  EXPECT_THROW(Simulation{sc}, ConfigError);
  sc = fig4_sim(Preset::kTwo, 0, true);
  sc.hyperperiods = 2;
  EXPECT_THROW(Simulation{sc}, ConfigError);
  sc = fig4_sim(Preset::kTwo, 0, true);
  sc.schedule.erase(sc.schedule.begin());
  EXPECT_THROW(Simulation{sc}, ConfigError);
}
