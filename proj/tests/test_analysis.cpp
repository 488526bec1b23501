#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rebackoff/analysis.hpp"
#include "rebackoff/engine.hpp"

using namespace rebackoff;
using Catch::Approx;

namespace {

// Minimal synthetic slot: full channel activity with a chosen data outcome.
SlotRecord make_slot(SlotIndex t, SlotOutcome data, bool empty_system = false) {
  SlotRecord rec;
  rec.slot = t;
  rec.data_outcome = data;
  rec.live_count = empty_system ? 0 : 1;
  rec.system_empty = empty_system;
  return rec;
}

}  // namespace

TEST_CASE("contention") {
  CHECK(contention({1}) == Approx(1.0));
  CHECK(contention({2, 4}) == Approx(0.75));
  CHECK(contention({}) == Approx(0.0));
}

TEST_CASE("sigma on small multisets") {
  CHECK(sigma({1, 1, 1, 1}) == 1);
  CHECK(sigma({1, 2, 4}) == 1);  // age 1 alone holds over half the contention
  CHECK(sigma({4, 4}) == 4);
  CHECK(sigma({5}) == 5);
  CHECK(sigma({2, 2, 8, 8, 8, 8}) == 2);
}

TEST_CASE("sigma matches the brute-force oracle") {
  Rng rng(31337, 3, 0);
  for (int i = 0; i < 3000; ++i) {
    const std::size_t size = 1 + rng.next_below(60);
    std::vector<std::uint64_t> ages(size);
    for (auto& a : ages) a = 1 + rng.next_below(100000);
    REQUIRE(sigma(ages) == sigma_oracle(ages));
  }
}

TEST_CASE("interval metrics") {
  Trace trace;
  SECTION("counts successes and disruption over busy slots") {
    // 10 busy slots: 4 successes, 2 disrupted, 4 collisions.
    SlotIndex t = 0;
    for (int i = 0; i < 4; ++i)
      trace.records.push_back(make_slot(t++, SlotOutcome::success(0)));
    for (int i = 0; i < 2; ++i)
      trace.records.push_back(make_slot(t++, SlotOutcome::disrupted(0)));
    for (int i = 0; i < 4; ++i)
      trace.records.push_back(make_slot(t++, SlotOutcome::collision(2)));
    Metrics m = interval_metrics(trace, 0, 10);
    REQUIRE(m.defined);
    CHECK(m.interval_slots == 10);
    CHECK(m.lambda == Approx(0.4));
    CHECK(m.Lambda == Approx(0.6));
    CHECK(m.waste == Approx(0.4));
    REQUIRE(m.makespan.has_value());
    CHECK(*m.makespan == 3);
  }
  SECTION("system-empty slots do not count against the interval") {
    trace.records.push_back(make_slot(0, SlotOutcome::empty(), true));
    trace.records.push_back(make_slot(1, SlotOutcome::success(0)));
    trace.records.push_back(make_slot(2, SlotOutcome::empty(), true));
    Metrics m = interval_metrics(trace, 0, 3);
    CHECK(m.interval_slots == 1);
    CHECK(m.lambda == Approx(1.0));
  }
  SECTION("an all-idle interval is flagged undefined") {
    trace.records.push_back(make_slot(0, SlotOutcome::empty(), true));
    Metrics m = interval_metrics(trace, 0, 1);
    CHECK_FALSE(m.defined);
  }
  SECTION("fully disrupted interval: lambda 0, Lambda 1, waste 0") {
    for (int i = 0; i < 5; ++i)
      trace.records.push_back(make_slot(i, SlotOutcome::disrupted(0)));
    Metrics m = interval_metrics(trace, 0, 5);
    REQUIRE(m.defined);
    CHECK(m.lambda == Approx(0.0));
    CHECK(m.Lambda == Approx(1.0));
    CHECK(m.waste == Approx(0.0));
  }
}

TEST_CASE("run metrics end at the last delivery") {
  Trace trace;
  trace.records.push_back(make_slot(0, SlotOutcome::collision(2)));
  SlotRecord s = make_slot(1, SlotOutcome::success(0));
  s.events.push_back({SlotEvent::Kind::Success, 0});
  trace.records.push_back(s);
  trace.records.push_back(make_slot(2, SlotOutcome::empty(), true));
  Metrics m = run_metrics(trace);
  CHECK(m.end == 2);  // trailing idle tail is discarded
  CHECK(m.successes == 1);
}

TEST_CASE("segmentation tiles real traces") {
  RunConfig cfg;
  cfg.protocol = ProtocolKind::ReBackoff2;
  cfg.adversary = AdversaryConfig::batch(50);
  cfg.seed = 12;
  cfg.stop = StopRule::all_packets_done(400000);
  cfg.verbosity = Verbosity::PerPacket;
  Trace trace = run(cfg);
  REQUIRE(trace.complete);

  Segmentation seg = segment_epochs(trace, kUnitEpochThresholdTwoChannel);
  REQUIRE_FALSE(seg.segments.empty());

  // Segments tile the timeline without gaps or overlap.
  SlotIndex cursor = 0;
  for (const Segment& s : seg.segments) {
    REQUIRE(s.begin == cursor);
    REQUIRE(s.end > s.begin);
    cursor = s.end;
  }
  CHECK(cursor == trace.records.size());

  // Every epoch begins at an activation slot, and its streak starts stay
  // inside the segment.
  for (const Segment& s : seg.segments) {
    if (s.kind == Segment::Kind::Interstitial) continue;
    bool activation = false;
    for (const SlotEvent& ev : trace.records[s.begin].events)
      if (ev.kind == SlotEvent::Kind::Activation) activation = true;
    CHECK(activation);
    for (SlotIndex st : s.streak_starts) {
      CHECK(st >= s.begin);
      CHECK(st < s.end);
    }
    if (s.kind == Segment::Kind::Epoch) {
      CHECK(s.start_contention >= kUnitEpochThresholdTwoChannel);
      CHECK_FALSE(s.streak_starts.empty());
    } else {
      CHECK(s.start_contention < kUnitEpochThresholdTwoChannel);
    }
  }
}

TEST_CASE("attempts statistics") {
  Trace trace;
  trace.records.push_back(make_slot(0, SlotOutcome::success(0)));
  // One packet that sent the busy tone and the data packet in a single slot.
  PacketLedger led;
  led.arrival = 0;
  led.success_slot = 0;
  led.attempts_control = 1;
  led.attempts_data = 1;
  trace.ledger.push_back(led);
  AttemptsStats st = attempts_stats(trace);
  REQUIRE(st.per_packet.size() == 1);
  CHECK(st.per_packet[0] == 2);
  CHECK(st.mean == Approx(2.0));
  // Slots-in-system is floored at 2 so the ln^2 normalizer stays finite.
  CHECK(st.ln2_ratio[0] == Approx(2.0 / (std::log(2.0) * std::log(2.0))));
}

TEST_CASE("reset statistics") {
  Trace trace;
  auto add_packet = [&](std::size_t resets) {
    PacketLedger led;
    led.reset_slots.assign(resets, 0);
    trace.ledger.push_back(led);
  };
  // 8 packets with no reset, 4 with one, 2 with two, 1 with three.
  for (int i = 0; i < 8; ++i) add_packet(0);
  for (int i = 0; i < 4; ++i) add_packet(1);
  for (int i = 0; i < 2; ++i) add_packet(2);
  add_packet(3);
  ResetStats st = reset_stats(trace);
  CHECK(st.histogram[0] == 8);
  CHECK(st.histogram[3] == 1);
  REQUIRE(st.tail_ratios.size() >= 3);
  CHECK(st.tail_ratios[0].second == Approx(7.0 / 15.0));
  CHECK(st.tail_ratios[1].second == Approx(3.0 / 7.0));
}

TEST_CASE("slot bound Monte Carlo harness") {
  ProtocolParams def;
  SECTION("single packet of age 2") {
    BoundReport r = check_slot_bounds({2}, def, 200000, 99);
    // The exact success probability is d/2 = 0.25; the asymptotic lower
    // bound evaluates to 0.25 * e^{-0.5}.
    CHECK(r.x == Approx(0.5));
    CHECK(r.success.lower_bound == Approx(0.25 * std::exp(-0.5)));
    CHECK(r.success.empirical == Approx(0.25).margin(0.01));
    CHECK(r.collision.empirical == 0.0);
    CHECK(r.pass);
  }
  SECTION("empty age multiset degenerates cleanly") {
    BoundReport r = check_slot_bounds({}, def, 1000, 99);
    CHECK(r.x == 0.0);
    CHECK(r.pass);
  }
  SECTION("deterministic given the seed") {
    BoundReport a = check_slot_bounds({2, 4, 8}, def, 50000, 7);
    BoundReport b = check_slot_bounds({2, 4, 8}, def, 50000, 7);
    CHECK(a.success.empirical == b.success.empirical);
    CHECK(a.busy.empirical == b.busy.empirical);
  }
}

TEST_CASE("trial-prefix game") {
  SECTION("certain success passes every prefix") {
    TrialPrefixReport r = check_trial_prefixes(1.0, 1000, 200, 5);
    CHECK(r.fraction_all_prefixes_ok == Approx(1.0));
    CHECK(r.pass);
  }
  SECTION("forced prefix is ceil(16/p)") {
    TrialPrefixReport r = check_trial_prefixes(0.3, 1 << 12, 10, 5);
    CHECK(r.forced_prefix == 54);  // ceil(16 / 0.3)
  }
}

TEST_CASE("prefix fullness over lifetime logs") {
  const double gamma = 15.0 / 16.0;
  SECTION("one full slot carries fifteen empties") {
    std::vector<bool> log = {true};
    log.insert(log.end(), 15, false);
    CHECK_FALSE(first_prefix_violation(log, gamma).has_value());
  }
  SECTION("a sixteenth consecutive empty violates") {
    std::vector<bool> log = {true};
    log.insert(log.end(), 16, false);
    auto v = first_prefix_violation(log, gamma);
    REQUIRE(v.has_value());
    CHECK(*v == 17);
  }
  SECTION("all-empty logs violate at the first checked prefix") {
    std::vector<bool> log(4, false);
    auto v = first_prefix_violation(log, gamma);
    REQUIRE(v.has_value());
    CHECK(*v == 2);
  }
  SECTION("single-slot lifetimes are never checked") {
    CHECK_FALSE(first_prefix_violation({false}, gamma).has_value());
  }
  SECTION("whole traces come up clean") {
    RunConfig cfg;
    cfg.protocol = ProtocolKind::ReBackoff2;
    cfg.adversary = AdversaryConfig::batch(40);
    cfg.seed = 77;
    cfg.stop = StopRule::all_packets_done(400000);
    cfg.verbosity = Verbosity::PerPacket;
    Trace trace = run(cfg);
    REQUIRE(trace.complete);
    CHECK(check_prefix_fullness(trace).empty());
  }
}

TEST_CASE("designation agreement flags constructed disagreements") {
  Trace trace;
  trace.designations.resize(2);
  trace.designations[0] = {{0, 0, true}, {1, 0, true}};
  trace.designations[1] = {{0, 0, true}, {1, 0, false}};  // packet 1 diverges
  trace.records.resize(2);
  auto v = check_sync_agreement(trace);
  REQUIRE(v.size() == 1);
  CHECK(v[0].slot == 1);
}

TEST_CASE("ledger consistency flags tampering") {
  RunConfig cfg;
  cfg.protocol = ProtocolKind::ReBackoff2;
  cfg.adversary = AdversaryConfig::batch(10);
  cfg.seed = 3;
  cfg.stop = StopRule::all_packets_done(200000);
  cfg.verbosity = Verbosity::PerPacket;
  Trace trace = run(cfg);
  REQUIRE(ledger_consistent(trace));
  trace.ledger[4].success_slot = *trace.ledger[4].success_slot + 1;
  CHECK_FALSE(ledger_consistent(trace));
}
