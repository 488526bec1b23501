#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rebackoff/protocol.hpp"

using namespace rebackoff;
using Catch::Approx;

TEST_CASE("transmit probabilities") {
  ProtocolParams def;  // c=2, d=0.5, gamma=15/16
  SECTION("age 1 clamps control to 1") {
    auto p = transmit_probabilities(1, def);
    CHECK(p.control == Approx(1.0));
    CHECK(p.data == Approx(0.5));
  }
  SECTION("small c at age 1") {
    ProtocolParams q = def;
    q.c = 0.25;
    auto p = transmit_probabilities(1, q);
    CHECK(p.control == Approx(0.25));
    CHECK(p.data == Approx(0.5));
  }
  SECTION("large ages follow c ln(s)/s and d/s") {
    auto p = transmit_probabilities(8, def);
    CHECK(p.control == Approx(2.0 * std::log(8.0) / 8.0));
    CHECK(p.data == Approx(0.5 / 8.0));
  }
  SECTION("ln floor: max(ln s, 1) applies below s = e") {
    auto p = transmit_probabilities(2, def);
    CHECK(p.control == Approx(1.0));  // 2 * 1 / 2
    auto p4 = transmit_probabilities(4, ProtocolParams{0.25, 0.5, 0.9375});
    CHECK(p4.control == Approx(0.25 * std::log(4.0) / 4.0));
  }
  SECTION("probabilities never exceed 1 and fall with age") {
    double prev_c = 2.0, prev_d = 2.0;
    for (std::uint64_t s = 1; s <= 5000; ++s) {
      auto p = transmit_probabilities(s, def);
      REQUIRE(p.control <= 1.0);
      REQUIRE(p.data <= 1.0);
      if (s > 3) REQUIRE(p.control <= prev_c);
      REQUIRE(p.data <= prev_d);
      prev_c = p.control;
      prev_d = p.data;
    }
  }
}

TEST_CASE("probability table matches the direct formula") {
  ProtocolParams def;
  ProbTable table(def);
  for (std::uint64_t s = 1; s <= 300; ++s) {
    auto direct = transmit_probabilities(s, def);
    CHECK(table.at(s).control == direct.control);
    CHECK(table.at(s).data == direct.data);
  }
}

TEST_CASE("two-channel decision draws against the age probabilities") {
  ProtocolParams def;
  PacketState st;
  st.begin_lifetime();
  st.age = 4;
  // age 4, c = 0.25: control prob = 0.25 * ln(4) / 4
  ProtocolParams q = def;
  q.c = 0.25;
  const double pc = 0.25 * std::log(4.0) / 4.0;

  SECTION("draw below both probabilities sends on both channels") {
    TransmitDecision d = rb2_decide(st, q, pc * 0.5, 0.05);
    CHECK(d.send_control);
    CHECK(d.send_data);
    CHECK(st.attempts_control == 1);
    CHECK(st.attempts_data == 1);
  }
  SECTION("draw above both probabilities stays silent") {
    TransmitDecision d = rb2_decide(st, q, pc * 1.5, 0.2);
    CHECK_FALSE(d.send_control);
    CHECK_FALSE(d.send_data);
    CHECK(st.attempts_control == 0);
    CHECK(st.attempts_data == 0);
  }
  SECTION("attempt counters accumulate across slots") {
    rb2_decide(st, def, 0.0, 0.0);
    rb2_decide(st, def, 0.0, 1.0 - 1e-12);
    CHECK(st.attempts_control == 2);
    CHECK(st.attempts_data == 1);
  }
}

TEST_CASE("two-channel observation") {
  ProtocolParams def;

  SECTION("inactive packet activates after an empty control slot") {
    PacketState st;
    CHECK(rb2_observe(st, def, ListenerView::Empty, ListenerView::Empty,
                      std::nullopt) == ObserveEvent::ActivatesNextSlot);
    CHECK(st.activity == Activity::Inactive);  // activation happens next slot
    CHECK(rb2_observe(st, def, ListenerView::Full, ListenerView::Empty,
                      std::nullopt) == ObserveEvent::None);
  }

  SECTION("successful transmission terminates the packet") {
    PacketState st;
    st.begin_lifetime();
    CHECK(rb2_observe(st, def, ListenerView::Full, ListenerView::Full,
                      TransmitterResult::Succeeded) == ObserveEvent::Succeeded);
    CHECK(st.activity == Activity::Done);
  }

  SECTION("ages advance on surviving slots") {
    PacketState st;
    st.begin_lifetime();
    REQUIRE(st.age == 1);
    for (int i = 0; i < 5; ++i)
      rb2_observe(st, def, ListenerView::Full, ListenerView::Full,
                  std::nullopt);
    CHECK(st.age == 6);
    CHECK(st.data_slots_seen == 5);
    CHECK(st.empty_data_seen == 0);
  }

  SECTION("reset fires exactly at the gamma threshold") {
    // gamma = 1/2: one full then one empty data slot -> 1 >= 0.5 * 2.
    ProtocolParams half = def;
    half.gamma = 0.5;
    PacketState st;
    st.begin_lifetime();
    CHECK(rb2_observe(st, half, ListenerView::Full, ListenerView::Full,
                      std::nullopt) == ObserveEvent::None);
    CHECK(rb2_observe(st, half, ListenerView::Full, ListenerView::Empty,
                      std::nullopt) == ObserveEvent::Reset);
    CHECK(st.activity == Activity::Inactive);
    CHECK(st.resets == 1);
    CHECK(st.age == 0);
  }

  SECTION("with the default gamma a first empty data slot resets") {
    PacketState st;
    st.begin_lifetime();
    CHECK(rb2_observe(st, def, ListenerView::Full, ListenerView::Empty,
                      std::nullopt) == ObserveEvent::Reset);
  }

  SECTION("reset preserves cumulative counters, clears lifetime state") {
    PacketState st;
    st.begin_lifetime();
    rb2_decide(st, def, 0.0, 0.0);
    rb2_observe(st, def, ListenerView::Full, ListenerView::Empty,
                std::nullopt);
    CHECK(st.attempts_control == 1);
    CHECK(st.attempts_data == 1);
    CHECK(st.empty_data_seen == 0);
    CHECK(st.data_slots_seen == 0);
  }
}

TEST_CASE("single-channel activation needs two consecutive empty slots") {
  ProtocolParams def;
  PacketState core;
  SingleChannelState chan;
  CHECK(rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt) ==
        ObserveEvent::None);
  CHECK(rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt) ==
        ObserveEvent::ActivatesNextSlot);

  SECTION("a full slot in between restarts the count") {
    PacketState c2;
    SingleChannelState s2;
    rb1_observe(c2, s2, def, ListenerView::Empty, std::nullopt);
    CHECK(rb1_observe(c2, s2, def, ListenerView::Full, std::nullopt) ==
          ObserveEvent::None);
    CHECK(rb1_observe(c2, s2, def, ListenerView::Empty, std::nullopt) ==
          ObserveEvent::None);
    CHECK(rb1_observe(c2, s2, def, ListenerView::Empty, std::nullopt) ==
          ObserveEvent::ActivatesNextSlot);
  }
}

TEST_CASE("single-channel first control slot transmits with probability 1") {
  ProtocolParams def;
  ProbTable probs(def);
  PacketState core;
  SingleChannelState chan;
  core.begin_lifetime();
  chan.begin_lifetime();
  // Even the worst possible draw transmits in the first active control slot.
  CHECK(rb1_decide(core, chan, probs, 1.0 - 1e-12));
  CHECK(core.attempts_control == 1);
  CHECK(core.age == 1);  // no age tick before the first slot
}

TEST_CASE("single-channel slot-group structure") {
  ProtocolParams def;
  ProbTable probs(def);

  SECTION("empty control + full data adds an extra data slot") {
    PacketState core;
    SingleChannelState chan;
    core.begin_lifetime();
    chan.begin_lifetime();
    // Control slot observed empty (this packet did not transmit).
    chan.first_active_slot = false;  // pretend a later group
    rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt);
    REQUIRE(chan.phase == SlotPhase::Data);
    REQUIRE(chan.last_control_empty);
    // Full data slot: group extends; this data slot is not counted.
    rb1_observe(core, chan, def, ListenerView::Full, std::nullopt);
    CHECK(chan.phase == SlotPhase::ExtraData);
    CHECK(core.data_slots_seen == 0);
    // The extra data slot is the counted one.
    rb1_observe(core, chan, def, ListenerView::Full, std::nullopt);
    CHECK(core.data_slots_seen == 1);
    CHECK(chan.phase == SlotPhase::Control);
  }

  SECTION("full control + data closes a two-slot group") {
    PacketState core;
    SingleChannelState chan;
    core.begin_lifetime();
    chan.begin_lifetime();
    chan.first_active_slot = false;
    rb1_observe(core, chan, def, ListenerView::Full, std::nullopt);
    REQUIRE_FALSE(chan.last_control_empty);
    rb1_observe(core, chan, def, ListenerView::Full, std::nullopt);
    CHECK(core.data_slots_seen == 1);
    CHECK(chan.phase == SlotPhase::Control);
  }

  SECTION("delivery in the first data slot of a 3-slot group delays "
          "termination") {
    PacketState core;
    SingleChannelState chan;
    core.begin_lifetime();
    chan.begin_lifetime();
    chan.first_active_slot = false;
    rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt);
    rb1_observe(core, chan, def, ListenerView::Full,
                TransmitterResult::Succeeded);
    CHECK(core.activity == Activity::Active);  // stays for the extra slot
    CHECK(chan.pending_termination);
    // It participates in the extra data slot without re-transmitting.
    CHECK_FALSE(rb1_decide(core, chan, probs, 0.0));
    rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt);
    CHECK(core.activity == Activity::Done);
  }

  SECTION("empty counted data slot at default gamma resets") {
    PacketState core;
    SingleChannelState chan;
    core.begin_lifetime();
    chan.begin_lifetime();
    chan.first_active_slot = false;
    rb1_observe(core, chan, def, ListenerView::Full, std::nullopt);
    CHECK(rb1_observe(core, chan, def, ListenerView::Empty, std::nullopt) ==
          ObserveEvent::Reset);
    CHECK(core.activity == Activity::Inactive);
    CHECK(chan.consecutive_empty_seen == 0);
  }
}

TEST_CASE("binary exponential backoff windows") {
  BebState st;
  st.activity = Activity::Active;

  SECTION("window sizes double: 2, 4, 8") {
    CHECK(st.window_size == 2);
    // Walk two full windows without success.
    for (int i = 0; i < 2; ++i) {
      beb_step(st, 0.99);
      beb_observe(st, std::nullopt);
    }
    CHECK(st.window_size == 4);
    for (int i = 0; i < 4; ++i) {
      beb_step(st, 0.99);
      beb_observe(st, std::nullopt);
    }
    CHECK(st.window_size == 8);
  }

  SECTION("exactly one transmission per window") {
    for (std::uint64_t window = 2; window <= 16; window *= 2) {
      int sent = 0;
      const double draw = 0.3;
      for (std::uint64_t i = 0; i < window; ++i) {
        if (beb_step(st, draw).send_data) ++sent;
        beb_observe(st, std::nullopt);
      }
      CHECK(sent == 1);
    }
  }

  SECTION("success terminates") {
    beb_step(st, 0.0);
    CHECK(beb_observe(st, TransmitterResult::Succeeded) ==
          ObserveEvent::Succeeded);
    CHECK(st.activity == Activity::Done);
  }
}
