#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rebackoff/adversary.hpp"
#include "rebackoff/channel.hpp"
#include "rebackoff/protocol.hpp"
#include "rebackoff/rng.hpp"

namespace rebackoff {

enum class ProtocolKind : std::uint8_t { ReBackoff2, ReBackoff1, Beb };
enum class Verbosity : std::uint8_t { Summary, PerPacket };

struct StopRule {
  bool all_done = true;
  std::uint64_t max_slots = 0;  // 0 means no cap (AllDone mode only)

  static StopRule all_packets_done(std::uint64_t cap = 0) {
    return {true, cap};
  }
  static StopRule horizon(std::uint64_t limit) { return {false, limit}; }
};

struct RunConfig {
  ProtocolKind protocol = ProtocolKind::ReBackoff2;
  ProtocolParams params;
  AdversaryConfig adversary;
  std::uint64_t seed = 0;
  StopRule stop;
  Verbosity verbosity = Verbosity::Summary;
};

// Global slot designation for single-channel runs; TwoChannel otherwise.
enum class SlotDesignation : std::uint8_t { TwoChannel, Idle, Control, Data };

struct SlotEvent {
  enum class Kind : std::uint8_t { Activation, Success, Reset };
  Kind kind;
  PacketId packet;
};

struct SlotRecord {
  SlotIndex slot = 0;
  AdversaryDirective directive;
  SlotOutcome control_outcome;  // unused for Beb; the shared channel for Rb1
  SlotOutcome data_outcome;     // Rb1: mirrors the shared-channel outcome
  SlotDesignation designation = SlotDesignation::TwoChannel;
  std::uint32_t live_count = 0;
  std::uint32_t active_count = 0;
  double contention = 0.0;
  bool system_empty = true;
  std::vector<SlotEvent> events;
};

struct PacketLedger {
  SlotIndex arrival = 0;
  std::vector<SlotIndex> activation_slots;
  std::vector<SlotIndex> reset_slots;
  std::optional<SlotIndex> success_slot;
  std::uint64_t attempts_control = 0;
  std::uint64_t attempts_data = 0;
};

// Per-packet designation snapshot for one slot of a single-channel run.
struct DesignationRecord {
  PacketId packet;
  SlotIndex active_since;  // activation slot of the current lifetime
  bool is_control;
};

struct Trace {
  RunConfig config;
  std::vector<SlotRecord> records;
  bool complete = true;  // false iff max_slots hit in AllDone mode

  // PerPacket verbosity only.
  std::vector<PacketLedger> ledger;
  // Per packet, per lifetime: fullness of each counted data slot.
  std::vector<std::vector<std::vector<bool>>> lifetime_logs;
  // Single-channel runs: per slot, designations of the active packets.
  std::vector<std::vector<DesignationRecord>> designations;

  std::uint64_t total_arrivals = 0;
  std::uint64_t total_successes = 0;
  std::uint64_t disrupted_data_slots = 0;
};

namespace detail {

inline HistoryView history_of(const Trace& trace) {
  HistoryView h;
  h.slots = trace.records.size();
  h.total_arrivals = trace.total_arrivals;
  h.total_successes = trace.total_successes;
  if (!trace.records.empty()) {
    const SlotRecord& last = trace.records.back();
    h.last_active_count = last.active_count;
    h.last_contention = last.contention;
  }
  return h;
}

struct EnginePacket {
  PacketState core;
  SingleChannelState chan;  // single-channel runs only
  Rng rng;
  std::uint32_t active_since = 0;  // single-channel: current lifetime start
  bool activates_next_slot = false;
  bool transmitted = false;  // scratch: data/shared-channel transmission this slot
};

inline void open_lifetime_log(Trace& trace, PacketId id) {
  if (trace.config.verbosity == Verbosity::PerPacket)
    trace.lifetime_logs[id].emplace_back();
}

inline void log_counted_data_slot(Trace& trace, PacketId id, bool full) {
  if (trace.config.verbosity == Verbosity::PerPacket)
    trace.lifetime_logs[id].back().push_back(full);
}

inline void flush_attempts(Trace& trace, const EnginePacket& p) {
  if (trace.config.verbosity != Verbosity::PerPacket) return;
  PacketLedger& led = trace.ledger[p.core.id];
  led.attempts_control = p.core.attempts_control;
  led.attempts_data = p.core.attempts_data;
}

// Completed packets flush at termination; this covers whatever is left when
// the run stops.
inline void finish_ledger(Trace& trace, const std::vector<EnginePacket>& live) {
  for (const auto& p : live) flush_attempts(trace, p);
}

}  // namespace detail

// Deterministic simulation of one run.  Identical configs produce identical
// traces.  Per-slot ordering: adversary directive, arrivals, pending
// activations, decisions, channel resolution, observations, record.
inline Trace run(const RunConfig& config);

namespace detail {

inline Trace run_rebackoff2(const RunConfig& config) {
  Trace trace;
  trace.config = config;
  auto adversary = make_adversary(config.adversary, config.seed);
  const auto finite_n = config.adversary.finite_arrivals();
  if (config.stop.all_done && !finite_n)
    throw std::invalid_argument("AllDone stop requires a finite-arrival adversary");

  ProbTable probs(config.params);
  std::vector<EnginePacket> live;  // dense; completed packets drop out
  PacketId next_id = 0;

  for (SlotIndex t = 0;; ++t) {
    if (config.stop.max_slots > 0 && t >= config.stop.max_slots) {
      trace.complete = !config.stop.all_done;
      break;
    }

    SlotRecord rec;
    rec.slot = t;
    rec.directive = adversary->next(t, history_of(trace));
    assert(!finite_n ||
           trace.total_arrivals + rec.directive.arrivals <= *finite_n);

    for (std::uint32_t i = 0; i < rec.directive.arrivals; ++i) {
      EnginePacket p;
      p.core.id = next_id++;
      p.core.arrival_slot = static_cast<std::uint32_t>(t);
      p.rng = derive_stream(config.seed, RngDomain::Packet, p.core.id);
      live.push_back(p);
      if (config.verbosity == Verbosity::PerPacket) {
        trace.ledger.push_back(PacketLedger{t, {}, {}, std::nullopt, 0, 0});
        trace.lifetime_logs.emplace_back();
      }
    }
    trace.total_arrivals += rec.directive.arrivals;

    // Packets that saw an empty control slot last slot activate now.
    for (EnginePacket& p : live) {
      if (p.activates_next_slot) {
        p.activates_next_slot = false;
        p.core.begin_lifetime();
        rec.events.push_back({SlotEvent::Kind::Activation, p.core.id});
        if (config.verbosity == Verbosity::PerPacket) {
          trace.ledger[p.core.id].activation_slots.push_back(t);
          open_lifetime_log(trace, p.core.id);
        }
      }
    }

    // Decisions.
    std::uint32_t control_tx = 0, data_tx = 0;
    PacketId control_sole = kNoPacket, data_sole = kNoPacket;
    double contention = 0.0;
    std::uint32_t active_count = 0;
    for (EnginePacket& p : live) {
      if (p.core.activity != Activity::Active) continue;
      ++active_count;
      contention += 1.0 / static_cast<double>(p.core.age);
      const double draw_c = p.rng.next_double();
      const double draw_d = p.rng.next_double();
      TransmitDecision d =
          rb2_decide(p.core, probs.at(p.core.age), draw_c, draw_d);
      if (d.send_control) {
        ++control_tx;
        control_sole = p.core.id;
      }
      if (d.send_data) {
        ++data_tx;
        data_sole = p.core.id;
      }
      p.transmitted = d.send_data;
    }
    const auto live_this_slot = static_cast<std::uint32_t>(live.size());

    rec.control_outcome =
        resolve_slot(control_tx, control_tx == 1 ? control_sole : kNoPacket,
                     rec.directive.disrupt_control);
    rec.data_outcome =
        resolve_slot(data_tx, data_tx == 1 ? data_sole : kNoPacket,
                     rec.directive.disrupt_data);
    if (rec.directive.disrupt_data) ++trace.disrupted_data_slots;

    const ListenerView control_view = listener_view(rec.control_outcome);
    const ListenerView data_view = listener_view(rec.data_outcome);

    // Observations.
    for (std::size_t i = 0; i < live.size();) {
      EnginePacket& p = live[i];
      const PacketId id = p.core.id;
      std::optional<TransmitterResult> own;
      if (p.core.activity == Activity::Active && p.transmitted)
        own = transmitter_result(rec.data_outcome, id);
      p.transmitted = false;
      const bool was_active = p.core.activity == Activity::Active;
      const ObserveEvent ev =
          rb2_observe(p.core, config.params, control_view, data_view, own);
      switch (ev) {
        case ObserveEvent::ActivatesNextSlot:
          p.activates_next_slot = true;
          break;
        case ObserveEvent::Succeeded:
          rec.events.push_back({SlotEvent::Kind::Success, id});
          ++trace.total_successes;
          if (config.verbosity == Verbosity::PerPacket)
            trace.ledger[id].success_slot = t;
          break;
        case ObserveEvent::Reset:
          rec.events.push_back({SlotEvent::Kind::Reset, id});
          if (config.verbosity == Verbosity::PerPacket) {
            trace.ledger[id].reset_slots.push_back(t);
            log_counted_data_slot(trace, id, data_view == ListenerView::Full);
          }
          break;
        case ObserveEvent::None:
          if (was_active && config.verbosity == Verbosity::PerPacket)
            log_counted_data_slot(trace, id, data_view == ListenerView::Full);
          break;
      }
      if (p.core.activity == Activity::Done) {
        flush_attempts(trace, p);
        live[i] = live.back();
        live.pop_back();
      } else {
        ++i;
      }
    }

    rec.live_count = live_this_slot;
    rec.active_count = active_count;
    rec.contention = contention;
    rec.system_empty = rec.live_count == 0;
    trace.records.push_back(std::move(rec));

    if (config.stop.all_done && trace.total_arrivals == *finite_n &&
        live.empty())
      break;
  }

  finish_ledger(trace, live);
  return trace;
}

inline Trace run_rebackoff1(const RunConfig& config) {
  Trace trace;
  trace.config = config;
  auto adversary = make_adversary(config.adversary, config.seed);
  const auto finite_n = config.adversary.finite_arrivals();
  if (config.stop.all_done && !finite_n)
    throw std::invalid_argument("AllDone stop requires a finite-arrival adversary");

  ProbTable probs(config.params);
  std::vector<EnginePacket> live;  // dense; completed packets drop out
  PacketId next_id = 0;

  for (SlotIndex t = 0;; ++t) {
    if (config.stop.max_slots > 0 && t >= config.stop.max_slots) {
      trace.complete = !config.stop.all_done;
      break;
    }

    SlotRecord rec;
    rec.slot = t;
    rec.directive = adversary->next(t, history_of(trace));
    const bool disrupted = rec.directive.disrupt_control;
    assert(!finite_n ||
           trace.total_arrivals + rec.directive.arrivals <= *finite_n);

    for (std::uint32_t i = 0; i < rec.directive.arrivals; ++i) {
      EnginePacket p;
      p.core.id = next_id++;
      p.core.arrival_slot = static_cast<std::uint32_t>(t);
      p.rng = derive_stream(config.seed, RngDomain::Packet, p.core.id);
      live.push_back(p);
      if (config.verbosity == Verbosity::PerPacket) {
        trace.ledger.push_back(PacketLedger{t, {}, {}, std::nullopt, 0, 0});
        trace.lifetime_logs.emplace_back();
      }
    }
    trace.total_arrivals += rec.directive.arrivals;

    for (EnginePacket& p : live) {
      if (p.activates_next_slot) {
        p.activates_next_slot = false;
        p.core.begin_lifetime();
        p.chan.begin_lifetime();
        p.active_since = static_cast<std::uint32_t>(t);
        rec.events.push_back({SlotEvent::Kind::Activation, p.core.id});
        if (config.verbosity == Verbosity::PerPacket) {
          trace.ledger[p.core.id].activation_slots.push_back(t);
          open_lifetime_log(trace, p.core.id);
        }
      }
    }

    // Decisions (one shared channel carrying both tones and data).
    std::uint32_t tx = 0;
    PacketId sole = kNoPacket;
    bool sole_is_data = false;
    double contention = 0.0;
    std::uint32_t active_count = 0;
    for (EnginePacket& p : live) {
      if (p.core.activity != Activity::Active) continue;
      ++active_count;
      const double draw = p.rng.next_double();
      const bool control_phase = p.chan.phase == SlotPhase::Control;
      if (rb1_decide(p.core, p.chan, probs, draw)) {
        ++tx;
        sole = p.core.id;
        sole_is_data = !control_phase;
        p.transmitted = true;
      }
      contention += 1.0 / static_cast<double>(p.core.age);
    }
    const auto live_this_slot = static_cast<std::uint32_t>(live.size());

    // control_outcome records the raw shared channel; data_outcome holds the
    // delivery-relevant classification (a lone busy tone delivers nothing).
    rec.control_outcome =
        resolve_slot(tx, tx == 1 ? sole : kNoPacket, disrupted);
    if (tx == 1 && !sole_is_data && !disrupted)
      rec.data_outcome = SlotOutcome::empty();
    else
      rec.data_outcome = rec.control_outcome;
    if (disrupted) ++trace.disrupted_data_slots;
    const ListenerView view = listener_view(rec.control_outcome);

    // Global slot designation: anchored by any packet active across t-1 and
    // t; Control if all active packets are new; Idle if none are active.
    rec.designation = SlotDesignation::Idle;
    if (config.verbosity == Verbosity::PerPacket)
      trace.designations.emplace_back();
    for (const EnginePacket& p : live) {
      if (p.core.activity != Activity::Active) continue;
      const bool is_control = p.chan.phase == SlotPhase::Control;
      if (config.verbosity == Verbosity::PerPacket)
        trace.designations.back().push_back(
            {p.core.id, p.active_since, is_control});
      if (p.active_since < t)
        rec.designation = is_control ? SlotDesignation::Control
                                     : SlotDesignation::Data;
      else if (rec.designation == SlotDesignation::Idle)
        rec.designation = SlotDesignation::Control;  // newly active packets
    }

    // Observations.
    for (std::size_t i = 0; i < live.size();) {
      EnginePacket& p = live[i];
      const PacketId id = p.core.id;
      std::optional<TransmitterResult> own;
      if (p.transmitted) own = transmitter_result(rec.control_outcome, id);
      p.transmitted = false;
      // Only a data-phase transmission delivers; a sole busy tone merely
      // reads as a full slot to everyone listening.
      if (own && *own == TransmitterResult::Succeeded &&
          p.chan.phase != SlotPhase::Control) {
        // Recorded at the slot the message went through, even when the
        // packet stays for one more data slot before terminating.
        rec.events.push_back({SlotEvent::Kind::Success, id});
        ++trace.total_successes;
        if (config.verbosity == Verbosity::PerPacket)
          trace.ledger[id].success_slot = t;
      }
      const std::uint64_t counted_before = p.core.data_slots_seen;
      const ObserveEvent ev = rb1_observe(p.core, p.chan, config.params, view, own);
      switch (ev) {
        case ObserveEvent::ActivatesNextSlot:
          p.activates_next_slot = true;
          break;
        case ObserveEvent::Reset:
          rec.events.push_back({SlotEvent::Kind::Reset, id});
          if (config.verbosity == Verbosity::PerPacket) {
            trace.ledger[id].reset_slots.push_back(t);
            log_counted_data_slot(trace, id, view == ListenerView::Full);
          }
          break;
        case ObserveEvent::Succeeded:
        case ObserveEvent::None:
          if (p.core.data_slots_seen > counted_before &&
              config.verbosity == Verbosity::PerPacket)
            log_counted_data_slot(trace, id, view == ListenerView::Full);
          break;
      }
      if (p.core.activity == Activity::Done) {
        flush_attempts(trace, p);
        live[i] = live.back();
        live.pop_back();
      } else {
        ++i;
      }
    }

    rec.live_count = live_this_slot;
    rec.active_count = active_count;
    rec.contention = contention;
    rec.system_empty = rec.live_count == 0;
    trace.records.push_back(std::move(rec));

    if (config.stop.all_done && trace.total_arrivals == *finite_n &&
        live.empty())
      break;
  }

  finish_ledger(trace, live);
  return trace;
}

inline Trace run_beb(const RunConfig& config) {
  Trace trace;
  trace.config = config;
  auto adversary = make_adversary(config.adversary, config.seed);
  const auto finite_n = config.adversary.finite_arrivals();
  if (config.stop.all_done && !finite_n)
    throw std::invalid_argument("AllDone stop requires a finite-arrival adversary");

  struct BebPacket {
    BebState state;
    SlotIndex window_start = 0;
    Rng rng;
  };
  std::vector<BebPacket> packets;
  std::uint64_t live = 0;
  double rate_sum = 0.0;  // sum of 1/W over live packets (diagnostic contention)
  // Event calendar: slot -> packets transmitting in that slot.
  std::unordered_map<SlotIndex, std::vector<PacketId>> calendar;

  auto schedule = [&](BebPacket& p) {
    const double draw = p.rng.next_double();
    p.state.chosen_slot = static_cast<std::uint64_t>(
        draw * static_cast<double>(p.state.window_size));
    calendar[p.window_start + p.state.chosen_slot].push_back(p.state.id);
  };

  for (SlotIndex t = 0;; ++t) {
    if (config.stop.max_slots > 0 && t >= config.stop.max_slots) {
      trace.complete = !config.stop.all_done;
      break;
    }

    SlotRecord rec;
    rec.slot = t;
    rec.directive = adversary->next(t, history_of(trace));
    assert(!finite_n ||
           trace.total_arrivals + rec.directive.arrivals <= *finite_n);

    for (std::uint32_t i = 0; i < rec.directive.arrivals; ++i) {
      BebPacket p;
      p.state.id = static_cast<PacketId>(packets.size());
      p.state.arrival_slot = static_cast<std::uint32_t>(t);
      p.state.activity = Activity::Active;
      p.state.window_size = 2;
      p.window_start = t + 1;  // first transmission opportunity is t+1
      p.rng = derive_stream(config.seed, RngDomain::Packet, p.state.id);
      packets.push_back(p);
      schedule(packets.back());
      ++live;
      rate_sum += 0.5;
      if (config.verbosity == Verbosity::PerPacket) {
        trace.ledger.push_back(PacketLedger{t, {t + 1}, {}, std::nullopt, 0, 0});
        trace.lifetime_logs.emplace_back();
      }
    }
    trace.total_arrivals += rec.directive.arrivals;
    const auto live_this_slot = static_cast<std::uint32_t>(live);

    std::vector<PacketId> transmitters;
    if (auto it = calendar.find(t); it != calendar.end()) {
      transmitters = std::move(it->second);
      calendar.erase(it);
    }
    rec.data_outcome = resolve_slot(
        static_cast<std::uint32_t>(transmitters.size()),
        transmitters.size() == 1 ? transmitters[0] : kNoPacket,
        rec.directive.disrupt_data);
    if (rec.directive.disrupt_data) ++trace.disrupted_data_slots;

    for (PacketId id : transmitters) {
      BebPacket& p = packets[id];
      ++p.state.attempts;
      if (transmitter_result(rec.data_outcome, id) ==
          TransmitterResult::Succeeded) {
        p.state.activity = Activity::Done;
        rec.events.push_back({SlotEvent::Kind::Success, id});
        ++trace.total_successes;
        --live;
        rate_sum -= 1.0 / static_cast<double>(p.state.window_size);
        if (config.verbosity == Verbosity::PerPacket)
          trace.ledger[id].success_slot = t;
      } else {
        // Wait until the end of the window, then double and redraw.
        rate_sum -= 0.5 / static_cast<double>(p.state.window_size);
        p.window_start += p.state.window_size;
        p.state.window_size *= 2;
        schedule(p);
      }
    }

    rec.live_count = live_this_slot;
    rec.active_count = rec.live_count;
    rec.contention = rate_sum;
    rec.system_empty = rec.live_count == 0;
    trace.records.push_back(std::move(rec));

    if (config.stop.all_done && trace.total_arrivals == *finite_n && live == 0)
      break;
  }

  if (config.verbosity == Verbosity::PerPacket)
    for (const auto& p : packets)
      trace.ledger[p.state.id].attempts_data = p.state.attempts;
  return trace;
}

}  // namespace detail

inline Trace run(const RunConfig& config) {
  if (!config.params.valid())
    throw std::invalid_argument("invalid protocol parameters");
  switch (config.protocol) {
    case ProtocolKind::ReBackoff2:
      return detail::run_rebackoff2(config);
    case ProtocolKind::ReBackoff1:
      return detail::run_rebackoff1(config);
    case ProtocolKind::Beb:
      return detail::run_beb(config);
  }
  throw std::invalid_argument("unknown protocol kind");
}

}  // namespace rebackoff
