#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "rebackoff/channel.hpp"
#include "rebackoff/rng.hpp"

namespace rebackoff {

struct ProtocolParams {
  double c = 2.0;          // control-tone coefficient, > 0
  double d = 0.5;          // data coefficient, in (0, 1/2]
  double gamma = 15.0 / 16.0;  // reset threshold, in (0, 1)

  bool valid() const {
    return c > 0.0 && d > 0.0 && d <= 0.5 && gamma > 0.0 && gamma < 1.0;
  }
};

struct TransmitProbabilities {
  double control;
  double data;
};

// Per-slot transmission probabilities as a function of age.  Both clamp to 1
// at small ages (c*max(ln s, 1)/s can exceed 1 for s in {1, 2}).
inline TransmitProbabilities transmit_probabilities(std::uint64_t age,
                                                    const ProtocolParams& p) {
  assert(age >= 1);
  const double s = static_cast<double>(age);
  const double pc = std::min(1.0, p.c * std::max(std::log(s), 1.0) / s);
  const double pd = std::min(1.0, p.d / s);
  return {pc, pd};
}

// Memoized probability table; probabilities depend only on age.
class ProbTable {
 public:
  explicit ProbTable(const ProtocolParams& params) : params_(params) {
    table_.reserve(1024);
    table_.push_back({1.0, 1.0});  // unused age-0 slot
  }

  const TransmitProbabilities& at(std::uint64_t age) {
    while (table_.size() <= age)
      table_.push_back(transmit_probabilities(table_.size(), params_));
    return table_[age];
  }

 private:
  ProtocolParams params_;
  std::vector<TransmitProbabilities> table_;
};

enum class Activity : std::uint8_t { Inactive, Active, Done };

struct TransmitDecision {
  bool send_control = false;
  bool send_data = false;
};

// ---------------------------------------------------------------------------
// Two-channel Re-Backoff
// ---------------------------------------------------------------------------

// Field widths kept narrow on purpose: the engine streams over one of these
// per live packet per slot, so the struct should span as few cache lines as
// possible.  32 bits comfortably cover any supported horizon.
struct PacketState {
  PacketId id = kNoPacket;
  std::uint32_t arrival_slot = 0;
  Activity activity = Activity::Inactive;

  // Lifetime-local counters; cleared on reset.
  std::uint32_t age = 0;              // slots active this lifetime
  std::uint32_t empty_data_seen = 0;  // empty counted data slots this lifetime
  std::uint32_t data_slots_seen = 0;  // counted data slots this lifetime

  // Cumulative over all lifetimes.
  std::uint32_t resets = 0;
  std::uint32_t attempts_control = 0;
  std::uint32_t attempts_data = 0;

  void begin_lifetime() {
    activity = Activity::Active;
    age = 1;
    empty_data_seen = 0;
    data_slots_seen = 0;
  }

  void reset_to_inactive() {
    activity = Activity::Inactive;
    age = 0;
    empty_data_seen = 0;
    data_slots_seen = 0;
    ++resets;
  }
};

// Decide what an active packet transmits this slot.  Increments attempt
// counters for each channel used.
inline TransmitDecision rb2_decide(PacketState& state,
                                   const TransmitProbabilities& probs,
                                   double draw_control, double draw_data) {
  assert(state.activity == Activity::Active);
  TransmitDecision decision;
  decision.send_control = draw_control < probs.control;
  decision.send_data = draw_data < probs.data;
  if (decision.send_control) ++state.attempts_control;
  if (decision.send_data) ++state.attempts_data;
  return decision;
}

inline TransmitDecision rb2_decide(PacketState& state,
                                   const ProtocolParams& params,
                                   double draw_control, double draw_data) {
  return rb2_decide(state, transmit_probabilities(state.age, params),
                    draw_control, draw_data);
}

enum class ObserveEvent : std::uint8_t {
  None,
  ActivatesNextSlot,  // inactive packet saw an empty control slot
  Succeeded,
  Reset,
};

// End-of-slot observation and update for the two-channel protocol.
// `own_result` is present iff the packet transmitted on the data channel.
inline ObserveEvent rb2_observe(PacketState& state, const ProtocolParams& params,
                                ListenerView control_view, ListenerView data_view,
                                std::optional<TransmitterResult> own_result) {
  if (state.activity == Activity::Inactive) {
    return control_view == ListenerView::Empty ? ObserveEvent::ActivatesNextSlot
                                               : ObserveEvent::None;
  }
  if (state.activity != Activity::Active) return ObserveEvent::None;

  if (own_result && *own_result == TransmitterResult::Succeeded) {
    state.activity = Activity::Done;
    return ObserveEvent::Succeeded;
  }
  ++state.data_slots_seen;
  if (data_view == ListenerView::Empty) ++state.empty_data_seen;
  if (static_cast<double>(state.empty_data_seen) >=
      params.gamma * static_cast<double>(state.data_slots_seen)) {
    state.reset_to_inactive();
    return ObserveEvent::Reset;
  }
  ++state.age;
  return ObserveEvent::None;
}

// ---------------------------------------------------------------------------
// Single-channel Re-Backoff
// ---------------------------------------------------------------------------

enum class SlotPhase : std::uint8_t { Control, Data, ExtraData };

struct SingleChannelState {
  SlotPhase phase = SlotPhase::Control;
  bool first_active_slot = false;   // first control slot sends with prob 1
  bool last_control_empty = false;
  bool pending_termination = false;
  std::uint8_t consecutive_empty_seen = 0;  // pre-activation counter

  void begin_lifetime() {
    phase = SlotPhase::Control;
    first_active_slot = true;
    last_control_empty = false;
    pending_termination = false;
    consecutive_empty_seen = 0;
  }
};

// Decision for the current slot of the single-channel protocol; one flag,
// interpreted per the packet's current phase.  Also performs the age tick
// that precedes every control slot after the first.
inline bool rb1_decide(PacketState& core, SingleChannelState& chan,
                       ProbTable& probs, double draw) {
  assert(core.activity == Activity::Active);
  if (chan.phase == SlotPhase::Control) {
    if (chan.first_active_slot) {
      ++core.attempts_control;
      return true;  // probability 1 in the first active slot
    }
    ++core.age;  // age increments immediately before each later control slot
    if (draw < probs.at(core.age).control) {
      ++core.attempts_control;
      return true;
    }
    return false;
  }
  // Data or ExtraData slot.  A packet that already delivered its message
  // only stays for the extra data slot; it does not transmit again.
  if (chan.pending_termination) return false;
  if (draw < probs.at(core.age).data) {
    ++core.attempts_data;
    return true;
  }
  return false;
}

// End-of-slot update for the single-channel protocol.
inline ObserveEvent rb1_observe(PacketState& core, SingleChannelState& chan,
                                const ProtocolParams& params, ListenerView view,
                                std::optional<TransmitterResult> own_result) {

  if (core.activity == Activity::Inactive) {
    if (view == ListenerView::Empty) {
      if (++chan.consecutive_empty_seen >= 2) return ObserveEvent::ActivatesNextSlot;
    } else {
      chan.consecutive_empty_seen = 0;  // disrupted slots appear full too
    }
    return ObserveEvent::None;
  }
  if (core.activity != Activity::Active) return ObserveEvent::None;

  const bool full = view == ListenerView::Full;
  const bool succeeded =
      own_result && *own_result == TransmitterResult::Succeeded;

  switch (chan.phase) {
    case SlotPhase::Control:
      chan.first_active_slot = false;
      chan.last_control_empty = !full;
      chan.phase = SlotPhase::Data;
      return ObserveEvent::None;

    case SlotPhase::Data:
      if (chan.last_control_empty && full) {
        // Empty control slot followed by a full data slot: perform an
        // additional data slot.  This first data slot is not counted for
        // the reset rule.
        chan.phase = SlotPhase::ExtraData;
        if (succeeded) chan.pending_termination = true;
        return ObserveEvent::None;
      }
      if (succeeded) {
        core.activity = Activity::Done;
        return ObserveEvent::Succeeded;
      }
      ++core.data_slots_seen;
      if (!full) ++core.empty_data_seen;
      if (static_cast<double>(core.empty_data_seen) >=
          params.gamma * static_cast<double>(core.data_slots_seen)) {
        core.reset_to_inactive();
        chan = SingleChannelState{};
        return ObserveEvent::Reset;
      }
      chan.phase = SlotPhase::Control;
      return ObserveEvent::None;

    case SlotPhase::ExtraData:
      // The slot-group's counted data slot.
      if (succeeded) {
        core.activity = Activity::Done;
        return ObserveEvent::Succeeded;
      }
      if (chan.pending_termination) {
        // Delivered in the preceding data slot; stayed for this one.
        core.activity = Activity::Done;
        return ObserveEvent::None;
      }
      ++core.data_slots_seen;
      if (!full) ++core.empty_data_seen;
      if (static_cast<double>(core.empty_data_seen) >=
          params.gamma * static_cast<double>(core.data_slots_seen)) {
        core.reset_to_inactive();
        chan = SingleChannelState{};
        return ObserveEvent::Reset;
      }
      chan.phase = SlotPhase::Control;
      return ObserveEvent::None;
  }
  return ObserveEvent::None;
}

// ---------------------------------------------------------------------------
// Binary exponential backoff (baseline)
// ---------------------------------------------------------------------------

struct BebState {
  PacketId id = kNoPacket;
  SlotIndex arrival_slot = 0;
  Activity activity = Activity::Inactive;  // Active once its first window starts
  std::uint64_t window_size = 2;
  std::uint64_t chosen_slot = 0;  // position within the current window
  std::uint64_t position = 0;     // position within the current window
  std::uint64_t attempts = 0;
};

// One slot of binary exponential backoff.  The draw is consumed only at a
// window start (to pick the transmit slot); `own_result` is present iff the
// packet transmitted last decision.
inline TransmitDecision beb_step(BebState& state, double draw) {
  assert(state.activity == Activity::Active);
  if (state.position == 0)
    state.chosen_slot =
        static_cast<std::uint64_t>(draw * static_cast<double>(state.window_size));
  TransmitDecision decision;
  decision.send_data = state.position == state.chosen_slot;
  if (decision.send_data) ++state.attempts;
  return decision;
}

inline ObserveEvent beb_observe(BebState& state,
                                std::optional<TransmitterResult> own_result) {
  if (own_result && *own_result == TransmitterResult::Succeeded) {
    state.activity = Activity::Done;
    return ObserveEvent::Succeeded;
  }
  if (++state.position == state.window_size) {
    state.window_size *= 2;  // window sizes form the sequence 2, 4, 8, ...
    state.position = 0;
  }
  return ObserveEvent::None;
}

}  // namespace rebackoff
