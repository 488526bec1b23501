#pragma once

#include <cassert>
#include <cstdint>
#include <optional>

namespace rebackoff {

using PacketId = std::uint32_t;
using SlotIndex = std::uint64_t;

constexpr PacketId kNoPacket = static_cast<PacketId>(-1);

// Resolution of one slot on one channel.  The transmitter count inside
// Collision/Disrupted is diagnostic only; protocol-visible observations go
// through ListenerView / TransmitterResult.
struct SlotOutcome {
  enum class Kind : std::uint8_t { Empty, Success, Collision, Disrupted };

  Kind kind = Kind::Empty;
  PacketId winner = kNoPacket;       // valid iff kind == Success
  std::uint32_t transmitters = 0;

  bool is_full() const { return kind != Kind::Empty; }

  static SlotOutcome empty() { return {}; }
  static SlotOutcome success(PacketId id) {
    return {Kind::Success, id, 1};
  }
  static SlotOutcome collision(std::uint32_t n) {
    assert(n >= 2);
    return {Kind::Collision, kNoPacket, n};
  }
  static SlotOutcome disrupted(std::uint32_t n) {
    return {Kind::Disrupted, kNoPacket, n};
  }
};

enum class ListenerView : std::uint8_t { Empty, Full };
enum class TransmitterResult : std::uint8_t { Succeeded, Failed };

// Deterministic, total channel resolution.  Exactly one transmitter and no
// disruption yields a success; disruption trumps everything.
inline SlotOutcome resolve_slot(std::uint32_t transmitter_count,
                                PacketId sole_transmitter, bool disrupted) {
  if (disrupted) return SlotOutcome::disrupted(transmitter_count);
  if (transmitter_count == 0) return SlotOutcome::empty();
  if (transmitter_count == 1) return SlotOutcome::success(sole_transmitter);
  return SlotOutcome::collision(transmitter_count);
}

template <typename Container>
inline SlotOutcome resolve_slot(const Container& transmitters, bool disrupted) {
  const auto n = static_cast<std::uint32_t>(transmitters.size());
  const PacketId sole = n == 1 ? *transmitters.begin() : kNoPacket;
  return resolve_slot(n, sole, disrupted);
}

inline ListenerView listener_view(const SlotOutcome& outcome) {
  return outcome.is_full() ? ListenerView::Full : ListenerView::Empty;
}

// Pre: `id` was in the slot's transmitter set.
inline TransmitterResult transmitter_result(const SlotOutcome& outcome,
                                            PacketId id) {
  assert(outcome.transmitters > 0);
  return (outcome.kind == SlotOutcome::Kind::Success && outcome.winner == id)
             ? TransmitterResult::Succeeded
             : TransmitterResult::Failed;
}

}  // namespace rebackoff
