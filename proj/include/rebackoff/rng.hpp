#pragma once

#include <cstdint>

namespace rebackoff {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding.  Streams are derived as a pure
// function of (seed, domain, index), so adding packets to a run never
// perturbs the draws of existing packets.
class Rng {
 public:
  Rng() : Rng(0, 0, 0) {}

  Rng(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
    std::uint64_t sm = seed;
    sm ^= 0x6a09e667f3bcc909ULL * (domain + 1);
    sm ^= 0xbb67ae8584caa73bULL * (index + 1);
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// Stream domains.  Packets use their id as index; the adversary and other
// run-level consumers get their own domain.
enum class RngDomain : std::uint64_t {
  Packet = 1,
  Adversary = 2,
  Analysis = 3,
};

inline Rng derive_stream(std::uint64_t seed, RngDomain domain,
                         std::uint64_t index) {
  return Rng(seed, static_cast<std::uint64_t>(domain), index);
}

}  // namespace rebackoff
