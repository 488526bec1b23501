#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rebackoff/channel.hpp"
#include "rebackoff/rng.hpp"

namespace rebackoff {

struct AdversaryDirective {
  std::uint32_t arrivals = 0;
  bool disrupt_control = false;
  bool disrupt_data = false;  // single-channel runs read disrupt_control only
};

// Minimal view of the past that adaptive adversaries may read.  Covers slots
// [0, t-1]; nothing from the slot being decided is visible.
struct HistoryView {
  SlotIndex slots = 0;           // number of completed slots
  std::uint64_t total_arrivals = 0;
  std::uint64_t total_successes = 0;
  std::uint32_t last_active_count = 0;
  double last_contention = 0.0;
};

struct JamInterval {
  SlotIndex begin = 0;
  SlotIndex end = 0;  // half-open
  bool control = true;
  bool data = true;
};

struct AdversaryConfig {
  enum class Kind : std::uint8_t {
    Batch,
    StreamBurst,
    Poisson,
    WindowJammer,
    SpoofJammer,
    Composite,
  };

  Kind kind = Kind::Batch;

  // Batch
  std::uint64_t n = 0;

  // StreamBurst
  std::uint64_t period = 3;
  std::uint64_t burst_size = 0;
  SlotIndex burst_slot = 0;

  // Poisson
  double rate = 0.0;

  // WindowJammer: explicit intervals, plus an optional repeating pattern
  // (jam `duty_len` slots out of every `duty_period`). When `duty_end` is
  // nonzero, the repeating pattern only applies to slots below it, which
  // bounds the total disruption budget.
  std::vector<JamInterval> intervals;
  std::uint64_t duty_period = 0;
  std::uint64_t duty_len = 0;
  std::uint64_t duty_end = 0;
  bool jam_control = true;
  bool jam_data = true;

  // SpoofJammer
  std::uint64_t spoof_length = 0;
  double adaptive_age_threshold = 0.0;  // 0 disables the adaptive stop

  // Composite
  std::vector<AdversaryConfig> parts;

  static AdversaryConfig batch(std::uint64_t n) {
    AdversaryConfig c;
    c.kind = Kind::Batch;
    c.n = n;
    return c;
  }
  static AdversaryConfig stream_burst(std::uint64_t period, std::uint64_t burst,
                                      SlotIndex at) {
    AdversaryConfig c;
    c.kind = Kind::StreamBurst;
    c.period = period;
    c.burst_size = burst;
    c.burst_slot = at;
    return c;
  }
  static AdversaryConfig poisson(double rate) {
    AdversaryConfig c;
    c.kind = Kind::Poisson;
    c.rate = rate;
    return c;
  }
  static AdversaryConfig window_jammer(std::vector<JamInterval> iv) {
    AdversaryConfig c;
    c.kind = Kind::WindowJammer;
    c.intervals = std::move(iv);
    return c;
  }
  static AdversaryConfig duty_jammer(std::uint64_t period, std::uint64_t len,
                                     bool control = true, bool data = true,
                                     std::uint64_t end = 0) {
    AdversaryConfig c;
    c.kind = Kind::WindowJammer;
    c.duty_period = period;
    c.duty_len = len;
    c.duty_end = end;
    c.jam_control = control;
    c.jam_data = data;
    return c;
  }
  static AdversaryConfig spoof_jammer(std::uint64_t length) {
    AdversaryConfig c;
    c.kind = Kind::SpoofJammer;
    c.spoof_length = length;
    return c;
  }
  static AdversaryConfig composite(std::vector<AdversaryConfig> parts) {
    AdversaryConfig c;
    c.kind = Kind::Composite;
    c.parts = std::move(parts);
    return c;
  }

  // Total arrivals when the instance is finite, nullopt otherwise.
  std::optional<std::uint64_t> finite_arrivals() const {
    switch (kind) {
      case Kind::Batch:
        return n;
      case Kind::WindowJammer:
      case Kind::SpoofJammer:
        return 0;
      case Kind::Poisson:
        return rate == 0.0 ? std::optional<std::uint64_t>(0) : std::nullopt;
      case Kind::StreamBurst:
        return std::nullopt;
      case Kind::Composite: {
        std::uint64_t total = 0;
        for (const auto& part : parts) {
          auto f = part.finite_arrivals();
          if (!f) return std::nullopt;
          total += *f;
        }
        return total;
      }
    }
    return std::nullopt;
  }
};

class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual AdversaryDirective next(SlotIndex slot, const HistoryView& history) = 0;
};

namespace detail {

class BatchAdversary final : public Adversary {
 public:
  explicit BatchAdversary(std::uint64_t n) : n_(n) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView&) override {
    AdversaryDirective d;
    if (slot == 0) d.arrivals = static_cast<std::uint32_t>(n_);
    return d;
  }

 private:
  std::uint64_t n_;
};

class StreamBurstAdversary final : public Adversary {
 public:
  StreamBurstAdversary(std::uint64_t period, std::uint64_t burst, SlotIndex at)
      : period_(period), burst_(burst), at_(at) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView&) override {
    AdversaryDirective d;
    if (period_ > 0 && slot % period_ == 0) d.arrivals += 1;
    if (slot == at_) d.arrivals += static_cast<std::uint32_t>(burst_);
    return d;
  }

 private:
  std::uint64_t period_, burst_;
  SlotIndex at_;
};

class PoissonAdversary final : public Adversary {
 public:
  PoissonAdversary(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView&) override {
    AdversaryDirective d;
    if (rate_ > 0.0) {
      // Per-slot stream keeps the draw a pure function of (seed, slot).
      Rng rng = derive_stream(seed_, RngDomain::Adversary, slot);
      d.arrivals = sample(rng);
    }
    return d;
  }

 private:
  std::uint32_t sample(Rng& rng) const {
    // Knuth's inverse-transform sampler; rates here are small.
    const double limit = std::exp(-rate_);
    double product = 1.0;
    std::uint32_t k = 0;
    do {
      product *= rng.next_double();
      ++k;
    } while (product > limit);
    return k - 1;
  }

  double rate_;
  std::uint64_t seed_;
};

class WindowJammerAdversary final : public Adversary {
 public:
  explicit WindowJammerAdversary(const AdversaryConfig& cfg) : cfg_(cfg) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView&) override {
    AdversaryDirective d;
    for (const auto& iv : cfg_.intervals) {
      if (slot >= iv.begin && slot < iv.end) {
        d.disrupt_control = d.disrupt_control || iv.control;
        d.disrupt_data = d.disrupt_data || iv.data;
      }
    }
    if (cfg_.duty_period > 0 && slot % cfg_.duty_period < cfg_.duty_len &&
        (cfg_.duty_end == 0 || slot < cfg_.duty_end)) {
      d.disrupt_control = d.disrupt_control || cfg_.jam_control;
      d.disrupt_data = d.disrupt_data || cfg_.jam_data;
    }
    return d;
  }

 private:
  AdversaryConfig cfg_;
};

// Spoofs the busy tone for a fixed length, or (adaptively) until the active
// packets' harmonic-mean age, read from the recorded history, exceeds a
// threshold.
class SpoofJammerAdversary final : public Adversary {
 public:
  explicit SpoofJammerAdversary(const AdversaryConfig& cfg) : cfg_(cfg) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView& history) override {
    AdversaryDirective d;
    if (stopped_) return d;
    if (cfg_.adaptive_age_threshold > 0.0) {
      const bool aged_out =
          history.last_contention > 0.0 &&
          static_cast<double>(history.last_active_count) /
                  history.last_contention >=
              cfg_.adaptive_age_threshold;
      if (aged_out) {
        stopped_ = true;
        return d;
      }
    } else if (slot >= cfg_.spoof_length) {
      stopped_ = true;
      return d;
    }
    d.disrupt_control = true;
    return d;
  }

 private:
  AdversaryConfig cfg_;
  bool stopped_ = false;
};

class CompositeAdversary final : public Adversary {
 public:
  explicit CompositeAdversary(std::vector<std::unique_ptr<Adversary>> parts)
      : parts_(std::move(parts)) {}
  AdversaryDirective next(SlotIndex slot, const HistoryView& history) override {
    AdversaryDirective d;
    for (auto& part : parts_) {
      AdversaryDirective p = part->next(slot, history);
      d.arrivals += p.arrivals;  // arrivals merge additively, disruption by OR
      d.disrupt_control = d.disrupt_control || p.disrupt_control;
      d.disrupt_data = d.disrupt_data || p.disrupt_data;
    }
    return d;
  }

 private:
  std::vector<std::unique_ptr<Adversary>> parts_;
};

}  // namespace detail

inline std::unique_ptr<Adversary> make_adversary(const AdversaryConfig& config,
                                                 std::uint64_t seed) {
  using Kind = AdversaryConfig::Kind;
  switch (config.kind) {
    case Kind::Batch:
      return std::make_unique<detail::BatchAdversary>(config.n);
    case Kind::StreamBurst:
      return std::make_unique<detail::StreamBurstAdversary>(
          config.period, config.burst_size, config.burst_slot);
    case Kind::Poisson:
      return std::make_unique<detail::PoissonAdversary>(config.rate, seed);
    case Kind::WindowJammer:
      return std::make_unique<detail::WindowJammerAdversary>(config);
    case Kind::SpoofJammer:
      return std::make_unique<detail::SpoofJammerAdversary>(config);
    case Kind::Composite: {
      std::vector<std::unique_ptr<Adversary>> parts;
      parts.reserve(config.parts.size());
      for (std::size_t i = 0; i < config.parts.size(); ++i)
        parts.push_back(make_adversary(config.parts[i],
                                       seed + 0x9e3779b97f4a7c15ULL * (i + 1)));
      return std::make_unique<detail::CompositeAdversary>(std::move(parts));
    }
  }
  throw std::invalid_argument("unknown adversary kind");
}

}  // namespace rebackoff
