#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rebackoff/analysis.hpp"
#include "rebackoff/badborrower.hpp"
#include "rebackoff/engine.hpp"
#include "rebackoff/rng.hpp"

namespace rebackoff {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;
  bool pass() const {
    for (const CheckResult& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// bounds: per-slot probability bounds + the trial-prefix coin game
// ---------------------------------------------------------------------------

inline SuiteResult verify_bounds(std::uint64_t seed,
                                 std::uint64_t trials = 100000) {
  SuiteResult suite{"bounds", {}};
  const std::vector<std::vector<std::uint64_t>> batteries = {
      {1}, {2}, {1, 1}, {2, 4, 8}, {1, 1, 1, 1, 1, 1, 1, 1}};
  std::uint64_t battery_seed = seed;
  for (const auto& ages : batteries) {
    BoundReport r = check_slot_bounds(ages, ProtocolParams{}, trials,
                                      battery_seed++);
    std::ostringstream name;
    name << "slot-bounds ages={";
    for (std::size_t i = 0; i < ages.size(); ++i)
      name << (i ? "," : "") << ages[i];
    name << "}";
    std::ostringstream detail;
    detail << "success " << detail::fmt(r.success.empirical) << " vs >= "
           << detail::fmt(r.success.lower_bound) << "; busy "
           << detail::fmt(r.busy.empirical) << " in ["
           << detail::fmt(r.busy.lower_bound) << ", "
           << detail::fmt(r.busy.upper_bound) << "]; collision "
           << detail::fmt(r.collision.empirical) << " vs <= "
           << detail::fmt(r.collision.upper_bound);
    suite.checks.push_back({name.str(), r.pass, detail.str()});
  }

  const double p = 1.0 - std::exp(-0.5);
  TrialPrefixReport tp = check_trial_prefixes(p, 1u << 14, 10000, seed + 100);
  suite.checks.push_back(
      {"trial-prefix game",
       tp.pass,
       "fraction " + detail::fmt(tp.fraction_all_prefixes_ok) + " vs >= " +
           detail::fmt(tp.threshold)});
  return suite;
}

// ---------------------------------------------------------------------------
// sigma: oracle equivalence over random age multisets
// ---------------------------------------------------------------------------

inline SuiteResult verify_sigma(std::uint64_t seed,
                                std::uint64_t multisets = 10000) {
  SuiteResult suite{"sigma", {}};
  Rng rng = derive_stream(seed, RngDomain::Analysis, 0x5153);
  std::uint64_t mismatches = 0;
  for (std::uint64_t i = 0; i < multisets; ++i) {
    const std::uint64_t size = 1 + rng.next_below(100);
    std::vector<std::uint64_t> ages(size);
    for (auto& a : ages) a = 1 + rng.next_below(1000000);
    if (sigma(ages) != sigma_oracle(ages)) ++mismatches;
  }
  suite.checks.push_back(
      {"sigma oracle equivalence", mismatches == 0,
       std::to_string(mismatches) + " mismatches over " +
           std::to_string(multisets) + " multisets"});
  return suite;
}

// ---------------------------------------------------------------------------
// sync: single-channel slot-designation agreement under composite adversaries
// ---------------------------------------------------------------------------

inline SuiteResult verify_sync(std::uint64_t seed, std::uint64_t runs = 1000) {
  SuiteResult suite{"sync", {}};
  Rng rng = derive_stream(seed, RngDomain::Analysis, 0x53594e);
  std::uint64_t violations = 0;
  std::uint64_t packets = 0;
  for (std::uint64_t i = 0; i < runs; ++i) {
    RunConfig cfg;
    cfg.protocol = ProtocolKind::ReBackoff1;
    cfg.seed = seed * 1000003 + i;
    cfg.verbosity = Verbosity::PerPacket;
    // Randomized composite: a small batch, a trickle, and control jamming.
    std::vector<AdversaryConfig> parts;
    parts.push_back(AdversaryConfig::batch(2 + rng.next_below(12)));
    if (rng.next_below(2) == 0)
      parts.push_back(AdversaryConfig::poisson(0.01 + 0.04 * rng.next_double()));
    parts.push_back(AdversaryConfig::duty_jammer(
        5 + rng.next_below(20), 1 + rng.next_below(3), /*control=*/true,
        /*data=*/rng.next_below(2) == 0));
    cfg.adversary = AdversaryConfig::composite(parts);
    cfg.stop = StopRule::horizon(1500 + rng.next_below(1500));
    Trace trace = run(cfg);
    packets += trace.total_arrivals;
    violations += check_sync_agreement(trace).size();
  }
  suite.checks.push_back(
      {"slot-designation agreement", violations == 0,
       std::to_string(violations) + " disagreements over " +
           std::to_string(runs) + " runs (" + std::to_string(packets) +
           " packets)"});
  return suite;
}

// ---------------------------------------------------------------------------
// scaling: the batch sweep battery (makespan, attempts, resets, waste) and
// the same checks under 10% duty-cycle disruption; collects per-run prefix
// fullness so the prefix suite can share the work.
// ---------------------------------------------------------------------------

struct BatchPoint {
  std::uint64_t n = 0;
  std::vector<double> makespans;
  std::vector<double> mean_attempts;
  std::vector<double> waste;
  std::map<std::uint64_t, std::uint64_t> reset_histogram;
};

struct ScalingBattery {
  std::vector<BatchPoint> points;
  std::uint64_t prefix_violations = 0;
  std::uint64_t traces_checked = 0;
  std::uint64_t incomplete_runs = 0;
};

inline ScalingBattery run_batch_battery(const std::vector<std::uint64_t>& ns,
                                        std::uint64_t seeds,
                                        std::uint64_t seed_base,
                                        bool disrupt_10pct = false) {
  ScalingBattery battery;
  for (std::uint64_t n : ns) {
    BatchPoint point;
    point.n = n;
    for (std::uint64_t s = 0; s < seeds; ++s) {
      RunConfig cfg;
      cfg.protocol = ProtocolKind::ReBackoff2;
      if (disrupt_10pct) {
        // Jam 1 slot in 10 over the first 10n slots, for a total disruption
        // budget of n slots. A duty cycle that never ends starves the reset
        // rule (1/10 of data slots reading full keeps the empty fraction
        // below gamma forever), which stalls clearing; the robustness claim
        // is about a disruption budget proportional to n, so the jammer is
        // bounded accordingly.
        cfg.adversary = AdversaryConfig::composite(
            {AdversaryConfig::batch(n),
             AdversaryConfig::duty_jammer(10, 1, true, true, 10 * n)});
      } else {
        cfg.adversary = AdversaryConfig::batch(n);
      }
      cfg.seed = seed_base + n * 1000 + s;
      cfg.stop = StopRule::all_packets_done(400 * n + 200000);
      cfg.verbosity = Verbosity::PerPacket;
      Trace trace = run(cfg);
      if (!trace.complete) ++battery.incomplete_runs;

      Metrics m = run_metrics(trace);
      if (m.makespan) point.makespans.push_back(static_cast<double>(*m.makespan));
      point.waste.push_back(m.waste);
      point.mean_attempts.push_back(attempts_stats(trace).mean);
      for (const auto& [k, count] : reset_stats(trace).histogram)
        point.reset_histogram[k] += count;

      battery.prefix_violations += check_prefix_fullness(trace).size();
      ++battery.traces_checked;
    }
    battery.points.push_back(std::move(point));
  }
  return battery;
}

inline std::vector<CheckResult> check_scaling(const ScalingBattery& battery,
                                              const std::string& tag) {
  std::vector<CheckResult> checks;
  std::vector<double> med_makespan, per_n, attempts_ratio;
  for (const BatchPoint& p : battery.points) {
    std::vector<double> ms = p.makespans;
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    med_makespan.push_back(median);
    per_n.push_back(median / static_cast<double>(p.n));
    double mean_att = 0.0;
    for (double a : p.mean_attempts) mean_att += a;
    mean_att /= static_cast<double>(p.mean_attempts.size());
    const double l = std::log(static_cast<double>(p.n));
    attempts_ratio.push_back(mean_att / (l * l));
  }

  // Doubling n should scale median makespan by a near-linear factor.
  bool pairs_ok = true;
  std::string pair_detail;
  for (std::size_t i = 0; i + 1 < med_makespan.size(); ++i) {
    const double base_ratio =
        static_cast<double>(battery.points[i + 1].n) /
        static_cast<double>(battery.points[i].n);
    // Tolerances pinned for doubling; wider spacing compounds them.
    const double steps = std::log2(base_ratio);
    const double lo = std::pow(1.5, steps), hi = std::pow(2.7, steps);
    const double ratio = med_makespan[i + 1] / med_makespan[i];
    pair_detail += (i ? " " : "") + detail::fmt(ratio);
    if (ratio < lo || ratio > hi) pairs_ok = false;
  }
  checks.push_back({"makespan doubling ratios" + tag, pairs_ok,
                    "ratios: " + pair_detail});

  const double per_n_max = *std::max_element(per_n.begin(), per_n.end());
  const double per_n_min = *std::min_element(per_n.begin(), per_n.end());
  checks.push_back({"makespan/n bounded" + tag, per_n_max / per_n_min <= 2.0,
                    "makespan/n in [" + detail::fmt(per_n_min) + ", " +
                        detail::fmt(per_n_max) + "]"});

  const double att_max =
      *std::max_element(attempts_ratio.begin(), attempts_ratio.end());
  const double att_min =
      *std::min_element(attempts_ratio.begin(), attempts_ratio.end());
  checks.push_back({"attempts / ln^2(n) bounded" + tag,
                    att_max / att_min <= 2.0,
                    "attempts/ln2 in [" + detail::fmt(att_min) + ", " +
                        detail::fmt(att_max) + "]"});
  return checks;
}

inline CheckResult check_waste(const ScalingBattery& battery) {
  std::vector<double> mean_waste;
  for (const BatchPoint& p : battery.points) {
    double w = 0.0;
    for (double v : p.waste) w += v;
    mean_waste.push_back(w / static_cast<double>(p.waste.size()));
  }
  const double first = mean_waste.front(), last = mean_waste.back();
  bool ok = last <= 1.5 * first;
  for (double w : mean_waste)
    if (w >= 0.95) ok = false;
  return {"bounded waste", ok,
          "waste first " + detail::fmt(first) + ", last " + detail::fmt(last)};
}

inline CheckResult check_reset_decay(const BatchPoint& point,
                                     std::uint64_t min_samples = 100) {
  std::uint64_t max_k = 0;
  for (const auto& [k, c] : point.reset_histogram) max_k = std::max(max_k, k);
  std::vector<std::uint64_t> tail(max_k + 2, 0);
  for (const auto& [k, c] : point.reset_histogram)
    for (std::uint64_t i = 0; i <= k; ++i) tail[i] += c;
  bool ok = true;
  std::string detail_str;
  for (std::uint64_t k = 0; k <= max_k; ++k) {
    if (tail[k] < min_samples) break;
    const double ratio =
        static_cast<double>(tail[k + 1]) / static_cast<double>(tail[k]);
    detail_str += (k ? " " : "") + detail::fmt(ratio);
    if (ratio > 0.9) ok = false;
  }
  return {"reset tail decay", ok, "tail ratios: " + detail_str};
}

inline SuiteResult verify_scaling(std::uint64_t seed, bool full) {
  SuiteResult suite{"scaling", {}};
  const std::vector<std::uint64_t> ns =
      full ? std::vector<std::uint64_t>{64, 128, 256, 512, 1024, 2048, 4096}
           : std::vector<std::uint64_t>{64, 128, 256, 512};
  const std::uint64_t seeds = full ? 50 : 10;
  ScalingBattery battery = run_batch_battery(ns, seeds, seed);
  for (CheckResult& c : check_scaling(battery, ""))
    suite.checks.push_back(std::move(c));
  suite.checks.push_back(check_waste(battery));
  // Reset decay at the largest point with enough packets.
  for (const BatchPoint& p : battery.points)
    if (p.n == (full ? 1024u : 512u))
      suite.checks.push_back(check_reset_decay(p));

  // Same ratio checks under 10% duty-cycle disruption.
  ScalingBattery disrupted = run_batch_battery(
      {256, 1024}, full ? 50 : 10, seed + 777, /*disrupt_10pct=*/true);
  for (CheckResult& c : check_scaling(disrupted, " (10% disruption)"))
    suite.checks.push_back(std::move(c));

  const std::uint64_t incomplete =
      battery.incomplete_runs + disrupted.incomplete_runs;
  suite.checks.push_back(
      {"all battery runs drained under the slot cap", incomplete == 0,
       std::to_string(incomplete) + " incomplete runs over " +
           std::to_string(battery.traces_checked + disrupted.traces_checked) +
           " traces"});
  suite.checks.push_back(
      {"prefix fullness across battery traces",
       battery.prefix_violations + disrupted.prefix_violations == 0,
       std::to_string(battery.prefix_violations + disrupted.prefix_violations) +
           " violations over " +
           std::to_string(battery.traces_checked + disrupted.traces_checked) +
           " traces"});
  return suite;
}

// ---------------------------------------------------------------------------
// prefix: counted-data-slot fullness (zero tolerance)
// ---------------------------------------------------------------------------

inline SuiteResult verify_prefix(std::uint64_t seed, bool full) {
  SuiteResult suite{"prefix", {}};
  const std::vector<std::uint64_t> ns =
      full ? std::vector<std::uint64_t>{64, 256, 1024, 4096}
           : std::vector<std::uint64_t>{64, 256};
  ScalingBattery battery =
      run_batch_battery(ns, full ? 20 : 10, seed);
  ScalingBattery disrupted =
      run_batch_battery({256}, 10, seed + 777, /*disrupt_10pct=*/true);
  const std::uint64_t violations =
      battery.prefix_violations + disrupted.prefix_violations;
  suite.checks.push_back(
      {"lifetime prefix fullness", violations == 0,
       std::to_string(violations) + " violations over " +
           std::to_string(battery.traces_checked + disrupted.traces_checked) +
           " traces"});
  return suite;
}

// ---------------------------------------------------------------------------
// borrower: finite budget and infinite repayment guarantees
// ---------------------------------------------------------------------------

inline SuiteResult verify_borrower(std::uint64_t seed,
                                   std::uint64_t plays = 1000) {
  SuiteResult suite{"borrower", {}};
  const GameParams params{0.5, 0.5};
  const double n = 1000.0;
  const double budget = finite_borrow_budget(params, n) * 1.05;

  const std::vector<std::pair<std::string, BorrowStrategy>> battery = {
      {"constant-1", strategies::constant_one()},
      {"doubling", strategies::doubling(n)},
      {"always-n", strategies::always_n(n)},
      {"adaptive-ledger", strategies::adaptive_ledger(n, params.alpha)},
  };
  std::uint64_t strat_index = 0;
  for (const auto& [name, strategy] : battery) {
    double total = 0.0;
    for (std::uint64_t i = 0; i < plays; ++i) {
      GameResult g = play_finite(params, n, strategy,
                                 seed + strat_index * 100000 + i);
      total += g.total_requested;
    }
    const double mean = total / static_cast<double>(plays);
    suite.checks.push_back({"finite budget, " + name, mean <= budget,
                            "mean borrowed " + detail::fmt(mean) + " vs <= " +
                                detail::fmt(budget)});
    ++strat_index;
  }

  // Infinite game: an adversarial (doubling) borrower still hits measurement
  // points arbitrarily late, i.e. the repayment guarantee recurs.  Check that
  // nearly every play has a point in the last tenth of the horizon.
  const std::uint64_t cap = 100000;
  const std::uint64_t inf_plays = 200;
  std::uint64_t late = 0;
  double mean_points = 0.0;
  for (std::uint64_t i = 0; i < inf_plays; ++i) {
    InfiniteGameResult g = play_infinite(params, strategies::doubling(1e150),
                                         cap, seed + 900000 + i);
    if (!g.measurement_points.empty() &&
        g.measurement_points.back() >= cap - cap / 10)
      ++late;
    mean_points += static_cast<double>(g.measurement_points.size());
  }
  mean_points /= static_cast<double>(inf_plays);
  const double late_frac = static_cast<double>(late) /
                           static_cast<double>(inf_plays);
  suite.checks.push_back(
      {"infinite measurement points recur", late_frac >= 0.99,
       "late-point fraction " + detail::fmt(late_frac) + ", mean points " +
           detail::fmt(mean_points)});
  return suite;
}

// ---------------------------------------------------------------------------
// beb-contrast: stream + burst, Re-Backoff versus binary exponential backoff
// ---------------------------------------------------------------------------

struct ContrastOutcome {
  double rb_backlog_median = 0.0;
  double beb_backlog_median = 0.0;
  double rb_throughput = 0.0;   // mean post-burst successes per slot
  double beb_throughput = 0.0;
};

inline ContrastOutcome run_beb_contrast(std::uint64_t seed,
                                        std::uint64_t seeds,
                                        std::uint64_t horizon,
                                        std::uint64_t burst) {
  const SlotIndex burst_at = 1000;
  std::vector<double> rb_backlog, beb_backlog;
  double rb_tp = 0.0, beb_tp = 0.0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    for (int which = 0; which < 2; ++which) {
      RunConfig cfg;
      cfg.protocol = which == 0 ? ProtocolKind::ReBackoff2 : ProtocolKind::Beb;
      cfg.adversary = AdversaryConfig::stream_burst(3, burst, burst_at);
      cfg.seed = seed + s;
      cfg.stop = StopRule::horizon(horizon);
      Trace trace = run(cfg);
      const double backlog = static_cast<double>(trace.total_arrivals -
                                                 trace.total_successes);
      Metrics post = interval_metrics(trace, burst_at, horizon);
      const double tp =
          static_cast<double>(post.successes) /
          static_cast<double>(horizon - burst_at);
      if (which == 0) {
        rb_backlog.push_back(backlog);
        rb_tp += tp;
      } else {
        beb_backlog.push_back(backlog);
        beb_tp += tp;
      }
    }
  }
  std::sort(rb_backlog.begin(), rb_backlog.end());
  std::sort(beb_backlog.begin(), beb_backlog.end());
  ContrastOutcome out;
  out.rb_backlog_median = rb_backlog[rb_backlog.size() / 2];
  out.beb_backlog_median = beb_backlog[beb_backlog.size() / 2];
  out.rb_throughput = rb_tp / static_cast<double>(seeds);
  out.beb_throughput = beb_tp / static_cast<double>(seeds);
  return out;
}

inline SuiteResult verify_beb_contrast(std::uint64_t seed, bool full) {
  SuiteResult suite{"beb-contrast", {}};
  const std::uint64_t seeds = full ? 20 : 10;
  const std::uint64_t horizon = full ? 200000 : 60000;
  const std::uint64_t burst = 512;
  ContrastOutcome out = run_beb_contrast(seed, seeds, horizon, burst);
  suite.checks.push_back(
      {"backlog at horizon <= 10", out.rb_backlog_median <= 10.0,
       "median backlog " + detail::fmt(out.rb_backlog_median)});
  suite.checks.push_back(
      {"exponential-backoff backlog >= 10x",
       out.beb_backlog_median >= 10.0 * out.rb_backlog_median,
       "beb " + detail::fmt(out.beb_backlog_median) + " vs 10x " +
           detail::fmt(out.rb_backlog_median)});
  suite.checks.push_back(
      {"post-burst throughput >= 5x",
       out.rb_throughput >= 5.0 * out.beb_throughput,
       "rb " + detail::fmt(out.rb_throughput) + " vs beb " +
           detail::fmt(out.beb_throughput)});
  return suite;
}

inline std::optional<SuiteResult> run_suite(const std::string& name,
                                            std::uint64_t seed, bool full) {
  if (name == "bounds") return verify_bounds(seed);
  if (name == "sigma") return verify_sigma(seed);
  if (name == "sync") return verify_sync(seed, full ? 1000 : 200);
  if (name == "prefix") return verify_prefix(seed, full);
  if (name == "borrower") return verify_borrower(seed);
  if (name == "scaling") return verify_scaling(seed, full);
  if (name == "beb-contrast") return verify_beb_contrast(seed, full);
  return std::nullopt;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "bounds", "sigma", "sync", "prefix", "borrower", "scaling",
      "beb-contrast"};
  return names;
}

}  // namespace rebackoff
