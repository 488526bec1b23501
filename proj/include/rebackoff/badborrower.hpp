#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rebackoff/rng.hpp"

namespace rebackoff {

// A round-based borrowing game between a borrower choosing amounts and a
// lender that honors each request independently with probability p; an
// honored loan is repaid at rate alpha.

struct GameParams {
  double p = 0.5;      // probability a request is honored
  double alpha = 0.5;  // fraction of an honored loan that gets repaid
  bool valid() const {
    return p > 0.0 && p <= 1.0 && alpha > 0.0 && alpha <= 1.0;
  }
};

struct GameRound {
  double requested = 0.0;
  bool honored = false;
  double repaid = 0.0;  // alpha * requested when honored, else 0
};

struct GameResult {
  std::vector<GameRound> rounds;
  double total_requested = 0.0;  // total borrowed (every request is borrowed)
  double total_repaid = 0.0;
  std::uint64_t honored_rounds = 0;
};

// A strategy sees the full history of rounds so far and names the next
// request; amounts are real-valued and must be positive.
using BorrowStrategy = std::function<double(const std::vector<GameRound>&)>;

namespace strategies {

inline BorrowStrategy constant_one() {
  return [](const std::vector<GameRound>&) { return 1.0; };
}

// Doubles the request after every round, honored or not, up to a cap (the
// finite game requires requests in [1, n]; the infinite game needs the cap to
// keep totals representable).
inline BorrowStrategy doubling(double cap) {
  return [cap](const std::vector<GameRound>& rounds) {
    const int k = static_cast<int>(std::min<std::size_t>(rounds.size(), 1000));
    return std::min(cap, std::ldexp(1.0, k));
  };
}

inline BorrowStrategy always_n(double n) {
  return [n](const std::vector<GameRound>&) { return n; };
}

// Requests the outstanding shortfall against a target, clamped to [1, n]:
// aggressive while behind, minimal once the target is within reach.
inline BorrowStrategy adaptive_ledger(double n, double alpha) {
  return [n, alpha](const std::vector<GameRound>& rounds) {
    double repaid = 0.0;
    for (const GameRound& r : rounds) repaid += r.repaid;
    const double shortfall = (n - repaid) / alpha;
    return std::min(n, std::max(1.0, shortfall));
  };
}

}  // namespace strategies

// Plays until total repayments reach the target n.  max_rounds caps runaway
// games (an exhausted cap leaves total_repaid short of n).
inline GameResult play_finite(const GameParams& params, double target_n,
                              const BorrowStrategy& strategy,
                              std::uint64_t seed,
                              std::uint64_t max_rounds = 1u << 22) {
  assert(params.valid() && target_n > 0.0);
  GameResult result;
  Rng rng = derive_stream(seed, RngDomain::Analysis, 0x6262);  // game stream
  while (result.total_repaid < target_n &&
         result.rounds.size() < max_rounds) {
    GameRound round;
    round.requested = strategy(result.rounds);
    assert(round.requested >= 1.0 && round.requested <= target_n);
    round.honored = rng.next_double() < params.p;
    if (round.honored) {
      round.repaid = params.alpha * round.requested;
      ++result.honored_rounds;
    }
    result.total_requested += round.requested;
    result.total_repaid += round.repaid;
    result.rounds.push_back(round);
  }
  return result;
}

struct InfiniteGameResult {
  GameResult game;
  // Iterations r (1-based) where repaid_total >= (p*alpha/2) * borrowed_total.
  std::vector<std::uint64_t> measurement_points;
  std::uint64_t largest_gap = 0;  // max spacing between consecutive points
};

// Plays `iteration_cap` rounds of the unbounded game and reports every
// iteration at which the repayment guarantee holds.
inline InfiniteGameResult play_infinite(const GameParams& params,
                                        const BorrowStrategy& strategy,
                                        std::uint64_t iteration_cap,
                                        std::uint64_t seed) {
  assert(params.valid());
  InfiniteGameResult result;
  Rng rng = derive_stream(seed, RngDomain::Analysis, 0x6263);
  const double threshold = params.p * params.alpha / 2.0;
  std::uint64_t last_point = 0;
  for (std::uint64_t i = 1; i <= iteration_cap; ++i) {
    GameRound round;
    round.requested = strategy(result.game.rounds);
    assert(round.requested >= 1.0);
    round.honored = rng.next_double() < params.p;
    if (round.honored) {
      round.repaid = params.alpha * round.requested;
      ++result.game.honored_rounds;
    }
    result.game.total_requested += round.requested;
    result.game.total_repaid += round.repaid;
    result.game.rounds.push_back(round);

    if (result.game.total_repaid >= threshold * result.game.total_requested) {
      result.measurement_points.push_back(i);
      result.largest_gap = std::max(result.largest_gap, i - last_point);
      last_point = i;
    }
  }
  if (last_point < iteration_cap)
    result.largest_gap =
        std::max(result.largest_gap, iteration_cap - last_point);
  return result;
}

// Expected total borrowed for a finite game is at most n/(p*alpha) + n; the
// Monte-Carlo acceptance check allows 5% slack on top.
inline double finite_borrow_budget(const GameParams& params, double n) {
  return n / (params.p * params.alpha) + n;
}

}  // namespace rebackoff
