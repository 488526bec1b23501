#include <catch2/catch_amalgamated.hpp>

#include "rebackoff/badborrower.hpp"

using namespace rebackoff;
using Catch::Approx;

TEST_CASE("finite game with a certain lender") {
  GameParams sure{1.0, 1.0};
  SECTION("constant-1 borrows exactly n dollars over n rounds") {
    GameResult g = play_finite(sure, 10.0, strategies::constant_one(), 1);
    CHECK(g.rounds.size() == 10);
    CHECK(g.total_requested == Approx(10.0));
    CHECK(g.total_repaid == Approx(10.0));
    CHECK(g.honored_rounds == 10);
  }
  SECTION("always-n finishes in one round") {
    GameResult g = play_finite(sure, 10.0, strategies::always_n(10.0), 1);
    CHECK(g.rounds.size() == 1);
    CHECK(g.total_requested == Approx(10.0));
  }
}

TEST_CASE("game ledger is internally consistent") {
  GameParams params{0.5, 0.5};
  GameResult g = play_finite(params, 200.0,
                             strategies::adaptive_ledger(200.0, params.alpha),
                             42);
  double requested = 0.0, repaid = 0.0;
  std::uint64_t honored = 0;
  for (const GameRound& r : g.rounds) {
    requested += r.requested;
    if (r.honored) {
      ++honored;
      CHECK(r.repaid == Approx(params.alpha * r.requested));
    } else {
      CHECK(r.repaid == 0.0);
    }
    repaid += r.repaid;
    CHECK(r.requested >= 1.0);
    CHECK(r.requested <= 200.0);
  }
  CHECK(g.total_requested == Approx(requested));
  CHECK(g.total_repaid == Approx(repaid));
  CHECK(g.honored_rounds == honored);
  CHECK(g.total_repaid >= 200.0);  // target reached
}

TEST_CASE("finite games replay identically under one seed") {
  GameParams params{0.5, 0.5};
  GameResult a = play_finite(params, 50.0, strategies::constant_one(), 9);
  GameResult b = play_finite(params, 50.0, strategies::constant_one(), 9);
  REQUIRE(a.rounds.size() == b.rounds.size());
  CHECK(a.total_requested == b.total_requested);
  CHECK(a.total_repaid == b.total_repaid);
}

TEST_CASE("doubling strategy respects its cap") {
  auto strat = strategies::doubling(16.0);
  std::vector<GameRound> history;
  for (int i = 0; i < 10; ++i) {
    const double req = strat(history);
    CHECK(req >= 1.0);
    CHECK(req <= 16.0);
    history.push_back({req, false, 0.0});
  }
  CHECK(strat(history) == Approx(16.0));
}

TEST_CASE("mean borrowed stays within the budget") {
  GameParams params{0.5, 0.5};
  const double n = 500.0;
  const double budget = finite_borrow_budget(params, n);
  CHECK(budget == Approx(n / 0.25 + n));
  double total = 0.0;
  const int plays = 400;
  for (int i = 0; i < plays; ++i)
    total += play_finite(params, n, strategies::always_n(n), 1000 + i)
                 .total_requested;
  CHECK(total / plays <= budget * 1.05);
}

TEST_CASE("infinite game measurement points") {
  SECTION("a certain lender satisfies the guarantee at every iteration") {
    GameParams sure{1.0, 1.0};
    InfiniteGameResult g =
        play_infinite(sure, strategies::constant_one(), 100, 1);
    REQUIRE(g.measurement_points.size() == 100);
    CHECK(g.measurement_points.front() == 1);
    CHECK(g.measurement_points.back() == 100);
    CHECK(g.largest_gap == 1);
  }
  SECTION("points keep recurring under an adversarial doubling borrower") {
    GameParams params{0.5, 0.5};
    InfiniteGameResult g =
        play_infinite(params, strategies::doubling(1e150), 20000, 77);
    REQUIRE_FALSE(g.measurement_points.empty());
    CHECK(g.measurement_points.back() > 19000);
    CHECK(g.largest_gap < 20000);
  }
  SECTION("deterministic per seed") {
    GameParams params{0.5, 0.5};
    InfiniteGameResult a =
        play_infinite(params, strategies::constant_one(), 5000, 3);
    InfiniteGameResult b =
        play_infinite(params, strategies::constant_one(), 5000, 3);
    CHECK(a.measurement_points == b.measurement_points);
    CHECK(a.largest_gap == b.largest_gap);
  }
}

TEST_CASE("adaptive ledger clamps requests to [1, n]") {
  auto strat = strategies::adaptive_ledger(100.0, 0.5);
  std::vector<GameRound> history;
  CHECK(strat(history) == Approx(100.0));  // shortfall 200, clamped to n
  // Nearly repaid: the request drops to the floor.
  history.push_back({100.0, true, 99.8});
  CHECK(strat(history) == Approx(1.0));
}
