#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <memory>
#include <vector>

#include "sigbox/base.hpp"
#include "sigbox/betting.hpp"
#include "sigbox/vm.hpp"

using namespace sigbox;

namespace {

Alphabet alpha(std::size_t k) {
  Alphabet a;
  for (std::size_t i = 0; i < k; ++i) a.symbols.push_back("s" + std::to_string(i));
  return a;
}

// Small random rationals for property tests.
Rat random_rat(SplitMix64& rng, std::uint64_t max_num, std::uint64_t den) {
  return Rat(static_cast<std::int64_t>(rng.next() % (max_num + 1)), static_cast<std::int64_t>(den));
}

// A random valid bet: nonnegative entries, sum <= 1.
BetVector random_bet(SplitMix64& rng, std::size_t k) {
  BetVector b;
  b.d.assign(k, Rat(0));
  Rat remaining = 1;
  for (std::size_t i = 0; i < k; ++i) {
    Rat x = random_rat(rng, 12, 24);  // in [0, 1/2]
    if (x > remaining) x = remaining;
    b.d[i] = x;
    remaining -= x;
  }
  return b;
}

// Definition-level reference for the diagonal sequence: per position, settle
// every bettor against every candidate outcome and take the argmin of the
// weighted total, ties to the smallest symbol. Quadratic and simple.
std::vector<Sym> brute_diagonal(const WeightedBettorFamily& family, const Alphabet& sigma,
                                std::size_t length, std::vector<std::vector<Rat>>* capital_log = nullptr) {
  const std::size_t k = sigma.k();
  std::vector<Rat> capitals;
  for (const auto& e : family.entries) capitals.push_back(e.bettor.capital);
  std::vector<Sym> emitted;
  if (capital_log) capital_log->push_back(capitals);
  for (std::size_t pos = 0; pos < length; ++pos) {
    std::vector<std::shared_ptr<const BetVector>> bets;
    for (const auto& e : family.entries) {
      auto bet = e.bettor.strategy->bet(emitted);
      if (!bet || !bet->is_valid(k)) bet = std::make_shared<BetVector>(BetVector::even(k));
      bets.push_back(bet);
    }
    Sym best = 0;
    Rat best_total;
    for (Sym s = 0; s < k; ++s) {
      Rat total = 0;
      for (std::size_t i = 0; i < family.entries.size(); ++i)
        total += family.entries[i].weight * settle(capitals[i], *bets[i], s, k);
      if (s == 0 || total < best_total) {
        best = s;
        best_total = total;
      }
    }
    for (std::size_t i = 0; i < family.entries.size(); ++i)
      capitals[i] = settle(capitals[i], *bets[i], best, k);
    emitted.push_back(best);
    if (capital_log) capital_log->push_back(capitals);
  }
  return emitted;
}

Bettor constant_bettor(BetVector bet) {
  Bettor b;
  b.strategy = std::make_shared<FnStrategy>([bet](std::span<const Sym>) { return bet; });
  return b;
}

}  // namespace

TEST_CASE("settle matches hand-computed examples") {
  // Even bet over two symbols: capital unchanged either way.
  BetVector even2 = BetVector::even(2);
  CHECK(settle(1, even2, 0, 2) == 1);
  CHECK(settle(1, even2, 1, 2) == 1);

  // Half the capital on symbol 0, nothing on 1.
  BetVector half0{{Rat(1, 2), Rat(0)}};
  CHECK(settle(1, half0, 0, 2) == Rat(3, 2));
  CHECK(settle(1, half0, 1, 2) == Rat(1, 2));

  // Quarter on one of four symbols, capital 2: win pays 2*(1 + 1 - 1/4) = 7/2.
  BetVector quarter{{Rat(1, 4), Rat(0), Rat(0), Rat(0)}};
  CHECK(settle(2, quarter, 0, 4) == Rat(7, 2));
  CHECK(settle(2, quarter, 1, 4) == Rat(3, 2));

  // All-in on one of two: doubles or dies.
  BetVector allin{{Rat(1), Rat(0)}};
  CHECK(settle(1, allin, 0, 2) == 2);
  CHECK(settle(1, allin, 1, 2) == 0);

  // Zero capital stays zero.
  CHECK(settle(0, allin, 0, 2) == 0);
}

TEST_CASE("settle rejects malformed bets") {
  CHECK_THROWS_AS(settle(1, BetVector{{Rat(1, 2)}}, 0, 2), error);             // wrong size
  CHECK_THROWS_AS(settle(1, BetVector{{Rat(-1, 4), Rat(1, 4)}}, 0, 2), error);  // negative
  CHECK_THROWS_AS(settle(1, BetVector{{Rat(3, 4), Rat(3, 4)}}, 0, 2), error);   // sum > 1
  CHECK_THROWS_AS(settle(1, BetVector::even(2), 2, 2), error);                  // outcome out of range
  CHECK_THROWS_AS(settle(-1, BetVector::even(2), 0, 2), error);                 // negative capital
}

TEST_CASE("settlement is exactly fair and non-negative") {
  SplitMix64 rng{12345};
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.next() % 5;
    const BetVector bet = random_bet(rng, k);
    const Rat capital = random_rat(rng, 40, 7);
    Rat total = 0;
    for (Sym s = 0; s < k; ++s) {
      const Rat settled = settle(capital, bet, s, k);
      REQUIRE(settled >= 0);
      total += settled;
    }
    // The average over a uniformly random outcome equals the stake exactly.
    REQUIRE(total == capital * Rat(static_cast<std::int64_t>(k)));
  }
}

TEST_CASE("run_bettor returns the full capital trajectory") {
  const Alphabet sigma = Alphabet::binary();

  // History-dependent strategy: all-in on the last emitted symbol, even at
  // the start. Sequence 0,0,1: even, then win (x2), then lose.
  Bettor follower;
  follower.strategy = std::make_shared<FnStrategy>([](std::span<const Sym> prefix) {
    if (prefix.empty()) return BetVector::even(2);
    BetVector b{{Rat(0), Rat(0)}};
    b.d[prefix.back()] = 1;
    return b;
  });
  const std::vector<Sym> seq{0, 0, 1};
  const auto traj = run_bettor(follower, seq, sigma);
  REQUIRE(traj == std::vector<Rat>{1, 1, 2, 0});

  // Empty sequence: just the starting capital.
  CHECK(run_bettor(follower, std::vector<Sym>{}, sigma) == std::vector<Rat>{1});

  // A strategy that emits an invalid bet makes the run fail loudly.
  Bettor bad;
  bad.strategy = std::make_shared<FnStrategy>([](std::span<const Sym>) {
    return BetVector{{Rat(2), Rat(2)}};
  });
  CHECK_THROWS_AS(run_bettor(bad, seq, sigma), error);
}

TEST_CASE("avoidance bettor doubles per flagged miss on a binary alphabet") {
  const Alphabet sigma = Alphabet::binary();
  // Predicate fires everywhere; gamma = {1}; sequence is all 0s.
  Bettor b = fact1_bettor([](std::uint64_t) { return true; }, {Sym{1}}, sigma, 0);
  const std::vector<Sym> zeros(6, 0);
  const auto traj = run_bettor(b, zeros, sigma);
  REQUIRE(traj.size() == 7);
  // Position 0 is below/at the threshold (n <= 0), so it settles evenly.
  CHECK(traj[1] == 1);
  for (std::size_t i = 2; i < traj.size(); ++i) CHECK(traj[i] == rat_pow(Rat(2), i - 1));
}

TEST_CASE("avoidance bettor growth is exactly (k/(k-|gamma|))^hits") {
  const Alphabet sigma = alpha(3);
  // Fires at odd positions; gamma = {2}; the sequence alternates 0,1 so every
  // flagged position misses gamma. 25 odd positions below 50.
  Bettor b = fact1_bettor([](std::uint64_t n) { return n % 2 == 1; }, {Sym{2}}, sigma, 0);
  std::vector<Sym> seq;
  for (std::size_t n = 0; n < 50; ++n) seq.push_back(n % 2);
  const auto traj = run_bettor(b, seq, sigma);
  CHECK(traj.back() == rat_pow(Rat(3, 2), 25));

  // If a flagged position lands in gamma with the all-in fraction, the
  // capital dies; with fraction 1/2 it halves instead.
  std::vector<Sym> betray = seq;
  betray[7] = 2;
  CHECK(run_bettor(b, betray, sigma).back() == 0);
  Bettor cautious = fact1_bettor([](std::uint64_t n) { return n % 2 == 1; }, {Sym{2}}, sigma, 0, Rat(1, 2));
  const auto ctraj = run_bettor(cautious, betray, sigma);
  CHECK(ctraj.back() == rat_pow(Rat(5, 4), 24) * Rat(1, 2));
  CHECK(ctraj.back() > 0);
}

TEST_CASE("avoidance bettor respects the position threshold") {
  const Alphabet sigma = Alphabet::binary();
  Bettor b = fact1_bettor([](std::uint64_t) { return true; }, {Sym{1}}, sigma, 3);
  const std::vector<Sym> zeros(6, 0);
  const auto traj = run_bettor(b, zeros, sigma);
  // Positions 0..3 settle evenly; positions 4 and 5 double.
  CHECK(traj[4] == 1);
  CHECK(traj[5] == 2);
  CHECK(traj[6] == 4);
}

TEST_CASE("avoidance bettor validates its configuration") {
  const Alphabet sigma = Alphabet::binary();
  auto g = [](std::uint64_t) { return true; };
  CHECK_THROWS_AS(fact1_bettor(g, {}, sigma, 0), error);                      // empty gamma
  CHECK_THROWS_AS(fact1_bettor(g, {Sym{0}, Sym{1}}, sigma, 0), error);        // gamma = alphabet
  CHECK_THROWS_AS(fact1_bettor(g, {Sym{2}}, sigma, 0), error);                // out of range
  CHECK_THROWS_AS(fact1_bettor(g, {Sym{1}}, sigma, 0, Rat(0)), error);        // fraction 0
  CHECK_THROWS_AS(fact1_bettor(g, {Sym{1}}, sigma, 0, Rat(3, 2)), error);     // fraction > 1
}

TEST_CASE("program-backed predicates drive bettors; fuel exhaustion reads as 0") {
  const Alphabet sigma = Alphabet::binary();
  ExecBudget generous;
  generous.c_fuel = 0;
  generous.d_fuel = 1000000;

  // The one-instruction accept-everything program behaves like g == 1.
  const Program one = parse_program("HALT1\n");
  auto g1 = std::make_shared<Predicate>(Predicate::from_program(one, generous));
  Bettor b1 = fact1_bettor(g1, {Sym{1}}, sigma, 0);
  const std::vector<Sym> zeros(4, 0);
  CHECK(run_bettor(b1, zeros, sigma).back() == 8);

  // A looping program under any budget exhausts its fuel, so the bettor
  // stays even forever.
  const Program loop = parse_program("DECJZ 0 0\n");
  auto gloop = std::make_shared<Predicate>(Predicate::from_program(loop, generous));
  Bettor b2 = fact1_bettor(gloop, {Sym{1}}, sigma, 0);
  CHECK(run_bettor(b2, zeros, sigma).back() == 1);

  // A program that needs ~n steps flips from 1 to fuel-exhausted (0) as n
  // grows past the budget, under a constant budget.
  ExecBudget tight;
  tight.c_fuel = 0;
  tight.d_fuel = 10;
  const Program countdown = parse_program("LOADN 0\nDECJZ 0 2\nDECJZ 1 -1\nHALT1\n");
  auto gslow = std::make_shared<Predicate>(Predicate::from_program(countdown, tight));
  CHECK(gslow->eval(1));
  CHECK_FALSE(gslow->eval(100));
}

TEST_CASE("diagonal kills a lone all-in bettor at the first position") {
  const Alphabet sigma = Alphabet::binary();
  WeightedBettorFamily family;
  family.entries.push_back({constant_bettor(BetVector{{Rat(1), Rat(0)}}), 1, "allin0"});

  DiagonalEngine engine(family, sigma);
  for (int i = 0; i < 6; ++i) engine.step();
  CHECK(engine.emitted() == std::vector<Sym>{1, 0, 0, 0, 0, 0});
  CHECK(engine.capital(0) == 0);
  CHECK(engine.weighted_total() == 0);
  CHECK(brute_diagonal(family, sigma, 6) == engine.emitted());
}

TEST_CASE("diagonal against opposed all-in bettors sacrifices the heavier stake") {
  const Alphabet sigma = Alphabet::binary();
  WeightedBettorFamily family;
  family.entries.push_back({constant_bettor(BetVector{{Rat(1), Rat(0)}}), 1, "allin0"});
  family.entries.push_back({constant_bettor(BetVector{{Rat(0), Rat(1)}}), 1, "allin1"});

  DiagonalEngine engine(family, sigma);
  for (int i = 0; i < 5; ++i) engine.step();
  // Position 0: equal stakes tie, smallest symbol wins -> 0; that doubles the
  // 0-bettor and kills the 1-bettor; position 1 then starves the survivor.
  CHECK(engine.emitted() == std::vector<Sym>{0, 1, 0, 0, 0});
  CHECK(engine.capital(0) == 0);
  CHECK(engine.capital(1) == 0);
  std::vector<std::vector<Rat>> log;
  CHECK(brute_diagonal(family, sigma, 5, &log) == engine.emitted());
  CHECK(log[1] == std::vector<Rat>{2, 0});
  CHECK(log[2] == std::vector<Rat>{0, 0});
}

TEST_CASE("diagonal tie-breaking picks the smallest minimizing symbol") {
  const Alphabet sigma = alpha(3);
  WeightedBettorFamily family;
  family.entries.push_back({constant_bettor(BetVector{{Rat(0), Rat(1), Rat(0)}}), 1, "allin1"});
  DiagonalEngine engine(family, sigma);
  // Symbols 0 and 2 both zero the bettor; 0 is emitted.
  CHECK(engine.step() == 0);
}

TEST_CASE("diagonal over an empty family emits the smallest symbol forever") {
  const Alphabet sigma = alpha(4);
  WeightedBettorFamily family;
  CHECK(diagonal_sequence(family, sigma, 5) == std::vector<Sym>(5, 0));
}

TEST_CASE("diagonal treats invalid and uniform bets as neutral") {
  const Alphabet sigma = Alphabet::binary();
  WeightedBettorFamily family;
  // Strategy emits an invalid bet; the engine degrades it to even instead of
  // failing, per the robustness contract for the diagonal construction.
  Bettor bad;
  bad.strategy = std::make_shared<FnStrategy>([](std::span<const Sym>) {
    return BetVector{{Rat(2), Rat(2)}};
  });
  family.entries.push_back({bad, 1, "invalid"});
  family.entries.push_back({constant_bettor(BetVector{{Rat(0), Rat(1, 2)}}), 1, "half1"});

  DiagonalEngine engine(family, sigma);
  engine.step();
  CHECK(engine.emitted() == std::vector<Sym>{0});
  CHECK(engine.capital(0) == 1);           // unchanged: treated as even
  CHECK(engine.capital(1) == Rat(1, 2));   // lost its stake
  CHECK(brute_diagonal(family, sigma, 4) == diagonal_sequence(family, sigma, 4));
}

TEST_CASE("diagonal engine agrees with the definition on a mixed family") {
  const Alphabet sigma = alpha(4);
  WeightedBettorFamily family;
  Rat weight(1, 2);
  // A spread of avoidance bettors with different predicates, targets, and
  // fractions, plus a history-dependent hand-written strategy.
  const std::vector<std::vector<Sym>> gammas{{0}, {1}, {2}, {3}, {0, 1}, {1, 2}, {2, 3}, {0, 3}};
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const std::uint64_t mod = 2 + i % 3;
    Bettor b = fact1_bettor([mod](std::uint64_t n) { return n % mod == 0; }, gammas[i], sigma,
                            i % 2, i % 2 == 0 ? Rat(1, 2) : Rat(1, 4));
    family.entries.push_back({b, weight, "avoid" + std::to_string(i)});
    weight /= 2;
  }
  Bettor chaser;
  chaser.strategy = std::make_shared<FnStrategy>([](std::span<const Sym> prefix) {
    BetVector b{{Rat(0), Rat(0), Rat(0), Rat(0)}};
    b.d[prefix.size() % 4] = Rat(prefix.empty() ? 1 : 1 + static_cast<std::int64_t>(prefix.back()), 5);
    return b;
  });
  family.entries.push_back({chaser, weight, "chaser"});

  DiagonalEngine engine(family, sigma);
  for (int i = 0; i < 60; ++i) engine.step();
  std::vector<std::vector<Rat>> log;
  const auto expected = brute_diagonal(family, sigma, 60, &log);
  REQUIRE(engine.emitted() == expected);
  for (std::size_t i = 0; i < family.entries.size(); ++i) REQUIRE(engine.capital(i) == log.back()[i]);
}

TEST_CASE("diagonal weighted total never increases and bounds every capital") {
  const Alphabet sigma = alpha(4);
  WeightedBettorFamily family;
  Rat weight(1, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    const std::uint64_t mod = 2 + i % 4;
    Bettor b = fact1_bettor([mod, i](std::uint64_t n) { return (n + i) % mod == 0; },
                            {Sym{i % 4}}, sigma, 0, Rat(1, 2));
    family.entries.push_back({b, weight, "b" + std::to_string(i)});
    weight /= 2;
  }
  DiagonalEngine engine(family, sigma);
  const Rat initial = engine.initial_weighted_total();
  Rat previous = initial;
  for (int pos = 0; pos < 200; ++pos) {
    engine.step();
    const Rat total = engine.weighted_total();
    REQUIRE(total <= previous);
    previous = total;
    for (std::size_t i : engine.last_changed())
      REQUIRE(engine.capital(i) <= initial / engine.family().entries[i].weight);
  }
  // The incrementally maintained total matches a from-scratch recomputation.
  REQUIRE(engine.weighted_total() == engine.recompute_weighted_total());
}

TEST_CASE("family validation rejects bad weights and capitals") {
  const Alphabet sigma = Alphabet::binary();
  WeightedBettorFamily family;
  family.entries.push_back({constant_bettor(BetVector::even(2)), 0, "zero-weight"});
  CHECK_THROWS_AS(DiagonalEngine(family, sigma), error);

  family.entries[0].weight = 1;
  family.entries[0].bettor.initial_capital = 0;
  CHECK_THROWS_AS(DiagonalEngine(family, sigma), error);

  Alphabet tiny{{"only"}};
  CHECK_THROWS_AS(DiagonalEngine(WeightedBettorFamily{}, tiny), error);
  Alphabet dup{{"a", "a"}};
  CHECK_THROWS_AS(DiagonalEngine(WeightedBettorFamily{}, dup), error);
}
