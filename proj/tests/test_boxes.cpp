#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <vector>

#include "sigbox/base.hpp"
#include "sigbox/boxes.hpp"
#include "sigbox/vm.hpp"

using namespace sigbox;

namespace {

ExecBudget generous() {
  ExecBudget b;
  b.c_fuel = 0;
  b.d_fuel = 1000000;
  return b;
}

const char* kAndText =
    "LOADX 0\n"
    "DECJZ 0 2\n"
    "LOADY 0\n"
    "DECJZ 0 2\n"
    "HALT1\n";

}  // namespace

TEST_CASE("non-local pair with constant phase answers the defining pattern") {
  const BoxPair pair = deterministic_pr_zero();
  for (std::uint64_t n : {0ull, 1ull, 7ull, 100ull}) {
    CHECK(query(pair, n, 1, 1) == BoxOutputs{0, 1});
    CHECK(query(pair, n, 0, 0) == BoxOutputs{0, 0});
    CHECK(query(pair, n, 0, 1) == BoxOutputs{0, 0});
    CHECK(query(pair, n, 1, 0) == BoxOutputs{0, 0});
  }
}

TEST_CASE("local pair echoes its own inputs") {
  const BoxPair pair = local_deterministic(
      [](std::uint8_t x, std::uint64_t) { return x; },
      [](std::uint8_t y, std::uint64_t) { return y; });
  for (std::uint64_t n : {0ull, 3ull, 42ull}) {
    CHECK(query(pair, n, 1, 0) == BoxOutputs{1, 0});
    CHECK(query(pair, n, 0, 1) == BoxOutputs{0, 1});
  }
}

TEST_CASE("non-local pair with popcount-parity phase evaluates by definition") {
  const BoxPair pair = deterministic_pr_popparity();
  // popcount(3) = 2, parity 0, so a = 0 and b = 0 xor (1 and 1) = 1.
  CHECK(query(pair, 3, 1, 1) == BoxOutputs{0, 1});
  // popcount(7) = 3, parity 1.
  CHECK(query(pair, 7, 1, 1) == BoxOutputs{1, 0});
  CHECK(query(pair, 7, 0, 0) == BoxOutputs{1, 1});
  // popcount(1) = 1.
  CHECK(query(pair, 1, 0, 1) == BoxOutputs{1, 1});
}

TEST_CASE("winning identity a xor b == x and y holds on every round") {
  for (const BoxPair& pair : {deterministic_pr_zero(), deterministic_pr_popparity()}) {
    for (std::uint64_t n = 0; n < 200; ++n)
      for (std::uint8_t x = 0; x <= 1; ++x)
        for (std::uint8_t y = 0; y <= 1; ++y) {
          const BoxOutputs out = query(pair, n, x, y);
          REQUIRE((out.a ^ out.b) == (x & y));
        }
  }
}

TEST_CASE("dependence detector flags every round of the non-local pair") {
  const auto report = dependence_rounds(deterministic_pr_zero(), 64);
  REQUIRE(report.b_on_x.size() == 64);
  for (std::uint64_t n = 0; n < 64; ++n) {
    CHECK(report.b_on_x[n].n == n);
    // y = 0 gives B == alpha(n) on both x; the witness must be y = 1.
    CHECK(report.b_on_x[n].witness == 1);
  }
  CHECK(report.a_on_y.empty());
}

TEST_CASE("dependence detector stays silent on local pairs") {
  const BoxPair pair = local_deterministic(
      [](std::uint8_t x, std::uint64_t n) { return static_cast<std::uint8_t>(x ^ (n & 1)); },
      [](std::uint8_t y, std::uint64_t) { return y; });
  const auto report = dependence_rounds(pair, 128);
  CHECK(report.b_on_x.empty());
  CHECK(report.a_on_y.empty());
}

TEST_CASE("dependence detector reports exactly the dependent rounds of a mixed fixture") {
  // B reads x only at even rounds; A reads y only at multiples of 3.
  BoxPair pair;
  pair.name = "fixture";
  pair.A = [](std::uint8_t, std::uint8_t y, std::uint64_t n) {
    return static_cast<std::uint8_t>(n % 3 == 0 ? y : 0);
  };
  pair.B = [](std::uint8_t x, std::uint8_t, std::uint64_t n) {
    return static_cast<std::uint8_t>(n % 2 == 0 ? x : 0);
  };
  pair.profile = {true, true};

  const auto report = dependence_rounds(pair, 30);
  std::vector<DependenceRound> expected_b;
  std::vector<DependenceRound> expected_a;
  for (std::uint64_t n = 0; n < 30; ++n) {
    // Both y values witness B's x-dependence at even n; smallest wins.
    if (n % 2 == 0) expected_b.push_back({n, 0});
    // A(x,0,n) = 0 and A(x,1,n) = 1 when 3 | n, already at x = 0.
    if (n % 3 == 0) expected_a.push_back({n, 0});
  }
  CHECK(report.b_on_x == expected_b);
  CHECK(report.a_on_y == expected_a);
}

TEST_CASE("declared profiles are honest for the built-in models") {
  struct Case {
    BoxPair pair;
  };
  const BoxPair models[] = {
      deterministic_pr_zero(),
      deterministic_pr_popparity(),
      local_deterministic([](std::uint8_t x, std::uint64_t n) { return static_cast<std::uint8_t>(x & n & 1); },
                          [](std::uint8_t y, std::uint64_t) { return y; }),
  };
  for (const BoxPair& pair : models) {
    const auto report = dependence_rounds(pair, 300);
    if (!pair.profile.b_reads_x) CHECK(report.b_on_x.empty());
    if (!pair.profile.a_reads_y) CHECK(report.a_on_y.empty());
  }
  // The non-local models do claim the signaling they use.
  CHECK(deterministic_pr_zero().profile.b_reads_x);
  CHECK_FALSE(deterministic_pr_zero().profile.a_reads_y);
}

TEST_CASE("program-backed pair matches its native counterpart") {
  // A computes 0 always; B computes x and y. That realizes the constant-phase
  // non-local pair as two programs.
  const Program p_a = parse_program("HALT0\n");
  const Program p_b = parse_program(kAndText);
  const BoxPair vm = vm_backed(p_a, p_b, generous());
  const BoxPair native = deterministic_pr_zero();
  for (std::uint64_t n = 0; n < 50; ++n)
    for (std::uint8_t x = 0; x <= 1; ++x)
      for (std::uint8_t y = 0; y <= 1; ++y) REQUIRE(query(vm, n, x, y) == query(native, n, x, y));

  REQUIRE(vm.program_b.has_value());
  CHECK(encode_program(*vm.program_b) == 749771754ull);
  const auto report = dependence_rounds(vm, 16);
  REQUIRE(report.b_on_x.size() == 16);
  CHECK(report.b_on_x[0].witness == 1);
}

TEST_CASE("program-backed pair reports fuel exhaustion as misconfiguration") {
  ExecBudget tiny;
  tiny.c_fuel = 0;
  tiny.d_fuel = 3;
  const Program p_a = parse_program("HALT0\n");
  const Program p_b = parse_program(kAndText);  // 3 steps when x=0, 5 when x=y=1
  const BoxPair pair = vm_backed(p_a, p_b, tiny);
  CHECK(query(pair, 0, 0, 0) == BoxOutputs{0, 0});  // both sides halt within budget
  CHECK_THROWS_MATCHES(query(pair, 0, 1, 1), error,
                       Catch::Matchers::Predicate<error>(
                           [](const error& e) { return e.category() == "misconfiguration"; }));
}

TEST_CASE("queries and detector reject malformed arguments") {
  const BoxPair pair = deterministic_pr_zero();
  CHECK_THROWS_AS(query(pair, 0, 2, 0), error);
  CHECK_THROWS_AS(query(pair, 0, 0, 2), error);
  CHECK_THROWS_AS(dependence_rounds(pair, 0), error);
  BoxPair empty;
  CHECK_THROWS_AS(query(empty, 0, 0, 0), error);
}
