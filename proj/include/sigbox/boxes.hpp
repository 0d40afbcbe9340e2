#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sigbox/base.hpp"
#include "sigbox/vm.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Deterministic box pairs. Each side is a total function of both inputs and
// the round number; the declared profile says which cross-input each side
// actually reads (the model-internal hidden signaling).
// ---------------------------------------------------------------------------

struct SignalingProfile {
  bool a_reads_y = false;
  bool b_reads_x = false;
};

struct BoxOutputs {
  std::uint8_t a = 0;
  std::uint8_t b = 0;
  friend bool operator==(const BoxOutputs&, const BoxOutputs&) = default;
};

struct BoxPair {
  using SideFn = std::function<std::uint8_t(std::uint8_t x, std::uint8_t y, std::uint64_t n)>;

  std::string name;
  SideFn A;
  SideFn B;
  SignalingProfile profile;

  // Present when the pair is backed by enumerable programs; the learnability
  // experiments need the ground-truth program text and budget.
  std::optional<Program> program_a;
  std::optional<Program> program_b;
  std::optional<ExecBudget> budget;

  void validate() const {
    if (!A || !B) fail("validation", "box pair '" + name + "' is missing a side function");
  }
};

inline BoxOutputs query(const BoxPair& pair, std::uint64_t n, std::uint8_t x, std::uint8_t y) {
  pair.validate();
  if (x > 1 || y > 1) fail("validation", "box inputs must be bits");
  return {pair.A(x, y, n), pair.B(x, y, n)};
}

// ---------------------------------------------------------------------------
// Built-in models.
// ---------------------------------------------------------------------------

// Control model: each side sees only its own input. Never non-local.
inline BoxPair local_deterministic(std::function<std::uint8_t(std::uint8_t, std::uint64_t)> f,
                                   std::function<std::uint8_t(std::uint8_t, std::uint64_t)> g,
                                   std::string name = "local") {
  BoxPair pair;
  pair.name = std::move(name);
  pair.A = [f = std::move(f)](std::uint8_t x, std::uint8_t, std::uint64_t n) { return f(x, n); };
  pair.B = [g = std::move(g)](std::uint8_t, std::uint8_t y, std::uint64_t n) { return g(y, n); };
  pair.profile = {false, false};
  return pair;
}

// The canonical computable non-local pair: a = alpha(n), b = alpha(n) XOR
// (x AND y). Wins the CHSH game on every round; the hidden signaling is B's
// read of x.
inline BoxPair deterministic_pr(std::function<std::uint8_t(std::uint64_t)> alpha,
                                std::string name = "pr") {
  BoxPair pair;
  pair.name = std::move(name);
  pair.A = [alpha](std::uint8_t, std::uint8_t, std::uint64_t n) { return alpha(n); };
  pair.B = [alpha](std::uint8_t x, std::uint8_t y, std::uint64_t n) {
    return static_cast<std::uint8_t>(alpha(n) ^ (x & y));
  };
  pair.profile = {false, true};
  return pair;
}

inline BoxPair deterministic_pr_zero() {
  return deterministic_pr([](std::uint64_t) -> std::uint8_t { return 0; }, "pr_zero");
}

inline BoxPair deterministic_pr_popparity() {
  return deterministic_pr(
      [](std::uint64_t n) { return static_cast<std::uint8_t>(std::popcount(n) & 1); },
      "pr_popparity");
}

// Arbitrary pairs given as enumerable programs. A side that exhausts its fuel
// on a queried input is a model misconfiguration, not a semantic outcome.
inline BoxPair vm_backed(Program p_a, Program p_b, ExecBudget budget, std::string name = "vm") {
  budget.validate();
  validate_program(p_a);
  validate_program(p_b);
  BoxPair pair;
  pair.name = std::move(name);
  pair.program_a = std::move(p_a);
  pair.program_b = std::move(p_b);
  pair.budget = budget;
  auto side = [budget, name = pair.name](const Program& prog, const char* which, std::uint8_t x,
                                         std::uint8_t y, std::uint64_t n) -> std::uint8_t {
    const ExecResult r = run(prog, x, y, n, budget);
    if (!r.halted())
      fail("misconfiguration", "box '" + name + "' side " + which + " exhausted fuel at n=" +
                                   std::to_string(n));
    return r.bit;
  };
  pair.A = [side, p = *pair.program_a](std::uint8_t x, std::uint8_t y, std::uint64_t n) {
    return side(p, "A", x, y, n);
  };
  pair.B = [side, p = *pair.program_b](std::uint8_t x, std::uint8_t y, std::uint64_t n) {
    return side(p, "B", x, y, n);
  };
  // Program-backed sides may read anything; declare the general profile.
  pair.profile = {true, true};
  return pair;
}

// ---------------------------------------------------------------------------
// The dependence detector: exhaustively find the rounds below a horizon where
// one side's output depends on the distant party's input, with a witness.
// ---------------------------------------------------------------------------

struct DependenceRound {
  std::uint64_t n = 0;
  std::uint8_t witness = 0;  // the distant input value exhibiting the difference
  friend bool operator==(const DependenceRound&, const DependenceRound&) = default;
};

struct DependenceReport {
  std::uint64_t horizon = 0;
  // Rounds where exists y with B(0,y,n) != B(1,y,n); witness is the smallest such y.
  std::vector<DependenceRound> b_on_x;
  // Rounds where exists x with A(x,0,n) != A(x,1,n); witness is the smallest such x.
  std::vector<DependenceRound> a_on_y;
};

inline DependenceReport dependence_rounds(const BoxPair& pair, std::uint64_t horizon) {
  pair.validate();
  if (horizon < 1) fail("validation", "dependence horizon must be at least 1");
  DependenceReport report;
  report.horizon = horizon;
  for (std::uint64_t n = 0; n < horizon; ++n) {
    for (std::uint8_t y = 0; y <= 1; ++y)
      if (pair.B(0, y, n) != pair.B(1, y, n)) {
        report.b_on_x.push_back({n, y});
        break;
      }
    for (std::uint8_t x = 0; x <= 1; ++x)
      if (pair.A(x, 0, n) != pair.A(x, 1, n)) {
        report.a_on_y.push_back({n, x});
        break;
      }
  }
  return report;
}

}  // namespace sigbox
