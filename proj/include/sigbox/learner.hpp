#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sigbox/base.hpp"
#include "sigbox/vm.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Learning by enumeration: keep the least program index consistent with every
// observation so far, under a fixed fuel budget. Fuel exhaustion counts as
// inconsistent — that is exactly the restriction to the clocked class.
// ---------------------------------------------------------------------------

struct Sample {
  std::uint8_t x = 0;
  std::uint8_t y = 0;
  std::uint64_t n = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct LearnerState {
  std::vector<Sample> samples;
  std::uint64_t guess_index = 0;
  std::uint64_t mind_changes = 0;
  std::uint64_t scan_cap = 1000000;
  // Set when no index <= scan_cap is consistent with the samples. Once set it
  // can never clear (more samples only shrink the consistent set), and
  // guess_index keeps its last value, which is no longer meaningful.
  bool class_exhausted = false;
  Program guess_program;  // enumerate(guess_index), cached
};

using Prediction = std::optional<std::uint8_t>;  // nullopt = unknown

namespace detail {

inline bool consistent_with(const Program& prog, const Sample& s, const ExecBudget& budget) {
  const ExecResult r = run(prog, s.x, s.y, s.n, budget);
  return r.halted() && r.bit == s.b;
}

// Runs the candidate against every sample; on failure reports the deepest
// program position the failing execution touched, so the caller can skip all
// programs sharing that prefix (they replay the identical trace).
struct ScanOutcome {
  bool consistent = true;
  std::uint32_t max_pc = 0;
};

inline ScanOutcome check_candidate(const Program& prog, const std::vector<Sample>& samples,
                                   const ExecBudget& budget) {
  for (const Sample& s : samples) {
    const ExecResult r = run(prog, s.x, s.y, s.n, budget);
    if (!(r.halted() && r.bit == s.b)) return {false, r.max_pc};
  }
  return {true, 0};
}

}  // namespace detail

// Generic least-index scan over any enumerated hypothesis class: the first
// index whose hypothesis is consistent, or nothing if the scan passes cap.
template <typename ConsistentFn>
std::optional<std::uint64_t> least_consistent_index(std::uint64_t cap, ConsistentFn&& consistent) {
  for (std::uint64_t i = 0; i <= cap; ++i)
    if (consistent(i)) return i;
  return std::nullopt;
}

// Append one observation and restore the least-consistent-index invariant.
// Semantically this is a scan from index 0 with memoized refutations: every
// index below the current guess was refuted by an earlier sample and stays
// refuted, so only the current guess needs re-checking, and a refuted guess
// resumes the scan upward from guess_index + 1.
inline LearnerState learner_update(LearnerState state, const Sample& s, const ExecBudget& budget) {
  budget.validate();
  if (s.x > 1 || s.y > 1 || s.b > 1) fail("validation", "sample entries must be bits");
  if (!state.samples.empty() && s.n <= state.samples.back().n)
    fail("validation", "sample rounds must be strictly increasing");
  state.samples.push_back(s);
  if (state.class_exhausted) return state;

  if (detail::consistent_with(state.guess_program, s, budget)) return state;

  // The current guess is refuted. Resume the enumeration scan.
  EnumCursor cursor(state.guess_index + 1);
  while (cursor.index() <= state.scan_cap) {
    const Program& candidate = cursor.program();
    const auto outcome = detail::check_candidate(candidate, state.samples, budget);
    if (outcome.consistent) {
      state.guess_index = static_cast<std::uint64_t>(cursor.index());
      state.guess_program = candidate;
      ++state.mind_changes;
      return state;
    }
    // Any program of this length sharing the executed prefix replays the same
    // refuting trace, so jump the cursor past all of them.
    if (candidate.empty()) {
      cursor.advance();
    } else {
      const auto len = static_cast<std::uint32_t>(candidate.size());
      cursor.advance_prefix(std::min(outcome.max_pc, len - 1));
    }
  }
  state.class_exhausted = true;
  return state;
}

// Evaluate the current guess on fresh inputs. Unknown when the class is
// exhausted or the guess runs out of fuel.
inline Prediction learner_predict(const LearnerState& state, std::uint8_t x, std::uint8_t y,
                                  std::uint64_t n, const ExecBudget& budget) {
  if (x > 1 || y > 1) fail("validation", "prediction inputs must be bits");
  if (state.class_exhausted) return std::nullopt;
  const ExecResult r = run(state.guess_program, x, y, n, budget);
  if (!r.halted()) return std::nullopt;
  return r.bit;
}

}  // namespace sigbox
