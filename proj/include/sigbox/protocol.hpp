#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sigbox/base.hpp"
#include "sigbox/betting.hpp"
#include "sigbox/boxes.hpp"
#include "sigbox/learner.hpp"
#include "sigbox/vm.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// The switching alphabet: four learning pairs then the message bit indices,
// ordered (0,0) < (0,1) < (1,0) < (1,1) < 1 < ... < m. Symbol values are
// indices in that order.
// ---------------------------------------------------------------------------

inline Sym learn_symbol(std::uint8_t x, std::uint8_t y) {
  if (x > 1 || y > 1) fail("validation", "learning pair entries must be bits");
  return static_cast<Sym>(2 * x + y);
}

inline Sym signal_symbol(std::uint64_t i) {
  if (i < 1) fail("validation", "signal indices are 1-based");
  return static_cast<Sym>(3 + i);
}

struct SwitchSymbol {
  bool is_learn = true;
  std::uint8_t x = 0;          // learning pair, when is_learn
  std::uint8_t y = 0;
  std::uint64_t signal = 0;    // 1..m, when !is_learn

  static SwitchSymbol of(Sym s, std::uint64_t m) {
    if (s < 4) return {true, static_cast<std::uint8_t>(s >> 1), static_cast<std::uint8_t>(s & 1), 0};
    const std::uint64_t i = static_cast<std::uint64_t>(s) - 3;
    if (i > m) fail("validation", "switch symbol out of alphabet");
    return {false, 0, 0, i};
  }
};

inline Alphabet switch_alphabet(std::uint64_t m) {
  if (m < 1) fail("validation", "message length must be at least 1");
  Alphabet a;
  a.symbols = {"L00", "L01", "L10", "L11"};
  for (std::uint64_t i = 1; i <= m; ++i) a.symbols.push_back("S" + std::to_string(i));
  return a;
}

// ---------------------------------------------------------------------------
// Configuration and result records.
// ---------------------------------------------------------------------------

struct ProtocolConfig {
  ExecBudget budget;                   // the assumed time bound
  std::uint64_t m = 1;                 // message length
  std::vector<std::uint8_t> message;   // Alice's secret, m bits
  std::uint64_t horizon = 1;           // total rounds for run_protocol
  std::uint64_t settle_window = 5;     // consecutive agreeing decodes to settle a bit
  std::uint64_t scan_cap = 1000000;    // learner enumeration bound
  std::vector<Sym> s_symbols;          // explicit switching sequence; empty -> diagonal
  std::uint64_t family_n = 200;        // program coverage of the default diagonal family

  void validate() const {
    budget.validate();
    if (m < 1) fail("validation", "message length must be at least 1");
    if (message.size() != m) fail("validation", "message length does not match m");
    for (std::uint8_t b : message)
      if (b > 1) fail("validation", "message entries must be bits");
    if (horizon < 1) fail("validation", "horizon must be at least 1");
    if (settle_window < 1) fail("validation", "settle window must be at least 1");
    if (s_symbols.empty() && family_n < 1) fail("validation", "family coverage must be at least 1");
  }
};

struct RoundRecord {
  std::uint64_t n = 0;
  Sym s = 0;
  std::uint8_t x_in = 0;
  std::uint8_t y_in = 0;
  std::uint8_t a_out = 0;
  std::uint8_t b_out = 0;
  std::uint64_t guess_index = 0;  // after this round's update, if any
  bool guess_changed = false;
  bool class_exhausted = false;
  // (bit index 1..m, decoded value), present when Bob decoded this round
  std::optional<std::pair<std::uint64_t, std::uint8_t>> decoded;
  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct BitEstimate {
  std::uint8_t bit = 0;
  std::uint64_t last_update_round = 0;
  std::uint64_t streak = 0;  // consecutive decodes agreeing with `bit`
  bool settled = false;
  bool seen = false;
  friend bool operator==(const BitEstimate&, const BitEstimate&) = default;
};

struct DecodeState {
  std::vector<BitEstimate> bits;
  std::uint64_t settle_window = 5;
  // First round index after which every bit was simultaneously settled. Later
  // flips may unsettle bits again; this keeps the earliest such round.
  std::optional<std::uint64_t> first_all_settled;

  bool all_settled() const {
    for (const BitEstimate& e : bits)
      if (!e.settled) return false;
    return !bits.empty();
  }

  std::vector<std::uint8_t> message() const {
    std::vector<std::uint8_t> out;
    for (const BitEstimate& e : bits) out.push_back(e.bit);
    return out;
  }
};

struct P1P2Report {
  // Last round whose learning update changed the guess (0 if it never
  // changed); absent when the learner exhausted its class, in which case no
  // stabilization claim is made.
  std::optional<std::uint64_t> stabilization_round;
  bool t_violation = false;  // the assumed time bound failed (class exhausted)
  std::vector<std::uint64_t> decoded_counts;  // per bit: rounds the run decoded
};

struct ProtocolResult {
  std::vector<RoundRecord> transcript;
  DecodeState decode;
  P1P2Report report;
};

// ---------------------------------------------------------------------------
// The default adversary family for generating S. For every program index
// p < N it fields, over the switch alphabet: one bettor avoiding the learning
// symbols, one avoiding the signal symbols, and one per single symbol — all
// driven by the predicate g_p(n) = output bit of program p on (0, 0, n), with
// fuel exhaustion read as 0. Bet fractions are cautious (not all-in) so that
// bettors survive losses: the diagonal then keeps every symbol recurring,
// which the protocol needs (every learning pair and every message bit must
// come up forever). Weights halve per bettor, so the weighted initial total
// is below 1 and capitals stay bounded by 2^rank.
// ---------------------------------------------------------------------------

inline WeightedBettorFamily build_default_family(const ProtocolConfig& cfg, std::uint64_t N) {
  cfg.validate();
  if (N < 1) fail("validation", "family coverage N must be at least 1");
  const Alphabet sigma = switch_alphabet(cfg.m);
  const std::size_t k = sigma.k();

  const std::vector<Sym> learn{0, 1, 2, 3};
  std::vector<Sym> sig;
  for (std::uint64_t i = 1; i <= cfg.m; ++i) sig.push_back(signal_symbol(i));

  // Fractions chosen to keep settlement factors of the form 2^a * 3^b / 2^c
  // (small denominators keep exact arithmetic fast) while staying below 1
  // for the per-symbol bettors, which must survive being wrong.
  const Rat beta_learn(1, 2);
  const Rat beta_sig = cfg.m == 2 ? Rat(1, 4) : Rat(1, 2);
  const Rat beta_single = k <= 8 ? Rat(static_cast<std::int64_t>(k) - 1, 8) : Rat(1, 2);

  WeightedBettorFamily family;
  Rat weight(1, 2);
  for (std::uint64_t p = 0; p < N; ++p) {
    auto g = std::make_shared<Predicate>(Predicate::from_program(enumerate_program(p), cfg.budget));
    const std::string prefix = "p" + std::to_string(p) + "/";
    family.entries.push_back({fact1_bettor(g, learn, sigma, 0, beta_learn), weight, prefix + "learn"});
    weight /= 2;
    family.entries.push_back({fact1_bettor(g, sig, sigma, 0, beta_sig), weight, prefix + "sig"});
    weight /= 2;
    for (Sym s = 0; s < k; ++s) {
      family.entries.push_back(
          {fact1_bettor(g, {s}, sigma, 0, beta_single), weight, prefix + sigma.symbols[s]});
      weight /= 2;
    }
  }
  return family;
}

// ---------------------------------------------------------------------------
// The protocol proper. Alice and Bob are isolated by interface shape: Alice's
// input choice sees only the switch symbol and her message; Bob's sees only
// the switch symbol, the round number, and his own learner state. Each learns
// about the other side strictly through the box outputs.
// ---------------------------------------------------------------------------

using SymbolSource = std::function<std::optional<Sym>(std::uint64_t n)>;

namespace detail {

struct DistinguishingY {
  bool found = false;
  std::uint8_t y = 0;
  std::uint8_t b_for_x0 = 0;
  std::uint8_t b_for_x1 = 0;
};

// The smallest y on which the guessed program's outputs for x = 0 and x = 1
// both halt and differ at round n.
inline DistinguishingY find_distinguishing_y(const LearnerState& learner, std::uint64_t n,
                                             const ExecBudget& budget) {
  if (learner.class_exhausted) return {};
  for (std::uint8_t y = 0; y <= 1; ++y) {
    const ExecResult r0 = run(learner.guess_program, 0, y, n, budget);
    const ExecResult r1 = run(learner.guess_program, 1, y, n, budget);
    if (r0.halted() && r1.halted() && r0.bit != r1.bit) return {true, y, r0.bit, r1.bit};
  }
  return {};
}

}  // namespace detail

class ProtocolRun {
 public:
  ProtocolRun(ProtocolConfig cfg, BoxPair pair, SymbolSource source)
      : cfg_(std::move(cfg)), pair_(std::move(pair)), source_(std::move(source)) {
    cfg_.validate();
    pair_.validate();
    if (!source_) fail("validation", "protocol needs a switching-sequence source");
    learner_.scan_cap = cfg_.scan_cap;
    decode_.bits.assign(cfg_.m, BitEstimate{});
    decode_.settle_window = cfg_.settle_window;
    decoded_counts_.assign(cfg_.m, 0);
  }

  const RoundRecord& step() {
    const std::uint64_t n = next_n_;
    const std::optional<Sym> sym = source_(n);
    if (!sym) fail("config", "switching sequence exhausted at round " + std::to_string(n));
    const SwitchSymbol sw = SwitchSymbol::of(*sym, cfg_.m);

    RoundRecord rec;
    rec.n = n;
    rec.s = *sym;
    const std::uint64_t prev_guess = learner_.guess_index;

    if (sw.is_learn) {
      // Both parties read the shared sequence; the round plays S(n)'s pair
      // and Bob feeds his observation to the learner.
      rec.x_in = sw.x;
      rec.y_in = sw.y;
      const BoxOutputs out = query(pair_, n, rec.x_in, rec.y_in);
      rec.a_out = out.a;
      rec.b_out = out.b;
      learner_ = learner_update(std::move(learner_), {rec.x_in, rec.y_in, n, rec.b_out}, cfg_.budget);
      if (!learner_.class_exhausted && learner_.guess_index != prev_guess) last_change_round_ = n;
    } else {
      // Alice plays her message bit; Bob plays the smallest input his guess
      // says can tell Alice's inputs apart, or 0 when there is none.
      rec.x_in = cfg_.message[sw.signal - 1];
      const auto dy = detail::find_distinguishing_y(learner_, n, cfg_.budget);
      rec.y_in = dy.y;
      const BoxOutputs out = query(pair_, n, rec.x_in, rec.y_in);
      rec.a_out = out.a;
      rec.b_out = out.b;
      if (dy.found) {
        const std::uint8_t decoded_x = out.b == dy.b_for_x1 ? 1 : 0;
        rec.decoded = {{sw.signal, decoded_x}};
        ++decoded_counts_[sw.signal - 1];
        BitEstimate& e = decode_.bits[sw.signal - 1];
        if (e.seen && e.bit == decoded_x) {
          ++e.streak;
        } else {
          e.bit = decoded_x;
          e.streak = 1;
          e.seen = true;
        }
        e.settled = e.streak >= cfg_.settle_window;
        e.last_update_round = n;
        if (!decode_.first_all_settled && decode_.all_settled())
          decode_.first_all_settled = n;
      }
    }

    rec.guess_index = learner_.guess_index;
    rec.guess_changed = learner_.guess_index != prev_guess;
    rec.class_exhausted = learner_.class_exhausted;
    transcript_.push_back(rec);
    ++next_n_;
    return transcript_.back();
  }

  std::uint64_t next_round() const { return next_n_; }
  const std::vector<RoundRecord>& transcript() const { return transcript_; }
  const DecodeState& decode() const { return decode_; }
  const LearnerState& learner() const { return learner_; }
  bool message_settled() const { return decode_.all_settled(); }

  P1P2Report report() const {
    P1P2Report r;
    if (!learner_.class_exhausted) r.stabilization_round = last_change_round_;
    r.t_violation = learner_.class_exhausted;
    r.decoded_counts = decoded_counts_;
    return r;
  }

 private:
  ProtocolConfig cfg_;
  BoxPair pair_;
  SymbolSource source_;
  LearnerState learner_;
  DecodeState decode_;
  std::vector<RoundRecord> transcript_;
  std::vector<std::uint64_t> decoded_counts_;
  std::uint64_t next_n_ = 0;
  std::uint64_t last_change_round_ = 0;
};

inline SymbolSource fixed_sequence_source(std::vector<Sym> symbols) {
  return [symbols = std::move(symbols)](std::uint64_t n) -> std::optional<Sym> {
    if (n >= symbols.size()) return std::nullopt;
    return symbols[n];
  };
}

inline SymbolSource diagonal_source(const ProtocolConfig& cfg) {
  auto engine = std::make_shared<DiagonalEngine>(build_default_family(cfg, cfg.family_n),
                                                 switch_alphabet(cfg.m));
  return [engine](std::uint64_t) -> std::optional<Sym> { return engine->step(); };
}

inline ProtocolResult run_protocol(const ProtocolConfig& cfg, const BoxPair& pair) {
  cfg.validate();
  SymbolSource source =
      cfg.s_symbols.empty() ? diagonal_source(cfg) : fixed_sequence_source(cfg.s_symbols);
  ProtocolRun run(cfg, pair, std::move(source));
  for (std::uint64_t n = 0; n < cfg.horizon; ++n) run.step();
  return {run.transcript(), run.decode(), run.report()};
}

// ---------------------------------------------------------------------------
// Ground-truth property checks over a finished transcript.
// ---------------------------------------------------------------------------

struct P1Verdict {
  bool pass = false;
  std::optional<std::uint64_t> stabilization_round;
  // First (n, x, y) where the final guess fails to reproduce the pair.
  std::optional<Sample> counterexample;
};

// Does the final guess compute the pair's B on the whole input domain from
// the stabilization round to the end of the transcript?
inline P1Verdict check_p1(const std::vector<RoundRecord>& transcript, const BoxPair& pair,
                          const ExecBudget& budget) {
  P1Verdict verdict;
  if (transcript.empty()) return verdict;
  if (transcript.back().class_exhausted) return verdict;  // no stabilization claim
  std::uint64_t stab = 0;
  for (const RoundRecord& rec : transcript)
    if (rec.guess_changed) stab = rec.n;
  verdict.stabilization_round = stab;
  const Program guess = enumerate_program(transcript.back().guess_index);
  for (std::uint64_t n = stab; n <= transcript.back().n; ++n)
    for (std::uint8_t x = 0; x <= 1; ++x)
      for (std::uint8_t y = 0; y <= 1; ++y) {
        const std::uint8_t truth = pair.B(x, y, n);
        const ExecResult r = run(guess, x, y, n, budget);
        if (!r.halted() || r.bit != truth) {
          verdict.counterexample = Sample{x, y, n, truth};
          return verdict;
        }
      }
  verdict.pass = true;
  return verdict;
}

struct P2Verdict {
  std::vector<std::uint64_t> usable_counts;  // per bit: signal rounds with true dependence
  std::uint64_t window = 0;
  bool pass = false;
};

// Counts, per message bit, the signaling rounds at which the true pair's B
// actually depends on x; passes when every bit has at least `window` of them.
inline P2Verdict check_p2(const std::vector<RoundRecord>& transcript, const BoxPair& pair,
                          std::uint64_t m, std::uint64_t window) {
  if (m < 1) fail("validation", "message length must be at least 1");
  P2Verdict verdict;
  verdict.usable_counts.assign(m, 0);
  verdict.window = window;
  for (const RoundRecord& rec : transcript) {
    const SwitchSymbol sw = SwitchSymbol::of(rec.s, m);
    if (sw.is_learn) continue;
    for (std::uint8_t y = 0; y <= 1; ++y)
      if (pair.B(0, y, rec.n) != pair.B(1, y, rec.n)) {
        ++verdict.usable_counts[sw.signal - 1];
        break;
      }
  }
  verdict.pass = true;
  for (std::uint64_t c : verdict.usable_counts)
    if (c < window) verdict.pass = false;
  return verdict;
}

}  // namespace sigbox
