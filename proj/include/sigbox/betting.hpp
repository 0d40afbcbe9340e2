#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "sigbox/base.hpp"
#include "sigbox/vm.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Alphabets and bets. A symbol is an index into the alphabet; the index order
// is the tie-breaking order.
// ---------------------------------------------------------------------------

using Sym = std::size_t;

struct Alphabet {
  std::vector<std::string> symbols;

  std::size_t k() const { return symbols.size(); }

  void validate() const {
    if (symbols.size() < 2) fail("validation", "alphabet needs at least 2 symbols");
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (symbols[i].empty()) fail("validation", "alphabet symbol " + std::to_string(i) + " is empty");
      for (std::size_t j = i + 1; j < symbols.size(); ++j)
        if (symbols[i] == symbols[j]) fail("validation", "duplicate alphabet symbol '" + symbols[i] + "'");
    }
  }

  Sym index_of(std::string_view name) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
      if (symbols[i] == name) return i;
    fail("validation", "symbol '" + std::string(name) + "' not in alphabet");
  }

  static Alphabet binary() { return {{"0", "1"}}; }
};

struct BetVector {
  std::vector<Rat> d;  // fraction of current capital placed on each symbol

  bool is_valid(std::size_t k) const {
    if (d.size() != k) return false;
    Rat total = 0;
    for (const Rat& x : d) {
      if (x < 0) return false;
      total += x;
    }
    return total <= 1;
  }

  void validate(std::size_t k) const {
    if (!is_valid(k)) fail("validation", "invalid bet vector (size mismatch, negative entry, or sum > 1)");
  }

  Rat sum() const {
    Rat total = 0;
    for (const Rat& x : d) total += x;
    return total;
  }

  // Uniform bets (all entries equal) leave every capital unchanged whatever
  // the outcome; the even bet 1/k is the canonical case.
  bool is_uniform() const {
    for (const Rat& x : d)
      if (x != d.front()) return false;
    return true;
  }

  static BetVector even(std::size_t k) {
    BetVector b;
    b.d.assign(k, Rat(1) / Rat(static_cast<std::int64_t>(k)));
    return b;
  }
};

// Capital update: M * (1 + k*d_outcome - sum d). Exact.
inline Rat settle(const Rat& capital, const BetVector& bet, Sym outcome, std::size_t k) {
  bet.validate(k);
  if (outcome >= k) fail("validation", "settle: outcome symbol out of range");
  if (capital < 0) fail("validation", "settle: negative capital");
  return capital * (Rat(1) + Rat(static_cast<std::int64_t>(k)) * bet.d[outcome] - bet.sum());
}

// ---------------------------------------------------------------------------
// Strategies and bettors.
// ---------------------------------------------------------------------------

struct BetStrategy {
  virtual ~BetStrategy() = default;
  // The bet for the next position, given the emitted prefix. Shared pointers
  // let the diagonal construction group structurally identical bets.
  virtual std::shared_ptr<const BetVector> bet(std::span<const Sym> prefix) const = 0;
};

class FnStrategy final : public BetStrategy {
 public:
  using Fn = std::function<BetVector(std::span<const Sym>)>;
  explicit FnStrategy(Fn fn) : fn_(std::move(fn)) {}
  std::shared_ptr<const BetVector> bet(std::span<const Sym> prefix) const override {
    return std::make_shared<BetVector>(fn_(prefix));
  }

 private:
  Fn fn_;
};

struct Bettor {
  std::shared_ptr<const BetStrategy> strategy;
  Rat capital = 1;
  Rat initial_capital = 1;

  void validate() const {
    if (!strategy) fail("validation", "bettor has no strategy");
    if (initial_capital <= 0) fail("validation", "initial capital must be positive");
    if (capital < 0) fail("validation", "capital must be non-negative");
  }
};

// Capital trajectory along a fixed sequence: trajectory[0] is the starting
// capital, trajectory[i+1] the capital after settling position i.
inline std::vector<Rat> run_bettor(const Bettor& bettor, std::span<const Sym> x, const Alphabet& sigma) {
  bettor.validate();
  const std::size_t k = sigma.k();
  std::vector<Rat> trajectory;
  trajectory.reserve(x.size() + 1);
  trajectory.push_back(bettor.capital);
  Rat capital = bettor.capital;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const auto bet = bettor.strategy->bet(x.subspan(0, n));
    capital = settle(capital, *bet, x[n], k);
    trajectory.push_back(capital);
  }
  return trajectory;
}

// ---------------------------------------------------------------------------
// Predicates: bit-valued functions of the position, given natively or as an
// enumerated program run on input (0, 0, n). Fuel exhaustion reads as 0, so
// clocked-out programs degrade to even betting rather than erroring.
// ---------------------------------------------------------------------------

class Predicate {
 public:
  static Predicate native(std::function<bool(std::uint64_t)> fn) {
    Predicate p;
    p.fn_ = std::move(fn);
    return p;
  }

  static Predicate from_program(Program prog, ExecBudget budget) {
    budget.validate();
    Predicate p;
    p.prog_ = std::move(prog);
    p.budget_ = budget;
    return p;
  }

  bool eval(std::uint64_t n) const {
    if (memo_valid_ && memo_n_ == n) return memo_v_;
    bool v = false;
    if (fn_) {
      v = fn_(n);
    } else {
      const ExecResult r = run(prog_, 0, 0, n, budget_);
      v = r.halted() && r.bit == 1;
    }
    memo_valid_ = true;
    memo_n_ = n;
    memo_v_ = v;
    return v;
  }

 private:
  Predicate() = default;
  std::function<bool(std::uint64_t)> fn_;
  Program prog_;
  ExecBudget budget_;
  // One-slot memo: families share a predicate across many bettors queried at
  // the same position. Single-threaded use only.
  mutable bool memo_valid_ = false;
  mutable std::uint64_t memo_n_ = 0;
  mutable bool memo_v_ = false;
};

// ---------------------------------------------------------------------------
// The avoidance bettor: bet evenly while the predicate is 0 (or n is below
// the threshold); when it fires, place `fraction` of the capital spread over
// the symbols outside gamma. fraction = 1 is the all-in strategy of the
// growth argument; smaller fractions keep the bettor alive when wrong, which
// the default diagonal family uses to make every symbol recur.
// ---------------------------------------------------------------------------

class Fact1Strategy final : public BetStrategy {
 public:
  Fact1Strategy(std::shared_ptr<const Predicate> g, std::vector<bool> in_gamma, std::size_t k,
                std::uint64_t m_threshold, const Rat& fraction)
      : g_(std::move(g)), m_threshold_(m_threshold) {
    std::size_t gamma_size = 0;
    for (bool b : in_gamma)
      if (b) ++gamma_size;
    if (in_gamma.size() != k || gamma_size == 0 || gamma_size == k)
      fail("validation", "fact1 bettor needs a nonempty proper subset of the alphabet");
    if (fraction <= 0 || fraction > 1) fail("validation", "fact1 bet fraction must lie in (0, 1]");
    if (!g_) fail("validation", "fact1 bettor needs a predicate");
    auto even = std::make_shared<BetVector>(BetVector::even(k));
    auto avoid = std::make_shared<BetVector>();
    const Rat share = fraction / Rat(static_cast<std::int64_t>(k - gamma_size));
    avoid->d.assign(k, Rat(0));
    for (std::size_t s = 0; s < k; ++s)
      if (!in_gamma[s]) avoid->d[s] = share;
    even_ = std::move(even);
    avoid_ = std::move(avoid);
  }

  std::shared_ptr<const BetVector> bet(std::span<const Sym> prefix) const override {
    const std::uint64_t n = prefix.size();
    if (n <= m_threshold_ || !g_->eval(n)) return even_;
    return avoid_;
  }

 private:
  std::shared_ptr<const Predicate> g_;
  std::uint64_t m_threshold_ = 0;
  std::shared_ptr<const BetVector> even_;
  std::shared_ptr<const BetVector> avoid_;
};

inline Bettor fact1_bettor(std::shared_ptr<const Predicate> g, const std::vector<Sym>& gamma,
                           const Alphabet& sigma, std::uint64_t m_threshold, const Rat& fraction = 1) {
  sigma.validate();
  std::vector<bool> in_gamma(sigma.k(), false);
  for (Sym s : gamma) {
    if (s >= sigma.k()) fail("validation", "fact1 bettor: gamma symbol out of range");
    in_gamma[s] = true;
  }
  Bettor b;
  b.strategy = std::make_shared<Fact1Strategy>(std::move(g), std::move(in_gamma), sigma.k(), m_threshold, fraction);
  return b;
}

inline Bettor fact1_bettor(std::function<bool(std::uint64_t)> g, const std::vector<Sym>& gamma,
                           const Alphabet& sigma, std::uint64_t m_threshold, const Rat& fraction = 1) {
  return fact1_bettor(std::make_shared<Predicate>(Predicate::native(std::move(g))), gamma, sigma,
                      m_threshold, fraction);
}

// ---------------------------------------------------------------------------
// Raw access to the rational backend's (numerator, denominator) pair. Naming
// private members in an explicit template instantiation is allowed, and the
// diagonal engine needs it: the generic rational operators normalize through
// a subtract-and-shift gcd that is quadratic in the capital's bit length for
// the operand shapes settlements produce, while the structure here admits a
// linear-time update. The unnamed namespace keeps the instantiations and the
// friend definitions internal to each translation unit.
// ---------------------------------------------------------------------------

namespace detail {
namespace {

using InnerRational = boost::rational<Int>;

template <class Tag, typename Tag::type Member>
struct StealMember {
  friend typename Tag::type stolen(Tag) { return Member; }
};
struct RationalNumTag {
  using type = Int InnerRational::*;
  friend type stolen(RationalNumTag);
};
struct RationalDenTag {
  using type = Int InnerRational::*;
  friend type stolen(RationalDenTag);
};
template struct StealMember<RationalNumTag, &InnerRational::num>;
template struct StealMember<RationalDenTag, &InnerRational::den>;

inline Int& raw_num(Rat& r) { return r.backend().data().*stolen(RationalNumTag{}); }
inline Int& raw_den(Rat& r) { return r.backend().data().*stolen(RationalDenTag{}); }

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------
// Weighted families and the diagonal sequence: emit, position by position,
// the symbol minimizing the weighted total capital after settlement, ties to
// the smallest symbol. The weighted total is therefore non-increasing, which
// bounds every member's capital by (initial weighted total) / (its weight).
// ---------------------------------------------------------------------------

struct WeightedBettorFamily {
  struct Entry {
    Bettor bettor;
    Rat weight = 1;
    std::string label;
  };
  std::vector<Entry> entries;

  void validate() const {
    for (const Entry& e : entries) {
      e.bettor.validate();
      if (e.weight <= 0) fail("validation", "family weights must be positive");
    }
  }

  Rat weighted_initial_total() const {
    Rat total = 0;
    for (const Entry& e : entries) total += e.weight * e.bettor.capital;
    return total;
  }
};

class DiagonalEngine {
 public:
  DiagonalEngine(WeightedBettorFamily family, Alphabet sigma)
      : family_(std::move(family)), sigma_(std::move(sigma)) {
    sigma_.validate();
    family_.validate();
    const std::size_t count = family_.entries.size();
    capitals_.reserve(count);
    w_num_.reserve(count);
    w_exp_.reserve(count);
    for (const auto& e : family_.entries) {
      capitals_.push_back(e.bettor.capital);
      alive_.push_back(!rnum(e.bettor.capital).is_zero());
      // Weights never change, so their fast-path decomposition is fixed.
      w_num_.push_back(numerator(e.weight));
      const Int& dw = rden(e.weight);
      w_exp_.push_back(is_pow2(dw) ? static_cast<long>(lsb(dw)) : -1);
    }
    total_ = family_.weighted_initial_total();
    initial_total_ = total_;
  }

  // Settle one position. Exactness note: the settled weighted totals for two
  // candidate outcomes s, t differ by k * (U_s - U_t) where
  // U_s = sum_i w_i * M_i * d_i[s], so comparing weighted stakes U is an
  // exact argmin over settled totals; uniform bets shift every U_s equally
  // and are skipped.
  //
  // The argmin is evaluated in integer arithmetic over a common denominator:
  // bets are bucketed by value (strategies return pointers to const vectors,
  // so a pointer seen before still means the same bet), stakes w_i * M_i with
  // power-of-two denominators are summed as shifted numerators, and each U_s
  // is compared via I_s = U_s * L * 2^E with L the lcm of the bet entries'
  // denominators. Positions where some denominator is not a power of two fall
  // back to plain rational arithmetic; both paths compute the same symbol.
  Sym step() {
    const std::size_t k = sigma_.k();
    const std::size_t count = family_.entries.size();
    bucket_of_.assign(count, kNoBucket);
    // Families whose bet values never repeat would otherwise grow the bucket
    // table without bound; dropping it between positions is always safe.
    if (buckets_.size() > 4096) {
      buckets_.clear();
      bucket_cache_.clear();
    }
    if (bucket_cache_.size() > (std::size_t{1} << 20)) bucket_cache_.clear();
    for (auto& b : buckets_) {
      b.members.clear();
      b.numerator_sum = 0;
      b.stake_sum = 0;
    }

    bool fast = true;
    long max_exp = 0;
    struct Live {
      std::size_t index;
      long exp;  // stake denominator is 2^exp on the fast path
    };
    std::vector<Live> live;
    live.reserve(count);

    for (std::size_t i = 0; i < count; ++i) {
      if (!alive_[i]) continue;  // dead: every settlement is 0 -> 0
      auto bet = family_.entries[i].bettor.strategy->bet(emitted_);
      if (!bet) continue;  // no bet reads as the even bet: factor 1 everywhere
      const std::size_t bucket = bucket_for(bet, k);
      // Uniform bets (and ill-formed ones, degraded to even) have factor 1
      // for every outcome: no effect on the argmin or on any capital.
      if (buckets_[bucket].uniform) continue;
      bucket_of_[i] = bucket;
      buckets_[bucket].members.push_back(i);

      if (fast) {
        const long we = w_exp_[i];
        const Int& dm = rden(capitals_[i]);
        if (we >= 0 && is_pow2(dm)) {
          const long exp = we + static_cast<long>(lsb(dm));
          live.push_back({i, exp});
          if (exp > max_exp) max_exp = exp;
        } else {
          fast = false;
        }
      }
    }

    Sym best = 0;
    if (fast) {
      // Numerator sums over the common denominator 2^max_exp, per bucket.
      for (const Live& v : live) {
        const Int& cn = rnum(capitals_[v.index]);
        Bucket& b = buckets_[bucket_of_[v.index]];
        if (w_num_[v.index] == 1)
          b.numerator_sum += cn << (max_exp - v.exp);
        else
          b.numerator_sum += (cn * w_num_[v.index]) << (max_exp - v.exp);
      }
      // L clears every bet-entry denominator, so I_s below is integral.
      Int scale = 1;
      for (const Bucket& b : buckets_) {
        if (b.members.empty()) continue;
        scale = scale / gcd(scale, b.entry_lcm) * b.entry_lcm;
      }
      Int best_score = -1;
      for (Sym t = 0; t < k; ++t) {
        Int score = 0;
        for (const Bucket& b : buckets_) {
          if (b.members.empty() || b.numerator_sum.is_zero()) continue;
          const Rat& entry = b.rep->d[t];
          if (rnum(entry).is_zero()) continue;
          const Int coeff = rnum(entry) * (scale / rden(entry));
          score += b.numerator_sum * coeff;
        }
        if (t == 0 || score < best_score) {
          best_score = std::move(score);
          best = t;
        }
      }
    } else {
      // Rational fallback: exact stakes per bucket, pairwise deltas.
      for (Bucket& b : buckets_)
        for (std::size_t i : b.members)
          b.stake_sum += family_.entries[i].weight * capitals_[i];
      for (Sym t = 1; t < k; ++t) {
        Rat delta = 0;
        for (const Bucket& b : buckets_) {
          if (b.members.empty()) continue;
          if (b.rep->d[t] != b.rep->d[best]) delta += b.stake_sum * (b.rep->d[t] - b.rep->d[best]);
        }
        if (delta < 0) best = t;
      }
    }

    // Settle. On the fast path the weighted-total delta is accumulated as one
    // integer over a common denominator, costing a single rational addition
    // per position; grouping never changes an exact rational sum.
    last_changed_.clear();
    if (fast) {
      Int fden_lcm = 1;
      for (const Bucket& b : buckets_) {
        if (b.members.empty()) continue;
        const Int& fd = rden(b.factor[best]);
        fden_lcm = fden_lcm / gcd(fden_lcm, fd) * fd;
      }
      Int delta_num = 0;
      for (Bucket& b : buckets_) {
        if (b.members.empty()) continue;
        const Rat& factor = b.factor[best];
        if (is_one(factor)) continue;
        // stake * (factor - 1) = num_sum * (fn - fd) * (L / fd) over L * 2^E.
        delta_num += b.numerator_sum * ((rnum(factor) - rden(factor)) * (fden_lcm / rden(factor)));
        const bool kills = rnum(factor).is_zero();
        for (std::size_t i : b.members) {
          settle_capital(capitals_[i], factor);
          if (kills) alive_[i] = false;
          last_changed_.push_back(i);
        }
      }
      if (!delta_num.is_zero()) total_ += Rat(delta_num, fden_lcm << max_exp);
    } else {
      for (Bucket& b : buckets_) {
        if (b.members.empty()) continue;
        const Rat& factor = b.factor[best];
        if (is_one(factor)) continue;
        total_ += b.stake_sum * (factor - 1);
        const bool kills = rnum(factor).is_zero();
        for (std::size_t i : b.members) {
          settle_capital(capitals_[i], factor);
          if (kills) alive_[i] = false;
          last_changed_.push_back(i);
        }
      }
    }
    std::sort(last_changed_.begin(), last_changed_.end());
    emitted_.push_back(best);
    return best;
  }

  const std::vector<Sym>& emitted() const { return emitted_; }
  const Rat& capital(std::size_t i) const { return capitals_.at(i); }
  std::size_t family_size() const { return family_.entries.size(); }
  const WeightedBettorFamily& family() const { return family_; }
  const Alphabet& alphabet() const { return sigma_; }
  const Rat& weighted_total() const { return total_; }
  const Rat& initial_weighted_total() const { return initial_total_; }
  const std::vector<std::size_t>& last_changed() const { return last_changed_; }

  // Ground-truth recomputation, for cross-checking the incremental total.
  Rat recompute_weighted_total() const {
    Rat total = 0;
    for (std::size_t i = 0; i < capitals_.size(); ++i) total += family_.entries[i].weight * capitals_[i];
    return total;
  }

 private:
  static constexpr std::size_t kNoBucket = static_cast<std::size_t>(-1);

  // Distinct bet-vector values seen so far, with everything derivable from
  // the value alone computed once at first sight. The pointer cache is only a
  // hint: addresses of freed vectors can be recycled between positions, so
  // every hit re-checks the value before it is trusted.
  struct Bucket {
    std::shared_ptr<const BetVector> rep;
    bool uniform = false;              // also set for ill-formed bets
    std::vector<Rat> factor;           // settle factor 1 + k*d_s - sum d, per symbol
    Int entry_lcm = 1;                 // lcm of the entries' denominators
    std::vector<std::size_t> members;  // bettor indices, this position only
    Int numerator_sum;                 // fast path: sum of shifted numerators
    Rat stake_sum;                     // fallback: exact weighted member stake
  };

  static bool is_pow2(const Int& v) { return v > 0 && lsb(v) == msb(v); }

  // Positive values only: whether v fits an unsigned 64-bit word.
  static bool fits_u64(const Int& v) { return msb(v) < 64; }

  // In-place capital update M *= F. For a small factor F = fn/fd this is
  // Knuth's cancellation form — cancel gcd(num, fd) and gcd(den, fn) first,
  // so the result of coprime inputs is coprime and no final normalization is
  // needed. Taking each gcd against the small side via one
  // big-mod-small keeps every operation linear in the capital's bit length;
  // the generic operator*= normalizes with a gcd that is quadratic for this
  // operand shape. Factors outside 64 bits take the generic path.
  static void settle_capital(Rat& capital, const Rat& factor) {
    const Int& fn_i = rnum(factor);
    const Int& fd_i = rden(factor);
    if (fn_i.is_zero()) {  // all-in on another symbol: capital becomes exactly 0
      detail::raw_num(capital) = 0;
      detail::raw_den(capital) = 1;
      return;
    }
    if (!fits_u64(fn_i) || !fits_u64(fd_i)) {
      capital *= factor;
      return;
    }
    const auto fn = static_cast<std::uint64_t>(fn_i);
    const auto fd = static_cast<std::uint64_t>(fd_i);
    Int& mn = detail::raw_num(capital);
    Int& md = detail::raw_den(capital);
    const std::uint64_t g1 = fd == 1 ? 1 : std::gcd(static_cast<std::uint64_t>(mn % fd), fd);
    const std::uint64_t g2 = fn == 1 ? 1 : std::gcd(static_cast<std::uint64_t>(md % fn), fn);
    if (g1 > 1) mn /= g1;
    if (fn != g2) mn *= fn / g2;
    if (g2 > 1) md /= g2;
    if (fd != g1) md *= fd / g1;
  }

  // Direct reads of a rational's canonical (numerator, denominator) pair.
  // The backend keeps values normalized, so representation equality is value
  // equality — and integer compares sidestep the division-based ordering the
  // generic rational comparison operators perform.
  static const Int& rnum(const Rat& r) { return r.backend().data().numerator(); }
  static const Int& rden(const Rat& r) { return r.backend().data().denominator(); }
  static bool is_one(const Rat& r) { return rden(r) == 1 && rnum(r) == 1; }
  static bool same_entries(const std::vector<Rat>& a, const std::vector<Rat>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (rnum(a[i]) != rnum(b[i]) || rden(a[i]) != rden(b[i])) return false;
    return true;
  }

  std::size_t bucket_for(const std::shared_ptr<const BetVector>& bet, std::size_t k) {
    const auto it = bucket_cache_.find(bet.get());
    if (it != bucket_cache_.end() && same_entries(buckets_[it->second].rep->d, bet->d))
      return it->second;
    for (std::size_t b = 0; b < buckets_.size(); ++b)
      if (same_entries(buckets_[b].rep->d, bet->d)) {
        bucket_cache_[bet.get()] = b;
        return b;
      }
    Bucket b;
    b.rep = bet;
    // Ill-behaved strategies degrade to the neutral even bet, which settles
    // exactly like any uniform bet: factor 1 for every outcome.
    b.uniform = !bet->is_valid(k) || bet->is_uniform();
    if (!b.uniform) {
      const Rat sum = bet->sum();
      const Rat kk(static_cast<std::int64_t>(k));
      b.factor.reserve(k);
      for (std::size_t s = 0; s < k; ++s) {
        b.factor.push_back(Rat(1) + kk * bet->d[s] - sum);
        const Int& den = denominator(bet->d[s]);
        b.entry_lcm = b.entry_lcm / gcd(b.entry_lcm, den) * den;
      }
    }
    buckets_.push_back(std::move(b));
    bucket_cache_[bet.get()] = buckets_.size() - 1;
    return buckets_.size() - 1;
  }

  WeightedBettorFamily family_;
  Alphabet sigma_;
  std::vector<Rat> capitals_;
  std::vector<char> alive_;  // capitals_[i] != 0, maintained on settlement
  std::vector<Int> w_num_;   // weight numerators, fixed at construction
  std::vector<long> w_exp_;  // lsb of pow2 weight denominators; -1 otherwise
  std::vector<Sym> emitted_;
  Rat total_ = 0;
  Rat initial_total_ = 0;
  std::vector<Bucket> buckets_;
  std::unordered_map<const BetVector*, std::size_t> bucket_cache_;
  std::vector<std::size_t> bucket_of_;
  std::vector<std::size_t> last_changed_;
};

inline std::vector<Sym> diagonal_sequence(const WeightedBettorFamily& family, const Alphabet& sigma,
                                          std::size_t length) {
  DiagonalEngine engine(family, sigma);
  for (std::size_t i = 0; i < length; ++i) engine.step();
  return engine.emitted();
}

}  // namespace sigbox
