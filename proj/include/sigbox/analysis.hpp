#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sigbox/base.hpp"
#include "sigbox/boxes.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Empirical input/output statistics under fair-coin inputs, and the CHSH
// score in correlator form. All quotients are exact rationals.
// ---------------------------------------------------------------------------

struct EmpiricalDistribution {
  std::array<std::uint64_t, 16> counts{};  // indexed x<<3 | y<<2 | a<<1 | b
  std::uint64_t rounds = 0;

  static std::size_t index(std::uint8_t x, std::uint8_t y, std::uint8_t a, std::uint8_t b) {
    if (x > 1 || y > 1 || a > 1 || b > 1) fail("validation", "distribution entries must be bits");
    return static_cast<std::size_t>(x) << 3 | static_cast<std::size_t>(y) << 2 |
           static_cast<std::size_t>(a) << 1 | static_cast<std::size_t>(b);
  }

  std::uint64_t count(std::uint8_t x, std::uint8_t y, std::uint8_t a, std::uint8_t b) const {
    return counts[index(x, y, a, b)];
  }

  std::uint64_t setting_total(std::uint8_t x, std::uint8_t y) const {
    std::uint64_t total = 0;
    for (std::uint8_t a = 0; a <= 1; ++a)
      for (std::uint8_t b = 0; b <= 1; ++b) total += count(x, y, a, b);
    return total;
  }

  // The finite-horizon conditional estimate:4 * count / rounds, which uses
  // the fair-coin fact that each setting gets about a quarter of the rounds.
  Rat phat(std::uint8_t a, std::uint8_t b, std::uint8_t x, std::uint8_t y) const {
    if (rounds == 0) fail("insufficient-data", "empty distribution");
    return Rat(4) * Rat(count(x, y, a, b)) / Rat(rounds);
  }
};

// Fair-coin inputs from the documented 64-bit generator: per round draw one
// word u, take x from bit 0 and y from bit 1.
inline EmpiricalDistribution estimate_distribution(const BoxPair& pair, std::uint64_t horizon,
                                                   std::uint64_t seed) {
  if (horizon < 1) fail("validation", "estimation horizon must be at least 1");
  pair.validate();
  SplitMix64 rng{seed};
  EmpiricalDistribution dist;
  for (std::uint64_t n = 0; n < horizon; ++n) {
    const std::uint64_t u = rng.next();
    const auto x = static_cast<std::uint8_t>(u & 1);
    const auto y = static_cast<std::uint8_t>((u >> 1) & 1);
    const BoxOutputs out = query(pair, n, x, y);
    ++dist.counts[EmpiricalDistribution::index(x, y, out.a, out.b)];
    ++dist.rounds;
  }
  return dist;
}

// E00 + E01 + E10 - E11 with outcomes mapped to +-1 by (-1)^bit. Local
// deterministic boxes satisfy |score| <= 2; the non-local pair reaches 4.
inline Rat chsh_score(const EmpiricalDistribution& dist) {
  if (dist.rounds == 0) fail("insufficient-data", "empty distribution");
  Rat score = 0;
  for (std::uint8_t x = 0; x <= 1; ++x)
    for (std::uint8_t y = 0; y <= 1; ++y) {
      const std::uint64_t total = dist.setting_total(x, y);
      if (total == 0)
        fail("insufficient-data", "setting (" + std::to_string(x) + "," + std::to_string(y) +
                                      ") never observed");
      Rat correlator = 0;
      for (std::uint8_t a = 0; a <= 1; ++a)
        for (std::uint8_t b = 0; b <= 1; ++b) {
          const Rat term = Rat(dist.count(x, y, a, b)) / Rat(total);
          correlator += ((a ^ b) != 0) ? -term : term;
        }
      score += (x == 1 && y == 1) ? -correlator : correlator;
    }
  return score;
}

// ---------------------------------------------------------------------------
// Physics helpers. The speed of light and the Planck constant are exact by SI
// definition, so both formulas are exact rationals: the operations-per-second
// bound 2mc^2/(pi*hbar) simplifies to 4mc^2/h since hbar = h/(2*pi).
// ---------------------------------------------------------------------------

inline const Int kSpeedOfLight = 299792458;  // m/s, exact

inline Rat planck_constant() {  // J*s, exact
  Int den = 1;
  for (int i = 0; i < 42; ++i) den *= 10;
  return Rat(Int(662607015), den);
}

inline Rat signaling_distance(const Rat& seconds_per_round, std::uint64_t rounds_to_decode) {
  if (seconds_per_round <= 0) fail("validation", "seconds per round must be positive");
  return Rat(kSpeedOfLight) * seconds_per_round * Rat(rounds_to_decode);
}

inline Rat lloyd_bound(const Rat& mass_kg) {
  if (mass_kg < 0) fail("validation", "mass must be non-negative");
  return Rat(4) * mass_kg * Rat(kSpeedOfLight) * Rat(kSpeedOfLight) / planck_constant();
}

// Independent floating-point evaluation of the same bound, kept in the
// pre-simplification form with an explicit pi, for cross-checking digits.
inline double lloyd_bound_float(double mass_kg) {
  const double pi = 3.14159265358979323846;
  const double h = 6.62607015e-34;
  const double hbar = h / (2 * pi);
  const double c = 299792458.0;
  return 2 * mass_kg * c * c / (pi * hbar);
}

// ---------------------------------------------------------------------------
// Decimal rendering of positive rationals in scientific notation with
// round-half-up, exact integer arithmetic throughout.
// ---------------------------------------------------------------------------

inline std::string to_sci_string(const Rat& value, int significant_digits) {
  if (significant_digits < 1 || significant_digits > 50)
    fail("validation", "significant digits out of range");
  if (value == 0) return "0";
  const bool negative = value < 0;
  const Rat x = negative ? -value : value;
  const Int num = boost::multiprecision::numerator(x);
  const Int den = boost::multiprecision::denominator(x);

  // Locate the decade: e with 10^e <= x < 10^(e+1).
  auto digits_of = [](const Int& v) {
    return static_cast<long>(v.str().size());
  };
  long e = digits_of(num) - digits_of(den);  // within 1 of the truth
  auto pow10 = [](long p) {
    Int r = 1;
    for (long i = 0; i < p; ++i) r *= 10;
    return r;
  };
  // x >= 10^e  <=>  num * 10^-e >= den (sign-split to stay integral)
  auto at_least = [&](long p) {
    return p >= 0 ? num >= den * pow10(p) : num * pow10(-p) >= den;
  };
  while (!at_least(e)) --e;
  while (at_least(e + 1)) ++e;

  // mantissa = round(x * 10^(digits-1-e)), then renormalize if it overflows.
  const long shift = significant_digits - 1 - e;
  Int scaled_num = num;
  Int scaled_den = den;
  if (shift >= 0)
    scaled_num *= pow10(shift);
  else
    scaled_den *= pow10(-shift);
  Int mantissa = (scaled_num * 2 + scaled_den) / (scaled_den * 2);  // half-up
  Int limit = pow10(significant_digits);
  if (mantissa >= limit) {
    mantissa /= 10;
    ++e;
  }

  std::string digits = mantissa.str();
  std::string out = negative ? "-" : "";
  out += digits.substr(0, 1);
  if (digits.size() > 1) out += "." + digits.substr(1);
  std::string exp = std::to_string(e < 0 ? -e : e);
  if (exp.size() < 2) exp.insert(exp.begin(), '0');
  out += "e" + std::string(e < 0 ? "-" : "+") + exp;
  return out;
}

}  // namespace sigbox
