#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sigbox {

// All recoverable failures surface as sigbox::error with a category tag that
// callers (CLI, tests) can match on without parsing the message.
class error : public std::runtime_error {
public:
  error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

private:
  std::string category_;
};

[[noreturn]] inline void fail(const std::string& category, const std::string& message) {
  throw error(category, message);
}

// Exact arithmetic everywhere capital or probability is involved.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Rat rat_pow(const Rat& base, std::uint64_t exp) {
  Rat acc = 1;
  Rat b = base;
  while (exp != 0) {
    if (exp & 1) acc *= b;
    b *= b;
    exp >>= 1;
  }
  return acc;
}

// Render a rational as "num/den" ("num" when den == 1).
inline std::string rat_str(const Rat& r) {
  const Int num = numerator(r);
  const Int den = denominator(r);
  std::string s = num.str();
  if (den != 1) {
    s += '/';
    s += den.str();
  }
  return s;
}

// splitmix64: the published mixer. One 64-bit word per call; the full output
// sequence for a given seed is part of the tool's external contract.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

inline std::uint64_t sat_add_u64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;
  return s < a ? ~0ULL : s;
}

inline std::uint64_t sat_mul_u64(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  return p > ~0ULL ? ~0ULL : static_cast<std::uint64_t>(p);
}

}  // namespace sigbox
