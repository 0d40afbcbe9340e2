#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigbox/analysis.hpp"
#include "sigbox/base.hpp"
#include "sigbox/betting.hpp"
#include "sigbox/boxes.hpp"
#include "sigbox/learner.hpp"
#include "sigbox/protocol.hpp"
#include "sigbox/vm.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Key-value config files: `key = value` lines, '#' comments, blank lines
// ignored. Parsing and echoing round-trip so every run can write its resolved
// configuration next to its outputs.
// ---------------------------------------------------------------------------

using KvMap = std::map<std::string, std::string>;

namespace detail {
inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}
}  // namespace detail

inline KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("config", "line " + std::to_string(line_no) + ": expected `key = value`");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) fail("config", "line " + std::to_string(line_no) + ": empty key");
    if (kv.count(key)) fail("config", "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

inline std::string format_kv(const KvMap& kv) {
  std::string out;
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

inline std::string kv_get(const KvMap& kv, const std::string& key, const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline std::string kv_required(const KvMap& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail("config", "missing required key '" + key + "'");
  return it->second;
}

inline std::uint64_t kv_uint(const KvMap& kv, const std::string& key, std::uint64_t fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    // stoull would happily wrap "-3"; insist on digits only.
    if (it->second.empty() || it->second.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("not a digit string");
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail("config", "key '" + key + "' is not a non-negative integer: '" + it->second + "'");
  }
}

// Accepts "p/q" or a plain integer, optionally negative.
inline Rat parse_rat(const std::string& s) {
  const auto parse_int = [&](const std::string& part) {
    std::string body = part;
    bool neg = false;
    if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
      neg = body[0] == '-';
      body = body.substr(1);
    }
    if (body.empty() || body.find_first_not_of("0123456789") != std::string::npos)
      fail("config", "not a rational: '" + s + "'");
    Int v(body);
    return neg ? Int(-v) : v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return Rat(parse_int(s));
  const Int num = parse_int(s.substr(0, slash));
  const Int den = parse_int(s.substr(slash + 1));
  if (den == 0) fail("config", "zero denominator: '" + s + "'");
  return Rat(num, den);
}

inline std::vector<std::uint8_t> parse_bits(const std::string& s) {
  std::vector<std::uint8_t> bits;
  for (char c : s) {
    if (c == '0')
      bits.push_back(0);
    else if (c == '1')
      bits.push_back(1);
    else
      fail("config", "bit strings may contain only 0 and 1: '" + s + "'");
  }
  return bits;
}

inline std::string format_bits(const std::vector<std::uint8_t>& bits) {
  std::string s;
  for (std::uint8_t b : bits) s += b ? '1' : '0';
  return s;
}

// ---------------------------------------------------------------------------
// Budgets and programs in config form. Program values use ';' between
// instructions so a whole program fits in one value.
// ---------------------------------------------------------------------------

inline ExecBudget budget_from_kv(const KvMap& kv) {
  ExecBudget budget;
  budget.base = ExecBudget::base_from_name(kv_get(kv, "budget_base", "n2"));
  budget.scale = kv_uint(kv, "budget_scale", 1);
  budget.c_fuel = kv_uint(kv, "budget_c", 10);
  budget.d_fuel = kv_uint(kv, "budget_d", 100);
  budget.validate();
  return budget;
}

inline void budget_to_kv(const ExecBudget& budget, KvMap& kv) {
  kv["budget_base"] = ExecBudget::base_name(budget.base);
  kv["budget_scale"] = std::to_string(budget.scale);
  kv["budget_c"] = std::to_string(budget.c_fuel);
  kv["budget_d"] = std::to_string(budget.d_fuel);
}

inline Program parse_program_value(const std::string& value) {
  std::string text = value;
  for (char& c : text)
    if (c == ';') c = '\n';
  return parse_program(text);
}

inline std::string format_program_value(const Program& prog) {
  std::string text = format_program(prog);
  std::string out;
  for (char c : text) {
    if (c == '\n') {
      out += "; ";
    } else {
      out += c;
    }
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == ';')) out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------
// Box manifests: `model = pr_zero | pr_popparity | local_zero | local_echo |
// vm`; the vm model takes program_a, program_b, and budget keys.
// ---------------------------------------------------------------------------

inline BoxPair box_from_kv(const KvMap& kv) {
  const std::string model = kv_required(kv, "model");
  if (model == "pr_zero") return deterministic_pr_zero();
  if (model == "pr_popparity") return deterministic_pr_popparity();
  if (model == "local_zero")
    return local_deterministic([](std::uint8_t, std::uint64_t) { return std::uint8_t{0}; },
                               [](std::uint8_t, std::uint64_t) { return std::uint8_t{0}; },
                               "local_zero");
  if (model == "local_echo")
    return local_deterministic([](std::uint8_t x, std::uint64_t) { return x; },
                               [](std::uint8_t y, std::uint64_t) { return y; }, "local_echo");
  if (model == "vm")
    return vm_backed(parse_program_value(kv_required(kv, "program_a")),
                     parse_program_value(kv_required(kv, "program_b")), budget_from_kv(kv), "vm");
  fail("config", "unknown box model '" + model + "'");
}

// ---------------------------------------------------------------------------
// Switching-sequence files: one symbol per line, `L x y` for learning pairs
// and `S i` for signal indices; '#' comments and blank lines ignored.
// ---------------------------------------------------------------------------

inline std::string format_sequence(const std::vector<Sym>& symbols, std::uint64_t m) {
  std::string out;
  for (Sym s : symbols) {
    const SwitchSymbol sw = SwitchSymbol::of(s, m);
    if (sw.is_learn)
      out += "L " + std::to_string(sw.x) + " " + std::to_string(sw.y) + "\n";
    else
      out += "S " + std::to_string(sw.signal) + "\n";
  }
  return out;
}

inline std::vector<Sym> parse_sequence(const std::string& text, std::uint64_t m) {
  std::vector<Sym> symbols;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    const auto bad = [&](const std::string& why) {
      fail("config", "sequence line " + std::to_string(line_no) + ": " + why);
    };
    if (tag == "L") {
      int x = -1, y = -1;
      if (!(fields >> x >> y) || x < 0 || x > 1 || y < 0 || y > 1) bad("expected `L x y` with bits");
      symbols.push_back(learn_symbol(static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y)));
    } else if (tag == "S") {
      std::int64_t i = -1;
      if (!(fields >> i) || i < 1 || static_cast<std::uint64_t>(i) > m)
        bad("expected `S i` with 1 <= i <= " + std::to_string(m));
      symbols.push_back(signal_symbol(static_cast<std::uint64_t>(i)));
    } else {
      bad("unknown tag '" + tag + "'");
    }
    std::string excess;
    if (fields >> excess) bad("trailing characters '" + excess + "'");
  }
  return symbols;
}

// ---------------------------------------------------------------------------
// Sample files for the learner: `x y n b` per line.
// ---------------------------------------------------------------------------

inline std::vector<Sample> parse_samples(const std::string& text) {
  std::vector<Sample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::int64_t x = -1, y = -1, b = -1;
    std::uint64_t n = 0;
    if (!(fields >> x >> y >> n >> b) || x < 0 || x > 1 || y < 0 || y > 1 || b < 0 || b > 1)
      fail("config", "sample line " + std::to_string(line_no) + ": expected `x y n b` with bits");
    std::string excess;
    if (fields >> excess)
      fail("config", "sample line " + std::to_string(line_no) + ": trailing characters");
    samples.push_back({static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), n,
                       static_cast<std::uint8_t>(b)});
  }
  return samples;
}

inline std::string format_samples(const std::vector<Sample>& samples) {
  std::string out;
  for (const Sample& s : samples)
    out += std::to_string(s.x) + " " + std::to_string(s.y) + " " + std::to_string(s.n) + " " +
           std::to_string(s.b) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// CSV emitters. Rationals are written as numerator and denominator columns,
// keeping the tables exact.
// ---------------------------------------------------------------------------

inline std::string trajectory_csv(const std::vector<Rat>& trajectory) {
  std::string out = "position,numerator,denominator\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i)
    out += std::to_string(i) + "," + boost::multiprecision::numerator(trajectory[i]).str() + "," +
           boost::multiprecision::denominator(trajectory[i]).str() + "\n";
  return out;
}

struct LearnerTraceRow {
  std::uint64_t round = 0;
  Sample sample;
  std::uint64_t guess_index = 0;
  std::uint64_t mind_changes = 0;
  bool class_exhausted = false;
};

inline std::string learner_trace_csv(const std::vector<LearnerTraceRow>& rows) {
  std::string out = "round,x,y,n,b,guess_index,mind_changes,class_exhausted\n";
  for (const LearnerTraceRow& r : rows)
    out += std::to_string(r.round) + "," + std::to_string(r.sample.x) + "," +
           std::to_string(r.sample.y) + "," + std::to_string(r.sample.n) + "," +
           std::to_string(r.sample.b) + "," + std::to_string(r.guess_index) + "," +
           std::to_string(r.mind_changes) + "," + (r.class_exhausted ? "1" : "0") + "\n";
  return out;
}

inline std::string distribution_csv(const EmpiricalDistribution& dist) {
  std::string out = "x,y,a,b,count\n";
  for (std::uint8_t x = 0; x <= 1; ++x)
    for (std::uint8_t y = 0; y <= 1; ++y)
      for (std::uint8_t a = 0; a <= 1; ++a)
        for (std::uint8_t b = 0; b <= 1; ++b)
          out += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(a) + "," +
                 std::to_string(b) + "," + std::to_string(dist.count(x, y, a, b)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Transcripts as JSON-lines, one round per line, and run summaries as JSON.
// ---------------------------------------------------------------------------

inline nlohmann::json round_to_json(const RoundRecord& rec, std::uint64_t m) {
  const Alphabet alphabet = switch_alphabet(m);
  nlohmann::json j{{"n", rec.n},
                   {"s", alphabet.symbols.at(rec.s)},
                   {"x", rec.x_in},
                   {"y", rec.y_in},
                   {"a", rec.a_out},
                   {"b", rec.b_out},
                   {"guess", rec.guess_index},
                   {"changed", rec.guess_changed},
                   {"exhausted", rec.class_exhausted}};
  if (rec.decoded) j["decoded"] = {{"bit", rec.decoded->first}, {"value", rec.decoded->second}};
  return j;
}

inline std::string transcript_jsonl(const std::vector<RoundRecord>& transcript, std::uint64_t m) {
  std::string out;
  for (const RoundRecord& rec : transcript) out += round_to_json(rec, m).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Whole-file helpers.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot open '" + path + "' for writing");
  out << content;
  if (!out.flush()) fail("io", "failed writing '" + path + "'");
}

}  // namespace sigbox
