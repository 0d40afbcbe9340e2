#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sigbox/base.hpp"

namespace sigbox {

// ---------------------------------------------------------------------------
// Machine model: a 4-register counter machine over unbounded naturals.
// Fall-off past the last instruction and jumps outside the program both halt
// with output 0, so every instruction sequence is a total program (modulo
// fuel), which keeps the enumeration total.
// ---------------------------------------------------------------------------

enum class Op : std::uint8_t { Halt0, Halt1, Inc, Decjz, LoadX, LoadY, LoadN };

inline constexpr int kNumRegs = 4;

struct Instruction {
  Op op = Op::Halt0;
  std::uint8_t reg = 0;   // unused for HALT0/HALT1
  std::int32_t off = 0;   // DECJZ only
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

using Program = std::vector<Instruction>;

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::Halt0: return "HALT0";
    case Op::Halt1: return "HALT1";
    case Op::Inc: return "INC";
    case Op::Decjz: return "DECJZ";
    case Op::LoadX: return "LOADX";
    case Op::LoadY: return "LOADY";
    case Op::LoadN: return "LOADN";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Fuel budgets: fuel(n) = c_fuel * t(n) + d_fuel with t a named time builtin
// times a scale constant. All arithmetic saturates at 2^64-1.
// ---------------------------------------------------------------------------

struct ExecBudget {
  enum class TimeBase { N, NLogN, N2, N3 };

  TimeBase base = TimeBase::N2;
  std::uint64_t scale = 1;
  std::uint64_t c_fuel = 10;
  std::uint64_t d_fuel = 100;

  // fuel(n) >= 1 must hold for every n; t(0) = 0 forces d_fuel >= 1.
  void validate() const {
    if (d_fuel < 1) fail("validation", "ExecBudget: d_fuel must be >= 1 so that fuel(n) >= 1 for all n");
  }

  std::uint64_t t(std::uint64_t n) const {
    std::uint64_t raw = 0;
    switch (base) {
      case TimeBase::N: raw = n; break;
      // n * (floor(log2 n) + 1); the integer stand-in for n*log n.
      case TimeBase::NLogN: raw = sat_mul_u64(n, std::bit_width(n)); break;
      case TimeBase::N2: raw = sat_mul_u64(n, n); break;
      case TimeBase::N3: raw = sat_mul_u64(sat_mul_u64(n, n), n); break;
    }
    return sat_mul_u64(scale, raw);
  }

  std::uint64_t fuel(std::uint64_t n) const { return sat_add_u64(sat_mul_u64(c_fuel, t(n)), d_fuel); }

  static TimeBase base_from_name(std::string_view name) {
    if (name == "n") return TimeBase::N;
    if (name == "nlogn") return TimeBase::NLogN;
    if (name == "n2") return TimeBase::N2;
    if (name == "n3") return TimeBase::N3;
    fail("validation", "unknown time builtin '" + std::string(name) + "' (expected n, nlogn, n2, n3)");
  }

  static std::string_view base_name(TimeBase b) {
    switch (b) {
      case TimeBase::N: return "n";
      case TimeBase::NLogN: return "nlogn";
      case TimeBase::N2: return "n2";
      case TimeBase::N3: return "n3";
    }
    return "?";
  }
};

// ---------------------------------------------------------------------------
// Execution. ExecResult::steps counts executed instructions (HALTs included);
// max_pc is the largest pc that was actually executed (0 if none), which
// bounds the instruction prefix the run ever looked at.
// ---------------------------------------------------------------------------

struct ExecResult {
  bool exhausted = false;  // true: fuel ran out (or a provable non-halt); false: halted
  std::uint8_t bit = 0;    // output bit when halted
  std::uint64_t steps = 0;
  std::uint32_t max_pc = 0;

  bool halted() const { return !exhausted; }
  friend bool operator==(const ExecResult&, const ExecResult&) = default;
};

// Small-step interpreter with a sound non-termination detector.
//
// Detector: snapshot the state at power-of-two step counts. If the same pc is
// later revisited with every register >= its snapshot value and with every
// register that took a zero-branch DECJZ since the snapshot exactly equal to
// it, the executed path repeats verbatim forever (induction over the period:
// surpluses never change a zero-test outcome, loads reset to run constants),
// so the program never halts and we can report fuel exhaustion immediately.
// This only converts guaranteed future FuelExhausted results into immediate
// ones; halting behaviour and outputs are unaffected.
inline ExecResult run(const Program& prog, unsigned x, unsigned y, std::uint64_t n,
                      const ExecBudget& budget) {
  using reg_t = unsigned __int128;
  const std::uint64_t fuel = budget.fuel(n);
  const std::int64_t len = static_cast<std::int64_t>(prog.size());
  const Instruction* code = prog.data();

  reg_t regs[kNumRegs] = {0, 0, 0, 0};
  std::int64_t pc = 0;
  std::uint64_t steps = 0;
  std::uint32_t max_pc = 0;

  std::int64_t snap_pc = -1;
  reg_t snap_regs[kNumRegs] = {0, 0, 0, 0};
  std::uint64_t next_snap = 0;
  unsigned zero_jumped = 0;  // registers zero-branch-tested since the snapshot

  for (;;) {
    if (pc < 0 || pc >= len) return {false, 0, steps, max_pc};
    if (steps == next_snap) {
      snap_pc = pc;
      std::copy(regs, regs + kNumRegs, snap_regs);
      zero_jumped = 0;
      next_snap = sat_add_u64(steps == 0 ? 1 : steps, steps == 0 ? 0 : steps);
    } else if (pc == snap_pc) {
      bool repeats = true;
      for (int r = 0; r < kNumRegs; ++r) {
        if (regs[r] < snap_regs[r] || ((zero_jumped >> r) & 1u && regs[r] != snap_regs[r])) {
          repeats = false;
          break;
        }
      }
      if (repeats) return {true, 0, steps, max_pc};
    }
    if (steps == fuel) return {true, 0, steps, max_pc};

    const Instruction& ins = code[pc];
    if (static_cast<std::uint32_t>(pc) > max_pc) max_pc = static_cast<std::uint32_t>(pc);
    ++steps;
    switch (ins.op) {
      case Op::Halt0: return {false, 0, steps, max_pc};
      case Op::Halt1: return {false, 1, steps, max_pc};
      case Op::Inc:
        ++regs[ins.reg];
        ++pc;
        break;
      case Op::Decjz:
        if (regs[ins.reg] == 0) {
          zero_jumped |= 1u << ins.reg;
          pc += ins.off;
        } else {
          --regs[ins.reg];
          ++pc;
        }
        break;
      case Op::LoadX:
        regs[ins.reg] = x;
        ++pc;
        break;
      case Op::LoadY:
        regs[ins.reg] = y;
        ++pc;
        break;
      case Op::LoadN:
        regs[ins.reg] = n;
        ++pc;
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Canonical enumeration: length-lexicographic over instruction sequences with
// the per-length instruction alphabet ordered
//   HALT0 < HALT1 < INC r0..r3 < DECJZ (r, offset zig-zag) < LOADX r0..r3
//         < LOADY r0..r3 < LOADN r0..r3
// DECJZ offsets are bounded by the program length L and ordered
// 0, +1, -1, +2, -2, ..., +L, -L, giving 2L+1 offsets per register and an
// alphabet of size 8L+22 for length-L programs. Index 0 is the empty program.
// ---------------------------------------------------------------------------

inline std::uint64_t alphabet_size(std::size_t len) { return 8 * static_cast<std::uint64_t>(len) + 22; }

inline std::int32_t zig_to_offset(std::uint64_t z) {
  if (z == 0) return 0;
  if (z & 1) return static_cast<std::int32_t>((z + 1) / 2);
  return -static_cast<std::int32_t>(z / 2);
}

inline std::uint64_t offset_to_zig(std::int32_t off) {
  if (off == 0) return 0;
  if (off > 0) return 2 * static_cast<std::uint64_t>(off) - 1;
  return 2 * static_cast<std::uint64_t>(-static_cast<std::int64_t>(off));
}

inline Instruction digit_to_instruction(std::uint64_t d, std::size_t len) {
  if (d == 0) return {Op::Halt0, 0, 0};
  if (d == 1) return {Op::Halt1, 0, 0};
  if (d < 6) return {Op::Inc, static_cast<std::uint8_t>(d - 2), 0};
  const std::uint64_t span = 2 * static_cast<std::uint64_t>(len) + 1;
  if (d < 6 + 4 * span) {
    const std::uint64_t rel = d - 6;
    return {Op::Decjz, static_cast<std::uint8_t>(rel / span), zig_to_offset(rel % span)};
  }
  const std::uint64_t rel = d - (6 + 4 * span);
  const auto reg = static_cast<std::uint8_t>(rel & 3);
  switch (rel >> 2) {
    case 0: return {Op::LoadX, reg, 0};
    case 1: return {Op::LoadY, reg, 0};
    default: return {Op::LoadN, reg, 0};
  }
}

inline std::uint64_t instruction_to_digit(const Instruction& ins, std::size_t len) {
  const std::uint64_t span = 2 * static_cast<std::uint64_t>(len) + 1;
  switch (ins.op) {
    case Op::Halt0: return 0;
    case Op::Halt1: return 1;
    case Op::Inc: return 2 + ins.reg;
    case Op::Decjz: return 6 + ins.reg * span + offset_to_zig(ins.off);
    case Op::LoadX: return 6 + 4 * span + ins.reg;
    case Op::LoadY: return 6 + 4 * span + 4 + ins.reg;
    case Op::LoadN: return 6 + 4 * span + 8 + ins.reg;
  }
  return 0;
}

// Program-class validity: registers in 0..3 and DECJZ offsets bounded by the
// program length (|off| <= len). Enumeration only ever produces such programs.
inline void validate_program(const Program& prog) {
  const auto len = static_cast<std::int64_t>(prog.size());
  for (std::size_t i = 0; i < prog.size(); ++i) {
    const Instruction& ins = prog[i];
    if (ins.op != Op::Halt0 && ins.op != Op::Halt1 && ins.reg >= kNumRegs)
      fail("validation", "instruction " + std::to_string(i) + ": register out of range");
    if (ins.op == Op::Decjz && (ins.off > len || ins.off < -len))
      fail("validation", "instruction " + std::to_string(i) + ": DECJZ offset exceeds program length");
    if (ins.op != Op::Decjz && ins.off != 0)
      fail("validation", "instruction " + std::to_string(i) + ": offset on a non-DECJZ instruction");
  }
}

namespace detail {

using u128 = unsigned __int128;

// Length and residual value of an index inside its length block.
inline void split_index(std::uint64_t index, std::size_t& len_out, u128& rem_out) {
  u128 rem = index;
  std::size_t len = 0;
  u128 block = 1;  // count of length-0 programs
  while (rem >= block) {
    rem -= block;
    ++len;
    block = 1;
    const u128 alpha = alphabet_size(len);
    for (std::size_t i = 0; i < len; ++i) block *= alpha;  // fits u128 for all u64 indices
  }
  len_out = len;
  rem_out = rem;
}

}  // namespace detail

inline Program enumerate_program(std::uint64_t index) {
  std::size_t len = 0;
  detail::u128 rem = 0;
  detail::split_index(index, len, rem);
  Program prog(len);
  const std::uint64_t alpha = alphabet_size(len);
  for (std::size_t j = len; j-- > 0;) {
    prog[j] = digit_to_instruction(static_cast<std::uint64_t>(rem % alpha), len);
    rem /= alpha;
  }
  return prog;
}

inline std::uint64_t encode_program(const Program& prog) {
  validate_program(prog);
  const std::size_t len = prog.size();
  // Every program of length >= 11 has an index beyond 2^64 (the length-10
  // block alone ends past it), and longer blocks would overflow the
  // intermediate arithmetic as well.
  if (len >= 11) fail("overflow", "program index exceeds 64 bits");
  detail::u128 base = 0;
  detail::u128 block = 1;
  for (std::size_t l = 0; l < len; ++l) {
    base += block;
    block = 1;
    const detail::u128 alpha = alphabet_size(l + 1);
    for (std::size_t i = 0; i <= l; ++i) block *= alpha;
  }
  const std::uint64_t alpha = alphabet_size(len);
  detail::u128 value = 0;
  for (const Instruction& ins : prog) value = value * alpha + instruction_to_digit(ins, len);
  const detail::u128 total = base + value;
  if (total > ~static_cast<std::uint64_t>(0)) fail("overflow", "program index exceeds 64 bits");
  return static_cast<std::uint64_t>(total);
}

// ---------------------------------------------------------------------------
// Sequential enumeration cursor with prefix skipping. advance_prefix(p) moves
// to the next index whose instruction prefix [0..p] differs from the current
// program's — the smallest such index, i.e. suffix digits reset to zero. This
// is what makes scanning by refuted prefixes exact: a candidate whose refuting
// executions never ran past pc p behaves identically for every suffix.
// ---------------------------------------------------------------------------

class EnumCursor {
 public:
  explicit EnumCursor(std::uint64_t start = 0) {
    detail::u128 rem = 0;
    detail::split_index(start, len_, rem);
    index_ = start;
    alpha_ = alphabet_size(len_);
    digits_.assign(len_, 0);
    for (std::size_t j = len_; j-- > 0;) {
      digits_[j] = static_cast<std::uint32_t>(rem % alpha_);
      rem /= alpha_;
    }
    rebuild_strides();
    prog_.resize(len_);
    for (std::size_t j = 0; j < len_; ++j) prog_[j] = digit_to_instruction(digits_[j], len_);
  }

  std::uint64_t index() const {
    if (index_ > ~static_cast<std::uint64_t>(0)) fail("overflow", "enumeration cursor index exceeds 64 bits");
    return static_cast<std::uint64_t>(index_);
  }

  const Program& program() const { return prog_; }
  std::size_t length() const { return len_; }

  void advance() { advance_prefix(len_ == 0 ? 0 : len_ - 1); }

  void advance_prefix(std::size_t p) {
    if (len_ == 0) {
      grow_length();
      index_ = 1;
      return;
    }
    if (p >= len_) p = len_ - 1;
    for (std::size_t j = p + 1; j < len_; ++j) {
      index_ -= static_cast<detail::u128>(digits_[j]) * strides_[j];
      set_digit(j, 0);
    }
    index_ += strides_[p];
    std::size_t j = p;
    for (;;) {
      if (digits_[j] + 1 < alpha_) {
        set_digit(j, digits_[j] + 1);
        return;
      }
      set_digit(j, 0);
      if (j == 0) {
        grow_length();
        return;
      }
      --j;
    }
  }

 private:
  void set_digit(std::size_t j, std::uint32_t d) {
    digits_[j] = d;
    prog_[j] = digit_to_instruction(d, len_);
  }

  void grow_length() {
    ++len_;
    alpha_ = alphabet_size(len_);
    digits_.assign(len_, 0);
    prog_.assign(len_, Instruction{Op::Halt0, 0, 0});
    rebuild_strides();
  }

  void rebuild_strides() {
    strides_.assign(len_, 1);
    for (std::size_t j = len_; j-- > 1;) strides_[j - 1] = strides_[j] * alpha_;
  }

  detail::u128 index_ = 0;
  std::size_t len_ = 0;
  std::uint64_t alpha_ = 22;
  std::vector<std::uint32_t> digits_;
  std::vector<detail::u128> strides_;
  Program prog_;
};

// ---------------------------------------------------------------------------
// Text format: one instruction per line, '#' starts a comment.
//   HALT0 | HALT1 | INC r | DECJZ r off | LOADX r | LOADY r | LOADN r
// with r a register digit 0..3 and off a signed decimal offset.
// ---------------------------------------------------------------------------

inline std::string format_program(const Program& prog) {
  std::string out;
  for (const Instruction& ins : prog) {
    out += op_name(ins.op);
    if (ins.op != Op::Halt0 && ins.op != Op::Halt1) {
      out += ' ';
      out += std::to_string(ins.reg);
      if (ins.op == Op::Decjz) {
        out += ' ';
        out += std::to_string(ins.off);
      }
    }
    out += '\n';
  }
  return out;
}

inline Program parse_program(std::string_view text) {
  Program prog;
  std::vector<std::size_t> lines;  // source line of each instruction, for diagnostics
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string mnemonic;
    if (!(ss >> mnemonic)) continue;

    const auto bad = [&](const std::string& what) {
      fail("parse", "line " + std::to_string(line_no) + ": " + what);
    };
    const auto read_reg = [&]() {
      long long r = -1;
      if (!(ss >> r) || r < 0 || r >= kNumRegs) bad("expected a register 0..3 after " + mnemonic);
      return static_cast<std::uint8_t>(r);
    };

    Instruction ins;
    if (mnemonic == "HALT0") {
      ins = {Op::Halt0, 0, 0};
    } else if (mnemonic == "HALT1") {
      ins = {Op::Halt1, 0, 0};
    } else if (mnemonic == "INC") {
      ins = {Op::Inc, read_reg(), 0};
    } else if (mnemonic == "DECJZ") {
      ins.op = Op::Decjz;
      ins.reg = read_reg();
      long long off = 0;
      if (!(ss >> off)) bad("expected a jump offset after DECJZ");
      ins.off = static_cast<std::int32_t>(off);
    } else if (mnemonic == "LOADX") {
      ins = {Op::LoadX, read_reg(), 0};
    } else if (mnemonic == "LOADY") {
      ins = {Op::LoadY, read_reg(), 0};
    } else if (mnemonic == "LOADN") {
      ins = {Op::LoadN, read_reg(), 0};
    } else {
      bad("unknown instruction '" + mnemonic + "'");
    }
    std::string extra;
    if (ss >> extra) bad("unexpected trailing token '" + extra + "'");
    prog.push_back(ins);
    lines.push_back(line_no);
  }
  const auto len = static_cast<std::int64_t>(prog.size());
  for (std::size_t i = 0; i < prog.size(); ++i) {
    if (prog[i].op == Op::Decjz && (prog[i].off > len || prog[i].off < -len))
      fail("parse", "line " + std::to_string(lines[i]) + ": DECJZ offset exceeds program length");
  }
  return prog;
}

}  // namespace sigbox
