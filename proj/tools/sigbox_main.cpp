// Command-line front end: five subcommands (chsh, protocol, diagonal,
// bettors, learn), each driven by one key-value config file plus flag
// overrides. Every run writes its resolved configuration next to its outputs
// so results can be reproduced byte for byte. Failures print a single-line
// JSON error record to stderr and exit nonzero.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigbox/analysis.hpp"
#include "sigbox/base.hpp"
#include "sigbox/betting.hpp"
#include "sigbox/boxes.hpp"
#include "sigbox/io.hpp"
#include "sigbox/learner.hpp"
#include "sigbox/protocol.hpp"
#include "sigbox/vm.hpp"

namespace {

using namespace sigbox;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Every flag value funnels into the same key-value map the config file fills,
// so flags override file entries uniformly.
void add_kv_flag(CLI::App* sub, CommonOpts& opts, const std::string& flag, const std::string& key,
                 const std::string& help) {
  sub->add_option_function<std::string>(
         flag, [&opts, key](const std::string& value) { opts.overrides.emplace_back(key, value); },
         help)
      ->type_name("TEXT");
}

void add_common_flags(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("-c,--config", opts.config_path, "key = value config file")->type_name("FILE");
  sub->add_option("-o,--out-dir", opts.out_dir, "directory for outputs (default .)")
      ->type_name("DIR");
  add_kv_flag(sub, opts, "--prefix", "out_prefix", "output filename prefix");
}

void add_budget_flags(CLI::App* sub, CommonOpts& opts) {
  add_kv_flag(sub, opts, "--budget-base", "budget_base", "time builtin: n, nlogn, n2, n3");
  add_kv_flag(sub, opts, "--budget-scale", "budget_scale", "scale applied to the time builtin");
  add_kv_flag(sub, opts, "--budget-c", "budget_c", "fuel multiplier c in c*t(n)+d");
  add_kv_flag(sub, opts, "--budget-d", "budget_d", "fuel offset d in c*t(n)+d (>= 1)");
}

void add_box_flags(CLI::App* sub, CommonOpts& opts) {
  add_kv_flag(sub, opts, "--model", "model",
              "box model: pr_zero, pr_popparity, local_zero, local_echo, vm");
  add_kv_flag(sub, opts, "--program-a", "program_a", "A-side program ('; '-separated) for model=vm");
  add_kv_flag(sub, opts, "--program-b", "program_b", "B-side program ('; '-separated) for model=vm");
}

KvMap resolve_kv(const CommonOpts& opts) {
  KvMap kv;
  if (!opts.config_path.empty()) kv = parse_kv(read_text_file(opts.config_path));
  for (const auto& [key, value] : opts.overrides) kv[key] = value;
  return kv;
}

std::filesystem::path out_path(const CommonOpts& opts, const KvMap& kv,
                               const std::string& default_prefix, const std::string& suffix) {
  std::filesystem::create_directories(opts.out_dir);
  return std::filesystem::path(opts.out_dir) /
         (kv_get(kv, "out_prefix", default_prefix) + suffix);
}

void echo_box_keys(const KvMap& kv, KvMap& resolved) {
  resolved["model"] = kv_required(kv, "model");
  if (resolved["model"] == "vm") {
    resolved["program_a"] = kv_required(kv, "program_a");
    resolved["program_b"] = kv_required(kv, "program_b");
  }
}

void echo_budget_keys(const KvMap& kv, KvMap& resolved) {
  budget_to_kv(budget_from_kv(kv), resolved);
}

// ---------------------------------------------------------------------------
// chsh: estimate the input/output distribution of a box under fair-coin
// inputs and report the CHSH score.
// ---------------------------------------------------------------------------

int run_chsh(const CommonOpts& opts) {
  const KvMap kv = resolve_kv(opts);
  const BoxPair pair = box_from_kv(kv);
  const std::uint64_t horizon = kv_uint(kv, "horizon", 1000);
  const std::uint64_t seed = kv_uint(kv, "seed", 0);

  const EmpiricalDistribution dist = estimate_distribution(pair, horizon, seed);
  const Rat score = chsh_score(dist);

  KvMap resolved;
  echo_box_keys(kv, resolved);
  if (resolved.at("model") == "vm") echo_budget_keys(kv, resolved);
  resolved["horizon"] = std::to_string(horizon);
  resolved["seed"] = std::to_string(seed);
  resolved["out_prefix"] = kv_get(kv, "out_prefix", "chsh");

  write_text_file(out_path(opts, kv, "chsh", "_distribution.csv").string(),
                  distribution_csv(dist));
  write_text_file(out_path(opts, kv, "chsh", "_resolved.config").string(), format_kv(resolved));

  std::cout << "chsh_score = " << rat_str(score) << "\n";
  std::cout << "rounds = " << dist.rounds << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// protocol: full run with transcript, decode summary, and property checks.
// ---------------------------------------------------------------------------

nlohmann::json json_opt(const std::optional<std::uint64_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

int run_protocol_cmd(const CommonOpts& opts) {
  const KvMap kv = resolve_kv(opts);

  ProtocolConfig cfg;
  cfg.budget = budget_from_kv(kv);
  cfg.message = parse_bits(kv_required(kv, "message"));
  cfg.m = kv_uint(kv, "m", cfg.message.size());
  cfg.horizon = kv_uint(kv, "horizon", 1000);
  cfg.settle_window = kv_uint(kv, "settle_window", 5);
  cfg.scan_cap = kv_uint(kv, "scan_cap", 1000000);
  cfg.family_n = kv_uint(kv, "family_n", 200);
  const std::string sequence_file = kv_get(kv, "sequence_file", "");
  if (!sequence_file.empty())
    cfg.s_symbols = parse_sequence(read_text_file(sequence_file), cfg.m);
  const Rat seconds_per_round = parse_rat(kv_get(kv, "seconds_per_round", "1"));

  const BoxPair pair = box_from_kv(kv);
  const ProtocolResult result = run_protocol(cfg, pair);
  const P1Verdict p1 = check_p1(result.transcript, pair, cfg.budget);
  const P2Verdict p2 = check_p2(result.transcript, pair, cfg.m, cfg.settle_window);

  nlohmann::json summary;
  summary["rounds"] = cfg.horizon;
  summary["message_sent"] = cfg.message;
  summary["message_decoded"] = result.decode.message();
  summary["settled"] = result.decode.all_settled();
  summary["first_all_settled_round"] = json_opt(result.decode.first_all_settled);
  summary["stabilization_round"] = json_opt(result.report.stabilization_round);
  summary["t_violation"] = result.report.t_violation;
  summary["decoded_counts"] = result.report.decoded_counts;
  summary["p1"] = {{"pass", p1.pass}, {"stabilization_round", json_opt(p1.stabilization_round)}};
  if (p1.counterexample)
    summary["p1"]["counterexample"] = {{"x", p1.counterexample->x},
                                       {"y", p1.counterexample->y},
                                       {"n", p1.counterexample->n},
                                       {"b", p1.counterexample->b}};
  summary["p2"] = {{"pass", p2.pass},
                   {"usable_counts", p2.usable_counts},
                   {"window", p2.window}};
  // Distance over which the decoded message outruns light: c * T * M, with M
  // the number of rounds until every bit settled.
  summary["seconds_per_round"] = rat_str(seconds_per_round);
  if (result.decode.first_all_settled) {
    const std::uint64_t rounds_to_settle = *result.decode.first_all_settled + 1;
    const Rat distance = signaling_distance(seconds_per_round, rounds_to_settle);
    summary["rounds_to_settle"] = rounds_to_settle;
    summary["signaling_distance_m"] = {{"exact", rat_str(distance)},
                                       {"decimal", to_sci_string(distance, 10)}};
  } else {
    summary["rounds_to_settle"] = nullptr;
    summary["signaling_distance_m"] = nullptr;
  }

  KvMap resolved;
  echo_box_keys(kv, resolved);
  echo_budget_keys(kv, resolved);
  resolved["message"] = format_bits(cfg.message);
  resolved["m"] = std::to_string(cfg.m);
  resolved["horizon"] = std::to_string(cfg.horizon);
  resolved["settle_window"] = std::to_string(cfg.settle_window);
  resolved["scan_cap"] = std::to_string(cfg.scan_cap);
  resolved["seconds_per_round"] = rat_str(seconds_per_round);
  if (sequence_file.empty())
    resolved["family_n"] = std::to_string(cfg.family_n);
  else
    resolved["sequence_file"] = sequence_file;
  resolved["out_prefix"] = kv_get(kv, "out_prefix", "protocol");

  write_text_file(out_path(opts, kv, "protocol", "_transcript.jsonl").string(),
                  transcript_jsonl(result.transcript, cfg.m));
  write_text_file(out_path(opts, kv, "protocol", "_summary.json").string(),
                  summary.dump(2) + "\n");
  write_text_file(out_path(opts, kv, "protocol", "_resolved.config").string(),
                  format_kv(resolved));

  std::cout << "settled = " << (result.decode.all_settled() ? "1" : "0") << "\n";
  std::cout << "message_decoded = " << format_bits(result.decode.message()) << "\n";
  std::cout << "p1_pass = " << (p1.pass ? "1" : "0") << "\n";
  std::cout << "p2_pass = " << (p2.pass ? "1" : "0") << "\n";
  std::cout << "t_violation = " << (result.report.t_violation ? "1" : "0") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// diagonal: generate a switching sequence that defeats the default family.
// ---------------------------------------------------------------------------

ProtocolConfig family_cfg(const KvMap& kv) {
  ProtocolConfig cfg;
  cfg.budget = budget_from_kv(kv);
  cfg.m = kv_uint(kv, "m", 1);
  cfg.message.assign(cfg.m, 0);  // family construction ignores message content
  cfg.family_n = kv_uint(kv, "family_n", 200);
  return cfg;
}

int run_diagonal(const CommonOpts& opts) {
  const KvMap kv = resolve_kv(opts);
  const ProtocolConfig cfg = family_cfg(kv);
  const std::uint64_t length = kv_uint(kv, "length", 0);
  if (length < 1) fail("config", "length must be at least 1");

  const WeightedBettorFamily family = build_default_family(cfg, cfg.family_n);
  const Alphabet sigma = switch_alphabet(cfg.m);
  const std::vector<Sym> sequence = diagonal_sequence(family, sigma, length);

  KvMap resolved;
  echo_budget_keys(kv, resolved);
  resolved["m"] = std::to_string(cfg.m);
  resolved["family_n"] = std::to_string(cfg.family_n);
  resolved["length"] = std::to_string(length);
  resolved["out_prefix"] = kv_get(kv, "out_prefix", "diagonal");

  write_text_file(out_path(opts, kv, "diagonal", "_sequence.txt").string(),
                  format_sequence(sequence, cfg.m));
  write_text_file(out_path(opts, kv, "diagonal", "_resolved.config").string(),
                  format_kv(resolved));

  std::cout << "family_size = " << family.entries.size() << "\n";
  std::cout << "weighted_initial_total = " << rat_str(family.weighted_initial_total()) << "\n";
  std::cout << "length = " << sequence.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bettors: replay one family member's capital along a sequence file.
// ---------------------------------------------------------------------------

int run_bettors(const CommonOpts& opts) {
  const KvMap kv = resolve_kv(opts);
  const ProtocolConfig cfg = family_cfg(kv);
  const std::string sequence_file = kv_required(kv, "sequence_file");
  const std::uint64_t index = kv_uint(kv, "bettor_index", 0);

  const WeightedBettorFamily family = build_default_family(cfg, cfg.family_n);
  if (index >= family.entries.size())
    fail("config", "bettor_index " + std::to_string(index) + " out of range (family has " +
                       std::to_string(family.entries.size()) + " members)");
  const Alphabet sigma = switch_alphabet(cfg.m);
  const std::vector<Sym> symbols = parse_sequence(read_text_file(sequence_file), cfg.m);

  const WeightedBettorFamily::Entry& entry = family.entries[index];
  const std::vector<Rat> trajectory = run_bettor(entry.bettor, symbols, sigma);

  KvMap resolved;
  echo_budget_keys(kv, resolved);
  resolved["m"] = std::to_string(cfg.m);
  resolved["family_n"] = std::to_string(cfg.family_n);
  resolved["sequence_file"] = sequence_file;
  resolved["bettor_index"] = std::to_string(index);
  resolved["out_prefix"] = kv_get(kv, "out_prefix", "bettors");

  write_text_file(out_path(opts, kv, "bettors", "_trajectory.csv").string(),
                  trajectory_csv(trajectory));
  write_text_file(out_path(opts, kv, "bettors", "_resolved.config").string(),
                  format_kv(resolved));

  std::cout << "label = " << entry.label << "\n";
  std::cout << "weight = " << rat_str(entry.weight) << "\n";
  std::cout << "final_capital = " << rat_str(trajectory.back()) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// learn: feed a sample file to the enumeration learner, emit the trace.
// ---------------------------------------------------------------------------

int run_learn(const CommonOpts& opts) {
  const KvMap kv = resolve_kv(opts);
  const ExecBudget budget = budget_from_kv(kv);
  const std::string samples_file = kv_required(kv, "samples_file");
  const std::vector<Sample> samples = parse_samples(read_text_file(samples_file));

  LearnerState state;
  state.scan_cap = kv_uint(kv, "scan_cap", 1000000);
  std::vector<LearnerTraceRow> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    state = learner_update(std::move(state), samples[i], budget);
    rows.push_back({i, samples[i], state.guess_index, state.mind_changes, state.class_exhausted});
  }

  KvMap resolved;
  echo_budget_keys(kv, resolved);
  resolved["samples_file"] = samples_file;
  resolved["scan_cap"] = std::to_string(state.scan_cap);
  resolved["out_prefix"] = kv_get(kv, "out_prefix", "learn");

  write_text_file(out_path(opts, kv, "learn", "_trace.csv").string(), learner_trace_csv(rows));
  write_text_file(out_path(opts, kv, "learn", "_resolved.config").string(), format_kv(resolved));

  std::cout << "samples = " << samples.size() << "\n";
  std::cout << "guess_index = " << state.guess_index << "\n";
  std::cout << "guess_program = " << format_program_value(state.guess_program) << "\n";
  std::cout << "mind_changes = " << state.mind_changes << "\n";
  std::cout << "class_exhausted = " << (state.class_exhausted ? "1" : "0") << "\n";
  return 0;
}

void print_error_record(const std::string& category, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"category", category}, {"message", message}}}}.dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deterministic non-local box simulator: betting games, diagonal sequences,\n"
      "learning by enumeration, the hidden-signaling protocol, and CHSH scoring"};
  app.require_subcommand(1);

  CommonOpts chsh_opts, protocol_opts, diagonal_opts, bettors_opts, learn_opts;

  CLI::App* chsh = app.add_subcommand(
      "chsh", "estimate a box's input/output distribution and CHSH score");
  add_common_flags(chsh, chsh_opts);
  add_box_flags(chsh, chsh_opts);
  add_budget_flags(chsh, chsh_opts);
  add_kv_flag(chsh, chsh_opts, "--horizon", "horizon", "rounds to sample (default 1000)");
  add_kv_flag(chsh, chsh_opts, "--seed", "seed", "input-stream seed (default 0)");

  CLI::App* protocol = app.add_subcommand(
      "protocol", "run the signaling protocol: transcript, decode summary, property checks");
  add_common_flags(protocol, protocol_opts);
  add_box_flags(protocol, protocol_opts);
  add_budget_flags(protocol, protocol_opts);
  add_kv_flag(protocol, protocol_opts, "--message", "message", "Alice's secret bits, e.g. 101");
  add_kv_flag(protocol, protocol_opts, "--m", "m", "message length (default: bits given)");
  add_kv_flag(protocol, protocol_opts, "--horizon", "horizon", "total rounds (default 1000)");
  add_kv_flag(protocol, protocol_opts, "--settle-window", "settle_window",
              "consecutive agreeing decodes to settle a bit (default 5)");
  add_kv_flag(protocol, protocol_opts, "--scan-cap", "scan_cap",
              "learner enumeration bound (default 1000000)");
  add_kv_flag(protocol, protocol_opts, "--family-n", "family_n",
              "diagonal family coverage when no sequence file is given (default 200)");
  add_kv_flag(protocol, protocol_opts, "--sequence", "sequence_file",
              "switching-sequence file (default: generated diagonal sequence)");
  add_kv_flag(protocol, protocol_opts, "--seconds-per-round", "seconds_per_round",
              "T for the signaling-distance report, as p/q seconds (default 1)");

  CLI::App* diagonal = app.add_subcommand(
      "diagonal", "generate a switching sequence defeating the default bettor family");
  add_common_flags(diagonal, diagonal_opts);
  add_budget_flags(diagonal, diagonal_opts);
  add_kv_flag(diagonal, diagonal_opts, "--family-n", "family_n",
              "program coverage N (default 200)");
  add_kv_flag(diagonal, diagonal_opts, "--m", "m", "message length shaping the alphabet (default 1)");
  add_kv_flag(diagonal, diagonal_opts, "--length", "length", "sequence length (required)");

  CLI::App* bettors = app.add_subcommand(
      "bettors", "replay one default-family bettor's capital along a sequence file");
  add_common_flags(bettors, bettors_opts);
  add_budget_flags(bettors, bettors_opts);
  add_kv_flag(bettors, bettors_opts, "--family-n", "family_n", "program coverage N (default 200)");
  add_kv_flag(bettors, bettors_opts, "--m", "m", "message length shaping the alphabet (default 1)");
  add_kv_flag(bettors, bettors_opts, "--sequence", "sequence_file", "sequence file (required)");
  add_kv_flag(bettors, bettors_opts, "--bettor-index", "bettor_index",
              "family member to replay (default 0)");

  CLI::App* learn = app.add_subcommand(
      "learn", "run the enumeration learner over a sample file and emit its trace");
  add_common_flags(learn, learn_opts);
  add_budget_flags(learn, learn_opts);
  add_kv_flag(learn, learn_opts, "--samples", "samples_file", "sample file `x y n b` (required)");
  add_kv_flag(learn, learn_opts, "--scan-cap", "scan_cap",
              "learner enumeration bound (default 1000000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    print_error_record("cli", e.what());
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (chsh->parsed()) return run_chsh(chsh_opts);
    if (protocol->parsed()) return run_protocol_cmd(protocol_opts);
    if (diagonal->parsed()) return run_diagonal(diagonal_opts);
    if (bettors->parsed()) return run_bettors(bettors_opts);
    if (learn->parsed()) return run_learn(learn_opts);
    print_error_record("cli", "no subcommand selected");
    return 1;
  } catch (const error& e) {
    print_error_record(e.category(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error_record("internal", e.what());
    return 1;
  }
}
