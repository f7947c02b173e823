#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oncobench/corpus.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

struct CounterfactualSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

enum class MisspellOp { transpose, del, insert, substitute };

std::string_view to_string(MisspellOp op);
MisspellOp parse_misspell_op(std::string_view text);
/// Parses a comma-separated list such as "transpose,delete".
std::vector<MisspellOp> parse_misspell_ops(std::string_view text);

struct MisspellSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<MisspellOp> ops = {MisspellOp::transpose, MisspellOp::del, MisspellOp::insert,
                                 MisspellOp::substitute};
};

struct LogEntry {
  std::string instance_id;
  std::string kind;  // "counterfactual" or "misspelling"
  std::string before;
  std::string after;
  std::string detail;

  bool operator==(const LogEntry&) const = default;
};

struct PerturbationLog {
  std::string kind;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<LogEntry> entries;
};

/// JSON-lines with keys instance_id, kind, before, after, detail.
std::string log_to_jsonl(const PerturbationLog& log);
void write_log(const PerturbationLog& log, const std::filesystem::path& path);

struct CounterfactualResult {
  std::vector<InstructionInstance> instances;
  PerturbationLog log;
};

/// Relabels exactly round_half_up(rate * n) instances, chosen by a seeded
/// shuffle of positions. The shuffle does not depend on the rate, so the
/// selections for increasing rates are nested. A replacement is never a
/// case-insensitive substring of the instance context; it is drawn first from
/// responses of the same question type (same task), then from other types.
/// The draw uses a seed derived from (seed, instance id).
CounterfactualResult corrupt_labels(std::span<const InstructionInstance> train,
                                    const CounterfactualSpec& spec);

struct MisspellEdit {
  std::size_t offset = 0;  // byte offset of the word in the original text
  std::string before;
  std::string after;
  MisspellOp op = MisspellOp::del;
};

struct MisspellResult {
  std::string text;
  std::vector<MisspellEdit> edits;  // ordered by offset
};

/// Word spans eligible for misspelling: maximal ASCII-alphabetic runs of
/// length >= 4, as (offset, length).
std::vector<std::pair<std::size_t, std::size_t>> eligible_words(std::string_view text);

/// Number of words that will be edited for `n_eligible` words at `rate`.
std::size_t misspelling_count(double rate, std::size_t n_eligible);

/// Applies one edit to `word` with a position drawn from `rng`. Returns the
/// word unchanged when the op cannot alter it (transpose over equal letters).
std::string apply_misspell_op(std::string_view word, MisspellOp op, Rng& rng);

MisspellResult inject_misspellings(std::string_view text, const MisspellSpec& spec);

enum class PerturbField { context, response };

struct MisspellDatasetResult {
  std::vector<InstructionInstance> instances;
  PerturbationLog log;
};

/// Per-instance seed derived from (spec.seed, instance id). Log entries are
/// ordered by instance id.
MisspellDatasetResult perturb_dataset(std::span<const InstructionInstance> instances,
                                      PerturbField field, const MisspellSpec& spec);

}  // namespace oncobench
