#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oncobench/corpus.hpp"

namespace oncobench {

/// Lowercased tokens; only `normalize` produces these.
class TokenSeq {
 public:
  TokenSeq() = default;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }
  std::string joined() const;

  bool operator==(const TokenSeq&) const = default;

 private:
  friend TokenSeq normalize(std::string_view text);
  std::vector<std::string> tokens_;
};

/// Lowercases ASCII, splits every ASCII punctuation character into its own
/// token, splits on whitespace, drops empty tokens.
TokenSeq normalize(std::string_view text);

enum class MatchMode {
  sequence,  // normalized token sequences must be equal
  set,       // comma-separated items compared as sets (multi-entity answers)
};

MatchMode match_mode_for(Task task);

int exact_match(std::string_view candidate, std::string_view reference,
                MatchMode mode = MatchMode::sequence);

/// BP * exp(0.5 ln p1 + 0.5 ln p2) with clipped n-gram precisions. A p_n
/// with zero matches becomes (0 + 1) / (count + 1). Empty candidate gives 0.
double bleu2(const TokenSeq& candidate, const TokenSeq& reference);

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

struct MetricTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// f1 = 2PR / (P + R), 0 when P + R = 0.
  static MetricTriple from_pr(double precision, double recall);
  bool operator==(const MetricTriple&) const = default;
};

MetricTriple rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

struct InstanceScore {
  std::string instance_id;
  bool empty_output = false;
  double exact_match = 0.0;
  double bleu2 = 0.0;
  MetricTriple rouge_l;
};

InstanceScore score_instance(std::string_view instance_id, std::string_view candidate,
                             std::string_view reference, MatchMode mode);

/// Corpus metrics in percent. Each triple is rounded half-up to two decimals;
/// average_f1 is the unrounded mean of the three rounded F1 values.
struct MetricReport {
  MetricTriple exact_match;
  MetricTriple bleu2;
  MetricTriple rouge_l;
  double average_f1 = 0.0;
  std::size_t n_instances = 0;
  std::size_t n_nonempty = 0;
  // Run metadata.
  std::string task;
  std::string retriever = "none";
  std::string perturbation_kind = "none";
  double perturbation_rate = 0.0;

  bool operator==(const MetricReport&) const = default;
};

/// Mean of three F1 values.
double average_f1(double em_f1, double bleu_f1, double rouge_f1);

/// Builds a report from percent triples; fills average_f1.
MetricReport make_report(const MetricTriple& em, const MetricTriple& bleu,
                         const MetricTriple& rouge);

struct Candidate {
  std::string instance_id;
  std::string output;
};

struct CorpusScores {
  MetricReport report;
  std::vector<InstanceScore> instances;  // sorted by instance_id
};

/// Per metric: precision = sum(s_i) / n_nonempty, recall = sum(s_i) /
/// n_instances, empty outputs scoring 0. Per-instance ROUGE-L uses its F1.
/// Sums run in instance-id order. Throws ValidationError on missing gold.
CorpusScores score_corpus(std::span<const Candidate> candidates,
                          const std::map<std::string, std::string>& gold, MatchMode mode);

Json to_json(const MetricTriple& triple);
MetricTriple triple_from_json(const Json& j);
Json to_json(const MetricReport& report);
MetricReport report_from_json(const Json& j);
/// Score dump: {"report": ..., "instances": [...]}, byte-deterministic.
std::string scores_to_json(const CorpusScores& scores);

}  // namespace oncobench
