#include "oncobench/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

std::string TokenSeq::joined() const {
  std::string out;
  for (const auto& t : tokens_) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

TokenSeq normalize(std::string_view text) {
  TokenSeq seq;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) seq.tokens_.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      seq.tokens_.emplace_back(1, ch);
    } else {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    }
  }
  flush();
  return seq;
}

MatchMode match_mode_for(Task task) {
  return task == Task::phenotype_qa ? MatchMode::set : MatchMode::sequence;
}

namespace {

std::set<std::string> item_set(std::string_view text) {
  std::set<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    TokenSeq item = normalize(text.substr(start, end - start));
    if (!item.empty()) items.insert(item.joined());
    start = end + 1;
  }
  return items;
}

}  // namespace

int exact_match(std::string_view candidate, std::string_view reference, MatchMode mode) {
  if (normalize(candidate) == normalize(reference)) return 1;
  if (mode == MatchMode::set) {
    return item_set(candidate) == item_set(reference) ? 1 : 0;
  }
  return 0;
}

namespace {

// Clipped matches and total candidate n-grams of order n.
std::pair<std::size_t, std::size_t> clipped_ngrams(const TokenSeq& cand, const TokenSeq& ref,
                                                   std::size_t n) {
  if (cand.size() < n) return {0, 0};
  auto grams = [n](const TokenSeq& seq) {
    std::map<std::vector<std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
      std::vector<std::string> key(seq.tokens().begin() + static_cast<std::ptrdiff_t>(i),
                                   seq.tokens().begin() + static_cast<std::ptrdiff_t>(i + n));
      ++counts[std::move(key)];
    }
    return counts;
  };
  const auto cand_counts = grams(cand);
  const auto ref_counts = grams(ref);
  std::size_t matches = 0;
  for (const auto& [gram, count] : cand_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matches += std::min(count, it->second);
  }
  return {matches, cand.size() - n + 1};
}

}  // namespace

double bleu2(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 2; ++n) {
    auto [matches, total] = clipped_ngrams(candidate, reference, n);
    double p = matches == 0 ? 1.0 / static_cast<double>(total + 1)
                            : static_cast<double>(matches) / static_cast<double>(total);
    log_sum += 0.5 * std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return bp * std::exp(log_sum);
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const TokenSeq& longer = a.size() >= b.size() ? a : b;
  const TokenSeq& shorter = a.size() >= b.size() ? b : a;
  std::vector<std::size_t> row(shorter.size() + 1, 0);
  for (std::size_t i = 1; i <= longer.size(); ++i) {
    std::size_t diag = 0;  // row[j-1] from the previous iteration of i
    for (std::size_t j = 1; j <= shorter.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = longer[i - 1] == shorter[j - 1] ? diag + 1 : std::max(up, row[j - 1]);
      diag = up;
    }
  }
  return row[shorter.size()];
}

MetricTriple MetricTriple::from_pr(double precision, double recall) {
  const double sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

MetricTriple rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  const double l = static_cast<double>(lcs_length(candidate, reference));
  const double p = candidate.empty() ? 0.0 : l / static_cast<double>(candidate.size());
  const double r = reference.empty() ? 0.0 : l / static_cast<double>(reference.size());
  return MetricTriple::from_pr(p, r);
}

InstanceScore score_instance(std::string_view instance_id, std::string_view candidate,
                             std::string_view reference, MatchMode mode) {
  InstanceScore s;
  s.instance_id = std::string(instance_id);
  const TokenSeq cand = normalize(candidate);
  s.empty_output = cand.empty();
  if (s.empty_output) return s;
  const TokenSeq ref = normalize(reference);
  s.exact_match = exact_match(candidate, reference, mode);
  s.bleu2 = bleu2(cand, ref);
  s.rouge_l = rouge_l(cand, ref);
  return s;
}

double average_f1(double em_f1, double bleu_f1, double rouge_f1) {
  return (em_f1 + bleu_f1 + rouge_f1) / 3.0;
}

MetricReport make_report(const MetricTriple& em, const MetricTriple& bleu,
                         const MetricTriple& rouge) {
  MetricReport report;
  report.exact_match = em;
  report.bleu2 = bleu;
  report.rouge_l = rouge;
  report.average_f1 = average_f1(em.f1, bleu.f1, rouge.f1);
  return report;
}

CorpusScores score_corpus(std::span<const Candidate> candidates,
                          const std::map<std::string, std::string>& gold, MatchMode mode) {
  CorpusScores out;
  out.instances.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = gold.find(c.instance_id);
    if (it == gold.end()) throw ValidationError("missing gold reference for " + c.instance_id);
    out.instances.push_back(score_instance(c.instance_id, c.output, it->second, mode));
  }
  std::sort(out.instances.begin(), out.instances.end(),
            [](const InstanceScore& a, const InstanceScore& b) { return a.instance_id < b.instance_id; });
  for (std::size_t i = 1; i < out.instances.size(); ++i) {
    if (out.instances[i].instance_id == out.instances[i - 1].instance_id) {
      throw ValidationError("duplicate record for " + out.instances[i].instance_id);
    }
  }

  double em = 0, bleu = 0, rouge = 0;
  std::size_t nonempty = 0;
  for (const auto& s : out.instances) {
    em += s.exact_match;
    bleu += s.bleu2;
    rouge += s.rouge_l.f1;
    if (!s.empty_output) ++nonempty;
  }
  const std::size_t n = out.instances.size();
  auto triple = [&](double sum) {
    const double p = nonempty == 0 ? 0.0 : sum / static_cast<double>(nonempty);
    const double r = n == 0 ? 0.0 : sum / static_cast<double>(n);
    MetricTriple t = MetricTriple::from_pr(p, r);
    return MetricTriple{round_half_up(t.precision * 100.0, 2), round_half_up(t.recall * 100.0, 2),
                        round_half_up(t.f1 * 100.0, 2)};
  };
  out.report = make_report(triple(em), triple(bleu), triple(rouge));
  out.report.n_instances = n;
  out.report.n_nonempty = nonempty;
  return out;
}

Json to_json(const MetricTriple& t) {
  return Json{{"precision", t.precision}, {"recall", t.recall}, {"f1", t.f1}};
}

MetricTriple triple_from_json(const Json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

Json to_json(const MetricReport& r) {
  return Json{{"exact_match", to_json(r.exact_match)},
              {"bleu2", to_json(r.bleu2)},
              {"rouge_l", to_json(r.rouge_l)},
              {"average_f1", r.average_f1},
              {"n_instances", r.n_instances},
              {"n_nonempty", r.n_nonempty},
              {"task", r.task},
              {"retriever", r.retriever},
              {"perturbation_kind", r.perturbation_kind},
              {"perturbation_rate", r.perturbation_rate}};
}

MetricReport report_from_json(const Json& j) {
  try {
    MetricReport r = make_report(triple_from_json(j.at("exact_match")),
                                 triple_from_json(j.at("bleu2")),
                                 triple_from_json(j.at("rouge_l")));
    r.average_f1 = j.at("average_f1").get<double>();
    r.n_instances = j.at("n_instances").get<std::size_t>();
    r.n_nonempty = j.at("n_nonempty").get<std::size_t>();
    r.task = j.value("task", "");
    r.retriever = j.value("retriever", "none");
    r.perturbation_kind = j.value("perturbation_kind", "none");
    r.perturbation_rate = j.value("perturbation_rate", 0.0);
    return r;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed metric report: ") + e.what());
  }
}

std::string scores_to_json(const CorpusScores& scores) {
  Json instances = Json::array();
  for (const auto& s : scores.instances) {
    instances.push_back(Json{{"instance_id", s.instance_id},
                             {"empty_output", s.empty_output},
                             {"exact_match", s.exact_match},
                             {"bleu2", s.bleu2},
                             {"rouge_l", to_json(s.rouge_l)}});
  }
  Json doc{{"report", to_json(scores.report)}, {"instances", std::move(instances)}};
  return doc.dump(2) + "\n";
}

}  // namespace oncobench
