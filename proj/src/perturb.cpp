#include "oncobench/perturb.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

std::string_view to_string(MisspellOp op) {
  switch (op) {
    case MisspellOp::transpose: return "transpose";
    case MisspellOp::del: return "delete";
    case MisspellOp::insert: return "insert";
    case MisspellOp::substitute: return "substitute";
  }
  return "?";
}

MisspellOp parse_misspell_op(std::string_view text) {
  if (text == "transpose") return MisspellOp::transpose;
  if (text == "delete") return MisspellOp::del;
  if (text == "insert") return MisspellOp::insert;
  if (text == "substitute") return MisspellOp::substitute;
  throw ValidationError("unknown misspelling op: " + std::string(text));
}

std::vector<MisspellOp> parse_misspell_ops(std::string_view text) {
  std::vector<MisspellOp> ops;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string item = trim(text.substr(start, end - start));
    if (!item.empty()) {
      const MisspellOp op = parse_misspell_op(item);
      if (std::find(ops.begin(), ops.end(), op) == ops.end()) ops.push_back(op);
    }
    start = end + 1;
  }
  if (ops.empty()) throw ValidationError("at least one misspelling op is required");
  return ops;
}

std::string log_to_jsonl(const PerturbationLog& log) {
  std::string out;
  for (const auto& e : log.entries) {
    OrderedJson obj;
    obj["instance_id"] = e.instance_id;
    obj["kind"] = e.kind;
    obj["before"] = e.before;
    obj["after"] = e.after;
    obj["detail"] = e.detail;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_log(const PerturbationLog& log, const std::filesystem::path& path) {
  write_file_atomic(path, log_to_jsonl(log));
}

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ValidationError("perturbation rate must lie in [0, 1] (got " + std::to_string(rate) + ")");
  }
}

void sort_entries(std::vector<LogEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const LogEntry& a, const LogEntry& b) { return a.instance_id < b.instance_id; });
}

}  // namespace

CounterfactualResult corrupt_labels(std::span<const InstructionInstance> train,
                                    const CounterfactualSpec& spec) {
  check_rate(spec.rate);
  CounterfactualResult result;
  result.log.kind = "counterfactual";
  result.log.rate = spec.rate;
  result.log.seed = spec.seed;
  result.instances.assign(train.begin(), train.end());
  const std::size_t count = round_half_up_count(spec.rate, train.size());
  if (count == 0) return result;
  if (train.empty()) throw ValidationError("counterfactual corruption needs a non-empty train set");
  validate_unique_ids(train);

  // Distinct responses per (task, question type), in sorted order.
  using GroupKey = std::pair<Task, int>;
  std::map<GroupKey, std::set<std::string>> pools;
  for (const auto& inst : train) pools[{inst.task, inst.question_type()}].insert(inst.response);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng selector(spec.seed);
  selector.shuffle(order);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t idx : chosen) {
    InstructionInstance& inst = result.instances[idx];
    const GroupKey own{inst.task, inst.question_type()};
    auto usable = [&](const std::string& candidate) {
      return !iequals(candidate, inst.response) && !icontains(inst.context, candidate);
    };
    std::vector<std::string> candidates;
    for (const auto& r : pools[own]) {
      if (usable(r)) candidates.push_back(r);
    }
    std::string source = "same_type";
    if (candidates.empty()) {
      source = "other_type";
      std::set<std::string> others;
      for (const auto& [key, responses] : pools) {
        if (key == own || key.first != inst.task) continue;
        for (const auto& r : responses) {
          if (usable(r)) others.insert(r);
        }
      }
      candidates.assign(others.begin(), others.end());
    }
    if (candidates.empty()) {
      throw ValidationError("no valid counterfactual replacement for instance " + inst.id);
    }
    Rng rng(derive_seed(spec.seed, inst.id));
    const std::string replacement = candidates[rng.below(candidates.size())];

    LogEntry entry;
    entry.instance_id = inst.id;
    entry.kind = "counterfactual";
    entry.before = inst.response;
    entry.after = replacement;
    entry.detail = "question_type=" + std::to_string(own.second) + " source=" + source;
    result.log.entries.push_back(std::move(entry));

    inst.response = replacement;
    inst.meta["perturbation"] = "counterfactual";
  }
  sort_entries(result.log.entries);
  return result;
}

std::vector<std::pair<std::size_t, std::size_t>> eligible_words(std::string_view text) {
  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  std::vector<std::pair<std::size_t, std::size_t>> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_alpha(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_alpha(text[j])) ++j;
    if (j - i >= 4) words.emplace_back(i, j - i);
    i = j;
  }
  return words;
}

std::size_t misspelling_count(double rate, std::size_t n_eligible) {
  if (rate <= 0.0 || n_eligible == 0) return 0;
  return std::min(n_eligible, std::max<std::size_t>(1, round_half_up_count(rate, n_eligible)));
}

std::string apply_misspell_op(std::string_view word, MisspellOp op, Rng& rng) {
  std::string w(word);
  const std::size_t n = w.size();
  if (n == 0) return w;
  switch (op) {
    case MisspellOp::transpose: {
      // Adjacent interior pairs (i, i+1) with 1 <= i and i+1 <= n-2 that differ.
      std::vector<std::size_t> positions;
      for (std::size_t i = 1; i + 2 < n; ++i) {
        if (w[i] != w[i + 1]) positions.push_back(i);
      }
      if (positions.empty()) return w;
      const std::size_t i = positions[rng.below(positions.size())];
      std::swap(w[i], w[i + 1]);
      return w;
    }
    case MisspellOp::del: {
      if (n < 3) return w;
      const std::size_t i = 1 + rng.below(n - 2);
      w.erase(i, 1);
      return w;
    }
    case MisspellOp::insert: {
      const std::size_t i = rng.below(n);
      w.insert(i, 1, w[i]);
      return w;
    }
    case MisspellOp::substitute: {
      const std::size_t i = rng.below(n);
      const char original = to_lower_ascii(std::string(1, w[i]))[0];
      char replacement = static_cast<char>('a' + rng.below(25));
      if (replacement >= original && original >= 'a' && original <= 'z') ++replacement;
      w[i] = replacement;
      return w;
    }
  }
  return w;
}

MisspellResult inject_misspellings(std::string_view text, const MisspellSpec& spec) {
  check_rate(spec.rate);
  if (spec.ops.empty()) throw ValidationError("at least one misspelling op is required");
  MisspellResult result;
  const auto words = eligible_words(text);
  const std::size_t target = misspelling_count(spec.rate, words.size());
  if (target == 0) {
    result.text = std::string(text);
    return result;
  }

  Rng rng(spec.seed);
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  for (std::size_t w : order) {
    if (result.edits.size() == target) break;
    const auto [offset, length] = words[w];
    const std::string_view word = text.substr(offset, length);
    const std::size_t first = rng.below(spec.ops.size());
    // Fall through the enabled ops in cyclic order until one changes the word.
    for (std::size_t k = 0; k < spec.ops.size(); ++k) {
      const MisspellOp op = spec.ops[(first + k) % spec.ops.size()];
      std::string after = apply_misspell_op(word, op, rng);
      if (after != word) {
        result.edits.push_back({offset, std::string(word), std::move(after), op});
        break;
      }
    }
  }
  std::sort(result.edits.begin(), result.edits.end(),
            [](const MisspellEdit& a, const MisspellEdit& b) { return a.offset < b.offset; });

  std::size_t cursor = 0;
  for (const auto& e : result.edits) {
    result.text.append(text.substr(cursor, e.offset - cursor));
    result.text += e.after;
    cursor = e.offset + e.before.size();
  }
  result.text.append(text.substr(cursor));
  return result;
}

MisspellDatasetResult perturb_dataset(std::span<const InstructionInstance> instances,
                                      PerturbField field, const MisspellSpec& spec) {
  check_rate(spec.rate);
  MisspellDatasetResult result;
  result.log.kind = "misspelling";
  result.log.rate = spec.rate;
  result.log.seed = spec.seed;
  result.instances.assign(instances.begin(), instances.end());
  for (auto& inst : result.instances) {
    MisspellSpec local = spec;
    local.seed = derive_seed(spec.seed, inst.id);
    std::string& target = field == PerturbField::context ? inst.context : inst.response;
    MisspellResult edited = inject_misspellings(target, local);
    if (edited.edits.empty()) continue;
    for (const auto& e : edited.edits) {
      result.log.entries.push_back(
          {inst.id, "misspelling", e.before, e.after,
           std::string("op=") + std::string(to_string(e.op)) + " field=" +
               (field == PerturbField::context ? "context" : "response") +
               " offset=" + std::to_string(e.offset)});
    }
    target = std::move(edited.text);
    inst.meta["perturbation"] = "misspelling";
  }
  sort_entries(result.log.entries);
  return result;
}

}  // namespace oncobench
