#include <doctest.h>

#include <map>
#include <set>

#include "oncobench/error.hpp"
#include "oncobench/perturb.hpp"
#include "oracles.hpp"

using namespace oncobench;

namespace {

std::vector<InstructionInstance> train_set(std::size_t n) {
  static const char* labels[] = {"left", "right", "bilateral", "upper outer quadrant", "Grade 2"};
  std::vector<InstructionInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    InstructionInstance inst;
    inst.id = "t" + std::to_string(1000 + i);
    inst.task = Task::phenotype_qa;
    inst.instruction = "Answer.";
    inst.response = labels[i % 5];
    inst.context = "Finding " + std::to_string(i) + " mentions " + inst.response + ".";
    inst.meta = {{"question_type", static_cast<int>(1 + i % 2)}};
    out.push_back(inst);
  }
  return out;
}

}  // namespace

TEST_CASE("counterfactual count, absence from context and determinism") {
  const auto train = train_set(50);
  for (double rate : {0.0, 0.1, 0.3, 1.0}) {
    auto r = corrupt_labels(train, {rate, 5});
    const auto expected = round_half_up_count(rate, train.size());
    CHECK(r.log.entries.size() == expected);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      CHECK(r.instances[i].id == train[i].id);
      CHECK(r.instances[i].context == train[i].context);
      if (r.instances[i].response != train[i].response) {
        ++changed;
        CHECK_FALSE(icontains(r.instances[i].context, r.instances[i].response));
        CHECK(r.instances[i].meta["perturbation"] == "counterfactual");
      }
    }
    CHECK(changed == expected);
    auto again = corrupt_labels(train, {rate, 5});
    CHECK(again.instances == r.instances);
    CHECK(log_to_jsonl(again.log) == log_to_jsonl(r.log));
  }
}

TEST_CASE("counterfactual selections nest as the rate grows") {
  const auto train = train_set(40);
  std::set<std::string> previous;
  for (double rate : {0.2, 0.4, 0.6, 0.8}) {
    auto r = corrupt_labels(train, {rate, 17});
    std::set<std::string> ids;
    for (const auto& e : r.log.entries) ids.insert(e.instance_id);
    for (const auto& id : previous) CHECK(ids.count(id) == 1);
    previous = ids;
  }
}

TEST_CASE("counterfactual with no possible replacement fails") {
  auto train = train_set(1);
  CHECK_THROWS_AS(corrupt_labels(train, {1.0, 1}), ValidationError);
  CHECK_THROWS_AS(corrupt_labels(train_set(5), {1.5, 1}), ValidationError);
}

TEST_CASE("eligible words are alphabetic runs of four or more") {
  auto words = eligible_words("The ER-positive mass, size 2.5cm; grade abc");
  std::vector<std::string> got;
  const std::string text = "The ER-positive mass, size 2.5cm; grade abc";
  for (auto [off, len] : words) got.push_back(text.substr(off, len));
  CHECK(got == std::vector<std::string>{"positive", "mass", "size", "grade"});
}

TEST_CASE("misspelling count with the minimum-one rule") {
  CHECK(misspelling_count(0.0, 10) == 0);
  CHECK(misspelling_count(0.02, 10) == 1);
  CHECK(misspelling_count(0.08, 50) == 4);
  CHECK(misspelling_count(0.04, 50) == 2);
  CHECK(misspelling_count(0.5, 0) == 0);
  CHECK(misspelling_count(2.0, 3) == 3);
}

TEST_CASE("each op is a single edit of the expected kind") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const std::string w = "carcinoma";
    auto d = apply_misspell_op(w, MisspellOp::del, rng);
    CHECK(d.size() == w.size() - 1);
    CHECK(oracle::levenshtein(w, d) == 1);
    CHECK(d.front() == w.front());
    CHECK(d.back() == w.back());
    auto ins = apply_misspell_op(w, MisspellOp::insert, rng);
    CHECK(ins.size() == w.size() + 1);
    CHECK(oracle::levenshtein(w, ins) == 1);
    auto s = apply_misspell_op(w, MisspellOp::substitute, rng);
    CHECK(s.size() == w.size());
    CHECK(oracle::levenshtein(w, s) == 1);
    auto t = apply_misspell_op(w, MisspellOp::transpose, rng);
    CHECK(t != w);
    CHECK(t.size() == w.size());
    CHECK(oracle::levenshtein(w, t) == 2);
    CHECK(t.front() == w.front());
    CHECK(t.back() == w.back());
  }
  CHECK(apply_misspell_op("aaaa", MisspellOp::transpose, rng) == "aaaa");
}

TEST_CASE("inject_misspellings edits exactly the allotted words") {
  const std::string text = "aaaa aaaa aaaa aaaa tumor located in the upper outer quadrant";
  for (double rate : {0.02, 0.1, 0.5, 1.0}) {
    MisspellSpec spec{rate, 9, {MisspellOp::transpose}};
    auto r = inject_misspellings(text, spec);
    const auto n = eligible_words(text).size();
    // Transpose cannot change "aaaa"; those words must not count.
    const auto expected = misspelling_count(rate, n);
    std::size_t ok = 0;
    for (const auto& e : r.edits) ok += e.before != e.after;
    CHECK(ok == r.edits.size());
    if (expected <= 5) CHECK(r.edits.size() == expected);
    for (std::size_t i = 1; i < r.edits.size(); ++i) CHECK(r.edits[i - 1].offset < r.edits[i].offset);
  }
  auto none = inject_misspellings("a bc def", {0.5, 1});
  CHECK(none.text == "a bc def");
  CHECK(none.edits.empty());
}

TEST_CASE("perturb_dataset is deterministic and logs per instance") {
  const auto train = train_set(30);
  MisspellSpec spec{0.5, 21};
  auto a = perturb_dataset(train, PerturbField::context, spec);
  auto b = perturb_dataset(train, PerturbField::context, spec);
  CHECK(a.instances == b.instances);
  CHECK(log_to_jsonl(a.log) == log_to_jsonl(b.log));
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(a.instances[i].response == train[i].response);
  for (std::size_t i = 1; i < a.log.entries.size(); ++i) {
    CHECK(a.log.entries[i - 1].instance_id <= a.log.entries[i].instance_id);
  }
  auto resp = perturb_dataset(train, PerturbField::response, spec);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(resp.instances[i].context == train[i].context);
}

TEST_CASE("op names parse") {
  CHECK(parse_misspell_ops("transpose,delete") ==
        std::vector<MisspellOp>{MisspellOp::transpose, MisspellOp::del});
  CHECK(to_string(MisspellOp::del) == "delete");
  CHECK_THROWS(parse_misspell_op("swap"));
}
