#include <doctest.h>

#include <filesystem>
#include <set>

#include "oncobench/corpus.hpp"
#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

using namespace oncobench;
namespace fs = std::filesystem;

namespace {

InstructionInstance make(std::string id, std::string response = "left") {
  InstructionInstance inst;
  inst.id = std::move(id);
  inst.task = Task::phenotype_qa;
  inst.instruction = "Answer.";
  inst.context = "The mass is in the left breast.\nWhat is the laterality?";
  inst.response = std::move(response);
  inst.meta = {{"question_type", 5}, {"source_document", "doc-1"}};
  return inst;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "oncobench_test_corpus";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("instance round-trips through JSON lines with stable bytes") {
  std::vector<InstructionInstance> items = {make("a"), make("b", "Not relevant")};
  const auto path = scratch("rt.jsonl");
  write_instances(items, path);
  const auto first = read_file(path);
  auto back = read_instances(path);
  CHECK(back == items);
  write_instances(back, path);
  CHECK(read_file(path) == first);
  CHECK(back[0].question_type() == 5);
}

TEST_CASE("serialized key order is fixed") {
  const auto line = serialize_instance(make("x"));
  CHECK(line.find("\"id\"") < line.find("\"task\""));
  CHECK(line.find("\"task\"") < line.find("\"instruction\""));
  CHECK(line.find("\"context\"") < line.find("\"response\""));
  CHECK(line.find("\"response\"") < line.find("\"meta\""));
}

TEST_CASE("parse errors name the line and field") {
  CHECK_THROWS_WITH_AS(parse_instance(R"({"id":"a","task":"phenotype_qa","instruction":"i","context":"c"})", 2),
                       "line 2: missing field response", ValidationError);
  CHECK_THROWS_AS(parse_instance("{not json", 1), ValidationError);
  CHECK_THROWS_AS(parse_instance(R"({"id":"a","task":"bogus","instruction":"i","context":"c","response":"r"})", 1),
                  ValidationError);
}

TEST_CASE("validation rejects empty fields and duplicate ids") {
  auto bad = make("a");
  bad.context.clear();
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = make("");
  CHECK_THROWS_AS(validate(bad), ValidationError);
  std::vector<InstructionInstance> dup = {make("a"), make("a")};
  CHECK_THROWS_WITH_AS(validate_unique_ids(dup), "duplicate id: a", ValidationError);
}

TEST_CASE("annotation must point at a real sentence containing the surface") {
  Document doc{"d1", DocumentKind::pathology_report, {"Grade 2 tumor in the LEFT breast."}, {}};
  CHECK_NOTHROW(validate(EntityAnnotation{"d1", 0, EntityType::tumor_laterality, "left"}, doc));
  CHECK_THROWS_AS(validate(EntityAnnotation{"d1", 1, EntityType::tumor_laterality, "left"}, doc),
                  ValidationError);
  CHECK_THROWS_AS(validate(EntityAnnotation{"d1", 0, EntityType::tumor_laterality, "right"}, doc),
                  ValidationError);
}

TEST_CASE("entity and task names round-trip") {
  for (auto t : kAllEntityTypes) CHECK(parse_entity_type(to_string(t)) == t);
  CHECK(parse_task("phenotype_qa") == Task::phenotype_qa);
  CHECK(parse_task("diagnosis_generation") == Task::diagnosis_generation);
  CHECK_THROWS(parse_task("qa"));
}

TEST_CASE("split sizes follow floor allocation with remainder to train") {
  std::vector<InstructionInstance> items;
  for (int i = 0; i < 95; ++i) items.push_back(make("i" + std::to_string(i)));
  auto split = split_dataset(items, {0.8, 0.1, 0.1}, 7);
  CHECK(split.validation.size() == 9);
  CHECK(split.test.size() == 9);
  CHECK(split.train.size() == 77);

  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& x : *part) ids.insert(x.id);
  }
  CHECK(ids.size() == 95);

  auto again = split_dataset(items, {0.8, 0.1, 0.1}, 7);
  CHECK(again.test == split.test);
  auto other = split_dataset(items, {0.8, 0.1, 0.1}, 8);
  CHECK(other.test != split.test);
}

TEST_CASE("split ratios must sum to one") {
  std::vector<InstructionInstance> items = {make("a")};
  CHECK_THROWS_AS(split_dataset(items, {0.8, 0.1, 0.2}, 1), ValidationError);
  CHECK_NOTHROW(split_dataset(items, {0.7, 0.2, 0.1}, 1));
}

TEST_CASE("synthetic corpus is valid, seeded and mostly annotated") {
  auto a = generate_synthetic_corpus(40, 3);
  auto b = generate_synthetic_corpus(40, 3);
  CHECK(a.documents == b.documents);
  CHECK(a.annotations == b.annotations);
  REQUIRE(a.documents.size() == 40);
  CHECK_NOTHROW(validate(a.documents));

  std::map<std::string, const Document*> by_id;
  for (const auto& d : a.documents) by_id[d.id] = &d;
  std::set<std::pair<std::string, std::size_t>> annotated;
  for (const auto& ann : a.annotations) {
    REQUIRE(by_id.count(ann.document_id) == 1);
    CHECK_NOTHROW(validate(ann, *by_id[ann.document_id]));
    annotated.insert({ann.document_id, ann.sentence_index});
  }
  std::size_t sentences = 0;
  bool has_note = false;
  for (const auto& d : a.documents) {
    sentences += d.sentences.size();
    if (d.kind == DocumentKind::clinical_note) {
      has_note = true;
      CHECK(d.sections.count("diagnosis") == 1);
    }
  }
  CHECK(has_note);
  CHECK(annotated.size() * 2 >= sentences);
}

TEST_CASE("documents and annotations round-trip") {
  auto corpus = generate_synthetic_corpus(5, 1);
  write_documents(corpus.documents, scratch("docs.jsonl"));
  write_annotations(corpus.annotations, scratch("ann.jsonl"));
  CHECK(read_documents(scratch("docs.jsonl")) == corpus.documents);
  CHECK(read_annotations(scratch("ann.jsonl")) == corpus.annotations);
}

TEST_CASE("missing files raise io errors") {
  CHECK_THROWS_AS(read_instances(scratch("does-not-exist.jsonl")), IoError);
}
