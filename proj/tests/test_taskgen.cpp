#include <doctest.h>

#include <set>

#include "oncobench/error.hpp"
#include "oncobench/taskgen.hpp"

using namespace oncobench;

TEST_CASE("question templates are a bijection over entity types") {
  std::set<EntityType> targets;
  std::set<int> indexes;
  for (const auto& q : question_templates()) {
    targets.insert(q.target);
    indexes.insert(q.index);
    CHECK(template_for(q.target).index == q.index);
    CHECK(template_by_index(q.index).target == q.target);
  }
  CHECK(targets.size() == 8);
  CHECK(indexes == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK_THROWS(template_by_index(9));
}

TEST_CASE("single sentence with two entity types") {
  Document doc{"d1", DocumentKind::pathology_report, {"Invasive ductal carcinoma of the left breast."}, {}};
  std::vector<EntityAnnotation> ann = {
      {"d1", 0, EntityType::tumor_laterality, "left"},
      {"d1", 0, EntityType::histological_type, "Invasive ductal carcinoma"},
  };
  auto out = ner_to_qa(doc, ann, 1, 5);
  REQUIRE(out.size() == 3);
  // Positives first, in template order.
  CHECK(out[0].response == "Invasive ductal carcinoma");
  CHECK(out[0].question_type() == template_for(EntityType::histological_type).index);
  CHECK(out[1].response == "left");
  CHECK(out[2].response == kNotRelevant);
  CHECK(out[0].instruction == kPhenotypeInstruction);
  CHECK(out[0].context ==
        phenotype_context(doc.sentences[0], template_for(EntityType::histological_type)));
  CHECK(out[0].context.rfind(doc.sentences[0], 0) == 0);
  std::set<std::string> ids;
  for (const auto& x : out) ids.insert(x.id);
  CHECK(ids.size() == 3);
  CHECK(out[0].meta["source_document"] == "d1");
  CHECK(out[0].meta["sentence_index"] == 0);
}

TEST_CASE("repeated surfaces are joined once in order of appearance") {
  Document doc{"d2", DocumentKind::pathology_report, {"ER positive, PR positive, and er again."}, {}};
  std::vector<EntityAnnotation> ann = {
      {"d2", 0, EntityType::hormone_receptor_type, "PR"},
      {"d2", 0, EntityType::hormone_receptor_type, "ER"},
      {"d2", 0, EntityType::hormone_receptor_type, "er"},
  };
  auto out = ner_to_qa(doc, ann, 0, 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0].response == "ER, PR");
}

TEST_CASE("negatives are seeded and capped by absent types") {
  Document doc{"d3", DocumentKind::pathology_report, {"Nothing to see.", "Stage II."}, {}};
  std::vector<EntityAnnotation> ann = {{"d3", 1, EntityType::cancer_stage, "Stage II"}};
  auto a = ner_to_qa(doc, ann, 3, 11);
  auto b = ner_to_qa(doc, ann, 3, 11);
  CHECK(a == b);
  CHECK(a.size() == 3 + 1 + 3);
  auto all = ner_to_qa(doc, ann, 100, 11);
  CHECK(all.size() == 8 + 8);
  for (const auto& x : all) {
    if (x.response == kNotRelevant && x.meta["sentence_index"] == 1) CHECK(x.question_type() != template_for(EntityType::cancer_stage).index);
  }
}

TEST_CASE("annotations for other documents or bad sentences are rejected") {
  Document doc{"d4", DocumentKind::pathology_report, {"One."}, {}};
  std::vector<EntityAnnotation> ann = {{"d4", 3, EntityType::cancer_stage, "x"}};
  CHECK_THROWS_AS(ner_to_qa(doc, ann, 1, 1), ValidationError);
}

TEST_CASE("diagnosis context keeps section order and skips empties") {
  DiagnosisContext ctx;
  ctx.reason_for_visit = "Follow-up";
  ctx.objective = "No distress";
  const auto text = render_diagnosis_context(ctx);
  CHECK(text == "Reason for visit:\nFollow-up\nObjective:\nNo distress");
  auto inst = build_diagnosis_instance("note-7", ctx, "right breast carcinoma");
  CHECK(inst.id == "note-7:dx");
  CHECK(inst.task == Task::diagnosis_generation);
  CHECK(inst.instruction == kDiagnosisInstruction);
  CHECK(inst.response == "right breast carcinoma");
  CHECK_THROWS_AS(build_diagnosis_instance("n", DiagnosisContext{}, "x"), ValidationError);
}

TEST_CASE("prompt layout") {
  InstructionInstance q;
  q.id = "q";
  q.instruction = "Do it.";
  q.context = "ctx";
  q.response = "gold";
  InstructionInstance ex = q;
  ex.id = "e";
  ex.context = "ectx";
  ex.response = "eans";
  std::vector<InstructionInstance> exs = {ex};
  auto p = render_prompt(q, exs);
  CHECK(p.text == "Do it.\n\nExample:\nContext: ectx\nAnswer: eans\n\nContext: ctx\nAnswer:");
  CHECK(p.n_examples == 1);
  CHECK(p.text.find("gold") == std::string::npos);
}

TEST_CASE("token estimate and fitting") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("a b c") == 4);  // ceil(3.9)
  CHECK(estimate_tokens("one two three four five six seven eight nine ten") == 13);

  InstructionInstance q;
  q.id = "q";
  q.instruction = "Answer.";
  q.context = std::string();
  for (int i = 0; i < 200; ++i) q.context += "word ";
  q.response = "x";
  InstructionInstance ex = q;
  ex.id = "e";
  ex.context = "short example";
  std::vector<InstructionInstance> exs = {ex, ex};

  auto fits = fit_prompt(q, exs, 10000);
  CHECK_FALSE(fits.truncated);
  CHECK(fits.examples_dropped == 0);

  auto cut = fit_prompt(q, exs, 100);
  CHECK(cut.truncated);
  CHECK(cut.examples_dropped == 2);
  CHECK(estimate_tokens(cut.prompt.text) <= 100);
  CHECK(cut.prompt.text.rfind("Answer.", 0) == 0);
}
