#include "oncobench/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

namespace {

const std::array<QuestionTemplate, kEntityTypeCount> kTemplates = {{
    {1, "What is the tumor size in the given context?", EntityType::tumor_size},
    {2, "What is the histological type in the given context?", EntityType::histological_type},
    {3, "Please identify the receptors mentioned in the provided context.",
     EntityType::hormone_receptor_type},
    {4, "What is the receptor type in the given context?", EntityType::hormone_receptor_status},
    {5, "Please identify the value of tumor laterality in the provided context.",
     EntityType::tumor_laterality},
    {6, "What is the stage of cancer in the given context?", EntityType::cancer_stage},
    {7, "Please describe the tumor location in the given context", EntityType::tumor_site},
    {8, "What is the grade of cancer in the given context?", EntityType::cancer_grade},
}};

}  // namespace

std::string_view instruction_for(Task task) {
  return task == Task::phenotype_qa ? kPhenotypeInstruction : kDiagnosisInstruction;
}

const std::array<QuestionTemplate, kEntityTypeCount>& question_templates() { return kTemplates; }

const QuestionTemplate& template_for(EntityType type) {
  for (const auto& t : kTemplates) {
    if (t.target == type) return t;
  }
  throw ValidationError("no question template for entity type");
}

const QuestionTemplate& template_by_index(int index) {
  if (index < 1 || index > static_cast<int>(kTemplates.size())) {
    throw ValidationError("question type out of range: " + std::to_string(index));
  }
  return kTemplates[static_cast<std::size_t>(index - 1)];
}

std::string phenotype_context(std::string_view sentence, const QuestionTemplate& question) {
  std::string ctx(sentence);
  ctx += '\n';
  ctx += question.text;
  return ctx;
}

std::vector<InstructionInstance> ner_to_qa(const Document& document,
                                           std::span<const EntityAnnotation> annotations,
                                           std::size_t negatives_per_sentence,
                                           std::uint64_t seed) {
  // Per sentence, per entity type: (first occurrence, annotation order, surface).
  struct Surface {
    std::size_t position;
    std::size_t order;
    std::string text;
  };
  std::vector<std::array<std::vector<Surface>, kEntityTypeCount>> by_sentence(
      document.sentences.size());

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    validate(a, document);
    const std::string lowered_sentence = to_lower_ascii(document.sentences[a.sentence_index]);
    const std::string lowered_surface = to_lower_ascii(a.surface);
    auto& bucket = by_sentence[a.sentence_index][static_cast<std::size_t>(a.entity_type)];
    const bool duplicate = std::any_of(bucket.begin(), bucket.end(), [&](const Surface& s) {
      return to_lower_ascii(s.text) == lowered_surface;
    });
    if (duplicate) continue;
    bucket.push_back({lowered_sentence.find(lowered_surface), i, a.surface});
  }

  std::vector<InstructionInstance> out;
  for (std::size_t s = 0; s < document.sentences.size(); ++s) {
    const std::string& sentence = document.sentences[s];
    auto make = [&](const QuestionTemplate& q, std::string response) {
      InstructionInstance inst;
      inst.id = document.id + ":s" + std::to_string(s) + ":q" + std::to_string(q.index);
      inst.task = Task::phenotype_qa;
      inst.instruction = std::string(kPhenotypeInstruction);
      inst.context = phenotype_context(sentence, q);
      inst.response = std::move(response);
      inst.meta = Json{{"source_document", document.id},
                       {"sentence_index", s},
                       {"question_type", q.index}};
      return inst;
    };

    std::vector<const QuestionTemplate*> absent;
    for (const auto& q : kTemplates) {
      auto& bucket = by_sentence[s][static_cast<std::size_t>(q.target)];
      if (bucket.empty()) {
        absent.push_back(&q);
        continue;
      }
      std::stable_sort(bucket.begin(), bucket.end(), [](const Surface& a, const Surface& b) {
        return a.position != b.position ? a.position < b.position : a.order < b.order;
      });
      std::string response;
      for (const auto& surface : bucket) {
        if (!response.empty()) response += ", ";
        response += surface.text;
      }
      out.push_back(make(q, std::move(response)));
    }

    const std::size_t n_neg = std::min(negatives_per_sentence, absent.size());
    if (n_neg == 0) continue;
    Rng rng(derive_seed(seed, document.id, s));
    rng.shuffle(absent);
    absent.resize(n_neg);
    std::sort(absent.begin(), absent.end(),
              [](const QuestionTemplate* a, const QuestionTemplate* b) { return a->index < b->index; });
    for (const auto* q : absent) out.push_back(make(*q, std::string(kNotRelevant)));
  }
  return out;
}

bool DiagnosisContext::empty() const {
  return reason_for_visit.empty() && treatment_site.empty() && subjective.empty() &&
         nursing_ros.empty() && objective.empty() && lab_results.empty();
}

DiagnosisContext DiagnosisContext::from_sections(const std::map<std::string, std::string>& sections) {
  auto get = [&](const char* key) {
    auto it = sections.find(key);
    return it == sections.end() ? std::string() : it->second;
  };
  return {get("reason_for_visit"), get("treatment_site"), get("subjective"),
          get("nursing_ros"),      get("objective"),      get("lab_results")};
}

std::string render_diagnosis_context(const DiagnosisContext& ctx) {
  const std::pair<std::string_view, const std::string*> parts[] = {
      {"Reason for visit:", &ctx.reason_for_visit},
      {"Treatment site:", &ctx.treatment_site},
      {"Subjective:", &ctx.subjective},
      {"Nursing ROS:", &ctx.nursing_ros},
      {"Objective:", &ctx.objective},
      {"Lab results:", &ctx.lab_results},
  };
  std::string out;
  for (const auto& [header, body] : parts) {
    if (body->empty()) continue;
    if (!out.empty()) out += '\n';
    out += header;
    out += '\n';
    out += *body;
  }
  return out;
}

InstructionInstance build_diagnosis_instance(const std::string& note_id,
                                             const DiagnosisContext& ctx,
                                             const std::string& diagnosis) {
  if (note_id.empty()) throw ValidationError("note id is empty");
  if (ctx.empty()) throw ValidationError("note " + note_id + ": all context sections are empty");
  if (diagnosis.empty()) throw ValidationError("note " + note_id + ": diagnosis is empty");
  InstructionInstance inst;
  inst.id = note_id + ":dx";
  inst.task = Task::diagnosis_generation;
  inst.instruction = std::string(kDiagnosisInstruction);
  inst.context = render_diagnosis_context(ctx);
  inst.response = diagnosis;
  inst.meta = Json{{"source_document", note_id}};
  return inst;
}

namespace {

void append_query(std::string& text, std::string_view context) {
  text += "Context: ";
  text += context;
  text += "\nAnswer:";
}

}  // namespace

Prompt render_prompt(const InstructionInstance& instance,
                     std::span<const InstructionInstance> examples) {
  Prompt p;
  p.instance_id = instance.id;
  p.n_examples = examples.size();
  p.text = instance.instruction;
  p.text += "\n\n";
  for (const auto& ex : examples) {
    p.text += "Example:\nContext: ";
    p.text += ex.context;
    p.text += "\nAnswer: ";
    p.text += ex.response;
    p.text += "\n\n";
  }
  append_query(p.text, instance.context);
  return p;
}

std::size_t estimate_tokens(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return static_cast<std::size_t>(std::ceil(static_cast<double>(words) * 1.3 - 1e-9));
}

FittedPrompt fit_prompt(const InstructionInstance& instance,
                        std::span<const InstructionInstance> examples,
                        std::size_t max_input_tokens) {
  FittedPrompt fitted;
  std::size_t n_examples = examples.size();
  fitted.prompt = render_prompt(instance, examples);
  while (estimate_tokens(fitted.prompt.text) > max_input_tokens && n_examples > 0) {
    --n_examples;
    fitted.prompt = render_prompt(instance, examples.first(n_examples));
  }
  fitted.examples_dropped = examples.size() - n_examples;
  fitted.truncated = fitted.examples_dropped > 0;
  if (estimate_tokens(fitted.prompt.text) <= max_input_tokens) return fitted;

  // Word end offsets of the context; keep the longest fitting prefix.
  std::vector<std::size_t> word_ends;
  const std::string& ctx = instance.context;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    const bool space = std::isspace(static_cast<unsigned char>(ctx[i])) != 0;
    const bool next_space =
        i + 1 == ctx.size() || std::isspace(static_cast<unsigned char>(ctx[i + 1])) != 0;
    if (!space && next_space) word_ends.push_back(i + 1);
  }
  auto render_prefix = [&](std::size_t words) {
    InstructionInstance cut = instance;
    cut.context = ctx.substr(0, words == 0 ? 0 : word_ends[words - 1]);
    return render_prompt(cut, examples.first(n_examples));
  };
  std::size_t lo = 1, hi = word_ends.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (estimate_tokens(render_prefix(mid).text) <= max_input_tokens) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  fitted.prompt = render_prefix(std::min<std::size_t>(lo, word_ends.size()));
  fitted.truncated = true;
  return fitted;
}

}  // namespace oncobench
