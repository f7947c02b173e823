#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oncobench/corpus.hpp"

namespace oncobench {

inline constexpr std::string_view kPhenotypeInstruction =
    "You are a medical expert, this task involves answering the question based on the "
    "provided context or text.";
inline constexpr std::string_view kDiagnosisInstruction =
    "You are a medical expert. This task involves generating the diagnosis based on the "
    "provided context or text";
inline constexpr std::string_view kNotRelevant = "Not relevant";

std::string_view instruction_for(Task task);

struct QuestionTemplate {
  int index;  // 1..8
  std::string_view text;
  EntityType target;
};

/// The eight question types, indexed 1..8; bijective with EntityType.
const std::array<QuestionTemplate, kEntityTypeCount>& question_templates();
const QuestionTemplate& template_for(EntityType type);
const QuestionTemplate& template_by_index(int index);

/// Phenotype context: the sentence, a newline, then the question.
std::string phenotype_context(std::string_view sentence, const QuestionTemplate& question);

/// Turns one annotated document into QA instances. Per sentence: one
/// positive instance per entity type present (surfaces deduplicated
/// case-insensitively, ordered by first occurrence in the sentence,
/// ", "-joined), then up to `negatives_per_sentence` "Not relevant"
/// instances for absent types. Negatives are sampled with a seed derived
/// from (seed, document id, sentence index).
std::vector<InstructionInstance> ner_to_qa(const Document& document,
                                           std::span<const EntityAnnotation> annotations,
                                           std::size_t negatives_per_sentence,
                                           std::uint64_t seed);

struct DiagnosisContext {
  std::string reason_for_visit;
  std::string treatment_site;
  std::string subjective;
  std::string nursing_ros;
  std::string objective;
  std::string lab_results;

  bool empty() const;
  /// Reads the section keys reason_for_visit, treatment_site, subjective,
  /// nursing_ros, objective, lab_results.
  static DiagnosisContext from_sections(const std::map<std::string, std::string>& sections);
};

/// Section key holding the gold diagnosis in clinical-note documents.
inline constexpr std::string_view kDiagnosisSection = "diagnosis";

/// Context layout: for each non-empty section in fixed order, a header line
/// ("Reason for visit:", "Treatment site:", "Subjective:", "Nursing ROS:",
/// "Objective:", "Lab results:") followed by the section body on the next line.
std::string render_diagnosis_context(const DiagnosisContext& ctx);

/// Instance id is "<note_id>:dx".
InstructionInstance build_diagnosis_instance(const std::string& note_id,
                                             const DiagnosisContext& ctx,
                                             const std::string& diagnosis);

struct Prompt {
  std::string text;
  std::string instance_id;
  std::size_t n_examples = 0;
};

/// Layout:
///   <instruction>
///   <blank>
///   Example:\nContext: <ctx>\nAnswer: <response>\n<blank>   (per example)
///   Context: <instance context>
///   Answer:
Prompt render_prompt(const InstructionInstance& instance,
                     std::span<const InstructionInstance> examples);

/// Whitespace word count x 1.3, rounded up.
std::size_t estimate_tokens(std::string_view text);

struct FittedPrompt {
  Prompt prompt;
  bool truncated = false;
  std::size_t examples_dropped = 0;
};

/// Renders a prompt that fits `max_input_tokens` by the estimate above:
/// drops trailing examples first, then cuts the query context from the end
/// (head-preserving). The instruction is never cut.
FittedPrompt fit_prompt(const InstructionInstance& instance,
                        std::span<const InstructionInstance> examples,
                        std::size_t max_input_tokens);

}  // namespace oncobench
