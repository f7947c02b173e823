#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace oncobench {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class DocumentKind { clinical_note, pathology_report };

std::string_view to_string(DocumentKind kind);
DocumentKind parse_document_kind(std::string_view text);

struct Document {
  std::string id;
  DocumentKind kind = DocumentKind::pathology_report;
  std::vector<std::string> sentences;
  std::map<std::string, std::string> sections;

  bool operator==(const Document&) const = default;
};

using DocumentSet = std::vector<Document>;

/// The eight phenotype entity types, in canonical order.
enum class EntityType : std::uint8_t {
  hormone_receptor_type,
  hormone_receptor_status,
  tumor_size,
  tumor_site,
  cancer_grade,
  histological_type,
  tumor_laterality,
  cancer_stage,
};

inline constexpr std::size_t kEntityTypeCount = 8;
inline constexpr std::array<EntityType, kEntityTypeCount> kAllEntityTypes = {
    EntityType::hormone_receptor_type, EntityType::hormone_receptor_status,
    EntityType::tumor_size,            EntityType::tumor_site,
    EntityType::cancer_grade,          EntityType::histological_type,
    EntityType::tumor_laterality,      EntityType::cancer_stage,
};

std::string_view to_string(EntityType type);
EntityType parse_entity_type(std::string_view text);

struct EntityAnnotation {
  std::string document_id;
  std::size_t sentence_index = 0;
  EntityType entity_type = EntityType::tumor_size;
  std::string surface;

  bool operator==(const EntityAnnotation&) const = default;
};

enum class Task { phenotype_qa, diagnosis_generation };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// One {instruction, context, response} record. `meta` is a JSON object;
/// known keys: source_document, sentence_index, question_type, perturbation.
struct InstructionInstance {
  std::string id;
  Task task = Task::phenotype_qa;
  std::string instruction;
  std::string context;
  std::string response;
  Json meta = Json::object();

  bool operator==(const InstructionInstance&) const = default;

  /// meta.question_type, or 0 when absent.
  int question_type() const;
};

/// Throws ValidationError when an invariant is broken.
void validate(const InstructionInstance& instance);
void validate_unique_ids(std::span<const InstructionInstance> instances);
void validate(const Document& document);
void validate(const DocumentSet& documents);
/// Checks the annotation against its document: sentence exists and the
/// surface occurs in it case-insensitively.
void validate(const EntityAnnotation& annotation, const Document& document);

// JSON-lines I/O. Instance keys are written in the fixed order
// id, task, instruction, context, response, meta (meta keys sorted), so
// writing the same list twice gives identical bytes.
std::string serialize_instance(const InstructionInstance& instance);
InstructionInstance parse_instance(std::string_view line, std::size_t line_number);
std::vector<InstructionInstance> read_instances(const std::filesystem::path& path);
void write_instances(std::span<const InstructionInstance> instances,
                     const std::filesystem::path& path);
std::string instances_to_jsonl(std::span<const InstructionInstance> instances);

DocumentSet read_documents(const std::filesystem::path& path);
void write_documents(const DocumentSet& documents, const std::filesystem::path& path);
std::vector<EntityAnnotation> read_annotations(const std::filesystem::path& path);
void write_annotations(std::span<const EntityAnnotation> annotations,
                       const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<InstructionInstance> train;
  std::vector<InstructionInstance> validation;
  std::vector<InstructionInstance> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Seeded Fisher-Yates over the input, then floor-allocated buckets with the
/// remainder going to train. Within each bucket the shuffled order is kept.
DatasetSplit split_dataset(std::span<const InstructionInstance> instances,
                           SplitRatios ratios, std::uint64_t seed);

struct SyntheticCorpus {
  DocumentSet documents;
  std::vector<EntityAnnotation> annotations;
};

/// Desk-scale stand-in corpus built from small curated vocabularies.
/// NOT clinical data: the vocabularies are illustrative only.
SyntheticCorpus generate_synthetic_corpus(std::size_t n_documents, std::uint64_t seed);

}  // namespace oncobench
