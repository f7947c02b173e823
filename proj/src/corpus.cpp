#include "oncobench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

namespace {

constexpr std::array<std::string_view, kEntityTypeCount> kEntityTypeNames = {
    "hormone_receptor_type", "hormone_receptor_status", "tumor_size",
    "tumor_site",            "cancer_grade",            "histological_type",
    "tumor_laterality",      "cancer_stage",
};

std::string at_line(std::size_t line_number, const std::string& message) {
  return "line " + std::to_string(line_number) + ": " + message;
}

const Json& require_field(const Json& obj, const char* field, std::size_t line_number) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ValidationError(at_line(line_number, std::string("missing field ") + field));
  }
  return *it;
}

std::string require_string(const Json& obj, const char* field, std::size_t line_number) {
  const Json& value = require_field(obj, field, line_number);
  if (!value.is_string()) {
    throw ValidationError(at_line(line_number, std::string("field ") + field + " must be a string"));
  }
  return value.get<std::string>();
}

Json parse_json_line(std::string_view line, std::size_t line_number) {
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError(at_line(line_number, std::string("invalid JSON: ") + e.what()));
  }
  if (!obj.is_object()) throw ValidationError(at_line(line_number, "expected a JSON object"));
  return obj;
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse parse) {
  const std::string content = read_file(path);
  std::vector<T> out;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    out.push_back(parse(lines[i], i + 1));
  }
  return out;
}

std::string dump_line(const OrderedJson& obj) {
  try {
    return obj.dump(-1, ' ', false, OrderedJson::error_handler_t::strict);
  } catch (const OrderedJson::type_error& e) {
    throw ValidationError(std::string("cannot serialize (invalid UTF-8?): ") + e.what());
  }
}

}  // namespace

std::string_view to_string(DocumentKind kind) {
  return kind == DocumentKind::clinical_note ? "clinical_note" : "pathology_report";
}

DocumentKind parse_document_kind(std::string_view text) {
  if (text == "clinical_note") return DocumentKind::clinical_note;
  if (text == "pathology_report") return DocumentKind::pathology_report;
  throw ValidationError("unknown document kind: " + std::string(text));
}

std::string_view to_string(EntityType type) {
  return kEntityTypeNames[static_cast<std::size_t>(type)];
}

EntityType parse_entity_type(std::string_view text) {
  for (std::size_t i = 0; i < kEntityTypeNames.size(); ++i) {
    if (kEntityTypeNames[i] == text) return static_cast<EntityType>(i);
  }
  throw ValidationError("unknown entity type: " + std::string(text));
}

std::string_view to_string(Task task) {
  return task == Task::phenotype_qa ? "phenotype_qa" : "diagnosis_generation";
}

Task parse_task(std::string_view text) {
  if (text == "phenotype_qa") return Task::phenotype_qa;
  if (text == "diagnosis_generation") return Task::diagnosis_generation;
  throw ValidationError("unknown task: " + std::string(text));
}

int InstructionInstance::question_type() const {
  auto it = meta.find("question_type");
  if (it == meta.end() || !it->is_number_integer()) return 0;
  return it->get<int>();
}

void validate(const InstructionInstance& instance) {
  if (instance.id.empty()) throw ValidationError("instance id is empty");
  const std::string where = "instance " + instance.id + ": ";
  if (instance.instruction.empty()) throw ValidationError(where + "instruction is empty");
  if (instance.context.empty()) throw ValidationError(where + "context is empty");
  if (instance.response.empty()) throw ValidationError(where + "response is empty");
  if (!instance.meta.is_object()) throw ValidationError(where + "meta must be an object");
  const int qt = instance.question_type();
  if (instance.meta.contains("question_type") && (qt < 1 || qt > 8)) {
    throw ValidationError(where + "question_type must be in 1..8");
  }
}

void validate_unique_ids(std::span<const InstructionInstance> instances) {
  std::unordered_set<std::string_view> seen;
  for (const auto& inst : instances) {
    if (!seen.insert(inst.id).second) throw ValidationError("duplicate id: " + inst.id);
  }
}

void validate(const Document& document) {
  if (document.id.empty()) throw ValidationError("document id is empty");
}

void validate(const DocumentSet& documents) {
  std::unordered_set<std::string_view> seen;
  for (const auto& doc : documents) {
    validate(doc);
    if (!seen.insert(doc.id).second) throw ValidationError("duplicate document id: " + doc.id);
  }
}

void validate(const EntityAnnotation& annotation, const Document& document) {
  if (annotation.document_id != document.id) {
    throw ValidationError("annotation for document " + annotation.document_id +
                          " checked against document " + document.id);
  }
  if (annotation.sentence_index >= document.sentences.size()) {
    throw ValidationError("annotation references missing sentence " +
                          std::to_string(annotation.sentence_index) + " of document " +
                          document.id);
  }
  if (annotation.surface.empty()) {
    throw ValidationError("empty annotation surface in document " + document.id);
  }
  if (!icontains(document.sentences[annotation.sentence_index], annotation.surface)) {
    throw ValidationError("annotation surface '" + annotation.surface +
                          "' does not occur in sentence " +
                          std::to_string(annotation.sentence_index) + " of document " +
                          document.id);
  }
}

// --- instances -------------------------------------------------------------

std::string serialize_instance(const InstructionInstance& instance) {
  OrderedJson obj;
  obj["id"] = instance.id;
  obj["task"] = std::string(to_string(instance.task));
  obj["instruction"] = instance.instruction;
  obj["context"] = instance.context;
  obj["response"] = instance.response;
  // Json (std::map backed) iterates keys sorted, which fixes meta's order.
  try {
    obj["meta"] = OrderedJson::parse(instance.meta.dump());
  } catch (const Json::exception& e) {
    throw ValidationError("instance " + instance.id + ": cannot serialize meta: " + e.what());
  }
  return dump_line(obj);
}

InstructionInstance parse_instance(std::string_view line, std::size_t line_number) {
  const Json obj = parse_json_line(line, line_number);
  InstructionInstance inst;
  inst.id = require_string(obj, "id", line_number);
  const std::string task = require_string(obj, "task", line_number);
  try {
    inst.task = parse_task(task);
  } catch (const ValidationError& e) {
    throw ValidationError(at_line(line_number, e.what()));
  }
  inst.instruction = require_string(obj, "instruction", line_number);
  inst.context = require_string(obj, "context", line_number);
  inst.response = require_string(obj, "response", line_number);
  if (auto it = obj.find("meta"); it != obj.end()) {
    if (!it->is_object()) throw ValidationError(at_line(line_number, "field meta must be an object"));
    inst.meta = *it;
  }
  for (const char* field : {"id", "instruction", "context", "response"}) {
    if (obj.at(field).get_ref<const std::string&>().empty()) {
      throw ValidationError(at_line(line_number, std::string("empty field ") + field));
    }
  }
  try {
    validate(inst);
  } catch (const ValidationError& e) {
    throw ValidationError(at_line(line_number, e.what()));
  }
  return inst;
}

std::vector<InstructionInstance> read_instances(const std::filesystem::path& path) {
  auto out = read_jsonl<InstructionInstance>(path, parse_instance);
  validate_unique_ids(out);
  return out;
}

std::string instances_to_jsonl(std::span<const InstructionInstance> instances) {
  validate_unique_ids(instances);
  std::string out;
  for (const auto& inst : instances) {
    validate(inst);
    out += serialize_instance(inst);
    out += '\n';
  }
  return out;
}

void write_instances(std::span<const InstructionInstance> instances,
                     const std::filesystem::path& path) {
  write_file_atomic(path, instances_to_jsonl(instances));
}

// --- documents and annotations ---------------------------------------------

DocumentSet read_documents(const std::filesystem::path& path) {
  auto docs = read_jsonl<Document>(path, [](std::string_view line, std::size_t n) {
    const Json obj = parse_json_line(line, n);
    Document doc;
    doc.id = require_string(obj, "id", n);
    try {
      doc.kind = parse_document_kind(require_string(obj, "kind", n));
    } catch (const ValidationError& e) {
      throw ValidationError(at_line(n, e.what()));
    }
    const Json& sentences = require_field(obj, "sentences", n);
    if (!sentences.is_array()) throw ValidationError(at_line(n, "field sentences must be an array"));
    for (const auto& s : sentences) {
      if (!s.is_string()) throw ValidationError(at_line(n, "sentences must be strings"));
      doc.sentences.push_back(s.get<std::string>());
    }
    if (auto it = obj.find("sections"); it != obj.end()) {
      if (!it->is_object()) throw ValidationError(at_line(n, "field sections must be an object"));
      for (const auto& [key, value] : it->items()) {
        if (!value.is_string()) throw ValidationError(at_line(n, "section " + key + " must be a string"));
        doc.sections[key] = value.get<std::string>();
      }
    }
    return doc;
  });
  validate(docs);
  return docs;
}

void write_documents(const DocumentSet& documents, const std::filesystem::path& path) {
  validate(documents);
  std::string out;
  for (const auto& doc : documents) {
    OrderedJson obj;
    obj["id"] = doc.id;
    obj["kind"] = std::string(to_string(doc.kind));
    obj["sentences"] = doc.sentences;
    obj["sections"] = OrderedJson::object();
    for (const auto& [key, value] : doc.sections) obj["sections"][key] = value;
    out += dump_line(obj);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<EntityAnnotation> read_annotations(const std::filesystem::path& path) {
  return read_jsonl<EntityAnnotation>(path, [](std::string_view line, std::size_t n) {
    const Json obj = parse_json_line(line, n);
    EntityAnnotation a;
    a.document_id = require_string(obj, "document_id", n);
    const Json& index = require_field(obj, "sentence_index", n);
    if (!index.is_number_unsigned()) {
      throw ValidationError(at_line(n, "field sentence_index must be a non-negative integer"));
    }
    a.sentence_index = index.get<std::size_t>();
    try {
      a.entity_type = parse_entity_type(require_string(obj, "entity_type", n));
    } catch (const ValidationError& e) {
      throw ValidationError(at_line(n, e.what()));
    }
    a.surface = require_string(obj, "surface", n);
    if (a.surface.empty()) throw ValidationError(at_line(n, "empty field surface"));
    return a;
  });
}

void write_annotations(std::span<const EntityAnnotation> annotations,
                       const std::filesystem::path& path) {
  std::string out;
  for (const auto& a : annotations) {
    OrderedJson obj;
    obj["document_id"] = a.document_id;
    obj["sentence_index"] = a.sentence_index;
    obj["entity_type"] = std::string(to_string(a.entity_type));
    obj["surface"] = a.surface;
    out += dump_line(obj);
    out += '\n';
  }
  write_file_atomic(path, out);
}

// --- split -----------------------------------------------------------------

DatasetSplit split_dataset(std::span<const InstructionInstance> instances,
                           SplitRatios ratios, std::uint64_t seed) {
  for (double r : {ratios.train, ratios.validation, ratios.test}) {
    if (!(r >= 0.0) || r > 1.0) throw ValidationError("split ratios must lie in [0, 1]");
  }
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1 (got " + std::to_string(sum) + ")");
  }
  validate_unique_ids(instances);

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n = instances.size();
  // Small slack so that e.g. 0.1 * 10 floors to 1, not 0.
  auto bucket = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = bucket(ratios.validation);
  const std::size_t n_test = bucket(ratios.test);
  const std::size_t n_train = n - n_val - n_test;

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = instances[order[i]];
    if (i < n_train) {
      split.train.push_back(inst);
    } else if (i < n_train + n_val) {
      split.validation.push_back(inst);
    } else {
      split.test.push_back(inst);
    }
  }
  return split;
}

// --- synthetic corpus ------------------------------------------------------

namespace {

// Illustrative, non-clinical vocabularies.
const std::vector<std::string> kReceptorTypes = {"er", "pr", "her2"};
const std::vector<std::string> kReceptorStatuses = {"positive", "negative", "equivocal"};
const std::vector<std::string> kTumorSizes = {"1.2 cm", "2.5 cm", "0.8 cm", "3.1 cm", "14 mm", "22 mm"};
const std::vector<std::string> kTumorSites = {"upper outer quadrant", "lower inner quadrant",
                                              "retroareolar region", "axillary tail",
                                              "upper lobe", "central region"};
const std::vector<std::string> kGrades = {"grade 1", "grade 2", "grade 3",
                                          "low grade", "intermediate grade", "high grade"};
const std::vector<std::string> kHistologies = {"invasive ductal carcinoma", "ductal carcinoma in situ",
                                               "invasive lobular carcinoma", "mucinous carcinoma",
                                               "adenocarcinoma", "squamous cell carcinoma"};
const std::vector<std::string> kLateralities = {"left", "right", "bilateral"};
const std::vector<std::string> kStages = {"stage iia", "stage iib", "stage iiia",
                                          "stage iv", "pt1c n0", "pt2 n1"};
const std::vector<std::string> kFillers = {
    "patient tolerated the procedure well.", "follow up in clinic as scheduled.",
    "specimen received in formalin.", "no acute distress noted today.",
    "findings were discussed with the patient."};
const std::vector<std::string> kClinics = {"oncology clinic", "radiation oncology",
                                           "infusion center", "surgical oncology"};
const std::vector<std::string> kSymptoms = {"patient reports mild fatigue", "denies chest pain",
                                            "reports intermittent breast tenderness",
                                            "appetite is stable"};
const std::vector<std::string> kRos = {"negative for fever and chills", "positive for fatigue",
                                       "negative for weight loss"};
const std::vector<std::string> kObjective = {"palpable mass on exam", "no lymphadenopathy",
                                             "healed incision without erythema"};
const std::vector<std::string> kLabs = {"wbc 6.1, hgb 12.3", "platelets 240", "ca 15-3 within normal limits"};

const std::string& pick(Rng& rng, const std::vector<std::string>& items) {
  return items[rng.below(items.size())];
}

struct Clause {
  std::string text;
  std::vector<std::pair<EntityType, std::string>> entities;
};

Clause make_clause(Rng& rng, EntityType type) {
  Clause c;
  auto one = [&](const std::string& prefix, const std::vector<std::string>& vocab,
                 const std::string& suffix) {
    const std::string& v = pick(rng, vocab);
    c.text = prefix + v + suffix;
    c.entities.emplace_back(type, v);
  };
  switch (type) {
    case EntityType::hormone_receptor_type:
    case EntityType::hormone_receptor_status: {
      const std::string& rt = pick(rng, kReceptorTypes);
      const std::string& rs = pick(rng, kReceptorStatuses);
      c.text = "tumor cells are " + rt + " " + rs;
      c.entities.emplace_back(EntityType::hormone_receptor_type, rt);
      c.entities.emplace_back(EntityType::hormone_receptor_status, rs);
      break;
    }
    case EntityType::tumor_size: one("the tumor measures ", kTumorSizes, " in greatest dimension"); break;
    case EntityType::tumor_site: one("lesion located in the ", kTumorSites, ""); break;
    case EntityType::cancer_grade: one("histologic ", kGrades, ""); break;
    case EntityType::histological_type: one("biopsy shows ", kHistologies, ""); break;
    case EntityType::tumor_laterality: one("", kLateralities, " breast mass noted"); break;
    case EntityType::cancer_stage: one("pathologic ", kStages, ""); break;
  }
  return c;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(std::size_t n_documents, std::uint64_t seed) {
  if (n_documents < 1) throw ValidationError("n_documents must be >= 1");
  SyntheticCorpus corpus;
  Rng rng(seed);
  const std::size_t width = std::to_string(n_documents).size();
  for (std::size_t d = 0; d < n_documents; ++d) {
    Document doc;
    std::string num = std::to_string(d + 1);
    doc.id = "doc-" + std::string(width - num.size(), '0') + num;
    doc.kind = rng.below(2) == 0 ? DocumentKind::clinical_note : DocumentKind::pathology_report;

    std::string laterality;
    std::string histology;
    const std::size_t n_sentences = 1 + rng.below(5);
    for (std::size_t s = 0; s < n_sentences; ++s) {
      // Only odd positions may be fillers, so at least half are annotated.
      if (s % 2 == 1 && rng.below(10) < 4) {
        doc.sentences.push_back(pick(rng, kFillers));
        continue;
      }
      const std::size_t n_clauses = 1 + rng.below(2);
      std::string sentence;
      for (std::size_t c = 0; c < n_clauses; ++c) {
        const auto type = kAllEntityTypes[rng.below(kEntityTypeCount)];
        Clause clause = make_clause(rng, type);
        if (!sentence.empty()) sentence += ", ";
        sentence += clause.text;
        for (auto& [etype, surface] : clause.entities) {
          if (etype == EntityType::tumor_laterality) laterality = surface;
          if (etype == EntityType::histological_type) histology = surface;
          corpus.annotations.push_back({doc.id, s, etype, surface});
        }
      }
      sentence += ".";
      doc.sentences.push_back(std::move(sentence));
    }

    if (doc.kind == DocumentKind::clinical_note) {
      if (laterality.empty()) laterality = pick(rng, kLateralities);
      if (histology.empty()) histology = pick(rng, kHistologies);
      doc.sections["reason_for_visit"] = "evaluation of " + laterality + " breast mass";
      if (rng.below(4) != 0) doc.sections["treatment_site"] = pick(rng, kClinics);
      if (rng.below(4) != 0) doc.sections["subjective"] = pick(rng, kSymptoms);
      if (rng.below(3) != 0) doc.sections["nursing_ros"] = pick(rng, kRos);
      if (rng.below(3) != 0) doc.sections["objective"] = pick(rng, kObjective);
      if (rng.below(2) != 0) doc.sections["lab_results"] = pick(rng, kLabs);
      doc.sections["diagnosis"] = laterality + " breast " + histology;
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace oncobench
