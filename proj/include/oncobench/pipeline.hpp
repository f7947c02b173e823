#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oncobench/corpus.hpp"
#include "oncobench/genclient.hpp"
#include "oncobench/perturb.hpp"
#include "oncobench/report.hpp"
#include "oncobench/retrieve.hpp"

namespace oncobench {

/// Everything a pipeline command needs. Built from a JSON config file with
/// flag overrides merged on top (overrides win). See README for the keys.
struct PipelineConfig {
  std::uint64_t seed = 13;
  Task task = Task::phenotype_qa;

  struct Paths {
    std::filesystem::path corpus;       // documents JSON-lines
    std::filesystem::path annotations;  // annotations JSON-lines
    std::filesystem::path datasets = "data";
    std::filesystem::path runs = "runs";
    std::filesystem::path cache = "cache";
    std::filesystem::path train;  // run: retrieval corpus override
    std::filesystem::path test;   // run: evaluation file override
    std::map<std::string, std::filesystem::path> extra_tests;  // named extra test slots
  } paths;

  std::map<Task, TaskLimits> limits = {{Task::phenotype_qa, default_limits(Task::phenotype_qa)},
                                       {Task::diagnosis_generation,
                                        default_limits(Task::diagnosis_generation)}};

  struct Dataset {
    SplitRatios ratios;
    std::size_t negatives_per_sentence = 1;
    std::optional<std::size_t> synthetic;  // generate this many documents
  } dataset;

  BackendConfig backend;

  struct Retriever {
    RetrievalMethod method = RetrievalMethod::none;
    std::size_t k = 1;
    double k1 = LexicalIndex::kDefaultK1;
    double b = LexicalIndex::kDefaultB;
    EmbeddingEndpointConfig embedding;
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;
  } retriever;

  struct Perturbation {
    std::string kind = "none";  // none | counterfactual | misspelling
    double rate = 0.0;
    std::vector<MisspellOp> ops = MisspellSpec{}.ops;
    PerturbField field = PerturbField::context;
  } perturbation;

  std::string run_id;  // empty derives one from the config
  bool overwrite = false;

  static PipelineConfig from_json(const Json& j);
  Json to_json() const;

  std::filesystem::path dataset_dir() const;
};

/// Reads `config_path` (may be empty) and applies `overrides` as a JSON
/// merge patch.
PipelineConfig load_config(const std::filesystem::path& config_path, const Json& overrides);

// Pipeline commands. Each returns a JSON summary and throws oncobench::Error.
Json cmd_build_dataset(const PipelineConfig& config);
Json cmd_perturb(const PipelineConfig& config, const std::filesystem::path& input,
                 const std::filesystem::path& output);
Json cmd_embed(const PipelineConfig& config);
Json cmd_run(const PipelineConfig& config);
Json cmd_report(const PipelineConfig& config, TableKind kind, EmitFormat format,
                const std::filesystem::path& output);

}  // namespace oncobench
