// oncobench: command-line driver over the C API.
//
//   oncobench build-dataset --synthetic 200 --task phenotype_qa
//   oncobench perturb --kind counterfactual --rate 0.4
//   oncobench embed --embed-url http://localhost:8081/embed
//   oncobench run --backend replay --replay gold.jsonl --retriever lexical --k 1
//   oncobench report --table main --format markdown
//
// Settings come from --config (JSON) with flags layered on top.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "oncobench/oncobench.h"

namespace {

using nlohmann::json;

struct SessionDeleter {
  void operator()(ob_session* s) const { ob_session_destroy(s); }
};
using SessionPtr = std::unique_ptr<ob_session, SessionDeleter>;

int fail(ob_status status) {
  std::fprintf(stderr, "error: %s\n", ob_last_error());
  return static_cast<int>(status);
}

int finish(ob_status status, char* summary) {
  if (status != OB_OK) return fail(status);
  if (summary != nullptr) {
    std::printf("%s\n", summary);
    ob_string_free(summary);
  }
  return 0;
}

template <typename T>
void set_if(json& j, const json::json_pointer& ptr, const std::optional<T>& value) {
  if (value) j[ptr] = *value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-tuning dataset, robustness testbed and evaluation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ob_version()));

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--task", task, "phenotype_qa | diagnosis_generation");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Build train/validation/test instance files");
  std::optional<std::size_t> synthetic;
  std::optional<std::size_t> negatives;
  std::optional<std::string> corpus, annotations, datasets_dir;
  std::vector<std::string> extra_tests;
  build->add_option("--synthetic", synthetic, "Generate a synthetic corpus of N documents");
  build->add_option("--corpus", corpus, "Documents JSON-lines");
  build->add_option("--annotations", annotations, "Annotations JSON-lines");
  build->add_option("--negatives", negatives, "\"Not relevant\" questions per sentence");
  build->add_option("--extra-test", extra_tests, "Extra test slot NAME=PATH (repeatable)");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "Write a counterfactual or misspelled copy of a dataset");
  std::optional<std::string> kind;
  std::optional<double> rate;
  std::optional<std::string> ops, field;
  std::string input, output;
  perturb->add_option("--kind", kind, "counterfactual | misspelling")->required();
  perturb->add_option("--rate", rate, "Fraction in [0, 1]")->required();
  perturb->add_option("--ops", ops, "Misspelling ops, e.g. transpose,delete,insert,substitute");
  perturb->add_option("--field", field, "context | response (misspelling)");
  perturb->add_option("--input", input, "Input dataset (default: train split)");
  perturb->add_option("--output", output, "Output dataset (default: derived from input)");

  // embed
  auto* embed = app.add_subcommand("embed", "Embed train/test contexts for dense retrieval");
  std::optional<std::string> embed_url, source_tag;

  // run
  auto* run = app.add_subcommand("run", "Generate and score one run");
  std::optional<std::string> backend, url, replay, echo, retriever, run_id, train, test;
  std::optional<std::size_t> max_in_flight, k;
  std::optional<int> timeout_ms, max_retries;
  bool overwrite = false;
  run->add_option("--backend", backend, "http | replay | echo");
  run->add_option("--url", url, "Generation endpoint (http backend)");
  run->add_option("--replay", replay, "Replay file (replay backend)");
  run->add_option("--echo-text", echo, "Constant output (echo backend)");
  run->add_option("--max-in-flight", max_in_flight, "Concurrent requests");
  run->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
  run->add_option("--max-retries", max_retries, "Retries on 5xx / timeout");
  run->add_option("--retriever", retriever, "none | random | lexical | dense");
  run->add_option("--k,--shots", k, "Examples per prompt");
  run->add_option("--run-id", run_id, "Run directory name");
  run->add_option("--train", train, "Retrieval corpus (default: train split)");
  run->add_option("--test", test, "Evaluation file (default: test split)");
  run->add_option("--kind", kind, "Perturbation label recorded for this run");
  run->add_option("--rate", rate, "Perturbation rate recorded for this run");
  run->add_flag("--overwrite", overwrite, "Replace an existing run");

  for (auto* sub : {embed, run}) {
    sub->add_option("--embed-url", embed_url, "Embedding endpoint");
    sub->add_option("--embed-tag", source_tag, "Name of the embedding model");
  }
  embed->add_option("--train", train, "Retrieval corpus (default: train split)");
  embed->add_option("--test", test, "Evaluation file (default: test split)");

  // report
  auto* report = app.add_subcommand("report", "Emit a table over completed runs");
  std::string table = "main", format = "markdown", report_out;
  report->add_option("--table", table, "main | robustness | retriever | timing");
  report->add_option("--format", format, "csv | markdown");
  report->add_option("--output", report_out, "Output file");

  std::optional<std::string> runs_dir;
  for (auto* sub : {build, perturb, embed, run, report}) {
    sub->add_option("--datasets", datasets_dir, "Datasets directory");
  }
  for (auto* sub : {run, report}) sub->add_option("--runs", runs_dir, "Runs directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Usage errors share the validation exit code.
    return code == 0 ? 0 : OB_ERR_VALIDATION;
  }

  json overrides = json::object();
  set_if(overrides, "/seed"_json_pointer, seed);
  set_if(overrides, "/task"_json_pointer, task);
  set_if(overrides, "/paths/corpus"_json_pointer, corpus);
  set_if(overrides, "/paths/annotations"_json_pointer, annotations);
  set_if(overrides, "/paths/datasets"_json_pointer, datasets_dir);
  set_if(overrides, "/paths/runs"_json_pointer, runs_dir);
  set_if(overrides, "/paths/train"_json_pointer, train);
  set_if(overrides, "/paths/test"_json_pointer, test);
  for (const auto& spec : extra_tests) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --extra-test expects NAME=PATH, got %s\n", spec.c_str());
      return OB_ERR_VALIDATION;
    }
    overrides["paths"]["extra_tests"][spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  set_if(overrides, "/dataset/synthetic"_json_pointer, synthetic);
  set_if(overrides, "/dataset/negatives_per_sentence"_json_pointer, negatives);
  set_if(overrides, "/perturbation/kind"_json_pointer, kind);
  set_if(overrides, "/perturbation/rate"_json_pointer, rate);
  set_if(overrides, "/perturbation/ops"_json_pointer, ops);
  set_if(overrides, "/perturbation/field"_json_pointer, field);
  set_if(overrides, "/backend/kind"_json_pointer, backend);
  set_if(overrides, "/backend/url"_json_pointer, url);
  set_if(overrides, "/backend/replay_path"_json_pointer, replay);
  set_if(overrides, "/backend/echo_text"_json_pointer, echo);
  set_if(overrides, "/backend/max_in_flight"_json_pointer, max_in_flight);
  set_if(overrides, "/backend/timeout_ms"_json_pointer, timeout_ms);
  set_if(overrides, "/backend/max_retries"_json_pointer, max_retries);
  set_if(overrides, "/retriever/method"_json_pointer, retriever);
  set_if(overrides, "/retriever/k"_json_pointer, k);
  set_if(overrides, "/retriever/embedding/url"_json_pointer, embed_url);
  set_if(overrides, "/retriever/embedding/source_tag"_json_pointer, source_tag);
  set_if(overrides, "/run_id"_json_pointer, run_id);
  if (overwrite) overrides["overwrite"] = true;

  ob_session* raw = nullptr;
  const std::string overrides_text = overrides.dump();
  if (ob_status st = ob_session_create(config_path.c_str(), overrides_text.c_str(), &raw); st != OB_OK) {
    return fail(st);
  }
  SessionPtr session(raw);

  char* summary = nullptr;
  if (*build) return finish(ob_build_dataset(session.get(), &summary), summary);
  if (*perturb) {
    return finish(ob_perturb(session.get(), input.c_str(), output.c_str(), &summary), summary);
  }
  if (*embed) return finish(ob_embed(session.get(), &summary), summary);
  if (*run) return finish(ob_run(session.get(), &summary), summary);
  if (*report) {
    return finish(ob_report(session.get(), table.c_str(), format.c_str(), report_out.c_str(), &summary),
                  summary);
  }
  return 0;
}
