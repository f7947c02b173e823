#include "oncobench/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <unordered_map>

#include "oncobench/error.hpp"
#include "oncobench/metrics.hpp"
#include "oncobench/taskgen.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

namespace fs = std::filesystem;

// --- config ------------------------------------------------------------------

namespace {

template <typename T>
void read_opt(const Json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

void read_path(const Json& obj, const char* key, fs::path& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<std::string>();
}

std::vector<MisspellOp> ops_from_json(const Json& j) {
  if (j.is_string()) return parse_misspell_ops(j.get<std::string>());
  std::string joined;
  for (const auto& item : j) joined += item.get<std::string>() + ",";
  return parse_misspell_ops(joined);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j) {
  PipelineConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    read_opt(j, "seed", c.seed);
    if (j.contains("task")) c.task = parse_task(j["task"].get<std::string>());
    read_opt(j, "run_id", c.run_id);
    read_opt(j, "overwrite", c.overwrite);

    if (const auto it = j.find("paths"); it != j.end()) {
      const Json& p = *it;
      read_path(p, "corpus", c.paths.corpus);
      read_path(p, "annotations", c.paths.annotations);
      read_path(p, "datasets", c.paths.datasets);
      read_path(p, "runs", c.paths.runs);
      read_path(p, "cache", c.paths.cache);
      read_path(p, "train", c.paths.train);
      read_path(p, "test", c.paths.test);
      if (const auto extra = p.find("extra_tests"); extra != p.end() && !extra->is_null()) {
        for (const auto& [name, path] : extra->items()) c.paths.extra_tests[name] = path.get<std::string>();
      }
    }
    if (const auto it = j.find("limits"); it != j.end()) {
      for (const auto& [task_name, lim] : it->items()) {
        TaskLimits& l = c.limits[parse_task(task_name)];
        read_opt(lim, "max_input_tokens", l.max_input_tokens);
        read_opt(lim, "max_new_tokens", l.max_new_tokens);
        read_opt(lim, "temperature", l.temperature);
        if (l.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
        if (!(l.temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
      }
    }
    if (const auto it = j.find("dataset"); it != j.end()) {
      const Json& d = *it;
      if (const auto r = d.find("ratios"); r != d.end()) {
        const auto ratios = r->get<std::vector<double>>();
        if (ratios.size() != 3) throw ConfigError("dataset.ratios must have three entries");
        c.dataset.ratios = {ratios[0], ratios[1], ratios[2]};
      }
      read_opt(d, "negatives_per_sentence", c.dataset.negatives_per_sentence);
      if (const auto s = d.find("synthetic"); s != d.end() && !s->is_null()) {
        c.dataset.synthetic = s->get<std::size_t>();
      }
    }
    if (const auto it = j.find("backend"); it != j.end()) {
      const Json& b = *it;
      if (b.contains("kind")) c.backend.kind = parse_backend_kind(b["kind"].get<std::string>());
      read_opt(b, "url", c.backend.url);
      read_opt(b, "timeout_ms", c.backend.timeout_ms);
      read_opt(b, "max_retries", c.backend.max_retries);
      read_opt(b, "max_in_flight", c.backend.max_in_flight);
      read_opt(b, "backoff_base_ms", c.backend.backoff_base_ms);
      read_opt(b, "replay_path", c.backend.replay_path);
      if (const auto e = b.find("echo_text"); e != b.end() && !e->is_null()) {
        c.backend.echo_text = e->get<std::string>();
      }
    }
    if (const auto it = j.find("retriever"); it != j.end()) {
      const Json& r = *it;
      if (r.contains("method")) c.retriever.method = parse_retrieval_method(r["method"].get<std::string>());
      read_opt(r, "k", c.retriever.k);
      read_opt(r, "k1", c.retriever.k1);
      read_opt(r, "b", c.retriever.b);
      read_opt(r, "batch_size", c.retriever.batch_size);
      read_opt(r, "max_in_flight", c.retriever.max_in_flight);
      if (const auto e = r.find("embedding"); e != r.end()) {
        read_opt(*e, "url", c.retriever.embedding.url);
        read_opt(*e, "source_tag", c.retriever.embedding.source_tag);
        read_opt(*e, "timeout_ms", c.retriever.embedding.timeout_ms);
        read_opt(*e, "max_retries", c.retriever.embedding.max_retries);
        read_opt(*e, "backoff_base_ms", c.retriever.embedding.backoff_base_ms);
      }
      if (c.retriever.k < 1) throw ConfigError("retriever.k must be >= 1");
    }
    if (const auto it = j.find("perturbation"); it != j.end()) {
      const Json& p = *it;
      read_opt(p, "kind", c.perturbation.kind);
      read_opt(p, "rate", c.perturbation.rate);
      if (const auto ops = p.find("ops"); ops != p.end() && !ops->is_null()) {
        c.perturbation.ops = ops_from_json(*ops);
      }
      if (p.contains("field")) {
        const auto f = p["field"].get<std::string>();
        if (f == "context") {
          c.perturbation.field = PerturbField::context;
        } else if (f == "response") {
          c.perturbation.field = PerturbField::response;
        } else {
          throw ConfigError("perturbation.field must be context or response");
        }
      }
      const auto& kind = c.perturbation.kind;
      if (kind != "none" && kind != "counterfactual" && kind != "misspelling") {
        throw ConfigError("perturbation.kind must be none, counterfactual or misspelling");
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json PipelineConfig::to_json() const {
  Json extra = Json::object();
  for (const auto& [name, path] : paths.extra_tests) extra[name] = path.string();
  Json limits_json = Json::object();
  for (const auto& [task_key, l] : limits) {
    limits_json[std::string(oncobench::to_string(task_key))] = {
        {"max_input_tokens", l.max_input_tokens},
        {"max_new_tokens", l.max_new_tokens},
        {"temperature", l.temperature}};
  }
  std::vector<std::string> ops;
  for (auto op : perturbation.ops) ops.emplace_back(oncobench::to_string(op));
  return Json{
      {"seed", seed},
      {"task", std::string(oncobench::to_string(task))},
      {"run_id", run_id},
      {"overwrite", overwrite},
      {"paths",
       {{"corpus", paths.corpus.string()},
        {"annotations", paths.annotations.string()},
        {"datasets", paths.datasets.string()},
        {"runs", paths.runs.string()},
        {"cache", paths.cache.string()},
        {"train", paths.train.string()},
        {"test", paths.test.string()},
        {"extra_tests", extra}}},
      {"limits", limits_json},
      {"dataset",
       {{"ratios", {dataset.ratios.train, dataset.ratios.validation, dataset.ratios.test}},
        {"negatives_per_sentence", dataset.negatives_per_sentence},
        {"synthetic", dataset.synthetic ? Json(*dataset.synthetic) : Json(nullptr)}}},
      {"backend",
       {{"kind", std::string(oncobench::to_string(backend.kind))},
        {"url", backend.url},
        {"timeout_ms", backend.timeout_ms},
        {"max_retries", backend.max_retries},
        {"max_in_flight", backend.max_in_flight},
        {"backoff_base_ms", backend.backoff_base_ms},
        {"replay_path", backend.replay_path},
        {"echo_text", backend.echo_text ? Json(*backend.echo_text) : Json(nullptr)}}},
      {"retriever",
       {{"method", std::string(oncobench::to_string(retriever.method))},
        {"k", retriever.k},
        {"k1", retriever.k1},
        {"b", retriever.b},
        {"batch_size", retriever.batch_size},
        {"max_in_flight", retriever.max_in_flight},
        {"embedding",
         {{"url", retriever.embedding.url},
          {"source_tag", retriever.embedding.source_tag},
          {"timeout_ms", retriever.embedding.timeout_ms},
          {"max_retries", retriever.embedding.max_retries},
          {"backoff_base_ms", retriever.embedding.backoff_base_ms}}}}},
      {"perturbation",
       {{"kind", perturbation.kind},
        {"rate", perturbation.rate},
        {"ops", ops},
        {"field", perturbation.field == PerturbField::context ? "context" : "response"}}},
  };
}

fs::path PipelineConfig::dataset_dir() const {
  return paths.datasets / std::string(oncobench::to_string(task));
}

PipelineConfig load_config(const fs::path& config_path, const Json& overrides) {
  Json base = Json::object();
  if (!config_path.empty()) {
    try {
      base = Json::parse(read_file(config_path));
    } catch (const Json::parse_error& e) {
      throw ConfigError(config_path.string() + ": " + e.what());
    }
  }
  if (!overrides.is_null()) base.merge_patch(overrides);
  return PipelineConfig::from_json(base);
}

// --- build-dataset -------------------------------------------------------------

namespace {

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

bool valid_slot_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

std::string rate_tag(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rate);
  return buf;
}

}  // namespace

Json cmd_build_dataset(const PipelineConfig& config) {
  DocumentSet documents;
  std::vector<EntityAnnotation> annotations;
  std::string source;
  const fs::path dir = config.dataset_dir();
  if (config.dataset.synthetic) {
    auto corpus = generate_synthetic_corpus(*config.dataset.synthetic, config.seed);
    documents = std::move(corpus.documents);
    annotations = std::move(corpus.annotations);
    source = "synthetic:" + std::to_string(*config.dataset.synthetic);
    write_documents(documents, dir / "corpus" / "documents.jsonl");
    write_annotations(annotations, dir / "corpus" / "annotations.jsonl");
  } else {
    if (config.paths.corpus.empty()) {
      throw ValidationError("no corpus: set paths.corpus or use --synthetic N");
    }
    documents = read_documents(config.paths.corpus);
    if (!config.paths.annotations.empty()) annotations = read_annotations(config.paths.annotations);
    source = config.paths.corpus.string();
  }

  std::unordered_map<std::string, std::vector<EntityAnnotation>> by_doc;
  std::unordered_map<std::string, const Document*> doc_index;
  for (const auto& d : documents) doc_index[d.id] = &d;
  for (auto& a : annotations) {
    if (!doc_index.count(a.document_id)) {
      throw ValidationError("annotation references unknown document " + a.document_id);
    }
    by_doc[a.document_id].push_back(a);
  }

  std::vector<InstructionInstance> instances;
  for (const auto& doc : documents) {
    if (config.task == Task::phenotype_qa) {
      auto qa = ner_to_qa(doc, by_doc[doc.id], config.dataset.negatives_per_sentence, config.seed);
      instances.insert(instances.end(), std::make_move_iterator(qa.begin()),
                       std::make_move_iterator(qa.end()));
    } else {
      auto dx = doc.sections.find(std::string(kDiagnosisSection));
      if (dx == doc.sections.end() || trim(dx->second).empty()) continue;
      const auto ctx = DiagnosisContext::from_sections(doc.sections);
      if (ctx.empty()) continue;
      instances.push_back(build_diagnosis_instance(doc.id, ctx, dx->second));
    }
  }
  if (instances.empty()) throw ValidationError("corpus produced no instances for this task");

  const DatasetSplit split = split_dataset(instances, config.dataset.ratios, config.seed);
  write_instances(split.train, dir / "train.jsonl");
  write_instances(split.validation, dir / "validation.jsonl");
  write_instances(split.test, dir / "test.jsonl");

  Json extra = Json::object();
  for (const auto& [name, path] : config.paths.extra_tests) {
    if (!valid_slot_name(name)) throw ValidationError("invalid extra test slot name: " + name);
    auto extra_instances = read_instances(path);
    for (const auto& inst : extra_instances) {
      if (inst.task != config.task) {
        throw ValidationError("extra test " + name + ": instance " + inst.id + " has task " +
                              std::string(to_string(inst.task)));
      }
    }
    const fs::path target = dir / ("test_" + name + ".jsonl");
    write_instances(extra_instances, target);
    extra[name] = {{"file", target.string()}, {"count", extra_instances.size()}};
  }

  OrderedJson manifest;
  manifest["task"] = std::string(to_string(config.task));
  manifest["seed"] = config.seed;
  manifest["ratios"] = {split.ratios.train, split.ratios.validation, split.ratios.test};
  manifest["source"] = source;
  manifest["total"] = instances.size();
  manifest["counts"] = {{"train", split.train.size()},
                        {"validation", split.validation.size()},
                        {"test", split.test.size()}};
  manifest["extra_tests"] = OrderedJson::parse(extra.dump());
  write_file_atomic(dir / "split.json", manifest.dump(2) + "\n");
  return Json::parse(manifest.dump());
}

// --- perturb -------------------------------------------------------------------

Json cmd_perturb(const PipelineConfig& config, const fs::path& input_arg, const fs::path& output_arg) {
  const auto& p = config.perturbation;
  if (p.kind != "counterfactual" && p.kind != "misspelling") {
    throw ValidationError("perturb needs kind counterfactual or misspelling");
  }
  if (!(p.rate >= 0.0 && p.rate <= 1.0)) {
    throw ValidationError("rate must lie in [0, 1] (got " + std::to_string(p.rate) + ")");
  }
  const fs::path input = input_arg.empty() ? config.dataset_dir() / "train.jsonl" : input_arg;
  fs::path output = output_arg;
  if (output.empty()) {
    output = input.parent_path() / (input.stem().string() + "." + p.kind + "-" + rate_tag(p.rate) + ".jsonl");
  }
  fs::path log_path = output.parent_path() / (output.stem().string() + ".log.jsonl");

  const auto instances = read_instances(input);
  std::vector<InstructionInstance> out;
  PerturbationLog log;
  if (p.kind == "counterfactual") {
    auto r = corrupt_labels(instances, {p.rate, config.seed});
    out = std::move(r.instances);
    log = std::move(r.log);
  } else {
    auto r = perturb_dataset(instances, p.field, {p.rate, config.seed, p.ops});
    out = std::move(r.instances);
    log = std::move(r.log);
  }
  write_instances(out, output);
  write_log(log, log_path);
  return Json{{"kind", p.kind},
              {"rate", p.rate},
              {"seed", config.seed},
              {"input", input.string()},
              {"output", output.string()},
              {"log", log_path.string()},
              {"n_instances", out.size()},
              {"n_entries", log.entries.size()}};
}

// --- embed ---------------------------------------------------------------------

namespace {

fs::path train_path(const PipelineConfig& config) {
  return config.paths.train.empty() ? config.dataset_dir() / "train.jsonl" : config.paths.train;
}

fs::path test_path(const PipelineConfig& config) {
  return config.paths.test.empty() ? config.dataset_dir() / "test.jsonl" : config.paths.test;
}

fs::path cache_prefix(const PipelineConfig& config, const fs::path& dataset_file) {
  return config.paths.cache / std::string(to_string(config.task)) / dataset_file.stem();
}

EmbeddingMatrix embed_file(const PipelineConfig& config, const fs::path& file,
                           std::span<const InstructionInstance> instances) {
  std::vector<std::string> texts;
  texts.reserve(instances.size());
  for (const auto& inst : instances) texts.push_back(inst.context);
  HttpEmbedder embedder(config.retriever.embedding);
  EmbedOptions options{config.retriever.batch_size, config.retriever.max_in_flight,
                       cache_prefix(config, file)};
  return embed_corpus(texts, embedder, options);
}

}  // namespace

Json cmd_embed(const PipelineConfig& config) {
  if (config.retriever.embedding.url.empty()) {
    throw ConfigError("embedding endpoint URL is required (retriever.embedding.url)");
  }
  Json summary = Json::object();
  for (const fs::path& file : {train_path(config), test_path(config)}) {
    const auto instances = read_instances(file);
    if (instances.empty()) continue;
    const auto matrix = embed_file(config, file, instances);
    summary[file.stem().string()] = {{"count", matrix.count()},
                                     {"dim", matrix.dim()},
                                     {"cache", cache_prefix(config, file).string()}};
  }
  return summary;
}

// --- run -----------------------------------------------------------------------

namespace {

std::string derive_run_id(const PipelineConfig& c) {
  std::string id = std::string(to_string(c.task)) + "-" + std::string(to_string(c.backend.kind)) + "-" +
                   std::string(to_string(c.retriever.method));
  if (c.retriever.method != RetrievalMethod::none) id += std::to_string(c.retriever.k);
  if (c.perturbation.kind != "none") id += "-" + c.perturbation.kind + rate_tag(c.perturbation.rate);
  id += "-s" + std::to_string(c.seed);
  return id;
}

}  // namespace

Json cmd_run(const PipelineConfig& config) {
  const std::string run_id = config.run_id.empty() ? derive_run_id(config) : config.run_id;
  if (!valid_slot_name(run_id)) throw ValidationError("invalid run id: " + run_id);
  const fs::path run_dir = config.paths.runs / run_id;
  if (fs::exists(run_dir / "manifest.json") && !config.overwrite) {
    throw ValidationError("run " + run_id + " already exists (use overwrite to replace it)");
  }

  const fs::path test_file = test_path(config);
  const auto test = read_instances(test_file);
  if (test.empty()) throw ValidationError("test set " + test_file.string() + " is empty");

  // Backend before anything else touches the run directory.
  auto backend = make_backend(config.backend);
  backend->check_ready();

  std::vector<InstructionInstance> train;
  std::optional<LexicalIndex> lexical;
  std::optional<EmbeddingMatrix> train_vectors, test_vectors;
  const fs::path train_file = train_path(config);
  const auto method = config.retriever.method;
  if (method != RetrievalMethod::none) {
    train = read_instances(train_file);
    if (train.empty()) throw ValidationError("retrieval corpus " + train_file.string() + " is empty");
    if (method == RetrievalMethod::lexical) {
      lexical = LexicalIndex::build(train, config.retriever.k1, config.retriever.b);
    } else if (method == RetrievalMethod::dense) {
      if (config.retriever.embedding.url.empty()) {
        throw ConfigError("dense retrieval requires retriever.embedding.url");
      }
      train_vectors = embed_file(config, train_file, train);
      test_vectors = embed_file(config, test_file, test);
    }
  }
  RetrievalState state{train, lexical ? &*lexical : nullptr, train_vectors ? &*train_vectors : nullptr};

  const TaskLimits limits = config.limits.at(config.task);
  std::vector<GenerationRequest> requests;
  std::unordered_map<std::string, bool> truncated;
  requests.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& inst = test[i];
    std::vector<InstructionInstance> examples;
    if (method != RetrievalMethod::none) {
      std::span<const float> qv;
      if (test_vectors) qv = test_vectors->row(i);
      for (const auto& hit : retrieve_topk(inst, config.retriever.k, method, state, config.seed, qv)) {
        examples.push_back(train[hit.ordinal]);
      }
    }
    FittedPrompt fitted = fit_prompt(inst, examples, limits.max_input_tokens);
    truncated[inst.id] = fitted.truncated;
    requests.push_back({inst.id, std::move(fitted.prompt.text), limits.max_input_tokens,
                        limits.max_new_tokens, limits.temperature,
                        static_cast<std::int64_t>(config.seed)});
  }

  RunLock lock(run_dir);
  std::error_code ec;
  fs::remove(run_dir / "manifest.json", ec);
  const std::string started_at = utc_timestamp();
  BatchResult batch = run_batch(requests, *backend, config.backend.max_in_flight);
  const std::string finished_at = utc_timestamp();
  std::size_t n_truncated = 0;
  for (auto& r : batch.records) {
    r.truncated = truncated[r.instance_id];
    if (r.truncated) ++n_truncated;
  }

  std::vector<Candidate> candidates;
  candidates.reserve(batch.records.size());
  for (const auto& r : batch.records) candidates.push_back({r.instance_id, r.output});
  std::map<std::string, std::string> gold;
  for (const auto& inst : test) gold[inst.id] = inst.response;
  CorpusScores scores = score_corpus(candidates, gold, match_mode_for(config.task));
  scores.report.task = std::string(to_string(config.task));
  scores.report.retriever = std::string(to_string(method));
  scores.report.perturbation_kind = config.perturbation.kind;
  scores.report.perturbation_rate = config.perturbation.kind == "none" ? 0.0 : config.perturbation.rate;

  write_file_atomic(run_dir / "records.jsonl", records_to_jsonl(batch.records));
  write_file_atomic(run_dir / "scores.json", scores_to_json(scores));
  std::string ref = "test=" + test_file.string() + " fnv1a64=" + file_hash(test_file) + "\n";
  if (method != RetrievalMethod::none) {
    ref += "train=" + train_file.string() + " fnv1a64=" + file_hash(train_file) + "\n";
  }
  write_file_atomic(run_dir / "dataset_ref.txt", ref);

  RunManifest manifest;
  manifest.run_id = run_id;
  manifest.task = scores.report.task;
  manifest.backend_tag = backend->tag();
  manifest.retriever = scores.report.retriever;
  manifest.k = method == RetrievalMethod::none ? 0 : config.retriever.k;
  manifest.perturbation_kind = scores.report.perturbation_kind;
  manifest.perturbation_rate = scores.report.perturbation_rate;
  manifest.seed = config.seed;
  manifest.started_at = started_at;
  manifest.finished_at = finished_at;
  manifest.wall_clock_ms = batch.wall_clock_ms;
  manifest.n_instances = batch.records.size();
  manifest.n_failed = batch.n_failed;
  manifest.n_truncated = n_truncated;
  manifest.temperature = limits.temperature;
  manifest.decoding_note =
      limits.temperature == 0.0 ? "greedy decoding (temperature 0); sampling settings are an assumption"
                                : "sampled decoding";
  manifest.dataset = test_file.string();
  // Written last: a directory without manifest.json is an incomplete run.
  write_file_atomic(run_dir / "manifest.json", to_json(manifest).dump(2) + "\n");

  Json summary = Json::parse(to_json(manifest).dump());
  summary["report"] = to_json(scores.report);
  summary["run_dir"] = run_dir.string();
  return summary;
}

// --- report --------------------------------------------------------------------

Json cmd_report(const PipelineConfig& config, TableKind kind, EmitFormat format, const fs::path& output) {
  const RunStore store = RunStore::load(config.paths.runs);
  if (store.empty()) throw ValidationError("no complete runs under " + config.paths.runs.string());
  const Table table = build_table({kind, {}}, store);
  fs::path out = output;
  if (out.empty()) {
    out = config.paths.runs / ("table_" + std::string(to_string(kind)) +
                               (format == EmitFormat::csv ? ".csv" : ".md"));
  }
  emit(table, format, out);
  return Json{{"kind", std::string(to_string(kind))}, {"rows", table.rows.size()}, {"output", out.string()}};
}

}  // namespace oncobench
