#include <doctest.h>

#include <filesystem>
#include <set>

#include "local_server.hpp"
#include "oncobench/error.hpp"
#include "oncobench/pipeline.hpp"
#include "oncobench/util.hpp"

using namespace oncobench;
namespace fs = std::filesystem;

namespace {

PipelineConfig config_in(const fs::path& root) {
  fs::remove_all(root);
  Json j = {{"paths", {{"datasets", (root / "data").string()},
                       {"runs", (root / "runs").string()},
                       {"cache", (root / "cache").string()}}},
            {"dataset", {{"synthetic", 20}}},
            {"seed", 5}};
  return load_config({}, j);
}

std::map<std::string, std::string> gold_of(const fs::path& file) {
  std::map<std::string, std::string> out;
  for (const auto& inst : read_instances(file)) out[inst.id] = inst.response;
  return out;
}

}  // namespace

TEST_CASE("config merges overrides and rejects bad values") {
  auto c = load_config({}, Json{{"task", "diagnosis_generation"}, {"retriever", {{"method", "bm25"}, {"k", 5}}}});
  CHECK(c.task == Task::diagnosis_generation);
  CHECK(c.retriever.method == RetrievalMethod::lexical);
  CHECK(c.retriever.k == 5);
  CHECK(c.seed == 13);
  CHECK(c.limits.at(Task::diagnosis_generation).max_new_tokens == 500);
  auto round = PipelineConfig::from_json(c.to_json());
  CHECK(round.to_json() == c.to_json());
  CHECK_THROWS_AS(load_config({}, Json{{"task", "nope"}}), Error);
  CHECK_THROWS_AS(load_config({}, Json{{"retriever", {{"k", 0}}}}), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json", Json()), IoError);
}

TEST_CASE("build-dataset is deterministic") {
  auto c = config_in(fs::temp_directory_path() / "ob_pipe_build");
  auto summary = cmd_build_dataset(c);
  const auto train = read_file(c.dataset_dir() / "train.jsonl");
  const auto test = read_file(c.dataset_dir() / "test.jsonl");
  CHECK(summary["counts"]["train"].get<std::size_t>() > 0);
  cmd_build_dataset(c);
  CHECK(read_file(c.dataset_dir() / "train.jsonl") == train);
  CHECK(read_file(c.dataset_dir() / "test.jsonl") == test);
  CHECK(fs::exists(c.dataset_dir() / "split.json"));

  auto dx = c;
  dx.task = Task::diagnosis_generation;
  auto dsum = cmd_build_dataset(dx);
  CHECK(dsum["total"].get<std::size_t>() > 0);
  for (const auto& inst : read_instances(dx.dataset_dir() / "train.jsonl")) {
    CHECK(inst.id.ends_with(":dx"));
    CHECK(inst.context.find("Reason for visit:") != std::string::npos);
  }
}

TEST_CASE("extra test slots are validated and copied") {
  auto c = config_in(fs::temp_directory_path() / "ob_pipe_extra");
  cmd_build_dataset(c);
  c.paths.extra_tests["misspell"] = c.dataset_dir() / "test.jsonl";
  auto s = cmd_build_dataset(c);
  CHECK(fs::exists(c.dataset_dir() / "test_misspell.jsonl"));
  CHECK(s["extra_tests"]["misspell"]["count"].get<std::size_t>() > 0);
  c.paths.extra_tests = {{"bad name", c.dataset_dir() / "test.jsonl"}};
  CHECK_THROWS_AS(cmd_build_dataset(c), ValidationError);
}

TEST_CASE("run with gold replay scores 100 and is reproducible") {
  const fs::path root = fs::temp_directory_path() / "ob_pipe_run";
  auto c = config_in(root);
  cmd_build_dataset(c);
  write_replay(gold_of(c.dataset_dir() / "test.jsonl"), root / "gold.jsonl");
  c.backend.kind = BackendKind::replay;
  c.backend.replay_path = (root / "gold.jsonl").string();
  c.retriever.method = RetrievalMethod::lexical;
  c.retriever.k = 2;
  c.run_id = "gold";
  auto s = cmd_run(c);
  CHECK(s["report"]["average_f1"].get<double>() == 100.0);
  const auto scores = read_file(root / "runs" / "gold" / "scores.json");
  CHECK_THROWS_AS(cmd_run(c), ValidationError);

  // Replay the recorded run.
  auto again = c;
  again.backend.replay_path = (root / "runs" / "gold" / "records.jsonl").string();
  again.run_id = "again";
  cmd_run(again);
  CHECK(read_file(root / "runs" / "again" / "scores.json") == scores);

  auto rep = cmd_report(c, TableKind::main, EmitFormat::markdown, {});
  CHECK(rep["rows"] == 2);
  CHECK(read_file(rep["output"].get<std::string>()).find("100.00") != std::string::npos);
}

TEST_CASE("a failing backend leaves no run behind") {
  const fs::path root = fs::temp_directory_path() / "ob_pipe_fail";
  auto c = config_in(root);
  cmd_build_dataset(c);
  c.backend.kind = BackendKind::http;
  c.backend.url = "http://127.0.0.1:1/generate";
  c.backend.timeout_ms = 200;
  c.run_id = "down";
  CHECK_THROWS_AS(cmd_run(c), BackendError);
  CHECK_FALSE(fs::exists(root / "runs" / "down" / "manifest.json"));
  CHECK_THROWS_AS(cmd_report(c, TableKind::main, EmitFormat::csv, {}), ValidationError);
}

TEST_CASE("perturb writes data and log next to the input") {
  const fs::path root = fs::temp_directory_path() / "ob_pipe_perturb";
  auto c = config_in(root);
  cmd_build_dataset(c);
  c.perturbation.kind = "counterfactual";
  c.perturbation.rate = 0.4;
  auto s = cmd_perturb(c, {}, {});
  CHECK(fs::exists(s["output"].get<std::string>()));
  CHECK(fs::exists(s["log"].get<std::string>()));
  CHECK(s["n_entries"] == round_half_up_count(0.4, s["n_instances"].get<std::size_t>()));
  c.perturbation.kind = "misspelling";
  c.perturbation.rate = 0.08;
  auto m = cmd_perturb(c, {}, root / "m.jsonl");
  CHECK(m["output"] == (root / "m.jsonl").string());
  c.perturbation.kind = "none";
  CHECK_THROWS_AS(cmd_perturb(c, {}, {}), ValidationError);
}

TEST_CASE("dense retrieval through an embedding endpoint") {
  LocalServer srv;
  srv.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    Json vectors = Json::array();
    const Json body = Json::parse(req.body);
    for (const auto& t : body["texts"]) {
      const auto h = fnv1a64(t.get<std::string>());
      vectors.push_back({1.0 + static_cast<double>(h % 5), static_cast<double>((h >> 7) % 5)});
    }
    res.set_content(Json{{"vectors", vectors}}.dump(), "application/json");
  });
  srv.start();
  const fs::path root = fs::temp_directory_path() / "ob_pipe_dense";
  auto c = config_in(root);
  cmd_build_dataset(c);
  c.retriever.method = RetrievalMethod::dense;
  c.retriever.k = 3;
  c.retriever.embedding.url = srv.url("/embed");
  auto e = cmd_embed(c);
  CHECK(e["train"]["dim"] == 2);
  c.backend.echo_text = "left";
  auto s = cmd_run(c);
  CHECK(s["retriever"] == "dense");
  CHECK(s["k"] == 3);
}

TEST_CASE("rate zero perturbation copies the input byte for byte") {
  const fs::path root = fs::temp_directory_path() / "ob_pipe_rate0";
  auto c = config_in(root);
  cmd_build_dataset(c);
  for (const char* kind : {"counterfactual", "misspelling"}) {
    c.perturbation.kind = kind;
    c.perturbation.rate = 0.0;
    auto s = cmd_perturb(c, {}, root / (std::string(kind) + ".jsonl"));
    CHECK(read_file(s["output"].get<std::string>()) == read_file(c.dataset_dir() / "train.jsonl"));
    CHECK(s["n_entries"] == 0);
  }
}

TEST_CASE("manifests of retriever none and random differ only in retrieval fields") {
  const fs::path root = fs::temp_directory_path() / "ob_pipe_manifest";
  auto c = config_in(root);
  cmd_build_dataset(c);
  c.backend.echo_text = "left";
  cmd_run(c);
  c.retriever.method = RetrievalMethod::random;
  cmd_run(c);
  auto store = RunStore::load(root / "runs");
  REQUIRE(store.run_ids().size() == 2);
  auto a = to_json(store.at(store.run_ids()[0]).manifest);
  auto b = to_json(store.at(store.run_ids()[1]).manifest);
  const std::set<std::string> allowed = {"run_id", "retriever", "k", "started_at", "finished_at",
                                         "wall_clock_ms"};
  for (const auto& [key, value] : a.items()) {
    if (value != b[key]) CHECK_MESSAGE(allowed.count(key) == 1, key);
  }
  CHECK(a["retriever"] != b["retriever"]);
}
