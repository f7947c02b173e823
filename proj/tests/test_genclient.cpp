#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <thread>

#include "local_server.hpp"
#include "oncobench/error.hpp"
#include "oncobench/genclient.hpp"

using namespace oncobench;
namespace fs = std::filesystem;

namespace {

GenerationRequest req(std::string id, std::string prompt = "Context: x\nAnswer:") {
  GenerationRequest r;
  r.instance_id = std::move(id);
  r.prompt = std::move(prompt);
  return r;
}

class SlowBackend : public Backend {
 public:
  GenerationRecord generate(const GenerationRequest& request) const override {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    if (request.instance_id == "boom") throw BackendError("boom");
    GenerationRecord r;
    r.instance_id = request.instance_id;
    r.output = "ok";
    return r;
  }
  std::string tag() const override { return "slow"; }
  mutable std::atomic<int> in_flight{0};
  mutable std::atomic<int> peak{0};
};

}  // namespace

TEST_CASE("request validation") {
  auto r = req("a");
  CHECK_NOTHROW(validate(r));
  r.prompt.clear();
  CHECK_THROWS_AS(validate(r), ValidationError);
  r = req("");
  CHECK_THROWS_AS(validate(r), ValidationError);
  r = req("a");
  r.temperature = -1;
  CHECK_THROWS_AS(validate(r), ValidationError);
}

TEST_CASE("backend config validation") {
  BackendConfig c;
  c.kind = BackendKind::http;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.kind = BackendKind::replay;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_backend_kind("echo") == BackendKind::echo);
  CHECK_THROWS(parse_backend_kind("grpc"));
}

TEST_CASE("echo backend returns the last non-empty prompt line or a constant") {
  BackendConfig c;
  CHECK(generate(req("a", "one\ntwo\n\n"), c).output == "two");
  c.echo_text = "left";
  CHECK(generate(req("a"), c).output == "left");
}

TEST_CASE("replay backend serves recorded outputs and misses fail the record") {
  const auto path = fs::temp_directory_path() / "oncobench_replay_test.jsonl";
  write_replay({{"a", "left"}, {"b", "right"}}, path);
  CHECK(read_replay(path).size() == 2);
  BackendConfig c;
  c.kind = BackendKind::replay;
  c.replay_path = path.string();
  CHECK(generate(req("b"), c).output == "right");
  CHECK_THROWS_AS(generate(req("zz"), c), BackendError);

  std::vector<GenerationRequest> reqs = {req("b"), req("zz"), req("a")};
  auto batch = run_batch(reqs, c);
  REQUIRE(batch.records.size() == 3);
  CHECK(batch.records[0].instance_id == "a");
  CHECK(batch.records[2].instance_id == "zz");
  CHECK(batch.records[2].failed);
  CHECK(batch.n_failed == 1);
}

TEST_CASE("run_batch respects the in-flight bound and survives failures") {
  SlowBackend backend;
  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 24; ++i) reqs.push_back(req("r" + std::to_string(100 + i)));
  reqs.push_back(req("boom"));
  auto batch = run_batch(reqs, backend, 4);
  CHECK(backend.peak.load() <= 4);
  CHECK(backend.peak.load() >= 2);
  CHECK(batch.records.size() == 25);
  CHECK(batch.n_failed == 1);

  SlowBackend serial;
  run_batch(reqs, serial, 1);
  CHECK(serial.peak.load() == 1);

  std::vector<GenerationRequest> dup = {req("x"), req("x")};
  CHECK_THROWS_AS(run_batch(dup, serial, 2), ValidationError);
}

TEST_CASE("record json round-trip") {
  GenerationRecord r;
  r.instance_id = "a";
  r.output = "left";
  r.latency_ms = 12;
  r.prompt_tokens = 30;
  r.backend_tag = "echo";
  r.attempt_count = 2;
  auto back = record_from_json(Json::parse(to_json(r).dump()));
  CHECK(back == r);
}

TEST_CASE("http backend retries 5xx then succeeds") {
  LocalServer srv;
  std::atomic<int> hits{0};
  std::mutex mu;
  Json last_body;
  srv.server().Post("/generate", [&](const httplib::Request& rq, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      last_body = Json::parse(rq.body);
    }
    if (++hits <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"text":"left","prompt_tokens":5,"completion_tokens":1})", "application/json");
  });
  srv.server().Get("/generate", [](const httplib::Request&, httplib::Response& res) { res.status = 405; });
  srv.start();

  BackendConfig c;
  c.kind = BackendKind::http;
  c.url = srv.url("/generate");
  c.max_retries = 3;
  c.backoff_base_ms = 5;
  c.timeout_ms = 2000;
  auto backend = make_backend(c);
  CHECK_NOTHROW(backend->check_ready());
  auto r = backend->generate(req("a"));
  CHECK_FALSE(r.failed);
  CHECK(r.output == "left");
  CHECK(r.attempt_count == 3);
  CHECK(r.prompt_tokens == 5);
  CHECK(last_body["temperature"] == 0.0);
  CHECK(last_body["max_new_tokens"] == 50);
}

TEST_CASE("http backend gives up after retries and does not retry 4xx") {
  LocalServer srv;
  std::atomic<int> server_errors{0}, client_errors{0};
  srv.server().Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++server_errors;
    res.status = 500;
  });
  srv.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++client_errors;
    res.status = 400;
  });
  srv.start();

  BackendConfig c;
  c.kind = BackendKind::http;
  c.url = srv.url("/down");
  c.max_retries = 2;
  c.backoff_base_ms = 1;
  c.timeout_ms = 2000;
  auto r = make_backend(c)->generate(req("a"));
  CHECK(r.failed);
  CHECK(r.output.empty());
  CHECK(server_errors == 3);

  c.url = srv.url("/bad");
  auto b = make_backend(c)->generate(req("a"));
  CHECK(b.failed);
  CHECK(client_errors == 1);
}

TEST_CASE("unreachable endpoint fails readiness") {
  BackendConfig c;
  c.kind = BackendKind::http;
  c.url = "http://127.0.0.1:1/generate";
  c.timeout_ms = 300;
  CHECK_THROWS_AS(make_backend(c)->check_ready(), BackendError);
  c.url = "https://example.invalid/generate";
  CHECK_THROWS_AS(make_backend(c)->check_ready(), ConfigError);
}
