#include "oncobench/genclient.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>
#include <unordered_set>

#include "http_util.hpp"
#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

void validate(const GenerationRequest& request) {
  if (request.instance_id.empty()) throw ValidationError("generation request without instance id");
  if (request.prompt.empty()) throw ValidationError("empty prompt for " + request.instance_id);
  if (request.max_new_tokens < 1) throw ValidationError("max_new_tokens must be >= 1");
  if (!(request.temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
}

OrderedJson to_json(const GenerationRecord& r) {
  OrderedJson j;
  j["instance_id"] = r.instance_id;
  j["output"] = r.output;
  j["latency_ms"] = r.latency_ms;
  j["prompt_tokens"] = r.prompt_tokens ? OrderedJson(*r.prompt_tokens) : OrderedJson(nullptr);
  j["completion_tokens"] = r.completion_tokens ? OrderedJson(*r.completion_tokens) : OrderedJson(nullptr);
  j["backend_tag"] = r.backend_tag;
  j["attempt_count"] = r.attempt_count;
  j["failed"] = r.failed;
  j["error"] = r.error;
  j["truncated"] = r.truncated;
  return j;
}

GenerationRecord record_from_json(const Json& j) {
  GenerationRecord r;
  r.instance_id = j.at("instance_id").get<std::string>();
  r.output = j.at("output").get<std::string>();
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  if (j.contains("prompt_tokens") && !j["prompt_tokens"].is_null()) r.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
  if (j.contains("completion_tokens") && !j["completion_tokens"].is_null()) {
    r.completion_tokens = j["completion_tokens"].get<std::int64_t>();
  }
  r.backend_tag = j.value("backend_tag", "");
  r.attempt_count = j.value("attempt_count", 1);
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  r.truncated = j.value("truncated", false);
  return r;
}

std::string records_to_jsonl(std::span<const GenerationRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<GenerationRecord> read_records(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      out.push_back(record_from_json(Json::parse(lines[i])));
    } catch (const Json::exception& e) {
      throw ValidationError(path.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http: return "http";
    case BackendKind::replay: return "replay";
    case BackendKind::echo: return "echo";
  }
  return "?";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "http") return BackendKind::http;
  if (text == "replay") return BackendKind::replay;
  if (text == "echo") return BackendKind::echo;
  throw ValidationError("unknown backend: " + std::string(text));
}

void BackendConfig::validate() const {
  if (kind == BackendKind::http && url.empty()) throw ConfigError("http backend requires a url");
  if (kind == BackendKind::replay && replay_path.empty()) {
    throw ConfigError("replay backend requires a replay path");
  }
  if (timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

TaskLimits default_limits(Task task) {
  return task == Task::phenotype_qa ? TaskLimits{1500, 50, 0.0} : TaskLimits{1500, 500, 0.0};
}

std::map<std::string, std::string> read_replay(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = path.string() + " line " + std::to_string(i + 1) + ": ";
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const Json::parse_error& e) {
      throw ValidationError(where + "invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("instance_id") || !j["instance_id"].is_string() ||
        !j.contains("output") || !j["output"].is_string()) {
      throw ValidationError(where + "expected {\"instance_id\": string, \"output\": string}");
    }
    out[j["instance_id"].get<std::string>()] = j["output"].get<std::string>();
  }
  return out;
}

void write_replay(const std::map<std::string, std::string>& outputs,
                  const std::filesystem::path& path) {
  std::string out;
  for (const auto& [id, text] : outputs) {
    OrderedJson j;
    j["instance_id"] = id;
    j["output"] = text;
    out += j.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ms(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

class EchoBackend final : public Backend {
 public:
  explicit EchoBackend(std::optional<std::string> text) : text_(std::move(text)) {}

  GenerationRecord generate(const GenerationRequest& request) const override {
    const auto start = Clock::now();
    GenerationRecord r;
    r.instance_id = request.instance_id;
    r.backend_tag = tag();
    if (text_) {
      r.output = *text_;
    } else {
      const auto lines = split_lines(request.prompt);
      for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!trim(*it).empty()) {
          r.output = *it;
          break;
        }
      }
    }
    r.latency_ms = elapsed_ms(start);
    return r;
  }

  std::string tag() const override { return "echo"; }

 private:
  std::optional<std::string> text_;
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const std::string& path) : outputs_(read_replay(path)) {}

  GenerationRecord generate(const GenerationRequest& request) const override {
    const auto start = Clock::now();
    auto it = outputs_.find(request.instance_id);
    if (it == outputs_.end()) {
      throw BackendError("replay has no output for instance " + request.instance_id);
    }
    GenerationRecord r;
    r.instance_id = request.instance_id;
    r.output = it->second;
    r.backend_tag = tag();
    r.latency_ms = elapsed_ms(start);
    return r;
  }

  std::string tag() const override { return "replay"; }

 private:
  std::map<std::string, std::string> outputs_;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& config)
      : config_(config), token_(detail::token_from_env()) {}

  GenerationRecord generate(const GenerationRequest& request) const override {
    validate(request);
    const auto start = Clock::now();
    Json body{{"prompt", request.prompt},
              {"max_new_tokens", request.max_new_tokens},
              {"temperature", request.temperature},
              {"seed", request.seed ? Json(*request.seed) : Json(nullptr)}};
    GenerationRecord r;
    r.instance_id = request.instance_id;
    r.backend_tag = tag();
    detail::HttpOptions opts{config_.timeout_ms, config_.max_retries, config_.backoff_base_ms, token_};
    try {
      const auto response = detail::post_json(config_.url, body, opts);
      r.attempt_count = response.attempts;
      const Json& j = response.body;
      if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw BackendError("generation response lacks a string \"text\" field");
      }
      r.output = j["text"].get<std::string>();
      if (j.contains("prompt_tokens") && j["prompt_tokens"].is_number_integer()) {
        r.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
      }
      if (j.contains("completion_tokens") && j["completion_tokens"].is_number_integer()) {
        r.completion_tokens = j["completion_tokens"].get<std::int64_t>();
      }
    } catch (const BackendError& e) {
      r.failed = true;
      r.output.clear();
      r.error = e.what();
      r.attempt_count = 1 + config_.max_retries;
    }
    r.latency_ms = elapsed_ms(start);
    return r;
  }

  std::string tag() const override { return "http:" + config_.url; }

  void check_ready() const override {
    if (!detail::probe(config_.url, config_.timeout_ms)) {
      throw BackendError("generation endpoint unreachable: " + config_.url);
    }
  }

 private:
  BackendConfig config_;
  std::string token_;
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::echo: return std::make_unique<EchoBackend>(config.echo_text);
    case BackendKind::replay: return std::make_unique<ReplayBackend>(config.replay_path);
    case BackendKind::http: return std::make_unique<HttpBackend>(config);
  }
  throw ConfigError("unknown backend kind");
}

GenerationRecord generate(const GenerationRequest& request, const BackendConfig& config) {
  validate(request);
  return make_backend(config)->generate(request);
}

BatchResult run_batch(std::span<const GenerationRequest> requests, const Backend& backend,
                      std::size_t max_in_flight) {
  std::unordered_set<std::string_view> ids;
  for (const auto& r : requests) {
    validate(r);
    if (!ids.insert(r.instance_id).second) throw ValidationError("duplicate request id: " + r.instance_id);
  }

  const auto start = Clock::now();
  BatchResult result;
  result.records.resize(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      const auto t0 = Clock::now();
      GenerationRecord rec;
      try {
        rec = backend.generate(requests[i]);
      } catch (const std::exception& e) {
        rec = GenerationRecord{};
        rec.instance_id = requests[i].instance_id;
        rec.backend_tag = backend.tag();
        rec.failed = true;
        rec.error = e.what();
        rec.latency_ms = elapsed_ms(t0);
      }
      result.records[i] = std::move(rec);
    }
  };
  const std::size_t n_workers =
      requests.empty() ? 0 : std::clamp<std::size_t>(max_in_flight, 1, requests.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::sort(result.records.begin(), result.records.end(),
            [](const GenerationRecord& a, const GenerationRecord& b) { return a.instance_id < b.instance_id; });
  result.n_failed = static_cast<std::size_t>(std::count_if(
      result.records.begin(), result.records.end(), [](const GenerationRecord& r) { return r.failed; }));
  result.wall_clock_ms = elapsed_ms(start);
  return result;
}

BatchResult run_batch(std::span<const GenerationRequest> requests, const BackendConfig& config) {
  auto backend = make_backend(config);
  return run_batch(requests, *backend, config.max_in_flight);
}

}  // namespace oncobench
