#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oncobench/corpus.hpp"

namespace oncobench {

struct GenerationRequest {
  std::string instance_id;
  std::string prompt;
  std::size_t max_input_tokens = 1500;
  std::size_t max_new_tokens = 50;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

void validate(const GenerationRequest& request);

struct GenerationRecord {
  std::string instance_id;
  std::string output;
  std::int64_t latency_ms = 0;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  std::string backend_tag;
  int attempt_count = 1;
  bool failed = false;
  std::string error;
  bool truncated = false;  // prompt was cut to fit max_input_tokens

  bool operator==(const GenerationRecord&) const = default;
};

OrderedJson to_json(const GenerationRecord& record);
GenerationRecord record_from_json(const Json& j);
std::string records_to_jsonl(std::span<const GenerationRecord> records);
std::vector<GenerationRecord> read_records(const std::filesystem::path& path);

enum class BackendKind { http, replay, echo };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct BackendConfig {
  BackendKind kind = BackendKind::echo;
  std::string url;
  int timeout_ms = 60000;
  int max_retries = 3;
  std::size_t max_in_flight = 4;
  int backoff_base_ms = 500;
  std::string replay_path;
  std::optional<std::string> echo_text;  // echo: constant output, else the prompt's last line

  /// http requires url; replay requires replay_path.
  void validate() const;
};

/// Per-task request defaults.
struct TaskLimits {
  std::size_t max_input_tokens = 1500;
  std::size_t max_new_tokens = 50;
  double temperature = 0.0;
};

TaskLimits default_limits(Task task);

class Backend {
 public:
  virtual ~Backend() = default;
  /// Thread-safe. Replay misses throw BackendError; exhausted HTTP retries
  /// return a record with failed = true and empty output.
  virtual GenerationRecord generate(const GenerationRequest& request) const = 0;
  virtual std::string tag() const = 0;
  /// Throws BackendError when the backend cannot serve requests at all.
  virtual void check_ready() const {}
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// Replay source: JSON-lines {"instance_id", "output"}. Lines carrying extra
/// keys (records.jsonl of an earlier run) are accepted.
std::map<std::string, std::string> read_replay(const std::filesystem::path& path);
void write_replay(const std::map<std::string, std::string>& outputs,
                  const std::filesystem::path& path);

GenerationRecord generate(const GenerationRequest& request, const BackendConfig& config);

struct BatchResult {
  std::vector<GenerationRecord> records;  // sorted by instance_id
  std::int64_t wall_clock_ms = 0;
  std::size_t n_failed = 0;
};

/// Bounded-parallel map: at most max_in_flight requests outstanding.
/// Individual failures become failed records; the batch always completes.
BatchResult run_batch(std::span<const GenerationRequest> requests, const Backend& backend,
                      std::size_t max_in_flight);
BatchResult run_batch(std::span<const GenerationRequest> requests, const BackendConfig& config);

}  // namespace oncobench
