#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "oncobench/metrics.hpp"

namespace oncobench {

struct RunManifest {
  std::string run_id;
  std::string task;
  std::string backend_tag;
  std::string retriever = "none";
  std::size_t k = 0;
  std::string perturbation_kind = "none";
  double perturbation_rate = 0.0;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::int64_t wall_clock_ms = 0;
  std::size_t n_instances = 0;
  std::size_t n_failed = 0;
  std::size_t n_truncated = 0;
  double temperature = 0.0;
  std::string decoding_note;
  std::string dataset;  // test file the run scored

  bool operator==(const RunManifest&) const = default;
};

OrderedJson to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const Json& j);

struct StoredRun {
  RunManifest manifest;
  MetricReport report;
};

/// Complete runs under a runs directory: runs/<run_id>/{manifest.json,
/// scores.json, records.jsonl, dataset_ref.txt}. Directories without a
/// manifest are partial and skipped.
class RunStore {
 public:
  static RunStore load(const std::filesystem::path& runs_dir);
  void add(StoredRun run);

  bool contains(const std::string& run_id) const { return runs_.count(run_id) != 0; }
  const StoredRun& at(const std::string& run_id) const;
  std::vector<std::string> run_ids() const;
  bool empty() const { return runs_.empty(); }

 private:
  std::map<std::string, StoredRun> runs_;
};

/// Exclusive per-run-directory lock (a `.lock` file created with O_EXCL),
/// released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

enum class TableKind { main, robustness, retriever, timing };

std::string_view to_string(TableKind kind);
TableKind parse_table_kind(std::string_view text);

struct TableSpec {
  TableKind kind = TableKind::main;
  std::vector<std::string> run_ids;  // empty selects every stored run
};

using Cell = std::variant<std::string, double>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

/// "h:mm:ss", or "m:ss" under one hour.
std::string format_duration(std::int64_t milliseconds);

Table build_table(const TableSpec& spec, const RunStore& store);

enum class EmitFormat { csv, markdown };

EmitFormat parse_emit_format(std::string_view text);
/// Numbers render with two decimals (half-up).
std::string render(const Table& table, EmitFormat format);
void emit(const Table& table, EmitFormat format, const std::filesystem::path& path);

}  // namespace oncobench
