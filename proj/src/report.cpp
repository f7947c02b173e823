#include "oncobench/report.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "oncobench/error.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

namespace fs = std::filesystem;

OrderedJson to_json(const RunManifest& m) {
  OrderedJson j;
  j["run_id"] = m.run_id;
  j["task"] = m.task;
  j["backend_tag"] = m.backend_tag;
  j["retriever"] = m.retriever;
  j["k"] = m.k;
  j["perturbation"] = {{"kind", m.perturbation_kind}, {"rate", m.perturbation_rate}};
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["wall_clock_ms"] = m.wall_clock_ms;
  j["n_instances"] = m.n_instances;
  j["n_failed"] = m.n_failed;
  j["n_truncated"] = m.n_truncated;
  j["temperature"] = m.temperature;
  j["decoding_note"] = m.decoding_note;
  j["dataset"] = m.dataset;
  return j;
}

RunManifest manifest_from_json(const Json& j) {
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.task = j.at("task").get<std::string>();
    m.backend_tag = j.value("backend_tag", "");
    m.retriever = j.value("retriever", "none");
    m.k = j.value("k", std::size_t{0});
    if (j.contains("perturbation")) {
      m.perturbation_kind = j["perturbation"].value("kind", "none");
      m.perturbation_rate = j["perturbation"].value("rate", 0.0);
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    m.wall_clock_ms = j.value("wall_clock_ms", std::int64_t{0});
    if (m.wall_clock_ms < 0) throw ValidationError("run " + m.run_id + ": negative wall_clock_ms");
    m.n_instances = j.value("n_instances", std::size_t{0});
    m.n_failed = j.value("n_failed", std::size_t{0});
    m.n_truncated = j.value("n_truncated", std::size_t{0});
    m.temperature = j.value("temperature", 0.0);
    m.decoding_note = j.value("decoding_note", "");
    m.dataset = j.value("dataset", "");
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed run manifest: ") + e.what());
  }
}

RunStore RunStore::load(const fs::path& runs_dir) {
  RunStore store;
  if (!fs::exists(runs_dir)) return store;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    if (!fs::exists(dir / "manifest.json")) continue;
    StoredRun run;
    try {
      run.manifest = manifest_from_json(Json::parse(read_file(dir / "manifest.json")));
      run.report = report_from_json(Json::parse(read_file(dir / "scores.json")).at("report"));
    } catch (const Json::exception& e) {
      throw ValidationError("run " + dir.filename().string() + ": " + e.what());
    }
    store.add(std::move(run));
  }
  return store;
}

void RunStore::add(StoredRun run) {
  const std::string id = run.manifest.run_id;
  if (!runs_.emplace(id, std::move(run)).second) throw ValidationError("duplicate run id: " + id);
}

const StoredRun& RunStore::at(const std::string& run_id) const {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw ValidationError("unknown run: " + run_id);
  return it->second;
}

std::vector<std::string> RunStore::run_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, run] : runs_) ids.push_back(id);
  return ids;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create " + run_dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw IoError("run directory is locked by another writer: " + run_dir.string());
    throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string_view to_string(TableKind kind) {
  switch (kind) {
    case TableKind::main: return "main";
    case TableKind::robustness: return "robustness";
    case TableKind::retriever: return "retriever";
    case TableKind::timing: return "timing";
  }
  return "?";
}

TableKind parse_table_kind(std::string_view text) {
  if (text == "main") return TableKind::main;
  if (text == "robustness") return TableKind::robustness;
  if (text == "retriever") return TableKind::retriever;
  if (text == "timing") return TableKind::timing;
  throw ValidationError("unknown table kind: " + std::string(text));
}

std::string format_duration(std::int64_t milliseconds) {
  if (milliseconds < 0) throw ValidationError("negative duration");
  const std::int64_t total = milliseconds / 1000;
  const std::int64_t h = total / 3600;
  const std::int64_t m = (total % 3600) / 60;
  const std::int64_t s = total % 60;
  char buf[48];
  if (h > 0) {
    std::snprintf(buf, sizeof buf, "%lld:%02lld:%02lld", static_cast<long long>(h),
                  static_cast<long long>(m), static_cast<long long>(s));
  } else {
    std::snprintf(buf, sizeof buf, "%lld:%02lld", static_cast<long long>(m), static_cast<long long>(s));
  }
  return buf;
}

namespace {

const std::vector<std::string> kMetricHeader = {
    "EM P",      "EM R",      "EM F1",      "BLEU-2 P", "BLEU-2 R",
    "BLEU-2 F1", "ROUGE-L P", "ROUGE-L R", "ROUGE-L F1", "Average F1"};

void append_metrics(std::vector<Cell>& row, const MetricReport& r) {
  for (const MetricTriple* t : {&r.exact_match, &r.bleu2, &r.rouge_l}) {
    row.emplace_back(t->precision);
    row.emplace_back(t->recall);
    row.emplace_back(t->f1);
  }
  row.emplace_back(r.average_f1);
}

std::vector<const StoredRun*> select_runs(const TableSpec& spec, const RunStore& store) {
  std::vector<std::string> ids = spec.run_ids.empty() ? store.run_ids() : spec.run_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<const StoredRun*> runs;
  for (const auto& id : ids) {
    if (!store.contains(id)) throw ValidationError("missing run: " + id);
    runs.push_back(&store.at(id));
  }
  return runs;
}

}  // namespace

Table build_table(const TableSpec& spec, const RunStore& store) {
  auto runs = select_runs(spec, store);
  Table table;
  switch (spec.kind) {
    case TableKind::main: {
      table.header = {"Run"};
      table.header.insert(table.header.end(), kMetricHeader.begin(), kMetricHeader.end());
      for (const auto* run : runs) {
        std::vector<Cell> row{run->manifest.run_id};
        append_metrics(row, run->report);
        table.rows.push_back(std::move(row));
      }
      break;
    }
    case TableKind::robustness: {
      table.header = {"Rate", "Run", "Perturbation"};
      table.header.insert(table.header.end(), kMetricHeader.begin(), kMetricHeader.end());
      table.header.push_back("Group Average F1");
      std::stable_sort(runs.begin(), runs.end(), [](const StoredRun* a, const StoredRun* b) {
        return a->manifest.perturbation_rate < b->manifest.perturbation_rate;
      });
      std::size_t i = 0;
      while (i < runs.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < runs.size() &&
               runs[j]->manifest.perturbation_rate == runs[i]->manifest.perturbation_rate) {
          sum += runs[j]->report.average_f1;
          ++j;
        }
        const double group_avg = sum / static_cast<double>(j - i);
        for (std::size_t r = i; r < j; ++r) {
          const auto& m = runs[r]->manifest;
          std::vector<Cell> row{format_2dp(m.perturbation_rate * 100.0) + "%", m.run_id,
                                m.perturbation_kind};
          append_metrics(row, runs[r]->report);
          row.emplace_back(group_avg);
          table.rows.push_back(std::move(row));
        }
        i = j;
      }
      break;
    }
    case TableKind::retriever: {
      table.header = {"Retriever", "k", "Run"};
      table.header.insert(table.header.end(), kMetricHeader.begin(), kMetricHeader.end());
      std::stable_sort(runs.begin(), runs.end(), [](const StoredRun* a, const StoredRun* b) {
        return a->manifest.retriever < b->manifest.retriever;
      });
      for (const auto* run : runs) {
        std::vector<Cell> row{run->manifest.retriever, std::to_string(run->manifest.k),
                              run->manifest.run_id};
        append_metrics(row, run->report);
        table.rows.push_back(std::move(row));
      }
      break;
    }
    case TableKind::timing: {
      table.header = {"Run", "Task", "Backend", "Average F1", "Time", "Instances"};
      for (const auto* run : runs) {
        const auto& m = run->manifest;
        table.rows.push_back({m.run_id, m.task, m.backend_tag, run->report.average_f1,
                              format_duration(m.wall_clock_ms), std::to_string(m.n_instances)});
      }
      break;
    }
  }
  return table;
}

EmitFormat parse_emit_format(std::string_view text) {
  if (text == "csv") return EmitFormat::csv;
  if (text == "markdown" || text == "md") return EmitFormat::markdown;
  throw ValidationError("unknown output format: " + std::string(text));
}

namespace {

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_2dp(*d);
  return std::get<std::string>(cell);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string md_field(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

}  // namespace

std::string render(const Table& table, EmitFormat format) {
  if (table.rows.empty()) throw ValidationError("refusing to emit an empty table");
  std::string out;
  if (format == EmitFormat::csv) {
    auto line = [&](const std::vector<std::string>& fields) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_field(fields[i]);
      }
      out += '\n';
    };
    line(table.header);
    for (const auto& row : table.rows) {
      std::vector<std::string> fields;
      for (const auto& c : row) fields.push_back(cell_text(c));
      line(fields);
    }
    return out;
  }
  auto line = [&](const std::vector<std::string>& fields) {
    out += '|';
    for (const auto& f : fields) out += ' ' + md_field(f) + " |";
    out += '\n';
  };
  line(table.header);
  out += '|';
  for (std::size_t i = 0; i < table.header.size(); ++i) out += " --- |";
  out += '\n';
  for (const auto& row : table.rows) {
    std::vector<std::string> fields;
    for (const auto& c : row) fields.push_back(cell_text(c));
    line(fields);
  }
  return out;
}

void emit(const Table& table, EmitFormat format, const fs::path& path) {
  write_file_atomic(path, render(table, format));
}

}  // namespace oncobench
