#include "oncobench/oncobench.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "oncobench/corpus.hpp"
#include "oncobench/error.hpp"
#include "oncobench/metrics.hpp"
#include "oncobench/pipeline.hpp"

struct ob_session {
  oncobench::PipelineConfig config;
};

struct ob_dataset {
  std::vector<oncobench::InstructionInstance> instances;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ob_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return OB_OK;
  } catch (const oncobench::Error& e) {
    g_last_error = e.what();
    return static_cast<ob_status>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return OB_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return OB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return OB_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_summary(const nlohmann::json& summary, char** out) {
  if (out != nullptr) *out = dup_string(summary.dump(2));
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw oncobench::ValidationError(std::string(what) + " must not be NULL");
}

std::string str_or_empty(const char* s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char* ob_version(void) { return "0.1.0"; }

const char* ob_last_error(void) { return g_last_error.c_str(); }

void ob_string_free(char* s) { std::free(s); }

ob_status ob_session_create(const char* config_path, const char* overrides_json, ob_session** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    nlohmann::json overrides;
    if (overrides_json != nullptr && *overrides_json != '\0') {
      try {
        overrides = nlohmann::json::parse(overrides_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw oncobench::ConfigError(std::string("overrides: ") + e.what());
      }
    }
    auto session = std::make_unique<ob_session>();
    session->config = oncobench::load_config(str_or_empty(config_path), overrides);
    *out = session.release();
  });
}

void ob_session_destroy(ob_session* session) { delete session; }

ob_status ob_session_config(const ob_session* session, char** config_json) {
  return guarded([&] {
    require(session, "session");
    require(config_json, "config_json");
    *config_json = dup_string(session->config.to_json().dump(2));
  });
}

ob_status ob_build_dataset(ob_session* session, char** summary_json) {
  return guarded([&] {
    require(session, "session");
    put_summary(oncobench::cmd_build_dataset(session->config), summary_json);
  });
}

ob_status ob_perturb(ob_session* session, const char* input_path, const char* output_path,
                     char** summary_json) {
  return guarded([&] {
    require(session, "session");
    put_summary(oncobench::cmd_perturb(session->config, str_or_empty(input_path),
                                       str_or_empty(output_path)),
                summary_json);
  });
}

ob_status ob_embed(ob_session* session, char** summary_json) {
  return guarded([&] {
    require(session, "session");
    put_summary(oncobench::cmd_embed(session->config), summary_json);
  });
}

ob_status ob_run(ob_session* session, char** summary_json) {
  return guarded([&] {
    require(session, "session");
    put_summary(oncobench::cmd_run(session->config), summary_json);
  });
}

ob_status ob_report(ob_session* session, const char* kind, const char* format,
                    const char* output_path, char** summary_json) {
  return guarded([&] {
    require(session, "session");
    const auto table_kind = oncobench::parse_table_kind(kind ? kind : "main");
    const auto emit_format = oncobench::parse_emit_format(format ? format : "markdown");
    put_summary(oncobench::cmd_report(session->config, table_kind, emit_format,
                                      str_or_empty(output_path)),
                summary_json);
  });
}

ob_status ob_dataset_read(const char* path, ob_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto ds = std::make_unique<ob_dataset>();
    ds->instances = oncobench::read_instances(path);
    *out = ds.release();
  });
}

void ob_dataset_free(ob_dataset* dataset) { delete dataset; }

size_t ob_dataset_size(const ob_dataset* dataset) {
  return dataset == nullptr ? 0 : dataset->instances.size();
}

ob_status ob_dataset_instance_json(const ob_dataset* dataset, size_t index, char** instance_json) {
  return guarded([&] {
    require(dataset, "dataset");
    require(instance_json, "instance_json");
    if (index >= dataset->instances.size()) {
      throw oncobench::ValidationError("instance index " + std::to_string(index) + " out of range");
    }
    *instance_json = dup_string(oncobench::serialize_instance(dataset->instances[index]));
  });
}

ob_status ob_dataset_write(const ob_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    oncobench::write_instances(dataset->instances, path);
  });
}

ob_status ob_exact_match(const char* candidate, const char* reference, int set_mode, int* out) {
  return guarded([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    require(out, "out");
    *out = oncobench::exact_match(candidate, reference,
                                  set_mode ? oncobench::MatchMode::set : oncobench::MatchMode::sequence);
  });
}

ob_status ob_bleu2(const char* candidate, const char* reference, double* out) {
  return guarded([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    require(out, "out");
    *out = oncobench::bleu2(oncobench::normalize(candidate), oncobench::normalize(reference));
  });
}

ob_status ob_rouge_l(const char* candidate, const char* reference, double* precision, double* recall,
                     double* f1) {
  return guarded([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    const auto t = oncobench::rouge_l(oncobench::normalize(candidate), oncobench::normalize(reference));
    if (precision) *precision = t.precision;
    if (recall) *recall = t.recall;
    if (f1) *f1 = t.f1;
  });
}

ob_status ob_average_f1(double em_f1, double bleu_f1, double rouge_f1, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = oncobench::average_f1(em_f1, bleu_f1, rouge_f1);
  });
}

}  // extern "C"
