#include "oncobench/retrieve.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "http_util.hpp"
#include "oncobench/error.hpp"
#include "oncobench/metrics.hpp"
#include "oncobench/util.hpp"

namespace oncobench {

// --- lexical ---------------------------------------------------------------

LexicalIndex LexicalIndex::build(std::span<const InstructionInstance> corpus, double k1, double b) {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> docs;
  ids.reserve(corpus.size());
  docs.reserve(corpus.size());
  for (const auto& inst : corpus) {
    ids.push_back(inst.id);
    docs.push_back(normalize(inst.context).tokens());
  }
  return build_from_tokens(std::move(ids), docs, k1, b);
}

LexicalIndex LexicalIndex::build_from_tokens(std::vector<std::string> ids,
                                             const std::vector<std::vector<std::string>>& docs,
                                             double k1, double b) {
  if (docs.empty()) throw ValidationError("cannot index an empty corpus");
  if (ids.size() != docs.size()) throw ValidationError("ids and documents differ in count");
  if (!(k1 > 0.0)) throw ValidationError("BM25 k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("BM25 b must lie in [0, 1]");

  LexicalIndex index;
  index.ids_ = std::move(ids);
  index.k1_ = k1;
  index.b_ = b;
  index.doc_lengths_.reserve(docs.size());
  double total = 0.0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : docs[d]) ++tf[t];
    for (auto& [term, count] : tf) index.postings_[term].push_back({d, count});
    index.doc_lengths_.push_back(docs[d].size());
    total += static_cast<double>(docs[d].size());
  }
  // Documents are visited in ordinal order, so every postings list is sorted.
  index.avg_doc_length_ = total / static_cast<double>(docs.size());
  return index;
}

std::size_t LexicalIndex::doc_frequency(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? 0 : it->second.size();
}

std::span<const Posting> LexicalIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return {};
  return it->second;
}

double LexicalIndex::idf(std::string_view term) const {
  const double n = static_cast<double>(doc_count());
  const double df = static_cast<double>(doc_frequency(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25_score(std::span<const std::string> query_tokens, std::size_t doc_ordinal,
                  const LexicalIndex& index) {
  if (doc_ordinal >= index.doc_count()) {
    throw ValidationError("document ordinal " + std::to_string(doc_ordinal) + " out of range");
  }
  const double k1 = index.k1();
  const double b = index.b();
  const double len = static_cast<double>(index.doc_lengths()[doc_ordinal]);
  const double avg = index.avg_doc_length();
  const double norm = avg > 0.0 ? len / avg : 0.0;
  double score = 0.0;
  for (const auto& term : query_tokens) {
    const auto postings = index.postings(term);
    auto it = std::lower_bound(postings.begin(), postings.end(), doc_ordinal,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == postings.end() || it->doc != doc_ordinal) continue;
    const double tf = static_cast<double>(it->tf);
    score += index.idf(term) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
  }
  return score;
}

// --- embeddings ------------------------------------------------------------

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::string source_tag)
    : dim_(dim), source_tag_(std::move(source_tag)) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingMatrix::append(std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw BackendError("embedding dimension mismatch: expected " + std::to_string(dim_) +
                       ", got " + std::to_string(vector.size()));
  }
  double sq = 0.0;
  for (double x : vector) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw BackendError("cannot normalize a zero or non-finite embedding");
  for (double x : vector) data_.push_back(static_cast<float>(x / norm));
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= count()) throw ValidationError("embedding row " + std::to_string(i) + " out of range");
  return std::span<const float>(data_).subspan(i * dim_, dim_);
}

double EmbeddingMatrix::dot(std::span<const float> query, std::size_t i) const {
  const auto r = row(i);
  if (query.size() != dim_) throw ConfigError("query embedding has the wrong dimension");
  double s = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) s += static_cast<double>(query[j]) * static_cast<double>(r[j]);
  return s;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  std::filesystem::path p = prefix;
  p += suffix;
  return p;
}

}  // namespace

void EmbeddingMatrix::save(const std::filesystem::path& prefix, const std::string& content_hash) const {
  std::string bytes;
  bytes.reserve(data_.size() * 4);
  for (float f : data_) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
  write_file_atomic(with_suffix(prefix, ".f32"), bytes);
  OrderedJson manifest;
  manifest["dim"] = dim_;
  manifest["count"] = count();
  manifest["source_tag"] = source_tag_;
  manifest["content_hash"] = content_hash;
  write_file_atomic(with_suffix(prefix, ".json"), manifest.dump(2) + "\n");
}

std::optional<EmbeddingMatrix> EmbeddingMatrix::load(const std::filesystem::path& prefix,
                                                     const std::string& expected_hash) {
  const auto manifest_path = with_suffix(prefix, ".json");
  const auto data_path = with_suffix(prefix, ".f32");
  if (!std::filesystem::exists(manifest_path) || !std::filesystem::exists(data_path)) {
    return std::nullopt;
  }
  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path));
  } catch (const Json::exception&) {
    return std::nullopt;
  }
  if (manifest.value("content_hash", "") != expected_hash) return std::nullopt;
  const std::size_t dim = manifest.value("dim", std::size_t{0});
  const std::size_t count = manifest.value("count", std::size_t{0});
  const std::string bytes = read_file(data_path);
  if (dim == 0 || bytes.size() != dim * count * 4) {
    throw IoError("embedding cache " + data_path.string() + " does not match its manifest");
  }
  EmbeddingMatrix m(dim, manifest.value("source_tag", ""));
  m.data_.resize(dim * count);
  for (std::size_t i = 0; i < m.data_.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + k])) << (8 * k);
    }
    m.data_[i] = std::bit_cast<float>(bits);
  }
  return m;
}

std::string embedding_content_hash(std::span<const std::string> texts, std::string_view source_tag) {
  std::uint64_t h = fnv1a64(source_tag);
  for (const auto& t : texts) {
    h = fnv1a64(std::to_string(t.size()) + ":", h);
    h = fnv1a64(t, h);
  }
  return hex64(h);
}

HttpEmbedder::HttpEmbedder(EmbeddingEndpointConfig config)
    : config_(std::move(config)), token_(detail::token_from_env()) {
  if (config_.url.empty()) throw ConfigError("embedding endpoint URL is required");
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
  Json body{{"texts", Json::array()}};
  for (const auto& t : texts) body["texts"].push_back(t);
  detail::HttpOptions opts{config_.timeout_ms, config_.max_retries, config_.backoff_base_ms, token_};
  const auto response = detail::post_json(config_.url, body, opts);
  try {
    auto vectors = response.body.at("vectors").get<std::vector<std::vector<double>>>();
    if (response.body.contains("dim")) {
      const auto dim = response.body.at("dim").get<std::size_t>();
      for (const auto& v : vectors) {
        if (v.size() != dim) throw BackendError("embedding endpoint returned vectors that disagree with dim");
      }
    }
    return vectors;
  } catch (const Json::exception& e) {
    throw BackendError(std::string("malformed embedding response: ") + e.what());
  }
}

EmbeddingMatrix embed_corpus(std::span<const std::string> texts, Embedder& embedder,
                             const EmbedOptions& options) {
  const std::string tag = embedder.source_tag();
  const std::string hash = embedding_content_hash(texts, tag);
  if (options.cache_prefix) {
    if (auto cached = EmbeddingMatrix::load(*options.cache_prefix, hash)) return std::move(*cached);
  }
  if (texts.empty()) throw ValidationError("nothing to embed");

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_batches = (texts.size() + batch - 1) / batch;
  std::vector<std::vector<std::vector<double>>> results(n_batches);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      try {
        const auto chunk = texts.subspan(b * batch, std::min(batch, texts.size() - b * batch));
        auto vectors = embedder.embed(chunk);
        if (vectors.size() != chunk.size()) {
          throw BackendError("embedding endpoint returned " + std::to_string(vectors.size()) +
                             " vectors for " + std::to_string(chunk.size()) + " texts");
        }
        results[b] = std::move(vectors);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(options.max_in_flight, 1, n_batches);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  const std::size_t dim = results.front().front().size();
  EmbeddingMatrix matrix(dim, tag);
  for (const auto& chunk : results) {
    for (const auto& v : chunk) matrix.append(v);
  }
  if (options.cache_prefix) matrix.save(*options.cache_prefix, hash);
  return matrix;
}

// --- retrieval -------------------------------------------------------------

std::string_view to_string(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::none: return "none";
    case RetrievalMethod::random: return "random";
    case RetrievalMethod::lexical: return "lexical";
    case RetrievalMethod::dense: return "dense";
  }
  return "?";
}

RetrievalMethod parse_retrieval_method(std::string_view text) {
  if (text == "none") return RetrievalMethod::none;
  if (text == "random") return RetrievalMethod::random;
  if (text == "lexical" || text == "bm25") return RetrievalMethod::lexical;
  if (text == "dense") return RetrievalMethod::dense;
  throw ValidationError("unknown retriever: " + std::string(text));
}

bool ranks_before(const ScoredExample& a, const ScoredExample& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.instance_id < b.instance_id;
}

std::vector<ScoredExample> retrieve_topk(const InstructionInstance& query, std::size_t k,
                                         RetrievalMethod method, const RetrievalState& state,
                                         std::uint64_t seed, std::span<const float> query_vector) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (method == RetrievalMethod::none) return {};
  if (state.corpus.empty()) throw ValidationError("retrieval corpus is empty");
  if (method == RetrievalMethod::lexical) {
    if (state.lexical == nullptr) throw ConfigError("lexical retrieval requires a lexical index");
    if (state.lexical->doc_count() != state.corpus.size()) {
      throw ConfigError("lexical index does not match the retrieval corpus");
    }
  }
  if (method == RetrievalMethod::dense) {
    if (state.embeddings == nullptr) throw ConfigError("dense retrieval requires an embedding matrix");
    if (state.embeddings->count() != state.corpus.size()) {
      throw ConfigError("embedding matrix does not match the retrieval corpus");
    }
    if (query_vector.empty()) throw ConfigError("dense retrieval requires a query embedding");
  }

  std::vector<ScoredExample> candidates;
  for (std::size_t i = 0; i < state.corpus.size(); ++i) {
    const auto& c = state.corpus[i];
    if (c.task != query.task || c.id == query.id) continue;
    candidates.push_back({c.id, 0.0, 0, i});
  }
  const std::size_t take = std::min(k, candidates.size());

  if (method == RetrievalMethod::random) {
    Rng rng(derive_seed(seed, query.id));
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + rng.below(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(take);
  } else {
    if (method == RetrievalMethod::lexical) {
      const TokenSeq tokens = normalize(query.context);
      for (auto& c : candidates) c.score = bm25_score(tokens.tokens(), c.ordinal, *state.lexical);
    } else {
      for (auto& c : candidates) c.score = state.embeddings->dot(query_vector, c.ordinal);
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), ranks_before);
    candidates.resize(take);
  }
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rank = i + 1;
  return candidates;
}

}  // namespace oncobench
