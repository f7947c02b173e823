#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "oncobench/corpus.hpp"

namespace oncobench {

struct Posting {
  std::size_t doc = 0;  // ordinal in the indexed corpus
  std::size_t tf = 0;
  bool operator==(const Posting&) const = default;
};

/// Inverted index over normalized context tokens for Okapi BM25.
class LexicalIndex {
 public:
  static constexpr double kDefaultK1 = 1.2;
  static constexpr double kDefaultB = 0.75;

  static LexicalIndex build(std::span<const InstructionInstance> corpus,
                            double k1 = kDefaultK1, double b = kDefaultB);
  /// Indexes raw token lists directly; ids name the documents.
  static LexicalIndex build_from_tokens(std::vector<std::string> ids,
                                        const std::vector<std::vector<std::string>>& docs,
                                        double k1 = kDefaultK1, double b = kDefaultB);

  std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
  const std::vector<std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  double k1() const noexcept { return k1_; }
  double b() const noexcept { return b_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }

  /// 0 for unknown terms.
  std::size_t doc_frequency(std::string_view term) const;
  /// Sorted by doc ordinal; empty for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(std::string_view term) const;

  bool operator==(const LexicalIndex&) const = default;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  double k1_ = kDefaultK1;
  double b_ = kDefaultB;
};

/// Sum over query tokens (duplicates count again) of
/// idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avglen)).
double bm25_score(std::span<const std::string> query_tokens, std::size_t doc_ordinal,
                  const LexicalIndex& index);

/// Row-major unit-normalized float vectors, one per corpus instance.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::string source_tag);

  /// Normalizes and appends. Throws on dimension mismatch or zero norm.
  void append(std::span<const double> vector);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  const std::string& source_tag() const noexcept { return source_tag_; }
  std::span<const float> row(std::size_t i) const;
  const std::vector<float>& data() const noexcept { return data_; }

  /// Dot product accumulated in double.
  double dot(std::span<const float> query, std::size_t i) const;

  /// Writes <prefix>.f32 (little-endian float32, row-major) and <prefix>.json
  /// ({dim, count, source_tag, content_hash}).
  void save(const std::filesystem::path& prefix, const std::string& content_hash) const;
  /// Loads a cache when its manifest matches; std::nullopt otherwise.
  static std::optional<EmbeddingMatrix> load(const std::filesystem::path& prefix,
                                             const std::string& expected_hash);

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::string source_tag_;
  std::vector<float> data_;
};

/// Cache key over the source tag and texts.
std::string embedding_content_hash(std::span<const std::string> texts,
                                   std::string_view source_tag);

/// Source of raw (unnormalized) vectors. Must be callable concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
  virtual std::string source_tag() const = 0;
};

struct EmbeddingEndpointConfig {
  std::string url;
  std::string source_tag = "http";
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_base_ms = 500;
};

/// POST {"texts": [...]} -> {"vectors": [[...], ...], "dim": n}.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(EmbeddingEndpointConfig config);
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string source_tag() const override { return config_.source_tag; }

 private:
  EmbeddingEndpointConfig config_;
  std::string token_;
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  std::optional<std::filesystem::path> cache_prefix;
};

/// Batches texts through the embedder with bounded concurrency, keeping
/// input order. With a cache prefix, a matching cache skips the embedder.
EmbeddingMatrix embed_corpus(std::span<const std::string> texts, Embedder& embedder,
                             const EmbedOptions& options);

enum class RetrievalMethod { none, random, lexical, dense };

std::string_view to_string(RetrievalMethod method);
RetrievalMethod parse_retrieval_method(std::string_view text);

struct ScoredExample {
  std::string instance_id;
  double score = 0.0;
  std::size_t rank = 0;     // 1-based
  std::size_t ordinal = 0;  // position in the corpus

  bool operator==(const ScoredExample&) const = default;
};

/// Orders by score descending, then instance id ascending.
bool ranks_before(const ScoredExample& a, const ScoredExample& b);

struct RetrievalState {
  std::span<const InstructionInstance> corpus;
  const LexicalIndex* lexical = nullptr;
  const EmbeddingMatrix* embeddings = nullptr;
};

/// Top-k examples for `query` among corpus instances of the same task,
/// excluding the query's own id. Random draws a seeded uniform sample
/// (seed derived from (seed, query id)) with score 0. Dense needs the
/// query's unit vector in `query_vector`.
std::vector<ScoredExample> retrieve_topk(const InstructionInstance& query, std::size_t k,
                                         RetrievalMethod method, const RetrievalState& state,
                                         std::uint64_t seed,
                                         std::span<const float> query_vector = {});

}  // namespace oncobench
