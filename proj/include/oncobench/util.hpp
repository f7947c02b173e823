#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oncobench {

/// 64-bit FNV-1a. Stable across platforms, used for seed derivation and
/// content hashes.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t state = 0xcbf29ce484222325ULL);

/// Derives an independent seed from a base seed and a key, e.g.
/// derive_seed(seed, doc_id, sentence_index). Independent of call order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key,
                          std::uint64_t salt = 0);

std::string hex64(std::uint64_t value);

/// Seeded generator with a portable bounded-integer draw. std::mt19937_64
/// output is fixed by the standard; the std distributions are not, so the
/// draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// round_half_up(rate * n) for count allocation. A 1e-9 slack absorbs binary
/// representation error so that e.g. 0.3 * 5 rounds to 2.
std::size_t round_half_up_count(double rate, std::size_t n);

/// Half-up rounding to the given number of decimals.
double round_half_up(double value, int decimals);

/// Fixed two-decimal rendering after half-up rounding.
std::string format_2dp(double value);

std::string to_lower_ascii(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
/// Case-insensitive (ASCII) substring test.
bool icontains(std::string_view haystack, std::string_view needle);
std::string trim(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
/// Splits on LF; a trailing newline does not yield an extra empty line.
std::vector<std::string> split_lines(std::string_view content);

/// Current UTC time as ISO-8601 with second precision.
std::string utc_timestamp();

}  // namespace oncobench
