#include <doctest.h>

#include <set>

#include "oncobench/util.hpp"

using namespace oncobench;

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates keys and salts") {
  CHECK(derive_seed(1, "doc-1", 0) == derive_seed(1, "doc-1", 0));
  CHECK(derive_seed(1, "doc-1", 0) != derive_seed(1, "doc-1", 1));
  CHECK(derive_seed(1, "doc-1", 0) != derive_seed(1, "doc-2", 0));
  CHECK(derive_seed(1, "doc-1", 0) != derive_seed(2, "doc-1", 0));
}

TEST_CASE("Rng::below stays in range and covers it") {
  Rng rng(42);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = rng.below(7);
    REQUIRE(x < 7);
    seen.insert(x);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("Rng shuffle is a seeded permutation") {
  std::vector<int> a(50), b(50);
  for (int i = 0; i < 50; ++i) a[i] = b[i] = i;
  Rng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("round_half_up_count") {
  CHECK(round_half_up_count(0.2, 100) == 20);
  CHECK(round_half_up_count(0.2, 500) == 100);
  CHECK(round_half_up_count(0.6, 500) == 300);
  CHECK(round_half_up_count(0.3, 5) == 2);  // 1.5 rounds up
  CHECK(round_half_up_count(0.04, 50) == 2);
  CHECK(round_half_up_count(0.02, 50) == 1);
  CHECK(round_half_up_count(0.02, 10) == 0);
  CHECK(round_half_up_count(0.0, 10) == 0);
  CHECK(round_half_up_count(1.0, 7) == 7);
}

TEST_CASE("two-decimal rendering rounds half up") {
  CHECK(format_2dp(86.8133) == "86.81");
  CHECK(format_2dp(91.776666) == "91.78");
  CHECK(format_2dp(66.665) == "66.67");
  CHECK(format_2dp(100.0) == "100.00");
  CHECK(format_2dp(0.0) == "0.00");
}

TEST_CASE("case-insensitive helpers") {
  CHECK(icontains("ER/PR+, HER2 negative", "her2"));
  CHECK_FALSE(icontains("left breast", "right"));
  CHECK(iequals("Not Relevant", "not relevant"));
  CHECK(trim("  a b \n") == "a b");
}

TEST_CASE("split_lines drops the final terminator only") {
  CHECK(split_lines("").empty());
  CHECK(split_lines("a\nb\n") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("a\n\nb") == std::vector<std::string>{"a", "", "b"});
  CHECK(split_lines("a\r\n") == std::vector<std::string>{"a"});
}
