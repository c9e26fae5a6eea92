#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "repsharp/util.hpp"

TEST(Tokenize, LowercasesAndSplitsOnNonAlphanumeric) {
  EXPECT_EQ(repsharp::tokenize("Hello, World! x-ray  42"),
            (std::vector<std::string>{"hello", "world", "x", "ray", "42"}));
  EXPECT_TRUE(repsharp::tokenize(" ,.; ").empty());
}

TEST(Tokenize, KeepsUtf8BytesInsideTokens) {
  EXPECT_EQ(repsharp::tokenize("caf\xc3\xa9 ol\xc3\xa9"), (std::vector<std::string>{"caf\xc3\xa9", "ol\xc3\xa9"}));
}

TEST(Whitespace, NormalizeAndTrim) {
  EXPECT_EQ(repsharp::normalize_whitespace("  a \n\t b  c "), "a b c");
  EXPECT_EQ(repsharp::trim("\n x y \t"), "x y");
  EXPECT_EQ(repsharp::normalize_whitespace("   "), "");
}

TEST(Hash, KnownValues) {
  // FNV-1a 64 reference vectors.
  EXPECT_EQ(repsharp::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(repsharp::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(repsharp::hex64(0xabcULL), "0000000000000abc");
  EXPECT_NE(repsharp::stable_hash("x", 0), repsharp::stable_hash("x", 1));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  repsharp::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(repsharp::parallel_for(100, 3,
                                      [](std::size_t i) {
                                        if (i == 57) throw std::runtime_error("boom");
                                      }),
               std::runtime_error);
}
