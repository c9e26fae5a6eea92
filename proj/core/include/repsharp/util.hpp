#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace repsharp {

/// 64-bit FNV-1a. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seeded stable hash used for token bucketing and per-document seeds.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

/// Collapses whitespace runs to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string_view trim(std::string_view text);

/// Lowercases ASCII, splits on runs of non-alphanumeric bytes. Bytes >= 0x80
/// count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to pre-sized per-index slots; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace repsharp
