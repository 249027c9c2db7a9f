#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace metsize {

// splitmix64 finalizer; used to derive independent per-task seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for a task identified by `tags`, derived solely from `base`.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags);

/// Seedable random stream with platform-independent variate generation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The variate transforms are implemented here rather than taken
/// from <random> distributions, which are implementation-defined, so the
/// same seed yields the same numbers with any standard library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();

  // Uniform integer in [0, n); unbiased. n must be > 0.
  std::uint64_t index(std::uint64_t n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);

  // Child stream for an independent sub-task.
  RandomStream split() { return RandomStream(mix64(next_u64())); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace metsize
