#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace edet {

/// Deterministic random source used everywhere in the toolkit.
///
/// The engine is the standard 64-bit Mersenne Twister (MT19937-64, whose
/// output sequence is fixed by the C++ standard). Every derived quantity is
/// computed here rather than through <random> distributions, whose algorithms
/// are implementation-defined:
///   uniform()  = (next >> 11) * 2^-53, in [0, 1)
///   index(n)   = rejection sampling on next % n over the largest multiple of n
///   normal()   = Box-Muller on (1 - uniform(), uniform()); the sine branch is
///                cached and returned by the following call
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Knuth's product-of-uniforms method; intended for mean <= ~100.
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Sub-seed for a named component: mix64(master ^ fnv1a64(component)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index);

/// Fisher-Yates, walking from the back, using Rng::index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.index(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// k distinct indices from [0, n), returned in ascending order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    Rng& rng);

}  // namespace edet
