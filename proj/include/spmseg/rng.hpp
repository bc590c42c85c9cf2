#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace spmseg {

// Counter-based generator: output i is the SplitMix64 finalizer applied to
// seed + (i + 1) * golden-gamma. The stream depends on the seed only, so it
// is identical on every platform and there is no hidden global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n > 0. Unbiased (Lemire with rejection).
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);
  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal();

  // Independent child stream keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

// Deterministic seed derivation for sub-tasks (image index, variant, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

}  // namespace spmseg
