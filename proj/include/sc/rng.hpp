#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sc {

// Deterministic generator. std::mt19937_64 has a standardized output
// sequence, but the std distributions do not, so the conversions to uniform
// and Gaussian variates are fixed here:
//   uniform  = (next() >> 11) * 2^-53          in [0, 1)
//   gaussian = Box-Muller on two uniforms, cosine branch only
//   below(n) = rejection sampling on the top bits
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double gaussian();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to fan one global seed out into independent
// sub-seeds: derive_seed(global, stream).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Named sub-seed streams for the CLI's single global seed.
namespace seed_stream {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kSaeInit = 2;
inline constexpr std::uint64_t kModel = 3;
inline constexpr std::uint64_t kCorruption = 4;
inline constexpr std::uint64_t kData = 5;
inline constexpr std::uint64_t kComplement = 6;
}  // namespace seed_stream

}  // namespace sc
