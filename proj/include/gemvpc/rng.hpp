#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace gemvpc {

// 64-bit FNV-1a. Used for stable content hashes and RNG substream keys.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 14695981039346656037ULL);
// String-literal overload: without it, `fnv1a("x", seed)` would resolve to the
// raw-pointer overload above with the seed misread as a byte length.
std::uint64_t fnv1a(const char* s, std::uint64_t seed = 14695981039346656037ULL);

// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard and
// the derived distributions below avoid the implementation-defined behaviour
// of std::uniform_real_distribution and friends.
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  // Substream keyed by (seed, tag): independent per-entity streams.
  static DetRng substream(std::uint64_t seed, const std::string& tag);

  std::uint64_t raw() { return eng_(); }
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n)
  double normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[uniform_int(i)]);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gemvpc
