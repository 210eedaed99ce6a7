#include "gemvpc/rng.hpp"

#include <cmath>

namespace gemvpc {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  return fnv1a(s.data(), s.size(), seed);
}

std::uint64_t fnv1a(const char* s, std::uint64_t seed) {
  return fnv1a(s, std::char_traits<char>::length(s), seed);
}

DetRng DetRng::substream(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = fnv1a(tag);
  h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return DetRng(h);
}

double DetRng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double DetRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t DetRng::uniform_int(std::uint64_t n) {
  // rejection sampling to avoid modulo bias
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = eng_();
  } while (v >= limit);
  return v % n;
}

double DetRng::normal(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return mean + stddev * r * std::cos(a);
}

}  // namespace gemvpc
