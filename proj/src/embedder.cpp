#include "gemvpc/embedder.hpp"

#include "gemvpc/rng.hpp"
#include "gemvpc/text.hpp"

namespace gemvpc {

HashingEmbedder::HashingEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

Eigen::VectorXd HashingEmbedder::embed(const std::string& text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  auto add = [&](const std::string& feat, double w) {
    std::uint64_t h = fnv1a(feat, seed_ ^ 0xabcdef12345ULL);
    int bucket = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
    double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
    v(bucket) += sign * w;
  };
  auto toks = tokenize(text);
  for (const auto& t : toks) {
    add("w:" + t, 1.0);
    std::string padded = "^" + t + "$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
      add("c:" + padded.substr(i, 3), 0.5);
  }
  double n = v.norm();
  if (n == 0.0) {
    // degenerate input (no alphanumeric content): fixed unit fallback
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace gemvpc
