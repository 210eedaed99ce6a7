#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>

namespace gemvpc {

// Text-to-vector provider. Implementations must be pure functions of the
// input text and produce unit-normalized vectors.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd embed(const std::string& text) const = 0;
};

// Seeded feature-hashing embedder: tokens and character trigrams are hashed
// into signed buckets, then the vector is L2-normalized. Deterministic given
// (dim, seed).
class HashingEmbedder : public TextEmbedder {
 public:
  explicit HashingEmbedder(int dim = 64, std::uint64_t seed = 0x5eed);
  int dim() const override { return dim_; }
  Eigen::VectorXd embed(const std::string& text) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace gemvpc
