#pragma once

// Parameter registry, common layers, and the AdamW optimizer built on the
// autodiff Vars from tensor.hpp.

#include "gemvpc/nn/tensor.hpp"
#include "gemvpc/rng.hpp"

#include <map>
#include <string>

namespace gemvpc::nn {

// Named parameter registry. Parameter values are initialized from a
// deterministic per-name RNG stream, so creation order never matters.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Xavier-uniform initialized matrix (created on first call).
  Var get(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  // Constant-fill initialized matrix.
  Var get_const(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                double fill);
  // Normal(0, stddev) initialized matrix.
  Var get_normal(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                 double stddev);

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Var at(const std::string& name) const { return params_.at(name); }
  const std::map<std::string, Var>& items() const { return params_; }

  void zero_grad();
  double grad_global_norm() const;
  std::uint64_t seed() const { return seed_; }

 private:
  Var insert(const std::string& name, Mat value);
  std::uint64_t seed_;
  std::map<std::string, Var> params_;  // ordered: stable iteration everywhere
};

struct Linear {
  Var W;  // in x out
  Var b;  // 1 x out
  static Linear create(ParamStore& ps, const std::string& prefix, Eigen::Index in,
                       Eigen::Index out);
  Var forward(const Var& x) const { return add_row_broadcast(matmul(x, W), b); }
};

struct LayerNorm {
  Var gain, bias;  // 1 x d
  static LayerNorm create(ParamStore& ps, const std::string& prefix, Eigen::Index d);
  Var forward(const Var& x) const { return layer_norm_rows(x, gain, bias); }
};

// Additive attention masks: 0 = visible, kMaskOff = blocked.
constexpr double kMaskOff = -std::numeric_limits<double>::infinity();
Mat causal_mask(Eigen::Index n);  // strictly lower-triangular visibility

struct MultiHeadAttention {
  int heads = 1;
  Linear q, k, v, o;
  static MultiHeadAttention create(ParamStore& ps, const std::string& prefix,
                                   Eigen::Index d, int heads);
  // mask: (q_len x kv_len) additive, or empty matrix for none. Throws on an
  // all-masked query row.
  Var forward(const Var& query, const Var& keyvalue, const Mat& mask) const;
};

struct FeedForward {
  Linear in, out;
  static FeedForward create(ParamStore& ps, const std::string& prefix, Eigen::Index d,
                            Eigen::Index inner);
  Var forward(const Var& x) const { return out.forward(relu_(in.forward(x))); }
};

// AdamW with decoupled weight decay and global-norm gradient clipping.
// Parameters whose gradient is absent or exactly zero are left untouched.
class AdamW {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping

  void step(ParamStore& ps, double lr);
  long step_count() const { return step_count_; }

  struct Slot {
    Mat m, v;
  };
  std::map<std::string, Slot>& state() { return state_; }
  void set_step_count(long n) { step_count_ = n; }

 private:
  long step_count_ = 0;
  std::map<std::string, Slot> state_;
};

}  // namespace gemvpc::nn
