#pragma once

// Reverse-mode autodiff over dense Eigen matrices. A Var is a handle to a
// node in a dynamically built computation graph; backward() runs the tape
// in reverse topological order. Everything is double precision.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace gemvpc::nn {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value;
  Mat grad;                 // lazily sized; empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' grads

  Mat& ensure_grad() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  Mat& ensure_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::shared_ptr<Node> node() const { return node_; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  void zero_grad() { node_->grad.setZero(); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Mat v);
Var parameter(Mat v);

// Runs backpropagation from a 1x1 scalar root.
void backward(const Var& root);

// --- elementwise / arithmetic ---
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);   // Hadamard
Var cdiv(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_row_broadcast(const Var& x, const Var& row);  // x + 1*row
Var tanh_(const Var& x);
Var sigmoid_(const Var& x);
Var relu_(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var elu_(const Var& x);
Var exp_(const Var& x);

// --- linear algebra / shape ---
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& x, Eigen::Index r0, Eigen::Index n);
Var slice_cols(const Var& x, Eigen::Index c0, Eigen::Index n);
Var select_rows(const Var& x, const std::vector<int>& idx);  // gather w/ scatter-add grad
Var row_sum(const Var& x);     // n x d -> n x 1
Var mean_all(const Var& x);    // -> 1 x 1
Var sum_all(const Var& x);     // -> 1 x 1
Var scale_rows(const Var& x, const Var& w);  // row i scaled by w(i,0)

// Softmax over each row after adding `mask` (0 / -inf style additive mask).
// Pass an empty Var for no mask.
Var softmax_rows(const Var& x, const Var& mask = Var());
Var log_softmax_rows(const Var& x);

// Row-wise layer normalization with affine gain/bias (1 x d each).
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// Per-destination-segment softmax of edge scores (m x 1). dst[e] in [0, n).
Var segment_softmax(const Var& scores, const std::vector<int>& dst, int n_segments);

// out.row(dst[e]) += alpha(e,0) * msg.row(e); result is n_segments x d.
Var segment_weighted_sum(const Var& alpha, const Var& msg,
                         const std::vector<int>& dst, int n_segments);

// Mean KL(target || softmax(logits)) over rows where row_weight > 0.
// `target` rows must be probability distributions. Constant w.r.t. target.
Var kl_div_loss(const Var& logits, const Mat& target, const Eigen::VectorXd& row_weight);

}  // namespace gemvpc::nn
