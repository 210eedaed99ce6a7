#include "gemvpc/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace gemvpc::nn {

Var ParamStore::insert(const std::string& name, Mat value) {
  if (params_.count(name)) throw std::logic_error("parameter re-created: " + name);
  Var p = parameter(std::move(value));
  params_.emplace(name, p);
  return p;
}

Var ParamStore::get(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  DetRng rng(DetRng::substream(seed_, name));
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return insert(name, std::move(m));
}

Var ParamStore::get_const(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          double fill) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  return insert(name, Mat::Constant(rows, cols, fill));
}

Var ParamStore::get_normal(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, double stddev) {
  auto it = params_.find(name);
  if (it != params_.end()) return it->second;
  DetRng rng(DetRng::substream(seed_, name));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  return insert(name, std::move(m));
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_)
    if (p.node()->grad.size() != 0) p.node()->grad.setZero();
}

double ParamStore::grad_global_norm() const {
  double sq = 0;
  for (const auto& [name, p] : params_)
    if (p.node()->grad.size() != 0) sq += p.node()->grad.squaredNorm();
  return std::sqrt(sq);
}

Linear Linear::create(ParamStore& ps, const std::string& prefix, Eigen::Index in,
                      Eigen::Index out) {
  Linear l;
  l.W = ps.get(prefix + ".W", in, out);
  l.b = ps.get_const(prefix + ".b", 1, out, 0.0);
  return l;
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& prefix, Eigen::Index d) {
  LayerNorm n;
  n.gain = ps.get_const(prefix + ".gain", 1, d, 1.0);
  n.bias = ps.get_const(prefix + ".bias", 1, d, 0.0);
  return n;
}

Mat causal_mask(Eigen::Index n) {
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = kMaskOff;
  return m;
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& prefix,
                                              Eigen::Index d, int heads) {
  if (d % heads != 0) throw std::invalid_argument("attention dim not divisible by heads");
  MultiHeadAttention a;
  a.heads = heads;
  a.q = Linear::create(ps, prefix + ".q", d, d);
  a.k = Linear::create(ps, prefix + ".k", d, d);
  a.v = Linear::create(ps, prefix + ".v", d, d);
  a.o = Linear::create(ps, prefix + ".o", d, d);
  return a;
}

Var MultiHeadAttention::forward(const Var& query, const Var& keyvalue,
                                const Mat& mask) const {
  const Eigen::Index d = q.W.cols();
  const Eigen::Index dh = d / heads;
  Var Q = q.forward(query), K = k.forward(keyvalue), V = v.forward(keyvalue);
  Var mask_v;
  if (mask.size() != 0) mask_v = constant(mask);
  std::vector<Var> heads_out;
  for (int h = 0; h < heads; ++h) {
    Var Qh = slice_cols(Q, h * dh, dh);
    Var Kh = slice_cols(K, h * dh, dh);
    Var Vh = slice_cols(V, h * dh, dh);
    Var scores = scale(matmul(Qh, transpose(Kh)), 1.0 / std::sqrt((double)dh));
    Var attn = softmax_rows(scores, mask_v);
    heads_out.push_back(matmul(attn, Vh));
  }
  return o.forward(concat_cols(heads_out));
}

FeedForward FeedForward::create(ParamStore& ps, const std::string& prefix,
                                Eigen::Index d, Eigen::Index inner) {
  FeedForward f;
  f.in = Linear::create(ps, prefix + ".in", d, inner);
  f.out = Linear::create(ps, prefix + ".out", inner, d);
  return f;
}

void AdamW::step(ParamStore& ps, double lr) {
  ++step_count_;
  double scale = 1.0;
  if (clip_norm > 0) {
    double norm = ps.grad_global_norm();
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  double bc1 = 1.0 - std::pow(beta1, (double)step_count_);
  double bc2 = 1.0 - std::pow(beta2, (double)step_count_);
  for (auto& [name, p] : ps.items()) {
    Node& n = *p.node();
    if (n.grad.size() == 0 || n.grad.cwiseAbs().maxCoeff() == 0.0) continue;
    Mat g = n.grad * scale;
    auto& slot = state_[name];
    if (slot.m.size() == 0) {
      slot.m = Mat::Zero(g.rows(), g.cols());
      slot.v = Mat::Zero(g.rows(), g.cols());
    }
    slot.m = beta1 * slot.m + (1.0 - beta1) * g;
    slot.v = beta2 * slot.v + (1.0 - beta2) * g.cwiseProduct(g);
    Mat mhat = slot.m / bc1;
    Mat vhat = slot.v / bc2;
    n.value -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    n.value -= lr * weight_decay * n.value;
  }
}

}  // namespace gemvpc::nn
