#include "gemvpc/nn/tensor.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace gemvpc::nn {

namespace {

std::shared_ptr<Node> make_node(Mat v, std::vector<Var> parents,
                                std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  bool rg = false;
  for (const auto& p : parents) {
    n->parents.push_back(p.node());
    rg = rg || p.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(fn);
  return n;
}

void accum(const std::shared_ptr<Node>& p, const Mat& g) {
  if (p->requires_grad) p->ensure_grad() += g;
}

}  // namespace

Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return Var(n);
}

Var parameter(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return Var(n);
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  // Iterative post-order DFS for topological order.
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()(0, 0) += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

Var operator+(const Var& a, const Var& b) {
  return Var(make_node(a.value() + b.value(), {a, b}, [a, b](Node& n) {
    accum(a.node(), n.grad);
    accum(b.node(), n.grad);
  }));
}

Var operator-(const Var& a, const Var& b) {
  return Var(make_node(a.value() - b.value(), {a, b}, [a, b](Node& n) {
    accum(a.node(), n.grad);
    accum(b.node(), -n.grad);
  }));
}

Var cmul(const Var& a, const Var& b) {
  return Var(make_node(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Node& n) {
    accum(a.node(), n.grad.cwiseProduct(b.value()));
    accum(b.node(), n.grad.cwiseProduct(a.value()));
  }));
}

Var cdiv(const Var& a, const Var& b) {
  return Var(make_node(a.value().cwiseQuotient(b.value()), {a, b}, [a, b](Node& n) {
    accum(a.node(), n.grad.cwiseQuotient(b.value()));
    accum(b.node(), (-n.grad.array() * a.value().array() /
                     (b.value().array() * b.value().array())).matrix());
  }));
}

Var scale(const Var& a, double s) {
  return Var(make_node(a.value() * s, {a}, [a, s](Node& n) {
    accum(a.node(), n.grad * s);
  }));
}

Var add_row_broadcast(const Var& x, const Var& row) {
  Mat v = x.value();
  v.rowwise() += Eigen::RowVectorXd(row.value().row(0));
  return Var(make_node(std::move(v), {x, row}, [x, row](Node& n) {
    accum(x.node(), n.grad);
    accum(row.node(), n.grad.colwise().sum());
  }));
}

Var tanh_(const Var& x) {
  Mat y = x.value().array().tanh().matrix();
  return Var(make_node(y, {x}, [x, y](Node& n) {
    accum(x.node(), (n.grad.array() * (1.0 - y.array().square())).matrix());
  }));
}

Var sigmoid_(const Var& x) {
  Mat y = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  return Var(make_node(y, {x}, [x, y](Node& n) {
    accum(x.node(), (n.grad.array() * y.array() * (1.0 - y.array())).matrix());
  }));
}

Var relu_(const Var& x) {
  Mat y = x.value().cwiseMax(0.0);
  return Var(make_node(y, {x}, [x](Node& n) {
    accum(x.node(), (n.grad.array() * (x.value().array() > 0.0).cast<double>()).matrix());
  }));
}

Var leaky_relu(const Var& x, double slope) {
  Mat y = x.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return Var(make_node(y, {x}, [x, slope](Node& n) {
    Mat d = x.value().unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
    accum(x.node(), n.grad.cwiseProduct(d));
  }));
}

Var elu_(const Var& x) {
  Mat y = x.value().unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  return Var(make_node(y, {x}, [x, y](Node& n) {
    Mat d = y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : v + 1.0; });
    accum(x.node(), n.grad.cwiseProduct(d));
  }));
}

Var exp_(const Var& x) {
  Mat y = x.value().array().exp().matrix();
  return Var(make_node(y, {x}, [x, y](Node& n) {
    accum(x.node(), n.grad.cwiseProduct(y));
  }));
}

Var matmul(const Var& a, const Var& b) {
  return Var(make_node(a.value() * b.value(), {a, b}, [a, b](Node& n) {
    accum(a.node(), n.grad * b.value().transpose());
    accum(b.node(), a.value().transpose() * n.grad);
  }));
}

Var transpose(const Var& a) {
  return Var(make_node(a.value().transpose(), {a}, [a](Node& n) {
    accum(a.node(), n.grad.transpose());
  }));
}

Var concat_rows(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Eigen::Index rows = 0, cols = parts[0].cols();
  for (const auto& p : parts) rows += p.rows();
  Mat v(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return Var(make_node(std::move(v), parts, [parts](Node& n) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      accum(p.node(), n.grad.middleRows(r, p.rows()));
      r += p.rows();
    }
  }));
}

Var concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Eigen::Index cols = 0, rows = parts[0].rows();
  for (const auto& p : parts) cols += p.cols();
  Mat v(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return Var(make_node(std::move(v), parts, [parts](Node& n) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      accum(p.node(), n.grad.middleCols(c, p.cols()));
      c += p.cols();
    }
  }));
}

Var slice_rows(const Var& x, Eigen::Index r0, Eigen::Index cnt) {
  return Var(make_node(x.value().middleRows(r0, cnt), {x}, [x, r0, cnt](Node& n) {
    if (!x.requires_grad()) return;
    Mat g = Mat::Zero(x.rows(), x.cols());
    g.middleRows(r0, cnt) = n.grad;
    accum(x.node(), g);
  }));
}

Var slice_cols(const Var& x, Eigen::Index c0, Eigen::Index cnt) {
  return Var(make_node(x.value().middleCols(c0, cnt), {x}, [x, c0, cnt](Node& n) {
    if (!x.requires_grad()) return;
    Mat g = Mat::Zero(x.rows(), x.cols());
    g.middleCols(c0, cnt) = n.grad;
    accum(x.node(), g);
  }));
}

Var select_rows(const Var& x, const std::vector<int>& idx) {
  Mat v(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = x.value().row(idx[i]);
  return Var(make_node(std::move(v), {x}, [x, idx](Node& n) {
    if (!x.requires_grad()) return;
    Mat g = Mat::Zero(x.rows(), x.cols());
    for (size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    accum(x.node(), g);
  }));
}

Var row_sum(const Var& x) {
  Mat v = x.value().rowwise().sum();
  return Var(make_node(std::move(v), {x}, [x](Node& n) {
    accum(x.node(), n.grad * Eigen::RowVectorXd::Ones(x.cols()));
  }));
}

Var mean_all(const Var& x) {
  Mat v(1, 1);
  v(0, 0) = x.value().mean();
  double inv = 1.0 / static_cast<double>(x.value().size());
  return Var(make_node(std::move(v), {x}, [x, inv](Node& n) {
    accum(x.node(), Mat::Constant(x.rows(), x.cols(), n.grad(0, 0) * inv));
  }));
}

Var sum_all(const Var& x) {
  Mat v(1, 1);
  v(0, 0) = x.value().sum();
  return Var(make_node(std::move(v), {x}, [x](Node& n) {
    accum(x.node(), Mat::Constant(x.rows(), x.cols(), n.grad(0, 0)));
  }));
}

Var scale_rows(const Var& x, const Var& w) {
  assert(w.cols() == 1 && w.rows() == x.rows());
  Mat v = x.value().array().colwise() * w.value().col(0).array();
  return Var(make_node(std::move(v), {x, w}, [x, w](Node& n) {
    accum(x.node(), (n.grad.array().colwise() * w.value().col(0).array()).matrix());
    if (w.requires_grad()) {
      Mat gw = (n.grad.array() * x.value().array()).rowwise().sum().matrix();
      accum(w.node(), gw);
    }
  }));
}

Var softmax_rows(const Var& x, const Var& mask) {
  Mat z = x.value();
  if (mask.valid()) z += mask.value();
  Mat y(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double m = z.row(r).maxCoeff();
    Eigen::ArrayXd e = (z.row(r).array() - m).exp();
    double s = e.sum();
    if (!(s > 0.0)) throw std::domain_error("softmax_rows: all-masked row");
    y.row(r) = (e / s).matrix();
  }
  return Var(make_node(y, {x}, [x, y](Node& n) {
    Mat gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = n.grad.row(r).dot(y.row(r));
      gx.row(r) = (y.row(r).array() * (n.grad.row(r).array() - dot)).matrix();
    }
    accum(x.node(), gx);
  }));
}

Var log_softmax_rows(const Var& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = x.value().row(r).maxCoeff();
    double lse = m + std::log((x.value().row(r).array() - m).exp().sum());
    y.row(r) = (x.value().row(r).array() - lse).matrix();
  }
  return Var(make_node(y, {x}, [x, y](Node& n) {
    Mat gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double s = n.grad.row(r).sum();
      gx.row(r) = n.grad.row(r) - (s * y.row(r).array().exp()).matrix();
    }
    accum(x.node(), gx);
  }));
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index d = x.cols();
  Mat xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.value().row(r).mean();
    double var = (x.value().row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(r) = is;
    xhat.row(r) = ((x.value().row(r).array() - mu) * is).matrix();
  }
  Mat y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += Eigen::RowVectorXd(bias.value().row(0));
  return Var(make_node(y, {x, gain, bias}, [x, gain, bias, xhat, inv_std, d](Node& n) {
    if (gain.requires_grad())
      accum(gain.node(), (n.grad.array() * xhat.array()).colwise().sum().matrix());
    if (bias.requires_grad()) accum(bias.node(), n.grad.colwise().sum());
    if (!x.requires_grad()) return;
    Mat gx(xhat.rows(), d);
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      Eigen::Array<double, 1, Eigen::Dynamic> dxhat =
          n.grad.row(r).array() * gain.value().row(0).array();
      Eigen::Array<double, 1, Eigen::Dynamic> xh = xhat.row(r).array();
      double m1 = dxhat.mean();
      double m2 = (dxhat * xh).mean();
      gx.row(r) = (inv_std(r) * (dxhat - m1 - xh * m2)).matrix();
    }
    accum(x.node(), gx);
  }));
}

Var segment_softmax(const Var& scores, const std::vector<int>& dst, int n_segments) {
  assert(scores.cols() == 1 && scores.rows() == static_cast<Eigen::Index>(dst.size()));
  const Eigen::Index m = scores.rows();
  Eigen::VectorXd mx = Eigen::VectorXd::Constant(n_segments, -1e300);
  for (Eigen::Index e = 0; e < m; ++e) mx(dst[e]) = std::max(mx(dst[e]), scores.value()(e, 0));
  Eigen::VectorXd denom = Eigen::VectorXd::Zero(n_segments);
  Mat y(m, 1);
  for (Eigen::Index e = 0; e < m; ++e) {
    y(e, 0) = std::exp(scores.value()(e, 0) - mx(dst[e]));
    denom(dst[e]) += y(e, 0);
  }
  for (Eigen::Index e = 0; e < m; ++e) y(e, 0) /= denom(dst[e]);
  return Var(make_node(y, {scores}, [scores, dst, n_segments, y, m](Node& n) {
    Eigen::VectorXd dots = Eigen::VectorXd::Zero(n_segments);
    for (Eigen::Index e = 0; e < m; ++e) dots(dst[e]) += n.grad(e, 0) * y(e, 0);
    Mat gx(m, 1);
    for (Eigen::Index e = 0; e < m; ++e) gx(e, 0) = y(e, 0) * (n.grad(e, 0) - dots(dst[e]));
    accum(scores.node(), gx);
  }));
}

Var segment_weighted_sum(const Var& alpha, const Var& msg,
                         const std::vector<int>& dst, int n_segments) {
  assert(alpha.cols() == 1 && alpha.rows() == msg.rows());
  const Eigen::Index m = msg.rows();
  Mat v = Mat::Zero(n_segments, msg.cols());
  for (Eigen::Index e = 0; e < m; ++e) v.row(dst[e]) += alpha.value()(e, 0) * msg.value().row(e);
  return Var(make_node(std::move(v), {alpha, msg}, [alpha, msg, dst, m](Node& n) {
    if (alpha.requires_grad()) {
      Mat ga(m, 1);
      for (Eigen::Index e = 0; e < m; ++e) ga(e, 0) = n.grad.row(dst[e]).dot(msg.value().row(e));
      accum(alpha.node(), ga);
    }
    if (msg.requires_grad()) {
      Mat gm(m, msg.cols());
      for (Eigen::Index e = 0; e < m; ++e) gm.row(e) = alpha.value()(e, 0) * n.grad.row(dst[e]);
      accum(msg.node(), gm);
    }
  }));
}

Var kl_div_loss(const Var& logits, const Mat& target, const Eigen::VectorXd& row_weight) {
  assert(logits.rows() == target.rows() && logits.cols() == target.cols());
  const Eigen::Index L = logits.rows();
  double count = 0.0;
  for (Eigen::Index r = 0; r < L; ++r)
    if (row_weight(r) > 0.0) count += 1.0;
  if (count == 0.0) throw std::invalid_argument("kl_div_loss: no unmasked rows");
  Mat p(L, logits.cols());  // softmax, needed for both value and grad
  double loss = 0.0;
  for (Eigen::Index r = 0; r < L; ++r) {
    double m = logits.value().row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.value().row(r).array() - m).exp();
    double s = e.sum();
    p.row(r) = (e / s).matrix();
    if (row_weight(r) <= 0.0) continue;
    double lse = m + std::log(s);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      double t = target(r, c);
      if (t > 0.0) loss += t * (std::log(t) - (logits.value()(r, c) - lse));
    }
  }
  Mat v(1, 1);
  v(0, 0) = loss / count;
  return Var(make_node(std::move(v), {logits},
                       [logits, target, row_weight, p, count, L](Node& n) {
    Mat g = Mat::Zero(L, p.cols());
    double c0 = n.grad(0, 0) / count;
    for (Eigen::Index r = 0; r < L; ++r) {
      if (row_weight(r) <= 0.0) continue;
      g.row(r) = c0 * (p.row(r) - target.row(r));
    }
    accum(logits.node(), g);
  }));
}

}  // namespace gemvpc::nn
