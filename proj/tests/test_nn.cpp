#include "gemvpc/nn/layers.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace gemvpc;
using nn::Mat;
using nn::Var;

TEST_CASE("elementwise op gradients match finite differences") {
  nn::ParamStore ps(11);
  Var a = ps.get("a", 3, 4);
  Var b = ps.get("b", 3, 4);
  auto check = [&](auto fn) {
    double err = testutil::max_rel_grad_err(ps, {"a", "b"}, fn);
    CHECK(err < 1e-5);
  };
  check([&] { return nn::mean_all(nn::cmul(a + b, a - b)); });
  check([&] { return nn::mean_all(nn::tanh_(a) + nn::sigmoid_(b)); });
  check([&] { return nn::mean_all(nn::cdiv(a, nn::exp_(b))); });
  check([&] { return nn::mean_all(nn::leaky_relu(nn::matmul(a, nn::transpose(b)), 0.2)); });
  check([&] { return nn::sum_all(nn::elu_(nn::scale(a, 1.7))); });
}

TEST_CASE("shape op gradients match finite differences") {
  nn::ParamStore ps(12);
  Var a = ps.get("a", 4, 3);
  Var b = ps.get("b", 2, 3);
  Var w = ps.get("w", 4, 1);
  auto check = [&](auto fn) {
    CHECK(testutil::max_rel_grad_err(ps, {"a", "b", "w"}, fn) < 1e-5);
  };
  check([&] { return nn::mean_all(nn::cmul(nn::concat_rows({a, b}), nn::concat_rows({a, b}))); });
  check([&] { return nn::mean_all(nn::cmul(nn::concat_cols({b, nn::slice_rows(a, 1, 2)}),
                                           nn::concat_cols({b, nn::slice_rows(a, 1, 2)}))); });
  check([&] {
    Var sel = nn::select_rows(a, {0, 2, 0});
    return nn::mean_all(nn::cmul(sel, sel));
  });
  check([&] { return nn::mean_all(nn::cmul(nn::row_sum(a), nn::row_sum(a))); });
  check([&] {
    Var sr = nn::scale_rows(a, w);
    return nn::mean_all(nn::cmul(sr, sr));
  });
  check([&] {
    Var ab = nn::add_row_broadcast(a, nn::slice_rows(b, 0, 1));
    return nn::mean_all(nn::cmul(ab, ab));
  });
  check([&] {
    Var sc = nn::slice_cols(a, 1, 2);
    return nn::mean_all(nn::cmul(sc, sc));
  });
}

TEST_CASE("softmax, log-softmax and layer norm gradients") {
  nn::ParamStore ps(13);
  Var x = ps.get("x", 3, 5);
  Var g = ps.get_const("g", 1, 5, 1.0);
  Var b = ps.get_const("b", 1, 5, 0.1);
  Mat mask = Mat::Zero(3, 5);
  mask(0, 4) = nn::kMaskOff;
  mask(2, 0) = nn::kMaskOff;
  Var w = nn::constant(Mat::Random(3, 5).cwiseAbs());
  CHECK(testutil::max_rel_grad_err(ps, {"x"}, [&] {
          return nn::mean_all(nn::cmul(nn::softmax_rows(x, nn::constant(mask)), w));
        }) < 1e-5);
  CHECK(testutil::max_rel_grad_err(ps, {"x"}, [&] {
          return nn::mean_all(nn::cmul(nn::log_softmax_rows(x), w));
        }) < 1e-5);
  CHECK(testutil::max_rel_grad_err(ps, {"x", "g", "b"}, [&] {
          return nn::mean_all(nn::cmul(nn::layer_norm_rows(x, g, b), w));
        }) < 1e-4);
}

TEST_CASE("softmax rows sum to one under masks; all-masked row throws") {
  nn::ParamStore ps(14);
  Var x = ps.get("x", 2, 4);
  Mat mask = Mat::Zero(2, 4);
  mask(1, 0) = mask(1, 1) = nn::kMaskOff;
  Var s = nn::softmax_rows(x, nn::constant(mask));
  for (int i = 0; i < 2; ++i) CHECK(s.value().row(i).sum() == doctest::Approx(1.0));
  CHECK(s.value()(1, 0) == 0.0);
  Mat all = Mat::Constant(2, 4, nn::kMaskOff);
  CHECK_THROWS(nn::softmax_rows(x, nn::constant(all)));
}

TEST_CASE("segment softmax and weighted sum match dense oracle") {
  nn::ParamStore ps(15);
  Var scores = ps.get("s", 6, 1);
  Var msg = ps.get("m", 6, 3);
  std::vector<int> dst = {0, 1, 0, 2, 1, 0};
  const int n = 3;

  Var alpha = nn::segment_softmax(scores, dst, n);
  // oracle: per segment, plain softmax
  for (int seg = 0; seg < n; ++seg) {
    double denom = 0;
    for (size_t e = 0; e < dst.size(); ++e)
      if (dst[e] == seg) denom += std::exp(scores.value()(e, 0));
    for (size_t e = 0; e < dst.size(); ++e)
      if (dst[e] == seg)
        CHECK(alpha.value()(e, 0) ==
              doctest::Approx(std::exp(scores.value()(e, 0)) / denom).epsilon(1e-12));
  }
  Var out = nn::segment_weighted_sum(alpha, msg, dst, n);
  Mat want = Mat::Zero(n, 3);
  for (size_t e = 0; e < dst.size(); ++e)
    want.row(dst[e]) += alpha.value()(e, 0) * msg.value().row(e);
  CHECK((out.value() - want).norm() < 1e-12);

  CHECK(testutil::max_rel_grad_err(ps, {"s", "m"}, [&] {
          Var a = nn::segment_softmax(scores, dst, n);
          Var o = nn::segment_weighted_sum(a, msg, dst, n);
          return nn::mean_all(nn::cmul(o, o));
        }) < 1e-5);
}

TEST_CASE("kl_div_loss value and gradient") {
  nn::ParamStore ps(16);
  Var logits = ps.get("l", 2, 3);
  Mat target(2, 3);
  target << 0.7, 0.15, 0.15, 0.2, 0.5, 0.3;
  Eigen::VectorXd w(2);
  w << 1, 0;  // second row ignored
  Var loss = nn::kl_div_loss(logits, target, w);
  // oracle on row 0
  Eigen::Vector3d row = logits.value().row(0);
  double lse = std::log(std::exp(row(0)) + std::exp(row(1)) + std::exp(row(2)));
  double want = 0;
  for (int j = 0; j < 3; ++j)
    want += target(0, j) * (std::log(target(0, j)) - (row(j) - lse));
  CHECK(loss.value()(0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(testutil::max_rel_grad_err(ps, {"l"}, [&] {
          return nn::kl_div_loss(logits, target, w);
        }) < 1e-5);
}

TEST_CASE("causal mask shape and visibility") {
  Mat m = nn::causal_mask(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK((m(i, j) == 0.0) == (j <= i));
}

TEST_CASE("multi-head attention matches per-position prefix-loop oracle") {
  nn::ParamStore ps(17);
  const int d = 8, heads = 2, L = 4;
  auto mha = nn::MultiHeadAttention::create(ps, "mha", d, heads);
  Var x = ps.get("x", L, d);
  Var out = mha.forward(x, x, nn::causal_mask(L));

  // oracle: for each query position, rebuild attention over its prefix only
  Mat Q = (x.value() * mha.q.W.value()).rowwise() + mha.q.b.value().row(0);
  Mat K = (x.value() * mha.k.W.value()).rowwise() + mha.k.b.value().row(0);
  Mat V = (x.value() * mha.v.W.value()).rowwise() + mha.v.b.value().row(0);
  const int dh = d / heads;
  Mat concat(L, d);
  for (int i = 0; i < L; ++i) {
    for (int h = 0; h < heads; ++h) {
      Eigen::RowVectorXd q = Q.row(i).segment(h * dh, dh);
      Eigen::VectorXd scores(i + 1);
      for (int j = 0; j <= i; ++j)
        scores(j) = q.dot(K.row(j).segment(h * dh, dh)) / std::sqrt(double(dh));
      Eigen::VectorXd p = (scores.array() - scores.maxCoeff()).exp();
      p /= p.sum();
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dh);
      for (int j = 0; j <= i; ++j) acc += p(j) * V.row(j).segment(h * dh, dh);
      concat.row(i).segment(h * dh, dh) = acc;
    }
  }
  Mat want = (concat * mha.o.W.value()).rowwise() + mha.o.b.value().row(0);
  CHECK((out.value() - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("cross attention (3x4 query / 2x4 kv) matches dense oracle and gradients") {
  nn::ParamStore ps(18);
  const int d = 4;
  auto mha = nn::MultiHeadAttention::create(ps, "x", d, 1);
  Var q = ps.get("q", 3, d);
  Var kv = ps.get("kv", 2, d);
  Var out = mha.forward(q, kv, Mat());

  Mat Q = (q.value() * mha.q.W.value()).rowwise() + mha.q.b.value().row(0);
  Mat K = (kv.value() * mha.k.W.value()).rowwise() + mha.k.b.value().row(0);
  Mat V = (kv.value() * mha.v.W.value()).rowwise() + mha.v.b.value().row(0);
  Mat S = Q * K.transpose() / std::sqrt(double(d));
  Mat P(3, 2);
  for (int i = 0; i < 3; ++i) {
    Eigen::RowVectorXd e = (S.row(i).array() - S.row(i).maxCoeff()).exp();
    P.row(i) = e / e.sum();
  }
  Mat want = (P * V * mha.o.W.value()).rowwise() + mha.o.b.value().row(0);
  CHECK((out.value() - want).cwiseAbs().maxCoeff() < 1e-6);

  std::vector<std::string> names = {"q", "kv", "x.q.W", "x.q.b", "x.k.W",
                                    "x.v.W", "x.o.W", "x.o.b"};
  CHECK(testutil::max_rel_grad_err(ps, names, [&] {
          Var o = mha.forward(q, kv, Mat());
          return nn::mean_all(nn::cmul(o, o));
        }) < 1e-4);
}

TEST_CASE("param store: per-name deterministic init, order-independent") {
  nn::ParamStore a(7), b(7);
  Var a1 = a.get("alpha", 3, 3);
  Var a2 = a.get("beta", 2, 2);
  Var b2 = b.get("beta", 2, 2);  // creation order reversed
  Var b1 = b.get("alpha", 3, 3);
  CHECK((a1.value() - b1.value()).norm() == 0.0);
  CHECK((a2.value() - b2.value()).norm() == 0.0);
  nn::ParamStore c(8);
  CHECK((c.get("alpha", 3, 3).value() - a1.value()).norm() > 0.0);
  CHECK(a.get("alpha", 3, 3).node() == a1.node());  // same handle on re-get
}

TEST_CASE("adamw: zero-grad parameters are left untouched, others move") {
  nn::ParamStore ps(19);
  Var used = ps.get("used", 2, 2);
  Var unused = ps.get("unused", 2, 2);
  Mat before_used = used.value(), before_unused = unused.value();
  ps.zero_grad();
  Var loss = nn::mean_all(nn::cmul(used, used));
  nn::backward(loss);
  nn::AdamW opt;
  opt.step(ps, 1e-2);
  CHECK((unused.value() - before_unused).norm() == 0.0);
  CHECK((used.value() - before_used).norm() > 0.0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw clips by global norm") {
  nn::ParamStore ps(20);
  Var p = ps.get("p", 1, 1);
  ps.zero_grad();
  Var loss = nn::scale(nn::sum_all(p), 1000.0);  // grad = 1000
  nn::backward(loss);
  CHECK(ps.grad_global_norm() == doctest::Approx(1000.0));
  double before = p.value()(0, 0);
  nn::AdamW opt;
  opt.weight_decay = 0.0;
  opt.clip_norm = 1.0;
  opt.step(ps, 0.1);
  // clipped grad = 1, adam normalizes to ~1: step ~ lr
  CHECK(std::abs(p.value()(0, 0) - before) < 0.2);
  CHECK(std::abs(p.value()(0, 0) - before) > 0.05);
}
