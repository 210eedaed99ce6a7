#pragma once

// Shared fixtures and oracles for the test suites: finite-difference gradient
// checking, brute-force NPMI / CIDEr reference implementations, and random
// corpus generators.

#include "gemvpc/metrics.hpp"
#include "gemvpc/nn/layers.hpp"
#include "gemvpc/rng.hpp"
#include "gemvpc/theme_graph.hpp"

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace testutil {

// Max relative error between analytic gradients (via backward on loss_fn())
// and central finite differences, over every entry of the named parameters.
template <typename F>
double max_rel_grad_err(gemvpc::nn::ParamStore& ps,
                        const std::vector<std::string>& names, F loss_fn,
                        double h = 1e-5) {
  using gemvpc::nn::Mat;
  ps.zero_grad();
  gemvpc::nn::Var loss = loss_fn();
  gemvpc::nn::backward(loss);
  std::map<std::string, Mat> analytic;
  for (const auto& nm : names) {
    gemvpc::nn::Var p = ps.at(nm);
    Mat g = p.grad();
    if (g.size() == 0) g = Mat::Zero(p.rows(), p.cols());
    analytic[nm] = g;
  }
  double worst = 0;
  for (const auto& nm : names) {
    gemvpc::nn::Var p = ps.at(nm);
    const Mat& g = analytic[nm];
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        double orig = p.mutable_value()(i, j);
        p.mutable_value()(i, j) = orig + h;
        double f1 = loss_fn().value()(0, 0);
        p.mutable_value()(i, j) = orig - h;
        double f0 = loss_fn().value()(0, 0);
        p.mutable_value()(i, j) = orig;
        double num = (f1 - f0) / (2.0 * h);
        double err = std::abs(num - g(i, j)) /
                     std::max({1.0, std::abs(num), std::abs(g(i, j))});
        worst = std::max(worst, err);
      }
  }
  return worst;
}

// Set-counting NPMI oracle: counts each word / pair once per sentence.
inline double npmi_oracle(const std::vector<std::vector<std::string>>& sentences,
                          const std::string& a, const std::string& b) {
  long n = static_cast<long>(sentences.size());
  long ca = 0, cb = 0, cab = 0;
  for (const auto& s : sentences) {
    std::set<std::string> w(s.begin(), s.end());
    bool ha = w.count(a), hb = w.count(b);
    ca += ha;
    cb += hb;
    cab += ha && hb;
  }
  if (cab == 0) return -std::numeric_limits<double>::infinity();
  double pij = static_cast<double>(cab) / n;
  double pi = static_cast<double>(ca) / n;
  double pj = static_cast<double>(cb) / n;
  double pmi = std::log(pij / (pi * pj));
  double denom = -std::log(pij);
  if (denom == 0.0) return 1.0;  // pair present in every sentence
  return pmi / denom;
}

// Independent CIDEr-D reference: explicit TF-IDF vectors per n with candidate
// count clipping and the gaussian length penalty, averaged n=1..4, x10.
inline double cider_oracle(const std::vector<gemvpc::TokenSeq>& cands,
                           const std::vector<gemvpc::TokenSeq>& refs) {
  using Gram = std::vector<std::string>;
  const int N = static_cast<int>(cands.size());
  auto grams = [](const gemvpc::TokenSeq& t, int n) {
    std::map<Gram, double> out;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i)
      out[Gram(t.begin() + i, t.begin() + i + n)] += 1.0;
    return out;
  };
  double total = 0;
  for (int n = 1; n <= 4; ++n) {
    std::map<Gram, double> df;
    for (const auto& r : refs)
      for (const auto& [g, c] : grams(r, n)) df[g] += 1.0;
    auto idf = [&](const Gram& g) {
      auto it = df.find(g);
      double d = it == df.end() ? 0.0 : it->second;
      return std::log(static_cast<double>(N)) - std::log(std::max(1.0, d));
    };
    for (int v = 0; v < N; ++v) {
      auto gc = grams(cands[v], n);
      auto gr = grams(refs[v], n);
      double dot = 0, nc = 0, nr = 0;
      for (const auto& [g, c] : gc) {
        double w = idf(g);
        nc += c * w * c * w;
        auto it = gr.find(g);
        if (it != gr.end()) dot += std::min(c, it->second) * w * it->second * w;
      }
      for (const auto& [g, c] : gr) nr += c * idf(g) * c * idf(g);
      double sim = (nc > 0 && nr > 0) ? dot / (std::sqrt(nc) * std::sqrt(nr)) : 0.0;
      double delta = static_cast<double>(cands[v].size()) -
                     static_cast<double>(refs[v].size());
      total += sim * std::exp(-delta * delta / 72.0);
    }
  }
  return 10.0 * total / (4.0 * N);
}

inline std::vector<std::vector<std::string>> random_corpus(gemvpc::DetRng& rng,
                                                           int max_sentences,
                                                           int vocab = 8) {
  static const char* kWords[] = {"ant", "bee", "cat", "dog", "eel",
                                 "fox", "gnu", "hen", "ibis", "jay"};
  int n = 1 + static_cast<int>(rng.uniform_int(max_sentences));
  std::vector<std::vector<std::string>> corpus;
  for (int s = 0; s < n; ++s) {
    int len = 1 + static_cast<int>(rng.uniform_int(8));
    std::vector<std::string> sent;
    for (int i = 0; i < len; ++i)
      sent.push_back(kWords[rng.uniform_int(std::min(vocab, 10))]);
    corpus.push_back(std::move(sent));
  }
  return corpus;
}

inline gemvpc::TokenSeq random_sentence(gemvpc::DetRng& rng, int max_len,
                                        int vocab = 6) {
  static const char* kWords[] = {"red", "blue", "green", "dog", "cat", "runs",
                                 "eats", "sleeps"};
  int len = 1 + static_cast<int>(rng.uniform_int(max_len));
  gemvpc::TokenSeq t;
  for (int i = 0; i < len; ++i) t.push_back(kWords[rng.uniform_int(std::min(vocab, 8))]);
  return t;
}

// Deterministic embedder with hand-set vectors, for exact cosine boundaries.
class FixedEmbedder : public gemvpc::TextEmbedder {
 public:
  explicit FixedEmbedder(int dim) : dim_(dim) {}
  void set(const std::string& s, Eigen::VectorXd v) { table_[s] = std::move(v); }
  int dim() const override { return dim_; }
  Eigen::VectorXd embed(const std::string& text) const override {
    auto it = table_.find(text);
    if (it != table_.end()) return it->second;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    v(dim_ - 1) = 1.0;  // default: orthogonal to the hand-set axes
    return v;
  }

 private:
  int dim_;
  std::map<std::string, Eigen::VectorXd> table_;
};

}  // namespace testutil
