#include "gemvpc/metrics.hpp"

#include "gemvpc/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using nlohmann::json;

namespace gemvpc {

namespace {

using Counts = std::map<std::vector<std::string>, long>;

Counts ngram_counts(const TokenSeq& toks, int n) {
  Counts c;
  if (static_cast<int>(toks.size()) < n) return c;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    c[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
  return c;
}

void check_aligned(const std::vector<TokenSeq>& c, const std::vector<TokenSeq>& r) {
  if (c.empty()) throw ValidationError("empty candidate corpus");
  if (c.size() != r.size())
    throw ValidationError("candidate/reference count mismatch");
}

}  // namespace

double bleu4(const std::vector<TokenSeq>& candidates,
             const std::vector<TokenSeq>& references) {
  check_aligned(candidates, references);
  double log_sum = 0;
  long total_c = 0, total_r = 0;
  for (size_t v = 0; v < candidates.size(); ++v) {
    total_c += static_cast<long>(candidates[v].size());
    total_r += static_cast<long>(references[v].size());
  }
  if (total_c == 0) throw ValidationError("empty candidate corpus");
  for (int n = 1; n <= 4; ++n) {
    long num = 0, den = 0;
    for (size_t v = 0; v < candidates.size(); ++v) {
      Counts cc = ngram_counts(candidates[v], n);
      Counts rc = ngram_counts(references[v], n);
      for (const auto& [g, count] : cc) {
        auto it = rc.find(g);
        num += std::min(count, it == rc.end() ? 0L : it->second);
        den += count;
      }
    }
    if (num == 0 || den == 0) return 0.0;  // no smoothing
    log_sum += 0.25 * std::log(static_cast<double>(num) / den);
  }
  double bp = total_c > total_r
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(total_r) / total_c);
  return bp * std::exp(log_sum);
}

namespace {

long lcs_len(const TokenSeq& a, const TokenSeq& b) {
  std::vector<long> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_one(const TokenSeq& cand, const TokenSeq& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  double lcs = static_cast<double>(lcs_len(cand, ref));
  if (lcs == 0) return 0.0;
  double r = lcs / ref.size(), p = lcs / cand.size();
  const double b2 = 1.2 * 1.2;
  return (1.0 + b2) * r * p / (r + b2 * p);
}

std::vector<double> cider_scores(const std::vector<TokenSeq>& candidates,
                                 const std::vector<TokenSeq>& references) {
  const int N = static_cast<int>(candidates.size());
  const double sigma = 6.0;
  // document frequencies from the reference corpus, per n
  std::vector<Counts> df(4);
  for (const auto& ref : references)
    for (int n = 1; n <= 4; ++n)
      for (const auto& [g, c] : ngram_counts(ref, n)) df[n - 1][g]++;
  auto idf = [&](int n, const std::vector<std::string>& g) {
    auto it = df[n - 1].find(g);
    long d = it == df[n - 1].end() ? 0 : it->second;
    return std::log(static_cast<double>(N)) - std::log(static_cast<double>(std::max(1L, d)));
  };
  std::vector<double> out(N, 0.0);
  for (int v = 0; v < N; ++v) {
    double acc = 0;
    double delta = static_cast<double>(candidates[v].size()) -
                   static_cast<double>(references[v].size());
    double penalty = std::exp(-delta * delta / (2.0 * sigma * sigma));
    for (int n = 1; n <= 4; ++n) {
      Counts cc = ngram_counts(candidates[v], n);
      Counts rc = ngram_counts(references[v], n);
      double dot = 0, nc = 0, nr = 0;
      for (const auto& [g, c] : cc) {
        double w = idf(n, g);
        nc += (c * w) * (c * w);
        auto it = rc.find(g);
        if (it != rc.end()) dot += std::min(c, it->second) * w * it->second * w;
      }
      for (const auto& [g, c] : rc) {
        double w = idf(n, g);
        nr += (c * w) * (c * w);
      }
      double sim = (nc > 0 && nr > 0) ? dot / (std::sqrt(nc) * std::sqrt(nr)) : 0.0;
      acc += sim * penalty;
    }
    out[v] = 10.0 * acc / 4.0;
  }
  return out;
}

double meteor_one(const TokenSeq& cand, const TokenSeq& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<int> cand_match(cand.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);
  // stage 1: exact surface match, greedy left-to-right
  for (size_t i = 0; i < cand.size(); ++i)
    for (size_t j = 0; j < ref.size(); ++j)
      if (!ref_used[j] && cand_match[i] < 0 && cand[i] == ref[j]) {
        cand_match[i] = static_cast<int>(j);
        ref_used[j] = true;
      }
  // stage 2: stemmed match on the remainder
  std::vector<std::string> cand_stem(cand.size()), ref_stem(ref.size());
  for (size_t i = 0; i < cand.size(); ++i) cand_stem[i] = stem(cand[i]);
  for (size_t j = 0; j < ref.size(); ++j) ref_stem[j] = stem(ref[j]);
  for (size_t i = 0; i < cand.size(); ++i)
    for (size_t j = 0; j < ref.size(); ++j)
      if (!ref_used[j] && cand_match[i] < 0 && cand_stem[i] == ref_stem[j]) {
        cand_match[i] = static_cast<int>(j);
        ref_used[j] = true;
      }
  long m = 0;
  for (int j : cand_match)
    if (j >= 0) ++m;
  if (m == 0) return 0.0;
  // chunks: maximal runs consecutive in both sequences
  long chunks = 0;
  int prev_ref = -2;
  for (size_t i = 0; i < cand.size(); ++i) {
    if (cand_match[i] < 0) {
      prev_ref = -2;
      continue;
    }
    if (cand_match[i] != prev_ref + 1) ++chunks;
    prev_ref = cand_match[i];
  }
  double p = static_cast<double>(m) / cand.size();
  double r = static_cast<double>(m) / ref.size();
  const double alpha = 0.9;
  double f = p * r / (alpha * p + (1.0 - alpha) * r);
  double frag = static_cast<double>(chunks) / m;
  double pen = 0.5 * frag * frag * frag;  // gamma = 0.5, beta = 3
  return f * (1.0 - pen);
}

}  // namespace

double rouge_l(const std::vector<TokenSeq>& candidates,
               const std::vector<TokenSeq>& references) {
  check_aligned(candidates, references);
  double sum = 0;
  for (size_t v = 0; v < candidates.size(); ++v)
    sum += rouge_l_one(candidates[v], references[v]);
  return sum / candidates.size();
}

double cider_d(const std::vector<TokenSeq>& candidates,
               const std::vector<TokenSeq>& references) {
  check_aligned(candidates, references);
  auto scores = cider_scores(candidates, references);
  double sum = 0;
  for (double s : scores) sum += s;
  return sum / scores.size();
}

double meteor_lite(const std::vector<TokenSeq>& candidates,
                   const std::vector<TokenSeq>& references) {
  check_aligned(candidates, references);
  double sum = 0;
  for (size_t v = 0; v < candidates.size(); ++v)
    sum += meteor_one(candidates[v], references[v]);
  return sum / candidates.size();
}

double div2(const std::vector<TokenSeq>& paragraphs) {
  if (paragraphs.empty()) throw ValidationError("empty paragraph list");
  double sum = 0;
  for (const auto& p : paragraphs) {
    Counts c = ngram_counts(p, 2);
    long total = 0;
    for (const auto& [g, n] : c) total += n;
    // a paragraph too short for any 2-gram counts as fully diverse
    sum += total == 0 ? 100.0 : 100.0 * static_cast<double>(c.size()) / total;
  }
  return sum / paragraphs.size();
}

double rep4(const std::vector<TokenSeq>& paragraphs, bool more_than_once) {
  if (paragraphs.empty()) throw ValidationError("empty paragraph list");
  double sum = 0;
  for (const auto& p : paragraphs) {
    Counts c = ngram_counts(p, 4);
    long total = 0, distinct = 0, repeated_mass = 0;
    for (const auto& [g, n] : c) {
      total += n;
      ++distinct;
      if (n > 1) repeated_mass += n;
    }
    if (total == 0) continue;  // no 4-grams: repetition defined as 0
    double num = more_than_once ? static_cast<double>(repeated_mass)
                                : static_cast<double>(total - distinct);
    sum += 100.0 * num / total;
  }
  return sum / paragraphs.size();
}

std::string MetricReport::to_json() const {
  json j;
  j["bleu4"] = bleu4;
  j["meteor"] = meteor;
  j["cider"] = cider;
  j["rouge_l"] = rouge_l;
  j["div2"] = div2;
  j["rep4"] = rep4;
  json pv = json::array();
  for (const auto& v : per_video)
    pv.push_back({{"video_id", v.video_id},
                  {"category", v.category},
                  {"cider", v.cider},
                  {"rouge_l", v.rouge_l},
                  {"meteor", v.meteor}});
  j["per_video"] = pv;
  j["per_category"] = per_category;
  return j.dump(2);
}

std::string MetricReport::per_category_csv() const {
  std::ostringstream os;
  os << "category,count,cider,rouge_l,meteor\n";
  for (const auto& [cat, vals] : per_category)
    os << cat << "," << vals.at("count") << "," << vals.at("cider") << ","
       << vals.at("rouge_l") << "," << vals.at("meteor") << "\n";
  return os.str();
}

MetricReport evaluate_captions(const std::map<std::string, TokenSeq>& candidates,
                               const std::map<std::string, TokenSeq>& references,
                               const std::map<std::string, std::string>& categories) {
  if (candidates.empty()) throw ValidationError("no candidate captions to evaluate");
  std::vector<std::string> ids;
  std::vector<TokenSeq> cands, refs;
  for (const auto& [id, cand] : candidates) {
    auto it = references.find(id);
    if (it == references.end())
      throw ValidationError("no reference for video " + id);
    ids.push_back(id);
    cands.push_back(cand);
    refs.push_back(it->second);
  }
  MetricReport rep;
  rep.bleu4 = bleu4(cands, refs);
  rep.rouge_l = rouge_l(cands, refs);
  rep.meteor = meteor_lite(cands, refs);
  rep.div2 = div2(cands);
  rep.rep4 = rep4(cands);
  auto cids = cider_scores(cands, refs);
  double csum = 0;
  for (double s : cids) csum += s;
  rep.cider = csum / cids.size();
  std::map<std::string, std::vector<size_t>> by_cat;
  for (size_t v = 0; v < ids.size(); ++v) {
    MetricReport::PerVideo pv;
    pv.video_id = ids[v];
    auto cit = categories.find(ids[v]);
    pv.category = cit == categories.end() ? "all" : cit->second;
    pv.cider = cids[v];
    pv.rouge_l = rouge_l_one(cands[v], refs[v]);
    pv.meteor = meteor_one(cands[v], refs[v]);
    by_cat[pv.category].push_back(v);
    rep.per_video.push_back(std::move(pv));
  }
  for (const auto& [cat, idx] : by_cat) {
    double c = 0, r = 0, m = 0;
    for (size_t v : idx) {
      c += rep.per_video[v].cider;
      r += rep.per_video[v].rouge_l;
      m += rep.per_video[v].meteor;
    }
    rep.per_category[cat] = {{"count", static_cast<double>(idx.size())},
                             {"cider", c / idx.size()},
                             {"rouge_l", r / idx.size()},
                             {"meteor", m / idx.size()}};
  }
  return rep;
}

}  // namespace gemvpc
