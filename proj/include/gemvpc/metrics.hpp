#pragma once

// Native paragraph-level caption metrics: BLEU-4, ROUGE-L, CIDEr-D,
// METEOR-lite, Div2, R4.

#include "gemvpc/data.hpp"

#include <map>
#include <string>
#include <vector>

namespace gemvpc {

using TokenSeq = std::vector<std::string>;

// Corpus BLEU-4: clipped modified precisions n=1..4, geometric mean, brevity
// penalty, no smoothing. One reference per candidate.
double bleu4(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references);

// Mean-over-videos LCS F-score with beta = 1.2.
double rouge_l(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references);

// CIDEr-D: per-n TF-IDF cosine with count clipping and a gaussian length
// penalty (sigma = 6), averaged over n = 1..4, scaled by 10. IDF comes from
// the reference corpus.
double cider_d(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references);

// Unigram-alignment METEOR without synonym/paraphrase stages: exact matches
// first, then stemmed; F_mean with alpha = 0.9; chunk penalty gamma = 0.5,
// beta = 3.
double meteor_lite(const std::vector<TokenSeq>& candidates,
                   const std::vector<TokenSeq>& references);

// Per-paragraph distinct-2-gram ratio x100, averaged.
double div2(const std::vector<TokenSeq>& paragraphs);
// Per-paragraph repeated-4-gram ratio x100 ((total - distinct) / total), averaged.
// `more_than_once` switches to the alternative "n-grams appearing more than
// once / total" reading.
double rep4(const std::vector<TokenSeq>& paragraphs, bool more_than_once = false);

struct MetricReport {
  double bleu4 = 0, meteor = 0, cider = 0, rouge_l = 0, div2 = 0, rep4 = 0;
  struct PerVideo {
    std::string video_id;
    std::string category;
    double cider = 0, rouge_l = 0, meteor = 0;
  };
  std::vector<PerVideo> per_video;
  // category -> averaged (cider, rouge_l, meteor, count)
  std::map<std::string, std::map<std::string, double>> per_category;

  std::string to_json() const;
  std::string per_category_csv() const;
};

// candidates/references keyed by video id; per-event captions must already be
// joined into one paragraph token sequence per video.
MetricReport evaluate_captions(const std::map<std::string, TokenSeq>& candidates,
                               const std::map<std::string, TokenSeq>& references,
                               const std::map<std::string, std::string>& categories = {});

}  // namespace gemvpc
