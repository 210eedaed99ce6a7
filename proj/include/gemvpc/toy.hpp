#pragma once

#include "gemvpc/data.hpp"

#include <map>
#include <vector>

namespace gemvpc {

// Deterministic synthetic stand-in for the real datasets + extractor outputs.
//
// Each event draws a latent action class and a latent adverb. The caption is
// a fixed template over (class, adverb); visual features carry the class as a
// one-hot signature plus noise; the annotation bundle reports the class label
// with confidence in [0.6, 1.0] plus low-confidence distractors, and carries
// the adverb only through object/commonsense annotations. The adverb is thus
// recoverable from graph nodes but not from the visual features.
struct ToyDataset {
  std::vector<VideoRecord> records;
  std::vector<VisualFeatureSeq> features;
  std::map<std::string, AnnotationBundle> bundles;
};

struct ToyConfig {
  int n_videos = 50;
  int n_events = 3;
  int vocab_size = 40;  // approximate target for distinct grammar words
  int d_visual = 32;
  int frames_per_event = 4;
  double noise_stddev = 0.05;
  std::string id_prefix = "toy";
};

ToyDataset generate_toy_dataset(std::uint64_t seed, const ToyConfig& cfg = {});

// Latent class labels in signature order (one-hot index i of the visual
// feature space corresponds to class i).
std::vector<std::string> toy_class_labels(int n_classes);

}  // namespace gemvpc
