#pragma once

// Autoregressive paragraph generation with memory threaded across events.

#include "gemvpc/artifacts.hpp"
#include "gemvpc/checkpoint.hpp"
#include "gemvpc/rng.hpp"

namespace gemvpc {

struct DecodeConfig {
  enum class Mode { Nucleus, Greedy };
  double top_p = 0.6;
  double temperature = 0.5;
  int max_len = 20;  // generated tokens per event, excluding EOS
  std::uint64_t seed = 1;
  Mode mode = Mode::Nucleus;
};

// Temperature first, then smallest prefix with cumulative mass >= top_p,
// renormalize, sample.
int nucleus_sample(const Eigen::VectorXd& logits, const DecodeConfig& cfg, DetRng& rng);

struct GeneratedParagraph {
  std::vector<std::vector<std::string>> captions;        // one per event
  std::vector<std::vector<SelectedNode>> selected_nodes;  // top <=10 per event
};

GeneratedParagraph caption_video(const CaptionModel& model, const VideoArtifacts& art,
                                 const ThemeGraphIndex& themes,
                                 const TextEmbedder& embedder, const Vocabulary& vocab,
                                 const DecodeConfig& cfg);

std::string paragraphs_to_json(const std::map<std::string, GeneratedParagraph>& out);
std::map<std::string, GeneratedParagraph> paragraphs_from_json(const std::string& text);

}  // namespace gemvpc
