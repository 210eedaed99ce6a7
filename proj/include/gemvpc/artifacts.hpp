#pragma once

// Glue types shared by the training loop, the decoder, and the CLI: the
// per-video artifact set and class-resolved theme-graph lookup.

#include "gemvpc/embedder.hpp"
#include "gemvpc/text.hpp"
#include "gemvpc/theme_graph.hpp"
#include "gemvpc/video_graph.hpp"

#include <optional>

namespace gemvpc {

struct VideoArtifacts {
  const VideoRecord* record = nullptr;
  const VisualFeatureSeq* features = nullptr;
  const AnnotationBundle* bundle = nullptr;
  const VideoGraph* graph = nullptr;
};

// Theme graphs keyed by action class, with a corpus-global fallback. For the
// ASR pipeline the class of an event is a k-means cluster of its transcript
// embedding; for VF it is the highest-confidence predicted action label.
struct ThemeGraphIndex {
  GraphMethod method = GraphMethod::VF;
  std::map<std::string, ThemeGraph> by_class;
  ThemeGraph global;
  std::optional<ActionClusterModel> clusters;  // ASR only

  std::optional<std::string> class_of_event(const EventAnnotations& ev,
                                            const TextEmbedder& embedder) const {
    if (method == GraphMethod::VF) {
      const ScoredLabel* best = nullptr;
      for (const auto& p : ev.action_preds)
        if (!best || p.confidence > best->confidence) best = &p;
      if (!best) return std::nullopt;
      return to_lower(best->label);
    }
    if (!clusters || ev.asr_text.empty()) return std::nullopt;
    int c = clusters->assign(embedder.embed(to_lower(ev.asr_text)));
    return "cluster_" + std::to_string(c);
  }

  const ThemeGraph& resolve(const EventAnnotations& ev,
                            const TextEmbedder& embedder) const {
    auto cls = class_of_event(ev, embedder);
    if (cls) {
      auto it = by_class.find(*cls);
      if (it != by_class.end()) return it->second;
    }
    if (global.nodes.empty())
      throw ValidationError("no theme graph for event class and no global fallback");
    return global;
  }
};

}  // namespace gemvpc
