#pragma once

#include "gemvpc/data.hpp"
#include "gemvpc/embedder.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gemvpc {

enum class NodeType { Action, Location, ContextualPhrase, Object, Audio, Commonsense };
enum class GraphMethod { VF, ASR };

std::string node_type_name(NodeType t);
NodeType node_type_from_name(const std::string& s);
std::string graph_method_name(GraphMethod m);
GraphMethod graph_method_from_name(const std::string& s);

struct GraphNode {
  int id = -1;
  NodeType type = NodeType::Action;
  std::string label;
  int timestep = 0;
  Eigen::VectorXd feature;
  std::optional<double> source_confidence;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  std::string relation;
};

struct VideoGraph {
  std::string video_id;
  GraphMethod method = GraphMethod::VF;
  int n_events = 0;
  std::vector<GraphNode> nodes;  // canonical order: (timestep, type, label)
  std::vector<GraphEdge> edges;
};

struct FilterConfig {
  double no_action_threshold = 0.35;
  double commonsense_min_action_conf = 0.5;
  double object_sim_threshold = 0.25;
  double audio_sim_threshold = 0.3;
  double levenshtein_ratio_max = 0.70;
  double verb_sim_threshold = 0.6;  // ASR tuple retention
  std::set<std::string> speech_labels = {"speech", "male speech", "female speech",
                                         "conversation", "narration"};
  std::set<std::string> audio_label_allowlist;  // ASR only; empty = keep all
};

// Verb/noun/adverb sets tagged from the training captions, used by the
// ASR-method filters.
struct TrainingLexicon {
  std::vector<std::string> verbs;
  std::vector<Eigen::VectorXd> verb_embeddings;  // parallel to verbs
  std::set<std::string> noun_adverbs;
};

TrainingLexicon build_training_lexicon(const std::vector<VideoRecord>& records,
                                       const std::map<std::string, AnnotationBundle>& bundles,
                                       const TextEmbedder& embedder);

// --- per-event node construction ---

std::vector<GraphNode> build_action_nodes_vf(const EventAnnotations& ev, int t,
                                             const FilterConfig& cfg,
                                             const TextEmbedder& embedder);

std::string majority_location(const std::vector<std::string>& vqa_locations);

struct CommonsenseEntry {
  GraphNode node;
  std::string parent_label;  // generating action / contextual-phrase label
  std::string relation;      // edge label
};

std::vector<CommonsenseEntry> build_commonsense_nodes(
    const std::vector<GraphNode>& generating_nodes,
    const std::vector<CommonsenseRecord>& records, GraphMethod method,
    const FilterConfig& cfg, const TextEmbedder& embedder, int t,
    int* skipped_heads = nullptr);

std::vector<ScoredLabel> filter_context_labels(const std::vector<ScoredLabel>& candidates,
                                               const std::vector<GraphNode>& anchors,
                                               double threshold,
                                               const TextEmbedder& embedder);

std::vector<GraphNode> build_action_nodes_asr(const EventAnnotations& ev, int t,
                                              const TrainingLexicon& lexicon,
                                              const FilterConfig& cfg,
                                              const TextEmbedder& embedder);

GraphNode build_contextual_phrase_node(const std::vector<GraphNode>& action_nodes,
                                       const TextEmbedder& embedder);

// --- assembly / validation / IO ---

struct EventNodeSet {
  std::vector<GraphNode> actions;
  std::optional<GraphNode> anchor;  // location (VF) or contextual phrase (ASR)
  std::vector<CommonsenseEntry> commonsense;
  std::vector<GraphNode> objects;
  std::vector<GraphNode> audio;
};

VideoGraph assemble_graph(const std::string& video_id,
                          const std::vector<EventNodeSet>& per_event, GraphMethod method);

// Throws ValidationError describing the first violated invariant.
void validate_graph(const VideoGraph& g);

// Full node-construction + assembly pipeline for one video.
VideoGraph build_video_graph(const VideoRecord& record, const AnnotationBundle& bundle,
                             GraphMethod method, const FilterConfig& cfg,
                             const TrainingLexicon& lexicon, const TextEmbedder& embedder);

// JSON structure + parallel feature blob; byte-stable given the graph.
std::string serialize_graph_json(const VideoGraph& g);
std::vector<std::uint8_t> serialize_feature_blob(const VideoGraph& g);
VideoGraph deserialize_graph(const std::string& json_text,
                             const std::vector<std::uint8_t>& blob);

void save_video_graph(const VideoGraph& g, const std::string& dir);
VideoGraph load_video_graph(const std::string& dir, const std::string& video_id);

}  // namespace gemvpc
