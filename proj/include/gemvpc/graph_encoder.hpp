#pragma once

// GATv2-style graph encoders with edge-label features, for theme graphs and
// video-specific graphs.

#include "gemvpc/nn/layers.hpp"
#include "gemvpc/theme_graph.hpp"
#include "gemvpc/video_graph.hpp"

namespace gemvpc {

// Fixed edge-relation vocabulary shared by both encoders. Index 0 is the
// learned self-loop relation; index 1 carries NPMI-weighted theme edges.
int edge_relation_id(const std::string& relation);
int edge_relation_count();

// Directed, relation-labelled edge list plus dense node features; the common
// input form both graph kinds lower into.
struct GraphTensorInput {
  nn::Mat features;  // n x in_dim
  struct Edge {
    int src = 0, dst = 0;
    int rel = 0;        // edge_relation_id
    double weight = 1;  // scales the relation feature (NPMI for theme edges)
  };
  std::vector<Edge> edges;  // self-loops added by the layer, not stored here
};

GraphTensorInput lower_theme_graph(const ThemeGraph& g);
GraphTensorInput lower_video_graph(const VideoGraph& g);

struct GatLayer {
  int heads = 4;
  double leaky_slope = 0.2;
  nn::Var Ws, Wt, We;  // in x out, in x out, edge_dim x out
  nn::Var attn;        // out x heads; column h scores head h's slice (zero-padded)
  static GatLayer create(nn::ParamStore& ps, const std::string& prefix,
                         Eigen::Index in_dim, Eigen::Index out_dim, int heads,
                         double leaky_slope = 0.2);
  nn::Var forward(const nn::Var& node_feats, const std::vector<GraphTensorInput::Edge>& edges,
                  const nn::Var& rel_emb) const;
};

struct GraphEncoderConfig {
  int in_dim = 64;    // text-embedder dim
  int hidden = 128;   // GAT width
  int out_dim = 128;  // model hidden size after projection
  int layers = 1;
  int heads = 4;
  double leaky_slope = 0.2;
};

class GraphEncoder {
 public:
  GraphEncoder(nn::ParamStore& ps, const std::string& prefix, const GraphEncoderConfig& cfg);
  // Returns n x out_dim node embeddings; rows follow input node order.
  nn::Var forward(const GraphTensorInput& in) const;
  const GraphEncoderConfig& config() const { return cfg_; }

 private:
  GraphEncoderConfig cfg_;
  nn::Var rel_emb_;  // relation-label feature table, edge_relation_count x edge_dim
  std::vector<GatLayer> layers_;
  std::vector<nn::LayerNorm> norms_;
  nn::Linear out_proj_;
};

// Rows of `emb` restricted to nodes with the given timestep; `node_ids` gets
// the matching original node ids. Throws for t outside [0, n_events).
nn::Var extract_timestep_nodes(const nn::Var& emb, const VideoGraph& g, int t,
                               std::vector<int>* node_ids = nullptr);

}  // namespace gemvpc
