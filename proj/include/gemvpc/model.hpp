#pragma once

// Dual-stream recurrent transformer: a visual stream ([CLS] + projected
// frame features + caption) and a node stream (selected theme/video graph
// nodes + caption), each with optional per-layer memory recurrence, fused by
// cross-attention and decoded by a next-word head.

#include "gemvpc/graph_encoder.hpp"
#include "gemvpc/nn/layers.hpp"

#include <memory>
#include <optional>

namespace gemvpc {

enum class Recurrence { None, MART, TinT };
std::string recurrence_name(Recurrence r);
Recurrence recurrence_from_name(const std::string& s);

struct ModelConfig {
  int hidden = 768;
  int intermediate = 768;
  int layers = 2;
  int heads = 12;
  int token_type_count = 10;
  int max_visual_tokens = 32;
  int max_caption_len = 24;
  int vocab_size = 0;
  int d_visual = 0;
  int node_feat_dim = 64;  // text-embedder dim feeding the graph encoders
  Recurrence recurrence = Recurrence::MART;
  int top_n_tg = 10;
  int top_n_vg = 10;
  int memory_slots = 4;
  int gat_hidden = 0;  // 0 = same as hidden
  int tg_layers = 2, vg_layers = 1, gat_heads = 4;
  bool use_node_stream = true;     // false = visual-only ablation
  bool softmax_over_nodes = true;  // node-selection score normalization variant

  void validate() const;  // throws ValidationError
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Token-type id assignment (token_type_count = 10).
int token_type_cls();
int token_type_visual();
int token_type_caption();
int token_type_tg();
int token_type_vg(NodeType t);  // 4..9 by node type

// --- standalone ops (unit-testable pieces of the stream machinery) ---

struct NodeSelection {
  std::vector<int> indices;   // min(n, |nodes|) highest-prob, ties to lower index
  Eigen::VectorXd probs;      // over all candidates, in input order
  nn::Var probs_var;          // candidates x 1, differentiable
};
NodeSelection select_nodes(const nn::Var& h_cls, const nn::Var& node_embs,
                           const nn::Var& Wh, const nn::Var& Wc, int n,
                           bool softmax_over_nodes = true);

struct MartCell {
  nn::MultiHeadAttention out_attn;  // query = H_bar, key/value = [M_prev; H_bar]
  nn::MultiHeadAttention s_attn;    // query = M_prev, key/value = [M_prev; H_bar]
  nn::Var Wmc, Wsc, bc, Wmz, Wsz, bz;
  nn::Var mem_init;  // memory_slots x hidden, learned initial memory
  static MartCell create(nn::ParamStore& ps, const std::string& prefix, int hidden,
                         int heads, int memory_slots);
  // `h_mask` is the stream's (L x L) self-attention mask; memory columns are
  // always visible. Returns (H_out, M_new).
  std::pair<nn::Var, nn::Var> update(const nn::Var& M_prev, const nn::Var& H_bar,
                                     const nn::Mat& h_mask) const;
};

struct TintCell {
  nn::MultiHeadAttention ham;  // history attention: query = H_bar, kv = stack
  nn::FeedForward mlp;
  static TintCell create(nn::ParamStore& ps, const std::string& prefix, int hidden,
                         int intermediate, int heads);
  // Returns (H_out, stack with H_bar appended). Empty stack = t = 0.
  std::pair<nn::Var, std::vector<nn::Var>> update(const std::vector<nn::Var>& stack,
                                                  const nn::Var& H_bar) const;
};

nn::Var predict_word_logits(const nn::Var& hv_caption, const nn::Var& hn_caption,
                            const nn::Linear& head);

// --- model ---

struct StreamMemory {
  std::vector<nn::Var> mart;               // per layer
  std::vector<std::vector<nn::Var>> tint;  // per layer stack
};

struct MemoryState {
  StreamMemory visual, node;
  int t = 0;  // next event index
};

struct EventInputs {
  nn::Mat visual;                // frames x d_visual
  std::vector<int> caption_in;   // BOS + tokens fed to the decoder
  int t = 0;
  const VideoGraph* vg = nullptr;
  nn::Var vg_emb;                // full-graph node embeddings (model hidden dim)
  const ThemeGraph* tg = nullptr;
  nn::Var tg_emb;
};

struct SelectedNode {
  std::string label;
  std::string type;  // "tg" or a video-graph node type name
  double prob = 0;
};

struct EventResult {
  nn::Var logits;  // caption_len x vocab; row i scores token i+1
  std::vector<SelectedNode> selected;  // sorted by prob desc
};

class CaptionModel {
 public:
  CaptionModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  nn::Var encode_theme_graph(const ThemeGraph& g) const;
  nn::Var encode_video_graph(const VideoGraph& g) const;

  MemoryState initial_memory() const;
  EventResult forward_event(const EventInputs& in, MemoryState& mem) const;

 private:
  struct StreamLayer {
    nn::MultiHeadAttention self_attn;
    nn::FeedForward ffn;
    nn::LayerNorm norm1, norm2, norm_mem;
    std::optional<MartCell> mart;
    std::optional<TintCell> tint;
  };
  nn::Var run_stream(const std::vector<StreamLayer>& layers, nn::Var x,
                     const nn::Mat& mask, StreamMemory& mem) const;
  std::vector<StreamLayer> make_stream(const std::string& prefix);

  ModelConfig cfg_;
  nn::ParamStore params_;
  std::unique_ptr<GraphEncoder> tg_encoder_, vg_encoder_;
  std::vector<StreamLayer> visual_layers_, node_layers_;
  nn::Var token_emb_, pos_emb_, type_emb_, cls_emb_;
  nn::LayerNorm embed_norm_v_, embed_norm_n_;
  nn::Linear visual_proj_;
  nn::Var sel_Wh_, sel_Wc_;
  nn::MultiHeadAttention cross_v_, cross_n_;
  nn::LayerNorm cross_norm_v_, cross_norm_n_;
  nn::Linear head_;
};

}  // namespace gemvpc
