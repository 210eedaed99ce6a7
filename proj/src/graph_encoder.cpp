#include "gemvpc/graph_encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace gemvpc {

using nn::constant;
using nn::Mat;
using nn::Var;

namespace {
constexpr int kEdgeDim = 16;  // learned relation-feature width

const std::vector<std::string>& relation_list() {
  static const std::vector<std::string> kRelations = [] {
    std::vector<std::string> r = {"self",       "npmi",       "occursAfter",
                                  "occursBefore", "atLocation", "hasContext",
                                  "inScene",    "hasSound"};
    for (RelationToken t : all_relations()) r.push_back(relation_name(t));
    return r;
  }();
  return kRelations;
}
}  // namespace

int edge_relation_id(const std::string& relation) {
  const auto& rels = relation_list();
  for (size_t i = 0; i < rels.size(); ++i)
    if (rels[i] == relation) return static_cast<int>(i);
  throw ValidationError("unknown edge relation: " + relation);
}

int edge_relation_count() { return static_cast<int>(relation_list().size()); }

GraphTensorInput lower_theme_graph(const ThemeGraph& g) {
  if (g.nodes.empty()) throw ValidationError("cannot encode an empty theme graph");
  GraphTensorInput in;
  const int d = static_cast<int>(g.nodes[0].feature.size());
  in.features.resize(g.nodes.size(), d);
  for (size_t i = 0; i < g.nodes.size(); ++i)
    in.features.row(i) = g.nodes[i].feature.transpose();
  const int npmi_rel = edge_relation_id("npmi");
  for (const auto& e : g.edges) {  // undirected: both directions
    in.edges.push_back({e.a, e.b, npmi_rel, e.npmi});
    in.edges.push_back({e.b, e.a, npmi_rel, e.npmi});
  }
  return in;
}

GraphTensorInput lower_video_graph(const VideoGraph& g) {
  if (g.nodes.empty()) throw ValidationError("cannot encode an empty video graph");
  GraphTensorInput in;
  const int d = static_cast<int>(g.nodes[0].feature.size());
  in.features.resize(g.nodes.size(), d);
  for (size_t i = 0; i < g.nodes.size(); ++i)
    in.features.row(i) = g.nodes[i].feature.transpose();
  for (const auto& e : g.edges)
    in.edges.push_back({e.src, e.dst, edge_relation_id(e.relation), 1.0});
  return in;
}

GatLayer GatLayer::create(nn::ParamStore& ps, const std::string& prefix,
                          Eigen::Index in_dim, Eigen::Index out_dim, int heads,
                          double leaky_slope) {
  if (out_dim % heads != 0)
    throw std::invalid_argument("GAT out_dim not divisible by heads");
  GatLayer l;
  l.heads = heads;
  l.leaky_slope = leaky_slope;
  l.Ws = ps.get(prefix + ".Ws", in_dim, out_dim);
  l.Wt = ps.get(prefix + ".Wt", in_dim, out_dim);
  l.We = ps.get(prefix + ".We", kEdgeDim, out_dim);
  l.attn = ps.get(prefix + ".a", out_dim, heads);
  return l;
}

Var GatLayer::forward(const Var& node_feats,
                      const std::vector<GraphTensorInput::Edge>& edges,
                      const Var& rel_emb) const {
  const int n = static_cast<int>(node_feats.rows());
  std::vector<int> src, dst, rel;
  Eigen::VectorXd weight(edges.size() + n);
  for (const auto& e : edges) {
    src.push_back(e.src);
    dst.push_back(e.dst);
    rel.push_back(e.rel);
    weight(static_cast<Eigen::Index>(src.size()) - 1) = e.weight;
  }
  for (int i = 0; i < n; ++i) {  // self-loop with the learned "self" relation
    src.push_back(i);
    dst.push_back(i);
    rel.push_back(0);
    weight(static_cast<Eigen::Index>(src.size()) - 1) = 1.0;
  }
  Var S = matmul(node_feats, Ws);
  Var T = matmul(node_feats, Wt);
  Mat wcol = weight;
  Var efeat = matmul(scale_rows(select_rows(rel_emb, rel), constant(wcol)), We);
  Var Ssrc = select_rows(S, src);
  Var pre = Ssrc + select_rows(T, dst) + efeat;
  Var z = leaky_relu(pre, leaky_slope);
  Var scores = matmul(z, attn);  // m x heads
  const Eigen::Index dh = S.cols() / heads;
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var alpha = segment_softmax(slice_cols(scores, h, 1), dst, n);
    Var msg = slice_cols(Ssrc, h * dh, dh);
    outs.push_back(segment_weighted_sum(alpha, msg, dst, n));
  }
  return concat_cols(outs);
}

GraphEncoder::GraphEncoder(nn::ParamStore& ps, const std::string& prefix,
                           const GraphEncoderConfig& cfg)
    : cfg_(cfg) {
  rel_emb_ = ps.get_normal(prefix + ".rel_emb", edge_relation_count(), kEdgeDim, 0.1);
  for (int l = 0; l < cfg.layers; ++l) {
    int in = l == 0 ? cfg.in_dim : cfg.hidden;
    layers_.push_back(GatLayer::create(ps, prefix + ".gat" + std::to_string(l), in,
                                       cfg.hidden, cfg.heads, cfg.leaky_slope));
    norms_.push_back(nn::LayerNorm::create(ps, prefix + ".norm" + std::to_string(l),
                                           cfg.hidden));
  }
  out_proj_ = nn::Linear::create(ps, prefix + ".out", cfg.hidden, cfg.out_dim);
}

Var GraphEncoder::forward(const GraphTensorInput& in) const {
  if (in.features.rows() == 0) throw ValidationError("cannot encode an empty graph");
  if (in.features.cols() != cfg_.in_dim)
    throw ValidationError("graph feature dim mismatch: got " +
                          std::to_string(in.features.cols()) + ", expected " +
                          std::to_string(cfg_.in_dim));
  Var h = nn::constant(in.features);
  for (size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].forward(h, in.edges, rel_emb_);
    h = norms_[l].forward(h);
    if (l + 1 < layers_.size()) h = elu_(h);
  }
  return out_proj_.forward(h);
}

Var extract_timestep_nodes(const Var& emb, const VideoGraph& g, int t,
                           std::vector<int>* node_ids) {
  if (t < 0 || t >= g.n_events)
    throw ValidationError("timestep out of range: " + std::to_string(t));
  std::vector<int> ids;
  for (const auto& n : g.nodes)
    if (n.timestep == t) ids.push_back(n.id);
  if (ids.empty())
    throw ValidationError("no nodes at timestep " + std::to_string(t) +
                          " (graph invariant violated)");
  if (node_ids) *node_ids = ids;
  return select_rows(emb, ids);
}

}  // namespace gemvpc
