#include "gemvpc/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using nlohmann::json;

namespace gemvpc {

using nn::concat_cols;
using nn::concat_rows;
using nn::Mat;
using nn::Var;

std::string recurrence_name(Recurrence r) {
  switch (r) {
    case Recurrence::None: return "none";
    case Recurrence::MART: return "mart";
    case Recurrence::TinT: return "tint";
  }
  throw std::logic_error("bad recurrence");
}

Recurrence recurrence_from_name(const std::string& s) {
  if (s == "none") return Recurrence::None;
  if (s == "mart") return Recurrence::MART;
  if (s == "tint") return Recurrence::TinT;
  throw ValidationError("unknown recurrence mode: " + s + " (expected none|mart|tint)");
}

void ModelConfig::validate() const {
  if (hidden <= 0 || hidden % heads != 0)
    throw ValidationError("hidden must be positive and divisible by heads");
  if (top_n_tg < 1 || top_n_vg < 1) throw ValidationError("top_n must be >= 1");
  if (vocab_size <= 0) throw ValidationError("vocab_size must be set");
  if (d_visual <= 0) throw ValidationError("d_visual must be set");
  if (token_type_count < 10)
    throw ValidationError("token_type_count must cover the 10 used type ids");
  if (memory_slots < 1) throw ValidationError("memory_slots must be >= 1");
}

std::string ModelConfig::to_json() const {
  json j;
  j["hidden"] = hidden;
  j["intermediate"] = intermediate;
  j["layers"] = layers;
  j["heads"] = heads;
  j["token_type_count"] = token_type_count;
  j["max_visual_tokens"] = max_visual_tokens;
  j["max_caption_len"] = max_caption_len;
  j["vocab_size"] = vocab_size;
  j["d_visual"] = d_visual;
  j["node_feat_dim"] = node_feat_dim;
  j["recurrence"] = recurrence_name(recurrence);
  j["top_n_tg"] = top_n_tg;
  j["top_n_vg"] = top_n_vg;
  j["memory_slots"] = memory_slots;
  j["gat_hidden"] = gat_hidden;
  j["tg_layers"] = tg_layers;
  j["vg_layers"] = vg_layers;
  j["gat_heads"] = gat_heads;
  j["use_node_stream"] = use_node_stream;
  j["softmax_over_nodes"] = softmax_over_nodes;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.hidden = j.at("hidden");
  c.intermediate = j.at("intermediate");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.token_type_count = j.at("token_type_count");
  c.max_visual_tokens = j.at("max_visual_tokens");
  c.max_caption_len = j.at("max_caption_len");
  c.vocab_size = j.at("vocab_size");
  c.d_visual = j.at("d_visual");
  c.node_feat_dim = j.at("node_feat_dim");
  c.recurrence = recurrence_from_name(j.at("recurrence"));
  c.top_n_tg = j.at("top_n_tg");
  c.top_n_vg = j.at("top_n_vg");
  c.memory_slots = j.at("memory_slots");
  c.gat_hidden = j.at("gat_hidden");
  c.tg_layers = j.at("tg_layers");
  c.vg_layers = j.at("vg_layers");
  c.gat_heads = j.at("gat_heads");
  c.use_node_stream = j.at("use_node_stream");
  c.softmax_over_nodes = j.at("softmax_over_nodes");
  return c;
}

int token_type_cls() { return 0; }
int token_type_visual() { return 1; }
int token_type_caption() { return 2; }
int token_type_tg() { return 3; }
int token_type_vg(NodeType t) { return 4 + static_cast<int>(t); }

NodeSelection select_nodes(const Var& h_cls, const Var& node_embs, const Var& Wh,
                           const Var& Wc, int n, bool softmax_over_nodes) {
  if (!node_embs.valid() || node_embs.rows() == 0)
    throw ValidationError("select_nodes: empty candidate set");
  if (n < 1) throw ValidationError("select_nodes: n must be >= 1");
  Var q = matmul(h_cls, Wh);         // 1 x d
  Var proj = matmul(node_embs, Wc);  // N x d
  NodeSelection sel;
  if (softmax_over_nodes) {
    Var scores = matmul(proj, transpose(q));  // N x 1
    sel.probs_var = transpose(softmax_rows(transpose(scores)));
  } else {
    // alternate literal reading: softmax over the projected query dims
    sel.probs_var = matmul(proj, transpose(softmax_rows(q)));
  }
  sel.probs = sel.probs_var.value().col(0);
  const int N = static_cast<int>(sel.probs.size());
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (sel.probs(a) != sel.probs(b)) return sel.probs(a) > sel.probs(b);
    return a < b;
  });
  order.resize(std::min(n, N));
  sel.indices = std::move(order);
  return sel;
}

MartCell MartCell::create(nn::ParamStore& ps, const std::string& prefix, int hidden,
                          int heads, int memory_slots) {
  MartCell c;
  c.out_attn = nn::MultiHeadAttention::create(ps, prefix + ".out_attn", hidden, heads);
  c.s_attn = nn::MultiHeadAttention::create(ps, prefix + ".s_attn", hidden, heads);
  c.Wmc = ps.get(prefix + ".Wmc", hidden, hidden);
  c.Wsc = ps.get(prefix + ".Wsc", hidden, hidden);
  c.bc = ps.get_const(prefix + ".bc", 1, hidden, 0.0);
  c.Wmz = ps.get(prefix + ".Wmz", hidden, hidden);
  c.Wsz = ps.get(prefix + ".Wsz", hidden, hidden);
  c.bz = ps.get_const(prefix + ".bz", 1, hidden, 0.0);
  c.mem_init = ps.get_normal(prefix + ".mem_init", memory_slots, hidden, 0.02);
  return c;
}

std::pair<Var, Var> MartCell::update(const Var& M_prev, const Var& H_bar,
                                     const Mat& h_mask) const {
  const Eigen::Index m = M_prev.rows(), L = H_bar.rows();
  Var kv = concat_rows({M_prev, H_bar});
  Mat out_mask = Mat::Zero(L, m + L);
  if (h_mask.size() != 0) out_mask.block(0, m, L, L) = h_mask;
  Var H_out = out_attn.forward(H_bar, kv, out_mask);
  Var S = s_attn.forward(M_prev, kv, Mat());
  Var C = tanh_(add_row_broadcast(matmul(M_prev, Wmc) + matmul(S, Wsc), bc));
  Var Z = sigmoid_(add_row_broadcast(matmul(M_prev, Wmz) + matmul(S, Wsz), bz));
  Var ones = nn::constant(Mat::Ones(m, M_prev.cols()));
  Var M_new = cmul(ones - Z, C) + cmul(Z, M_prev);
  return {H_out, M_new};
}

TintCell TintCell::create(nn::ParamStore& ps, const std::string& prefix, int hidden,
                          int intermediate, int heads) {
  TintCell c;
  c.ham = nn::MultiHeadAttention::create(ps, prefix + ".ham", hidden, heads);
  c.mlp = nn::FeedForward::create(ps, prefix + ".mlp", hidden, intermediate);
  return c;
}

std::pair<Var, std::vector<Var>> TintCell::update(const std::vector<Var>& stack,
                                                  const Var& H_bar) const {
  const Eigen::Index L = H_bar.rows();
  const double d = static_cast<double>(H_bar.cols());
  Var Z = stack.empty() ? H_bar : ham.forward(H_bar, concat_rows(stack), Mat());
  // two-slice attention over {H_bar_i, Z_i} per position, softmax of a pair
  // expressed as a sigmoid of the score difference
  Var s_h = row_sum(cmul(H_bar, H_bar));
  Var s_z = row_sum(cmul(H_bar, Z));
  Var w = sigmoid_(scale(s_h - s_z, 1.0 / std::sqrt(d)));  // L x 1
  Var ones = nn::constant(Mat::Ones(L, 1));
  Var mixed = scale_rows(H_bar, w) + scale_rows(Z, ones - w);
  Var H_out = mlp.forward(mixed) + H_bar;
  std::vector<Var> new_stack = stack;
  new_stack.push_back(H_bar);
  return {H_out, new_stack};
}

Var predict_word_logits(const Var& hv_caption, const Var& hn_caption,
                        const nn::Linear& head) {
  if (hv_caption.rows() != hn_caption.rows())
    throw ValidationError("prediction head: caption slice length mismatch");
  return head.forward(concat_cols({hv_caption, hn_caption}));
}

namespace {

// (P+L)x(P+L): prefix sees only prefix; caption position i sees prefix plus
// caption positions <= i.
Mat stream_mask(Eigen::Index P, Eigen::Index L) {
  Mat m = Mat::Zero(P + L, P + L);
  for (Eigen::Index i = 0; i < P + L; ++i)
    for (Eigen::Index j = P; j < P + L; ++j)
      if (i < P || j > i) m(i, j) = nn::kMaskOff;
  return m;
}

// query stream (Pq prefix + Lq caption) attending to key stream (Pk + Lk):
// everyone sees the key prefix; caption query i sees key captions <= i.
Mat cross_mask(Eigen::Index Pq, Eigen::Index Lq, Eigen::Index Pk, Eigen::Index Lk) {
  Mat m = Mat::Zero(Pq + Lq, Pk + Lk);
  for (Eigen::Index i = 0; i < Pq + Lq; ++i)
    for (Eigen::Index j = Pk; j < Pk + Lk; ++j)
      if (i < Pq || (j - Pk) > (i - Pq)) m(i, j) = nn::kMaskOff;
  return m;
}

std::vector<int> iota_ids(int start, int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace

CaptionModel::CaptionModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), params_(seed) {
  cfg_.validate();
  const int d = cfg_.hidden;
  token_emb_ = params_.get_normal("embed.token", cfg_.vocab_size, d, 0.02);
  pos_emb_ = params_.get_normal("embed.pos",
                                1 + cfg_.max_visual_tokens + cfg_.max_caption_len, d, 0.02);
  type_emb_ = params_.get_normal("embed.type", cfg_.token_type_count, d, 0.02);
  cls_emb_ = params_.get_normal("embed.cls", 1, d, 0.02);
  embed_norm_v_ = nn::LayerNorm::create(params_, "embed.norm_v", d);
  visual_proj_ = nn::Linear::create(params_, "visual_proj", cfg_.d_visual, d);
  visual_layers_ = make_stream("visual");
  head_ = nn::Linear::create(params_, "head", cfg_.use_node_stream ? 2 * d : d,
                             cfg_.vocab_size);
  if (cfg_.use_node_stream) {
    embed_norm_n_ = nn::LayerNorm::create(params_, "embed.norm_n", d);
    node_layers_ = make_stream("node");
    sel_Wh_ = params_.get("select.Wh", d, d);
    sel_Wc_ = params_.get("select.Wc", d, d);
    cross_v_ = nn::MultiHeadAttention::create(params_, "cross.v", d, cfg_.heads);
    cross_n_ = nn::MultiHeadAttention::create(params_, "cross.n", d, cfg_.heads);
    cross_norm_v_ = nn::LayerNorm::create(params_, "cross.norm_v", d);
    cross_norm_n_ = nn::LayerNorm::create(params_, "cross.norm_n", d);
    GraphEncoderConfig gc;
    gc.in_dim = cfg_.node_feat_dim;
    gc.hidden = cfg_.gat_hidden > 0 ? cfg_.gat_hidden : d;
    gc.out_dim = d;
    gc.heads = cfg_.gat_heads;
    gc.layers = cfg_.tg_layers;
    tg_encoder_ = std::make_unique<GraphEncoder>(params_, "tg_enc", gc);
    gc.layers = cfg_.vg_layers;
    vg_encoder_ = std::make_unique<GraphEncoder>(params_, "vg_enc", gc);
  }
}

std::vector<CaptionModel::StreamLayer> CaptionModel::make_stream(
    const std::string& prefix) {
  std::vector<StreamLayer> layers;
  for (int l = 0; l < cfg_.layers; ++l) {
    std::string p = prefix + ".l" + std::to_string(l);
    StreamLayer sl;
    sl.self_attn = nn::MultiHeadAttention::create(params_, p + ".attn", cfg_.hidden,
                                                  cfg_.heads);
    sl.ffn = nn::FeedForward::create(params_, p + ".ffn", cfg_.hidden, cfg_.intermediate);
    sl.norm1 = nn::LayerNorm::create(params_, p + ".norm1", cfg_.hidden);
    sl.norm2 = nn::LayerNorm::create(params_, p + ".norm2", cfg_.hidden);
    if (cfg_.recurrence == Recurrence::MART) {
      sl.norm_mem = nn::LayerNorm::create(params_, p + ".norm_mem", cfg_.hidden);
      sl.mart = MartCell::create(params_, p + ".mart", cfg_.hidden, cfg_.heads,
                                 cfg_.memory_slots);
    } else if (cfg_.recurrence == Recurrence::TinT) {
      sl.tint = TintCell::create(params_, p + ".tint", cfg_.hidden, cfg_.intermediate,
                                 cfg_.heads);
    }
    layers.push_back(std::move(sl));
  }
  return layers;
}

Var CaptionModel::encode_theme_graph(const ThemeGraph& g) const {
  if (!tg_encoder_) throw ValidationError("node stream disabled: no theme encoder");
  return tg_encoder_->forward(lower_theme_graph(g));
}

Var CaptionModel::encode_video_graph(const VideoGraph& g) const {
  if (!vg_encoder_) throw ValidationError("node stream disabled: no video encoder");
  return vg_encoder_->forward(lower_video_graph(g));
}

MemoryState CaptionModel::initial_memory() const {
  MemoryState m;
  m.visual.mart.resize(cfg_.layers);
  m.visual.tint.resize(cfg_.layers);
  m.node.mart.resize(cfg_.layers);
  m.node.tint.resize(cfg_.layers);
  return m;
}

Var CaptionModel::run_stream(const std::vector<StreamLayer>& layers, Var x,
                             const Mat& mask, StreamMemory& mem) const {
  for (size_t l = 0; l < layers.size(); ++l) {
    const StreamLayer& layer = layers[l];
    Var a = layer.norm1.forward(x + layer.self_attn.forward(x, x, mask));
    Var h = a;
    if (layer.mart) {
      Var M_prev = mem.mart[l].valid() ? mem.mart[l] : layer.mart->mem_init;
      auto [H_out, M_new] = layer.mart->update(M_prev, a, mask);
      mem.mart[l] = M_new;
      h = layer.norm_mem.forward(a + H_out);
    } else if (layer.tint) {
      auto [H_out, new_stack] = layer.tint->update(mem.tint[l], a);
      mem.tint[l] = std::move(new_stack);
      h = H_out;
    }
    x = layer.norm2.forward(h + layer.ffn.forward(h));
  }
  return x;
}

EventResult CaptionModel::forward_event(const EventInputs& in, MemoryState& mem) const {
  const int L = static_cast<int>(in.caption_in.size());
  if (L < 1) throw ValidationError("forward_event: empty caption input");
  if (L > cfg_.max_caption_len)
    throw ValidationError("caption longer than max_caption_len");
  const int F = static_cast<int>(in.visual.rows());
  if (F < 1 || F > cfg_.max_visual_tokens)
    throw ValidationError("visual token count out of range");
  if (in.visual.cols() != cfg_.d_visual)
    throw ValidationError("visual feature dim mismatch");

  Var Ecap = select_rows(token_emb_, in.caption_in);

  // --- visual stream: [CLS] + projected frames + caption ---
  const int Pv = 1 + F;
  Var tokens_v = concat_rows({cls_emb_, visual_proj_.forward(nn::constant(in.visual)), Ecap});
  Var pos = select_rows(pos_emb_, iota_ids(0, Pv + L));
  std::vector<int> types_v(Pv + L, token_type_visual());
  types_v[0] = token_type_cls();
  for (int i = 0; i < L; ++i) types_v[Pv + i] = token_type_caption();
  Var x_v = embed_norm_v_.forward(tokens_v + pos + select_rows(type_emb_, types_v));
  Mat mask_v = stream_mask(Pv, L);
  Var H_v = run_stream(visual_layers_, x_v, mask_v, mem.visual);

  EventResult res;
  if (!cfg_.use_node_stream) {
    res.logits = head_.forward(slice_rows(H_v, Pv, L));
    mem.t = in.t + 1;
    return res;
  }

  if (!in.tg || !in.tg_emb.valid() || !in.vg || !in.vg_emb.valid())
    throw ValidationError("forward_event: node stream requires theme and video graphs");

  Var h_cls = slice_rows(H_v, 0, 1);

  NodeSelection tg_sel =
      select_nodes(h_cls, in.tg_emb, sel_Wh_, sel_Wc_, cfg_.top_n_tg, cfg_.softmax_over_nodes);
  std::vector<int> vg_ids;
  Var vg_nodes = extract_timestep_nodes(in.vg_emb, *in.vg, in.t, &vg_ids);
  NodeSelection vg_sel =
      select_nodes(h_cls, vg_nodes, sel_Wh_, sel_Wc_, cfg_.top_n_vg, cfg_.softmax_over_nodes);

  Var sel_tg = scale_rows(select_rows(in.tg_emb, tg_sel.indices),
                          select_rows(tg_sel.probs_var, tg_sel.indices));
  Var sel_vg = scale_rows(select_rows(vg_nodes, vg_sel.indices),
                          select_rows(vg_sel.probs_var, vg_sel.indices));

  const int n_tg = static_cast<int>(tg_sel.indices.size());
  const int n_vg = static_cast<int>(vg_sel.indices.size());
  const int Pn = n_tg + n_vg;
  std::vector<int> types_n;
  for (int i = 0; i < n_tg; ++i) types_n.push_back(token_type_tg());
  for (int idx : vg_sel.indices)
    types_n.push_back(token_type_vg(in.vg->nodes[vg_ids[idx]].type));
  for (int i = 0; i < L; ++i) types_n.push_back(token_type_caption());

  // node stream: no positional embeddings
  Var x_n = embed_norm_n_.forward(concat_rows({sel_tg, sel_vg, Ecap}) +
                                  select_rows(type_emb_, types_n));
  Mat mask_n = stream_mask(Pn, L);
  Var H_n = run_stream(node_layers_, x_n, mask_n, mem.node);

  Var H_vCA = cross_norm_v_.forward(
      H_v + cross_v_.forward(H_v, H_n, cross_mask(Pv, L, Pn, L)));
  Var H_nCA = cross_norm_n_.forward(
      H_n + cross_n_.forward(H_n, H_v, cross_mask(Pn, L, Pv, L)));

  res.logits = predict_word_logits(slice_rows(H_vCA, Pv, L), slice_rows(H_nCA, Pn, L),
                                   head_);

  for (int idx : tg_sel.indices)
    res.selected.push_back({in.tg->nodes[idx].word, "tg", tg_sel.probs(idx)});
  for (int idx : vg_sel.indices) {
    const GraphNode& n = in.vg->nodes[vg_ids[idx]];
    res.selected.push_back({n.label, node_type_name(n.type), vg_sel.probs(idx)});
  }
  std::stable_sort(res.selected.begin(), res.selected.end(),
                   [](const SelectedNode& a, const SelectedNode& b) { return a.prob > b.prob; });
  mem.t = in.t + 1;
  return res;
}

}  // namespace gemvpc
