#include "gemvpc/decode.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using nlohmann::json;

namespace gemvpc {

int nucleus_sample(const Eigen::VectorXd& logits, const DecodeConfig& cfg, DetRng& rng) {
  if (cfg.temperature <= 0) throw ValidationError("temperature must be positive");
  if (cfg.top_p <= 0 || cfg.top_p > 1) throw ValidationError("top_p must be in (0, 1]");
  Eigen::VectorXd z = logits / cfg.temperature;
  double mx = z.maxCoeff();
  Eigen::VectorXd p = (z.array() - mx).exp();
  p /= p.sum();
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (p(a) != p(b)) return p(a) > p(b);
    return a < b;
  });
  double cum = 0, mass = 0;
  size_t cut = order.size();
  for (size_t i = 0; i < order.size(); ++i) {
    cum += p(order[i]);
    if (cum >= cfg.top_p) {
      cut = i + 1;
      mass = cum;
      break;
    }
  }
  if (cut == order.size()) mass = cum;  // top_p never reached numerically
  double u = rng.uniform() * mass;
  double acc = 0;
  for (size_t i = 0; i < cut; ++i) {
    acc += p(order[i]);
    if (u < acc) return order[i];
  }
  return order[cut - 1];
}

namespace {

int pick_token(const Eigen::VectorXd& logits, const DecodeConfig& cfg, DetRng& rng) {
  if (cfg.mode == DecodeConfig::Mode::Greedy) {
    int best = 0;
    for (int i = 1; i < logits.size(); ++i)
      if (logits(i) > logits(best)) best = i;
    return best;
  }
  return nucleus_sample(logits, cfg, rng);
}

}  // namespace

GeneratedParagraph caption_video(const CaptionModel& model, const VideoArtifacts& art,
                                 const ThemeGraphIndex& themes,
                                 const TextEmbedder& embedder, const Vocabulary& vocab,
                                 const DecodeConfig& cfg) {
  if (!art.record) throw ValidationError("caption_video: missing video record");
  if (!art.features) throw ValidationError("caption_video: missing visual features for " +
                                           art.record->video_id);
  const auto& mc = model.config();
  if (mc.use_node_stream) {
    if (!art.graph)
      throw ValidationError("caption_video: missing video graph for " +
                            art.record->video_id);
    if (!art.bundle)
      throw ValidationError("caption_video: missing annotation bundle for " +
                            art.record->video_id);
  }
  const int n_events = static_cast<int>(art.record->events.size());
  if (art.features->per_event.size() != static_cast<size_t>(n_events))
    throw ValidationError("caption_video: feature/event count mismatch for " +
                          art.record->video_id);
  const int max_len = std::min(cfg.max_len, mc.max_caption_len - 1);

  nn::Var vg_emb;
  if (mc.use_node_stream) vg_emb = model.encode_video_graph(*art.graph);

  GeneratedParagraph out;
  MemoryState mem = model.initial_memory();
  DetRng video_rng = DetRng::substream(cfg.seed, art.record->video_id);
  for (int t = 0; t < n_events; ++t) {
    DetRng rng = DetRng::substream(video_rng.raw(), "event" + std::to_string(t));
    EventInputs in;
    in.t = t;
    in.visual = art.features->per_event[t].cast<double>();
    if (mc.use_node_stream) {
      in.vg = art.graph;
      in.vg_emb = vg_emb;
      in.tg = &themes.resolve(art.bundle->events[t], embedder);
      in.tg_emb = model.encode_theme_graph(*in.tg);
    }
    std::vector<int> tokens = {Vocabulary::kBos};
    EventResult last;
    while (true) {
      in.caption_in = tokens;
      MemoryState scratch = mem;  // memory committed only after the caption is final
      last = model.forward_event(in, scratch);
      if (static_cast<int>(tokens.size()) - 1 >= max_len) break;
      Eigen::VectorXd logits = last.logits.value().row(last.logits.rows() - 1);
      logits(Vocabulary::kPad) = -std::numeric_limits<double>::infinity();
      logits(Vocabulary::kBos) = -std::numeric_limits<double>::infinity();
      logits(Vocabulary::kCls) = -std::numeric_limits<double>::infinity();
      int tok = pick_token(logits, cfg, rng);
      if (tok == Vocabulary::kEos) break;
      tokens.push_back(tok);
    }
    // final pass over the completed caption updates the cross-event memory
    in.caption_in = tokens;
    last = model.forward_event(in, mem);

    std::vector<std::string> words;
    for (size_t i = 1; i < tokens.size(); ++i) words.push_back(vocab.token(tokens[i]));
    out.captions.push_back(std::move(words));
    if (last.selected.size() > 10) last.selected.resize(10);
    out.selected_nodes.push_back(std::move(last.selected));
  }
  return out;
}

std::string paragraphs_to_json(const std::map<std::string, GeneratedParagraph>& out) {
  json j = json::object();
  for (const auto& [vid, para] : out) {
    json captions = json::array();
    for (const auto& cap : para.captions) captions.push_back(cap);
    json nodes = json::array();
    for (const auto& per_t : para.selected_nodes) {
      json arr = json::array();
      for (const auto& n : per_t)
        arr.push_back({{"label", n.label}, {"type", n.type}, {"prob", n.prob}});
      nodes.push_back(arr);
    }
    j[vid] = {{"captions", captions}, {"selected_nodes", nodes}};
  }
  return j.dump(2);
}

std::map<std::string, GeneratedParagraph> paragraphs_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("cannot parse predictions: ") + e.what());
  }
  std::map<std::string, GeneratedParagraph> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    GeneratedParagraph p;
    for (const auto& cap : it.value().at("captions"))
      p.captions.push_back(cap.get<std::vector<std::string>>());
    if (it.value().contains("selected_nodes"))
      for (const auto& per_t : it.value().at("selected_nodes")) {
        std::vector<SelectedNode> nodes;
        for (const auto& n : per_t)
          nodes.push_back({n.at("label").get<std::string>(),
                           n.at("type").get<std::string>(), n.at("prob").get<double>()});
        p.selected_nodes.push_back(std::move(nodes));
      }
    out[it.key()] = std::move(p);
  }
  return out;
}

}  // namespace gemvpc
