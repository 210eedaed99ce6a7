#include "gemvpc/video_graph.hpp"

#include "gemvpc/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

using nlohmann::json;

namespace gemvpc {

std::string node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Action: return "action";
    case NodeType::Location: return "location";
    case NodeType::ContextualPhrase: return "contextual_phrase";
    case NodeType::Object: return "object";
    case NodeType::Audio: return "audio";
    case NodeType::Commonsense: return "commonsense";
  }
  throw std::logic_error("bad node type");
}

NodeType node_type_from_name(const std::string& s) {
  for (NodeType t : {NodeType::Action, NodeType::Location, NodeType::ContextualPhrase,
                     NodeType::Object, NodeType::Audio, NodeType::Commonsense})
    if (node_type_name(t) == s) return t;
  throw ValidationError("unknown node type: " + s);
}

std::string graph_method_name(GraphMethod m) { return m == GraphMethod::VF ? "vf" : "asr"; }

GraphMethod graph_method_from_name(const std::string& s) {
  if (s == "vf") return GraphMethod::VF;
  if (s == "asr") return GraphMethod::ASR;
  throw ValidationError("unknown graph method: " + s + " (expected vf|asr)");
}

TrainingLexicon build_training_lexicon(const std::vector<VideoRecord>& records,
                                       const std::map<std::string, AnnotationBundle>& bundles,
                                       const TextEmbedder& embedder) {
  TrainingLexicon lex;
  std::set<std::string> verbs;
  for (const auto& rec : records) {
    auto bit = bundles.find(rec.video_id);
    if (bit == bundles.end()) continue;
    for (const auto& ev : bit->second.events) {
      for (const auto& [tok, tag] : ev.pos_tags) {
        std::string t = to_lower(tag), w = to_lower(tok);
        if (t == "verb" || t.rfind("vb", 0) == 0) verbs.insert(w);
        else if (is_content_tag(tag)) lex.noun_adverbs.insert(w);
      }
    }
  }
  for (const auto& v : verbs) {
    lex.verbs.push_back(v);
    lex.verb_embeddings.push_back(embedder.embed(v));
  }
  return lex;
}

std::vector<GraphNode> build_action_nodes_vf(const EventAnnotations& ev, int t,
                                             const FilterConfig& cfg,
                                             const TextEmbedder& embedder) {
  bool speech_present = false;
  for (const auto& win : ev.audio_preds)
    for (const auto& a : win)
      if (cfg.speech_labels.count(to_lower(a.label))) speech_present = true;

  std::vector<GraphNode> out;
  auto push = [&](const std::string& label, std::optional<double> conf) {
    GraphNode n;
    n.type = NodeType::Action;
    n.label = to_lower(label);
    n.timestep = t;
    n.feature = embedder.embed(n.label);
    n.source_confidence = conf;
    out.push_back(std::move(n));
  };
  if (ev.action_preds.empty()) {
    push("no action", std::nullopt);
    return out;
  }
  for (const auto& pred : ev.action_preds) {
    if (pred.confidence < cfg.no_action_threshold)
      push(speech_present ? "speaking" : "no action", pred.confidence);
    else
      push(pred.label, pred.confidence);
  }
  return out;
}

std::string majority_location(const std::vector<std::string>& vqa_locations) {
  if (vqa_locations.empty()) throw ValidationError("majority_location: empty answer list");
  std::vector<std::pair<std::string, int>> order;  // first-occurrence order
  for (const auto& raw : vqa_locations) {
    std::string a = to_lower(raw);
    auto it = std::find_if(order.begin(), order.end(),
                           [&](const auto& p) { return p.first == a; });
    if (it == order.end()) order.push_back({a, 1});
    else it->second++;
  }
  auto best = order.begin();
  for (auto it = order.begin(); it != order.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::vector<CommonsenseEntry> build_commonsense_nodes(
    const std::vector<GraphNode>& generating_nodes,
    const std::vector<CommonsenseRecord>& records, GraphMethod method,
    const FilterConfig& cfg, const TextEmbedder& embedder, int t, int* skipped_heads) {
  std::vector<CommonsenseEntry> out;
  std::vector<std::string> kept_tails;  // event-wide duplicate suppression
  for (const auto& rec : records) {
    auto active = method == GraphMethod::VF ? relation_active_vf : relation_active_asr;
    if (!active(rec.relation)) continue;
    std::string head = to_lower(rec.head);
    const GraphNode* parent = nullptr;
    for (const auto& n : generating_nodes)
      if (n.label == head) parent = &n;
    if (!parent) {
      if (skipped_heads) ++*skipped_heads;
      continue;
    }
    if (method == GraphMethod::VF && parent->source_confidence &&
        *parent->source_confidence < cfg.commonsense_min_action_conf)
      continue;  // commonsense from low-confidence actions is dropped
    for (const auto& raw_tail : rec.tails) {
      std::string tail = to_lower(raw_tail);
      bool dup = false;
      for (const auto& kept : kept_tails)
        if (levenshtein_ratio(tail, kept) > cfg.levenshtein_ratio_max) dup = true;
      if (dup) continue;
      kept_tails.push_back(tail);
      CommonsenseEntry e;
      e.node.type = NodeType::Commonsense;
      e.node.label = tail;
      e.node.timestep = t;
      e.node.feature = embedder.embed(tail);
      e.parent_label = parent->label;
      e.relation = relation_name(rec.relation);
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<ScoredLabel> filter_context_labels(const std::vector<ScoredLabel>& candidates,
                                               const std::vector<GraphNode>& anchors,
                                               double threshold,
                                               const TextEmbedder& embedder) {
  std::vector<ScoredLabel> out;
  for (const auto& cand : candidates) {
    Eigen::VectorXd f = embedder.embed(to_lower(cand.label));
    double best = -1.0;
    for (const auto& a : anchors) best = std::max(best, cosine(f, a.feature));
    if (best >= threshold) out.push_back({to_lower(cand.label), cand.confidence});
  }
  return out;
}

std::vector<GraphNode> build_action_nodes_asr(const EventAnnotations& ev, int t,
                                              const TrainingLexicon& lexicon,
                                              const FilterConfig& cfg,
                                              const TextEmbedder& embedder) {
  std::vector<GraphNode> out;
  for (const auto& tup : ev.openie_tuples) {
    std::string verb = to_lower(tup.verb);
    Eigen::VectorXd vf = embedder.embed(verb);
    double best = -1.0;
    for (const auto& ve : lexicon.verb_embeddings) best = std::max(best, cosine(vf, ve));
    if (best < cfg.verb_sim_threshold) continue;
    std::vector<std::string> words{verb};
    for (const auto& arg : tup.args)
      for (const auto& w : tokenize(arg))
        if (lexicon.noun_adverbs.count(w)) words.push_back(w);
    GraphNode n;
    n.type = NodeType::Action;
    n.label = join_tokens(words);
    n.timestep = t;
    n.feature = embedder.embed(n.label);
    out.push_back(std::move(n));
  }
  if (out.empty()) {
    GraphNode n;
    n.type = NodeType::Action;
    n.label = "speaking";
    n.timestep = t;
    n.feature = embedder.embed(n.label);
    out.push_back(std::move(n));
  }
  return out;
}

GraphNode build_contextual_phrase_node(const std::vector<GraphNode>& action_nodes,
                                       const TextEmbedder& embedder) {
  if (action_nodes.empty())
    throw ValidationError("contextual phrase requires at least one action node");
  std::string label;
  for (size_t i = 0; i < action_nodes.size(); ++i) {
    if (i) label += "; ";
    label += action_nodes[i].label;
  }
  GraphNode n;
  n.type = NodeType::ContextualPhrase;
  n.label = label;
  n.timestep = action_nodes[0].timestep;
  n.feature = embedder.embed(label);
  return n;
}

namespace {

int type_rank(NodeType t) { return static_cast<int>(t); }

bool canonical_less(const GraphNode& a, const GraphNode& b) {
  if (a.timestep != b.timestep) return a.timestep < b.timestep;
  if (a.type != b.type) return type_rank(a.type) < type_rank(b.type);
  return a.label < b.label;
}

}  // namespace

VideoGraph assemble_graph(const std::string& video_id,
                          const std::vector<EventNodeSet>& per_event, GraphMethod method) {
  VideoGraph g;
  g.video_id = video_id;
  g.method = method;
  g.n_events = static_cast<int>(per_event.size());

  // collect and merge duplicate (timestep, type, label) nodes, keeping max confidence
  std::map<std::tuple<int, int, std::string>, GraphNode> merged;
  auto add_node = [&](const GraphNode& n) {
    auto key = std::make_tuple(n.timestep, type_rank(n.type), n.label);
    auto [it, fresh] = merged.emplace(key, n);
    if (!fresh && n.source_confidence &&
        (!it->second.source_confidence ||
         *n.source_confidence > *it->second.source_confidence))
      it->second.source_confidence = n.source_confidence;
  };
  for (int t = 0; t < g.n_events; ++t) {
    const auto& ev = per_event[t];
    if (ev.actions.empty())
      throw ValidationError("assemble_graph: event " + std::to_string(t) +
                            " has no action nodes (chain undefined)");
    for (const auto& n : ev.actions) add_node(n);
    if (ev.anchor) add_node(*ev.anchor);
    for (const auto& e : ev.commonsense) add_node(e.node);
    for (const auto& n : ev.objects) add_node(n);
    for (const auto& n : ev.audio) add_node(n);
  }
  for (auto& [key, n] : merged) g.nodes.push_back(n);
  std::sort(g.nodes.begin(), g.nodes.end(), canonical_less);
  std::map<std::tuple<int, int, std::string>, int> id_of;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    g.nodes[i].id = static_cast<int>(i);
    id_of[{g.nodes[i].timestep, type_rank(g.nodes[i].type), g.nodes[i].label}] =
        g.nodes[i].id;
  }
  auto id = [&](const GraphNode& n) {
    return id_of.at({n.timestep, type_rank(n.type), n.label});
  };

  std::set<std::tuple<int, int, std::string>> edge_set;  // dedupe after merging
  auto add_edge = [&](int src, int dst, const std::string& rel) {
    if (edge_set.insert({src, dst, rel}).second) g.edges.push_back({src, dst, rel});
  };

  // 1) global action chain in canonical order
  std::vector<int> chain;
  for (const auto& n : g.nodes)
    if (n.type == NodeType::Action) chain.push_back(n.id);
  for (size_t i = 0; i + 1 < chain.size(); ++i) {
    add_edge(chain[i], chain[i + 1], "occursAfter");
    add_edge(chain[i + 1], chain[i], "occursBefore");
  }

  for (int t = 0; t < g.n_events; ++t) {
    const auto& ev = per_event[t];
    std::string anchor_rel = method == GraphMethod::VF ? "atLocation" : "hasContext";
    if (ev.anchor) {
      // 2) anchor feeds every action node of its event
      for (const auto& a : ev.actions) add_edge(id(*ev.anchor), id(a), anchor_rel);
      // 4) objects and audio attach to the anchor
      for (const auto& o : ev.objects) add_edge(id(o), id(*ev.anchor), "inScene");
      for (const auto& au : ev.audio) add_edge(id(au), id(*ev.anchor), "hasSound");
    }
    // 3) commonsense nodes hang off their generating node
    for (const auto& cs : ev.commonsense) {
      GraphNode probe;
      probe.timestep = t;
      probe.type = method == GraphMethod::VF ? NodeType::Action : NodeType::ContextualPhrase;
      probe.label = cs.parent_label;
      add_edge(id(probe), id(cs.node), cs.relation);
    }
  }
  validate_graph(g);
  return g;
}

void validate_graph(const VideoGraph& g) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("video graph " + g.video_id + ": " + msg);
  };
  const int n = static_cast<int>(g.nodes.size());
  for (int i = 0; i < n; ++i) {
    const auto& nd = g.nodes[i];
    if (nd.id != i) fail("node ids not dense/canonical");
    if (i > 0 && !canonical_less(g.nodes[i - 1], nd)) fail("nodes not in canonical order");
    if (nd.label.empty()) fail("empty node label");
    if (nd.timestep < 0 || nd.timestep >= g.n_events)
      fail("node timestep out of range: " + std::to_string(nd.timestep));
    if (g.method == GraphMethod::VF && nd.type == NodeType::ContextualPhrase)
      fail("contextual-phrase node in a VF graph");
    if (g.method == GraphMethod::ASR && nd.type == NodeType::Location)
      fail("location node in an ASR graph");
  }
  for (const auto& e : g.edges)
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      fail("edge endpoint out of range");

  // action chain: paired occursAfter / occursBefore along canonical action order
  std::vector<int> chain;
  std::vector<bool> has_action(g.n_events, false);
  for (const auto& nd : g.nodes)
    if (nd.type == NodeType::Action) {
      chain.push_back(nd.id);
      has_action[nd.timestep] = true;
    }
  for (int t = 0; t < g.n_events; ++t)
    if (!has_action[t]) fail("event " + std::to_string(t) + " has no action node");
  std::multiset<std::pair<int, int>> after, before;
  for (const auto& e : g.edges) {
    if (e.relation == "occursAfter") after.insert({e.src, e.dst});
    if (e.relation == "occursBefore") before.insert({e.src, e.dst});
  }
  size_t expect = chain.empty() ? 0 : chain.size() - 1;
  if (after.size() != expect || before.size() != expect)
    fail("action chain edge count mismatch");
  for (size_t i = 0; i + 1 < chain.size(); ++i) {
    if (after.count({chain[i], chain[i + 1]}) != 1) fail("missing occursAfter chain edge");
    if (before.count({chain[i + 1], chain[i]}) != 1) fail("missing occursBefore chain edge");
  }

  // per-node degree rules
  std::vector<int> in_deg(n, 0), out_deg(n, 0);
  for (const auto& e : g.edges) {
    out_deg[e.src]++;
    in_deg[e.dst]++;
  }
  for (const auto& nd : g.nodes) {
    if (nd.type == NodeType::Commonsense) {
      if (in_deg[nd.id] != 1 || out_deg[nd.id] != 0)
        fail("commonsense node '" + nd.label + "' must have exactly one inbound edge");
    }
    if (nd.type == NodeType::Object || nd.type == NodeType::Audio) {
      if (out_deg[nd.id] != 1 || in_deg[nd.id] != 0)
        fail(node_type_name(nd.type) + " node '" + nd.label +
             "' must have exactly one edge to its event anchor");
    }
  }
}

VideoGraph build_video_graph(const VideoRecord& record, const AnnotationBundle& bundle,
                             GraphMethod method, const FilterConfig& cfg,
                             const TrainingLexicon& lexicon, const TextEmbedder& embedder) {
  if (bundle.events.size() != record.events.size())
    throw ValidationError("video " + record.video_id +
                          ": bundle/event count mismatch");
  std::vector<EventNodeSet> per_event;
  for (size_t t = 0; t < record.events.size(); ++t) {
    const auto& ev = bundle.events[t];
    EventNodeSet set;
    std::vector<ScoredLabel> object_cands, audio_cands;
    if (method == GraphMethod::VF) {
      if (ev.action_preds.empty() && ev.vqa_locations.empty() &&
          (!ev.asr_text.empty() || !ev.openie_tuples.empty()))
        throw ValidationError("video " + record.video_id + " event " + std::to_string(t) +
                              ": VF method requires action_preds/vqa_locations fields");
      set.actions = build_action_nodes_vf(ev, (int)t, cfg, embedder);
      if (!ev.vqa_locations.empty()) {
        GraphNode loc;
        loc.type = NodeType::Location;
        loc.label = majority_location(ev.vqa_locations);
        loc.timestep = (int)t;
        loc.feature = embedder.embed(loc.label);
        set.anchor = loc;
      }
      set.commonsense =
          build_commonsense_nodes(set.actions, ev.commonsense, method, cfg, embedder, (int)t);
      for (const auto& o : ev.vqa_objects) object_cands.push_back({o, 1.0});
      for (const auto& o : ev.detected_objects) object_cands.push_back(o);
      for (const auto& win : ev.audio_preds)
        for (const auto& a : win) audio_cands.push_back(a);
    } else {
      if (ev.openie_tuples.empty() && ev.asr_text.empty() && !ev.action_preds.empty()) {
        throw ValidationError("video " + record.video_id + " event " + std::to_string(t) +
                              ": ASR method requires asr_text/openie_tuples fields");
      }
      set.actions = build_action_nodes_asr(ev, (int)t, lexicon, cfg, embedder);
      set.anchor = build_contextual_phrase_node(set.actions, embedder);
      set.commonsense = build_commonsense_nodes({*set.anchor}, ev.commonsense, method, cfg,
                                                embedder, (int)t);
      for (const auto& w : tokenize(ev.asr_text))
        if (lexicon.noun_adverbs.count(w)) object_cands.push_back({w, 1.0});
      for (const auto& win : ev.audio_preds)
        for (const auto& a : win) {
          if (!cfg.audio_label_allowlist.empty() &&
              !cfg.audio_label_allowlist.count(to_lower(a.label)))
            continue;
          audio_cands.push_back(a);
        }
    }
    // cosine gate against action / commonsense / anchor nodes
    std::vector<GraphNode> anchors = set.actions;
    for (const auto& cs : set.commonsense) anchors.push_back(cs.node);
    if (set.anchor) anchors.push_back(*set.anchor);
    if (set.anchor) {  // without an anchor there is nothing to attach to
      for (const auto& o :
           filter_context_labels(object_cands, anchors, cfg.object_sim_threshold, embedder)) {
        GraphNode n;
        n.type = NodeType::Object;
        n.label = o.label;
        n.timestep = (int)t;
        n.feature = embedder.embed(n.label);
        n.source_confidence = o.confidence;
        set.objects.push_back(std::move(n));
      }
      for (const auto& a :
           filter_context_labels(audio_cands, anchors, cfg.audio_sim_threshold, embedder)) {
        GraphNode n;
        n.type = NodeType::Audio;
        n.label = a.label;
        n.timestep = (int)t;
        n.feature = embedder.embed(n.label);
        n.source_confidence = a.confidence;
        set.audio.push_back(std::move(n));
      }
    }
    per_event.push_back(std::move(set));
  }
  return assemble_graph(record.video_id, per_event, method);
}

// --- serialization ---

namespace {
constexpr int kSchemaVersion = 1;
constexpr char kBlobMagic[4] = {'V', 'G', 'F', 'B'};
}  // namespace

std::string serialize_graph_json(const VideoGraph& g) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["video_id"] = g.video_id;
  j["method"] = graph_method_name(g.method);
  j["n_events"] = g.n_events;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["type"] = node_type_name(n.type);
    jn["label"] = n.label;
    jn["t"] = n.timestep;
    if (n.source_confidence) jn["conf"] = *n.source_confidence;
    nodes.push_back(jn);
  }
  j["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"rel", e.relation}});
  j["edges"] = edges;
  return j.dump();
}

std::vector<std::uint8_t> serialize_feature_blob(const VideoGraph& g) {
  std::vector<std::uint8_t> out;
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  out.insert(out.end(), kBlobMagic, kBlobMagic + 4);
  put_u32(kSchemaVersion);
  put_u32(static_cast<std::uint32_t>(g.nodes.size()));
  std::uint32_t dim = g.nodes.empty() ? 0 : static_cast<std::uint32_t>(g.nodes[0].feature.size());
  put_u32(dim);
  for (const auto& n : g.nodes)
    for (Eigen::Index i = 0; i < n.feature.size(); ++i) {
      double v = n.feature(i);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  return out;
}

VideoGraph deserialize_graph(const std::string& json_text,
                             const std::vector<std::uint8_t>& blob) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("graph parse error at byte ") +
                          std::to_string(e.byte) + ": " + e.what());
  }
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ValidationError("graph schema version mismatch: expected " +
                          std::to_string(kSchemaVersion) + ", got " +
                          j.at("schema_version").dump());
  VideoGraph g;
  g.video_id = j.at("video_id").get<std::string>();
  g.method = graph_method_from_name(j.at("method").get<std::string>());
  g.n_events = j.at("n_events").get<int>();
  for (const auto& jn : j.at("nodes")) {
    GraphNode n;
    n.id = jn.at("id").get<int>();
    n.type = node_type_from_name(jn.at("type").get<std::string>());
    n.label = jn.at("label").get<std::string>();
    n.timestep = jn.at("t").get<int>();
    if (jn.contains("conf")) n.source_confidence = jn.at("conf").get<double>();
    g.nodes.push_back(std::move(n));
  }
  for (const auto& je : j.at("edges"))
    g.edges.push_back({je.at("src").get<int>(), je.at("dst").get<int>(),
                       je.at("rel").get<std::string>()});
  // feature blob
  auto need = [&](size_t offset, size_t count) {
    if (blob.size() < offset + count)
      throw ValidationError("feature blob truncated at byte " + std::to_string(blob.size()));
  };
  need(0, 12);
  if (std::memcmp(blob.data(), kBlobMagic, 4) != 0)
    throw ValidationError("feature blob: bad magic");
  auto get_u32 = [&](size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(blob[off + i]) << (8 * i);
    return v;
  };
  if (get_u32(4) != kSchemaVersion) throw ValidationError("feature blob: version mismatch");
  std::uint32_t count = get_u32(8);
  need(12, 4);
  std::uint32_t dim = get_u32(12);
  if (count != g.nodes.size())
    throw ValidationError("feature blob: node count mismatch");
  size_t off = 16;
  for (auto& n : g.nodes) {
    n.feature.resize(dim);
    need(off, 8ull * dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(blob[off + b]) << (8 * b);
      off += 8;
      double v;
      std::memcpy(&v, &bits, 8);
      n.feature(i) = v;
    }
  }
  validate_graph(g);
  return g;
}

void save_video_graph(const VideoGraph& g, const std::string& dir) {
  std::ofstream jf(dir + "/" + g.video_id + ".vg.json");
  jf << serialize_graph_json(g) << "\n";
  auto blob = serialize_feature_blob(g);
  std::ofstream bf(dir + "/" + g.video_id + ".vgfeat", std::ios::binary);
  bf.write(reinterpret_cast<const char*>(blob.data()), (std::streamsize)blob.size());
}

VideoGraph load_video_graph(const std::string& dir, const std::string& video_id) {
  std::ifstream jf(dir + "/" + video_id + ".vg.json");
  if (!jf) throw ValidationError("missing video graph for " + video_id);
  std::string text((std::istreambuf_iterator<char>(jf)), std::istreambuf_iterator<char>());
  std::ifstream bf(dir + "/" + video_id + ".vgfeat", std::ios::binary);
  if (!bf) throw ValidationError("missing video graph features for " + video_id);
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(bf)),
                                 std::istreambuf_iterator<char>());
  return deserialize_graph(text, blob);
}

}  // namespace gemvpc
