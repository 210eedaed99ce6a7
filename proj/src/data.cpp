#include "gemvpc/data.hpp"

#include "gemvpc/rng.hpp"
#include "gemvpc/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

using nlohmann::json;
namespace fs = std::filesystem;

namespace gemvpc {

// --- relations ---

namespace {

const std::vector<std::pair<RelationToken, const char*>>& relation_table() {
  static const std::vector<std::pair<RelationToken, const char*>> t = {
      {RelationToken::ObjectUse, "ObjectUse"},
      {RelationToken::MadeUpOf, "MadeUpOf"},
      {RelationToken::HasProperty, "HasProperty"},
      {RelationToken::CapableOf, "CapableOf"},
      {RelationToken::isAfter, "isAfter"},
      {RelationToken::HasSubEvent, "HasSubEvent"},
      {RelationToken::isBefore, "isBefore"},
      {RelationToken::xNeed, "xNeed"},
      {RelationToken::xAttr, "xAttr"},
      {RelationToken::xEffect, "xEffect"},
      {RelationToken::oEffect, "oEffect"},
      {RelationToken::xReact, "xReact"},
      {RelationToken::oReact, "oReact"},
      {RelationToken::xWant, "xWant"},
      {RelationToken::oWant, "oWant"},
      {RelationToken::xIntent, "xIntent"},
  };
  return t;
}

}  // namespace

const std::vector<RelationToken>& all_relations() {
  static const std::vector<RelationToken> r = [] {
    std::vector<RelationToken> v;
    for (const auto& [tok, _] : relation_table()) v.push_back(tok);
    return v;
  }();
  return r;
}

std::string relation_name(RelationToken r) {
  for (const auto& [tok, name] : relation_table())
    if (tok == r) return name;
  throw std::logic_error("unknown relation token");
}

RelationToken relation_from_name(const std::string& name) {
  for (const auto& [tok, n] : relation_table())
    if (name == n) return tok;
  throw ValidationError("unknown relation token: " + name);
}

bool relation_active_vf(RelationToken r) {
  switch (r) {
    case RelationToken::isAfter:
    case RelationToken::isBefore:
    case RelationToken::MadeUpOf:
    case RelationToken::ObjectUse:
    case RelationToken::HasProperty:
      return false;
    default:
      return true;
  }
}

bool relation_active_asr(RelationToken r) {
  switch (r) {
    case RelationToken::xReact:
    case RelationToken::oReact:
    case RelationToken::xAttr:
    case RelationToken::xWant:
    case RelationToken::oWant:
      return false;
    default:
      return true;
  }
}

// --- bundle validation ---

void validate_bundle(const AnnotationBundle& b) {
  auto check_conf = [&](double c, const char* what, int t) {
    if (!(c >= 0.0 && c <= 1.0))
      throw ValidationError("bundle " + b.video_id + " event " + std::to_string(t) +
                            ": " + what + " confidence out of [0,1]");
  };
  for (size_t t = 0; t < b.events.size(); ++t) {
    const auto& ev = b.events[t];
    for (const auto& a : ev.action_preds) check_conf(a.confidence, "action", (int)t);
    for (const auto& o : ev.detected_objects) check_conf(o.confidence, "object", (int)t);
    for (const auto& win : ev.audio_preds)
      for (const auto& a : win) check_conf(a.confidence, "audio", (int)t);
    for (const auto& cs : ev.commonsense) {
      if (cs.tails.size() > 5)
        throw ValidationError("bundle " + b.video_id + " event " + std::to_string(t) +
                              ": more than 5 commonsense tails for head '" + cs.head + "'");
    }
  }
}

// --- vocabulary ---

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : id_to_token_) {
    h = fnv1a(t, h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& corpus_tokens, int min_count) {
  if (corpus_tokens.empty()) throw ValidationError("empty caption corpus");
  std::map<std::string, int> counts;  // ordered map: stable id assignment
  for (const auto& tok : corpus_tokens) counts[to_lower(tok)]++;
  Vocabulary v;
  v.min_count_ = min_count;
  v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>", "<cls>", "<sep>"};
  for (const auto& [tok, c] : counts)
    if (c >= min_count) v.id_to_token_.push_back(tok);
  for (int i = 0; i < (int)v.id_to_token_.size(); ++i) v.token_to_id_[v.id_to_token_[i]] = i;
  return v;
}

Vocabulary Vocabulary::build(const std::vector<VideoRecord>& records, int min_count) {
  std::vector<std::string> toks;
  for (const auto& r : records)
    for (const auto& cap : r.captions)
      for (const auto& t : cap) toks.push_back(t);
  return from_tokens(toks, min_count);
}

void Vocabulary::save(const std::string& path) const {
  json j;
  j["min_count"] = min_count_;
  j["tokens"] = id_to_token_;
  std::ofstream f(path);
  f << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open vocabulary file: " + path);
  json j = json::parse(f);
  Vocabulary v;
  v.min_count_ = j.at("min_count").get<int>();
  v.id_to_token_ = j.at("tokens").get<std::vector<std::string>>();
  for (int i = 0; i < (int)v.id_to_token_.size(); ++i) v.token_to_id_[v.id_to_token_[i]] = i;
  return v;
}

// --- dataset IO ---

std::vector<VideoRecord> load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open dataset file: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("dataset parse error: ") + e.what());
  }
  std::vector<VideoRecord> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& vid = it.key();
    const json& rec = it.value();
    VideoRecord r;
    r.video_id = vid;
    try {
      r.duration = rec.at("duration").get<double>();
      const auto& ts = rec.at("timestamps");
      for (size_t i = 0; i < ts.size(); ++i) {
        EventSegment e;
        e.start_s = ts[i].at(0).get<double>();
        e.end_s = ts[i].at(1).get<double>();
        if (!(e.start_s < e.end_s))
          throw ValidationError("video " + vid + ": event " + std::to_string(i) +
                                " has start_s >= end_s");
        r.events.push_back(e);
      }
      if (rec.contains("sentences")) {
        for (const auto& s : rec.at("sentences"))
          r.captions.push_back(tokenize(s.get<std::string>()));
      }
      if (rec.contains("category")) r.category = rec.at("category").get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError("video " + vid + ": malformed record: " + e.what());
    }
    if (!r.captions.empty() && r.captions.size() != r.events.size())
      throw ValidationError("video " + vid + ": caption/event mismatch (" +
                            std::to_string(r.captions.size()) + " captions, " +
                            std::to_string(r.events.size()) + " events)");
    // sort events by start, carrying captions along, and reassign indices
    std::vector<size_t> order(r.events.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return r.events[a].start_s < r.events[b].start_s;
    });
    VideoRecord sorted = r;
    sorted.events.clear();
    sorted.captions.clear();
    for (size_t i = 0; i < order.size(); ++i) {
      EventSegment e = r.events[order[i]];
      e.index = static_cast<int>(i);
      sorted.events.push_back(e);
      if (!r.captions.empty()) sorted.captions.push_back(r.captions[order[i]]);
    }
    if (!sorted.captions.empty())
      for (size_t i = 0; i < sorted.captions.size(); ++i)
        if (sorted.captions[i].empty())
          throw ValidationError("video " + vid + ": empty caption at event " +
                                std::to_string(i));
    out.push_back(std::move(sorted));
  }
  return out;
}

void save_dataset(const std::vector<VideoRecord>& records, const std::string& path) {
  json j = json::object();
  for (const auto& r : records) {
    json rec;
    rec["duration"] = r.duration;
    json ts = json::array();
    for (const auto& e : r.events) ts.push_back({e.start_s, e.end_s});
    rec["timestamps"] = ts;
    if (r.has_captions()) {
      json sents = json::array();
      for (const auto& cap : r.captions) sents.push_back(join_tokens(cap));
      rec["sentences"] = sents;
    }
    if (!r.category.empty()) rec["category"] = r.category;
    j[r.video_id] = rec;
  }
  std::ofstream f(path);
  f << j.dump(2) << "\n";
}

// --- bundle IO (JSON-lines, one object per (video_id, event_index)) ---

namespace {

json scored_list_to_json(const std::vector<ScoredLabel>& v) {
  json a = json::array();
  for (const auto& s : v) a.push_back({s.label, s.confidence});
  return a;
}

std::vector<ScoredLabel> scored_list_from_json(const json& a) {
  std::vector<ScoredLabel> v;
  for (const auto& e : a) v.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
  return v;
}

}  // namespace

void save_bundles(const std::map<std::string, AnnotationBundle>& bundles,
                  const std::string& path) {
  std::ofstream f(path);
  for (const auto& [vid, b] : bundles) {
    for (size_t t = 0; t < b.events.size(); ++t) {
      const auto& ev = b.events[t];
      json j;
      j["video_id"] = vid;
      j["event_index"] = t;
      j["action_preds"] = scored_list_to_json(ev.action_preds);
      j["vqa_locations"] = ev.vqa_locations;
      j["vqa_objects"] = ev.vqa_objects;
      j["detected_objects"] = scored_list_to_json(ev.detected_objects);
      json windows = json::array();
      for (const auto& w : ev.audio_preds) windows.push_back(scored_list_to_json(w));
      j["audio_preds"] = windows;
      if (!ev.asr_text.empty()) j["asr_text"] = ev.asr_text;
      json tuples = json::array();
      for (const auto& t2 : ev.openie_tuples) tuples.push_back({t2.verb, t2.args});
      j["openie_tuples"] = tuples;
      json cs = json::array();
      for (const auto& c : ev.commonsense)
        cs.push_back({c.head, relation_name(c.relation), c.tails});
      j["commonsense"] = cs;
      json tags = json::array();
      for (const auto& [tok, tag] : ev.pos_tags) tags.push_back({tok, tag});
      j["pos_tags"] = tags;
      f << j.dump() << "\n";
    }
  }
}

std::map<std::string, AnnotationBundle> load_bundles(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open bundle file: " + path);
  std::map<std::string, AnnotationBundle> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("bundle line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string vid = j.at("video_id").get<std::string>();
    size_t idx = j.at("event_index").get<size_t>();
    auto& b = out[vid];
    b.video_id = vid;
    if (b.events.size() <= idx) b.events.resize(idx + 1);
    EventAnnotations ev;
    try {
      ev.action_preds = scored_list_from_json(j.at("action_preds"));
      ev.vqa_locations = j.at("vqa_locations").get<std::vector<std::string>>();
      ev.vqa_objects = j.at("vqa_objects").get<std::vector<std::string>>();
      ev.detected_objects = scored_list_from_json(j.at("detected_objects"));
      for (const auto& w : j.at("audio_preds")) ev.audio_preds.push_back(scored_list_from_json(w));
      if (j.contains("asr_text")) ev.asr_text = j.at("asr_text").get<std::string>();
      for (const auto& t : j.at("openie_tuples"))
        ev.openie_tuples.push_back({t.at(0).get<std::string>(),
                                    t.at(1).get<std::vector<std::string>>()});
      for (const auto& c : j.at("commonsense"))
        ev.commonsense.push_back({c.at(0).get<std::string>(),
                                  relation_from_name(c.at(1).get<std::string>()),
                                  c.at(2).get<std::vector<std::string>>()});
      for (const auto& tg : j.at("pos_tags"))
        ev.pos_tags.emplace_back(tg.at(0).get<std::string>(), tg.at(1).get<std::string>());
    } catch (const json::exception& e) {
      throw ValidationError("bundle " + vid + " event " + std::to_string(idx) +
                            ": malformed record: " + e.what());
    }
    b.events[idx] = std::move(ev);
  }
  for (const auto& [vid, b] : out) validate_bundle(b);
  return out;
}

// --- visual feature IO ---
// <dir>/<video_id>.feat : row-major little-endian f32, all events concatenated
// <dir>/<video_id>.idx.json : {"d_visual": d, "events": [[row0, nrows], ...]}

void save_features(const VisualFeatureSeq& feats, const std::string& dir) {
  fs::create_directories(dir);
  std::string bin = dir + "/" + feats.video_id + ".feat";
  std::string idx = dir + "/" + feats.video_id + ".idx.json";
  std::ofstream bf(bin, std::ios::binary);
  json events = json::array();
  int d = feats.per_event.empty() ? 0 : static_cast<int>(feats.per_event[0].cols());
  long row = 0;
  for (const auto& m : feats.per_event) {
    events.push_back({row, (long)m.rows()});
    // row-major write
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        float v = m(r, c);
        bf.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
    row += m.rows();
  }
  json j;
  j["d_visual"] = d;
  j["events"] = events;
  std::ofstream jf(idx);
  jf << j.dump(2) << "\n";
}

VisualFeatureSeq load_features(const std::string& dir, const std::string& video_id) {
  std::string bin = dir + "/" + video_id + ".feat";
  std::string idx = dir + "/" + video_id + ".idx.json";
  std::ifstream jf(idx);
  if (!jf) throw ValidationError("missing feature index for video " + video_id);
  json j = json::parse(jf);
  int d = j.at("d_visual").get<int>();
  std::ifstream bf(bin, std::ios::binary);
  if (!bf) throw ValidationError("missing feature file for video " + video_id);
  VisualFeatureSeq out;
  out.video_id = video_id;
  for (const auto& ev : j.at("events")) {
    long row0 = ev.at(0).get<long>(), nrows = ev.at(1).get<long>();
    Eigen::MatrixXf m(nrows, d);
    bf.seekg(row0 * d * (long)sizeof(float));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        float v;
        if (!bf.read(reinterpret_cast<char*>(&v), sizeof(float)))
          throw ValidationError("feature file truncated for video " + video_id);
        if (!std::isfinite(v))
          throw ValidationError("non-finite feature value in video " + video_id);
        m(r, c) = v;
      }
    out.per_event.push_back(std::move(m));
  }
  return out;
}

}  // namespace gemvpc
