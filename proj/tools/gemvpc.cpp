// Command-line pipeline driver: toy data generation, graph building,
// training, captioning, and evaluation.

#include "gemvpc/checkpoint.hpp"
#include "gemvpc/decode.hpp"
#include "gemvpc/metrics.hpp"
#include "gemvpc/toy.hpp"
#include "gemvpc/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gemvpc;

namespace {

std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("missing input file: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a(data);
}

std::string manifest_path_for(const std::string& primary_output) {
  const char* cache = std::getenv("GEMVPC_CACHE");
  if (cache && *cache) {
    fs::create_directories(fs::path(cache) / "manifests");
    std::string key = std::to_string(fnv1a(primary_output));
    return (fs::path(cache) / "manifests" / (key + ".manifest.json")).string();
  }
  return primary_output + ".manifest.json";
}

struct ManifestWriter {
  json j;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  ManifestWriter(const std::string& command, std::uint64_t seed) {
    j["command"] = command;
    j["seed"] = seed;
    j["inputs"] = json::object();
    j["outputs"] = json::array();
    j["config"] = json::object();
  }
  void input(const std::string& path) {
    j["inputs"][path] = std::to_string(hash_file(path));
  }
  void output(const std::string& path) { j["outputs"].push_back(path); }
  void config(const std::string& key, const json& v) { j["config"][key] = v; }
  void write(const std::string& primary_output) {
    auto dt = std::chrono::steady_clock::now() - start;
    j["wall_time_s"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(dt).count() / 1000.0;
    std::ofstream f(manifest_path_for(primary_output));
    f << j.dump(2) << "\n";
  }
};

std::vector<std::vector<std::string>> caption_corpus(const std::vector<VideoRecord>& recs) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& r : recs)
    for (const auto& cap : r.captions) {
      std::vector<std::string> sent;
      for (const auto& tok : cap) sent.push_back(to_lower(tok));
      corpus.push_back(std::move(sent));
    }
  return corpus;
}

void save_cluster_model(const ActionClusterModel& m, const std::string& path) {
  json j;
  j["k"] = m.k();
  j["dim"] = m.centroids.cols();
  j["inertia"] = m.inertia;
  json rows = json::array();
  for (int r = 0; r < m.k(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.centroids.cols(); ++c) row.push_back(m.centroids(r, c));
    rows.push_back(row);
  }
  j["centroids"] = rows;
  std::ofstream f(path);
  f << j.dump() << "\n";
}

ActionClusterModel load_cluster_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open cluster model: " + path);
  json j = json::parse(f);
  ActionClusterModel m;
  int k = j.at("k"), dim = j.at("dim");
  m.inertia = j.at("inertia");
  m.centroids.resize(k, dim);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < dim; ++c) m.centroids(r, c) = j.at("centroids")[r][c];
  return m;
}

ThemeGraphIndex load_theme_index(const std::string& path, const std::string& kmeans_path,
                                 GraphMethod method, const TextEmbedder& embedder) {
  ThemeGraphIndex idx;
  idx.method = method;
  for (auto& g : load_theme_graphs(path, embedder)) {
    if (g.action_class == "__global__") idx.global = std::move(g);
    else idx.by_class[g.action_class] = std::move(g);
  }
  if (method == GraphMethod::ASR) {
    std::string kp = kmeans_path.empty() ? path + ".kmeans.json" : kmeans_path;
    if (fs::exists(kp)) idx.clusters = load_cluster_model(kp);
  }
  return idx;
}

TrainingSet load_training_set(const std::string& dataset, const std::string& bundles,
                              const std::string& features_dir,
                              const std::string& graphs_dir, bool need_graphs) {
  TrainingSet ts;
  ts.records = load_dataset(dataset);
  if (!bundles.empty()) ts.bundles = load_bundles(bundles);
  for (const auto& rec : ts.records) {
    ts.features[rec.video_id] = load_features(features_dir, rec.video_id);
    if (need_graphs)
      ts.graphs[rec.video_id] = load_video_graph(graphs_dir, rec.video_id);
  }
  return ts;
}

struct Profile {
  std::string name = "toy";
  GraphMethod method = GraphMethod::VF;
  int top_n_tg = 10, top_n_vg = 10;
  int hidden = 128, heads = 8, kmeans_k = 8;
};

Profile resolve_profile(const std::string& name) {
  Profile p;
  p.name = name;
  if (name == "toy") return p;
  if (name == "activitynet") {
    p.method = GraphMethod::VF;
    p.hidden = 768;
    p.heads = 12;
    p.kmeans_k = 300;
    return p;
  }
  if (name == "youcook2") {
    p.method = GraphMethod::ASR;
    p.top_n_tg = 30;
    p.top_n_vg = 30;
    p.hidden = 768;
    p.heads = 12;
    p.kmeans_k = 300;
    return p;
  }
  throw ValidationError("unknown profile: " + name + " (expected toy|activitynet|youcook2)");
}

// --- subcommands ---

int cmd_make_toy(const std::string& out_dir, std::uint64_t seed, ToyConfig tc) {
  ManifestWriter mw("make-toy", seed);
  fs::create_directories(fs::path(out_dir) / "features");
  ToyDataset toy = generate_toy_dataset(seed, tc);
  std::string ds = (fs::path(out_dir) / "dataset.json").string();
  std::string bs = (fs::path(out_dir) / "bundles.jsonl").string();
  save_dataset(toy.records, ds);
  save_bundles(toy.bundles, bs);
  for (const auto& f : toy.features)
    save_features(f, (fs::path(out_dir) / "features").string());
  mw.output(ds);
  mw.output(bs);
  mw.config("n_videos", tc.n_videos);
  mw.config("n_events", tc.n_events);
  mw.config("vocab_size", tc.vocab_size);
  mw.config("d_visual", tc.d_visual);
  mw.write(ds);
  std::cout << "wrote " << toy.records.size() << " videos to " << out_dir << "\n";
  return 0;
}

int cmd_build_theme_graphs(const std::string& dataset, const std::string& bundles_path,
                           const std::string& out, const Profile& prof,
                           double npmi_threshold, int top_n, int k, int restarts,
                           std::uint64_t seed) {
  ManifestWriter mw("build-theme-graphs", seed);
  mw.input(dataset);
  mw.input(bundles_path);
  auto records = load_dataset(dataset);
  auto bundles = load_bundles(bundles_path);
  HashingEmbedder embedder;

  std::optional<ActionClusterModel> clusters;
  ClassOfEvent class_fn;
  if (prof.method == GraphMethod::VF) {
    class_fn = [&](const std::string& vid, int t) -> std::optional<std::string> {
      auto it = bundles.find(vid);
      if (it == bundles.end() || t >= (int)it->second.events.size()) return std::nullopt;
      const ScoredLabel* best = nullptr;
      for (const auto& p : it->second.events[t].action_preds)
        if (!best || p.confidence > best->confidence) best = &p;
      if (!best) return std::nullopt;
      return to_lower(best->label);
    };
  } else {
    std::vector<Eigen::VectorXd> embs;
    for (const auto& rec : records) {
      auto it = bundles.find(rec.video_id);
      if (it == bundles.end()) continue;
      for (const auto& ev : it->second.events)
        if (!ev.asr_text.empty()) embs.push_back(embedder.embed(to_lower(ev.asr_text)));
    }
    if ((int)embs.size() < k)
      throw ValidationError("fewer transcript events than kmeans clusters");
    clusters = kmeans_cluster(embs, k, seed, restarts);
    class_fn = [&](const std::string& vid, int t) -> std::optional<std::string> {
      auto it = bundles.find(vid);
      if (it == bundles.end() || t >= (int)it->second.events.size()) return std::nullopt;
      const auto& ev = it->second.events[t];
      if (ev.asr_text.empty()) return std::nullopt;
      return "cluster_" + std::to_string(clusters->assign(embedder.embed(to_lower(ev.asr_text))));
    };
  }

  auto corpus = caption_corpus(records);
  ClassVocabResult vocab = build_class_vocab(records, bundles, class_fn, top_n);
  ClassVocabResult global = build_class_vocab(
      records, bundles, [](const std::string&, int) { return std::optional<std::string>("__global__"); },
      top_n);

  std::vector<ThemeGraph> graphs;
  for (const auto& [cls, words] : vocab.vocab)
    graphs.push_back(build_theme_graph(cls, words, corpus, npmi_threshold, embedder));
  graphs.push_back(build_theme_graph("__global__", global.vocab.at("__global__"), corpus,
                                     npmi_threshold, embedder));
  save_theme_graphs(graphs, out);
  mw.output(out);
  if (clusters) {
    save_cluster_model(*clusters, out + ".kmeans.json");
    mw.output(out + ".kmeans.json");
  }
  mw.config("method", graph_method_name(prof.method));
  mw.config("npmi_threshold", npmi_threshold);
  mw.config("top_n", top_n);
  mw.config("skipped_events", vocab.skipped_events);
  mw.write(out);
  std::cout << "wrote " << graphs.size() << " theme graphs to " << out << "\n";
  return 0;
}

int cmd_build_video_graphs(const std::string& dataset, const std::string& bundles_path,
                           const std::string& out_dir, GraphMethod method,
                           const FilterConfig& fc) {
  ManifestWriter mw("build-video-graphs", 0);
  mw.input(dataset);
  mw.input(bundles_path);
  auto records = load_dataset(dataset);
  auto bundles = load_bundles(bundles_path);
  HashingEmbedder embedder;
  TrainingLexicon lexicon = build_training_lexicon(records, bundles, embedder);
  fs::create_directories(out_dir);
  int n = 0;
  for (const auto& rec : records) {
    auto it = bundles.find(rec.video_id);
    if (it == bundles.end())
      throw ValidationError("no annotation bundle for video " + rec.video_id);
    VideoGraph g = build_video_graph(rec, it->second, method, fc, lexicon, embedder);
    save_video_graph(g, out_dir);
    ++n;
  }
  mw.output(out_dir);
  mw.config("method", graph_method_name(method));
  mw.config("no_action_threshold", fc.no_action_threshold);
  mw.config("videos", n);
  mw.write((fs::path(out_dir) / "graphs").string());
  std::cout << "wrote " << n << " video graphs to " << out_dir << "\n";
  return 0;
}

struct TrainFlags {
  std::string dataset, bundles, features, graphs, themes, kmeans, out, log, vocab_out;
  std::string recurrence = "mart";
  std::string profile = "toy";
  bool visual_only = false;
  int hidden = 0, heads = 0, layers = 2, intermediate = 0, memory_slots = 4;
  int top_n_tg = 0, top_n_vg = 0;
  TrainConfig tc;
};

int cmd_train(TrainFlags f) {
  Profile prof = resolve_profile(f.profile);
  ManifestWriter mw("train", f.tc.seed);
  mw.input(f.dataset);
  mw.input(f.bundles);
  if (!f.visual_only) mw.input(f.themes);

  TrainingSet ts = load_training_set(f.dataset, f.bundles, f.features, f.graphs,
                                     !f.visual_only);
  HashingEmbedder embedder;
  ts.embedder = &embedder;
  Vocabulary vocab = Vocabulary::build(ts.records, 1);
  ts.vocab = &vocab;
  ThemeGraphIndex themes;
  if (!f.visual_only) {
    themes = load_theme_index(f.themes, f.kmeans, prof.method, embedder);
    ts.themes = &themes;
  }

  ModelConfig mc;
  mc.hidden = f.hidden > 0 ? f.hidden : prof.hidden;
  mc.heads = f.heads > 0 ? f.heads : prof.heads;
  mc.intermediate = f.intermediate > 0 ? f.intermediate : mc.hidden;
  mc.layers = f.layers;
  mc.memory_slots = f.memory_slots;
  mc.top_n_tg = f.top_n_tg > 0 ? f.top_n_tg : prof.top_n_tg;
  mc.top_n_vg = f.top_n_vg > 0 ? f.top_n_vg : prof.top_n_vg;
  mc.vocab_size = vocab.size();
  mc.recurrence = recurrence_from_name(f.recurrence);
  mc.use_node_stream = !f.visual_only;
  mc.node_feat_dim = static_cast<int>(embedder.dim());
  int max_cap = 0, max_frames = 1;
  for (const auto& rec : ts.records) {
    for (const auto& cap : rec.captions) max_cap = std::max<int>(max_cap, (int)cap.size());
    for (const auto& m : ts.features.at(rec.video_id).per_event)
      max_frames = std::max<int>(max_frames, (int)m.rows());
  }
  mc.max_caption_len = max_cap + 2;
  mc.max_visual_tokens = max_frames;
  if (ts.features.empty() || ts.records.empty())
    throw ValidationError("empty training set");
  mc.d_visual = (int)ts.features.begin()->second.per_event.at(0).cols();

  CaptionModel model(mc, f.tc.seed);
  f.tc.checkpoint_path = f.out;
  if (f.tc.log_path.empty() && !f.log.empty()) f.tc.log_path = f.log;
  std::string vocab_path = f.vocab_out.empty() ? f.out + ".vocab.json" : f.vocab_out;
  vocab.save(vocab_path);

  TrainResult res = train_model(model, ts, ts, f.tc, vocab.content_hash());
  if (f.out.empty())
    throw ValidationError("--out checkpoint path is required");
  mw.output(f.out);
  mw.output(vocab_path);
  mw.config("model", json::parse(mc.to_json()));
  mw.config("best_epoch", res.best_epoch);
  mw.config("best_cider", res.best_cider);
  mw.write(f.out);
  std::cout << "best val CIDEr " << res.best_cider << " at epoch " << res.best_epoch
            << "; checkpoint: " << f.out << "\n";
  return 0;
}

struct CaptionFlags {
  std::string checkpoint, vocab, dataset, bundles, features, graphs, themes, kmeans, out;
  std::string mode = "nucleus";
  std::string profile = "toy";
  DecodeConfig dc;
};

int cmd_caption(CaptionFlags f) {
  Profile prof = resolve_profile(f.profile);
  ManifestWriter mw("caption", f.dc.seed);
  mw.input(f.checkpoint);
  mw.input(f.dataset);
  f.dc.mode = f.mode == "greedy" ? DecodeConfig::Mode::Greedy
                                 : DecodeConfig::Mode::Nucleus;
  if (f.mode != "greedy" && f.mode != "nucleus")
    throw ValidationError("unknown decode mode: " + f.mode);

  Checkpoint ck = load_checkpoint(f.checkpoint);
  CaptionModel model = model_from_checkpoint(ck);
  std::string vocab_path = f.vocab.empty() ? f.checkpoint + ".vocab.json" : f.vocab;
  Vocabulary vocab = Vocabulary::load(vocab_path);
  if (vocab.content_hash() != ck.vocab_hash)
    throw ValidationError("vocabulary does not match checkpoint (hash mismatch)");

  TrainingSet ts = load_training_set(f.dataset, f.bundles, f.features, f.graphs,
                                     model.config().use_node_stream);
  HashingEmbedder embedder;
  ThemeGraphIndex themes;
  if (model.config().use_node_stream)
    themes = load_theme_index(f.themes, f.kmeans, prof.method, embedder);

  std::map<std::string, GeneratedParagraph> out;
  for (const auto& rec : ts.records)
    out[rec.video_id] = caption_video(model, ts.artifacts(rec), themes, embedder,
                                      vocab, f.dc);
  std::ofstream of(f.out);
  if (!of) throw std::runtime_error("cannot write predictions: " + f.out);
  of << paragraphs_to_json(out) << "\n";
  mw.output(f.out);
  mw.config("mode", f.mode);
  mw.config("top_p", f.dc.top_p);
  mw.config("temperature", f.dc.temperature);
  mw.write(f.out);
  std::cout << "wrote captions for " << out.size() << " videos to " << f.out << "\n";
  return 0;
}

int cmd_evaluate(const std::string& predictions, const std::string& dataset,
                 const std::string& out, const std::string& csv) {
  ManifestWriter mw("evaluate", 0);
  mw.input(predictions);
  mw.input(dataset);
  std::ifstream pf(predictions);
  if (!pf) throw ValidationError("cannot open predictions: " + predictions);
  std::string text((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
  auto preds = paragraphs_from_json(text);
  auto records = load_dataset(dataset);

  std::map<std::string, TokenSeq> cands, refs;
  std::map<std::string, std::string> cats;
  for (const auto& [vid, para] : preds) {
    TokenSeq joined;
    for (const auto& cap : para.captions)
      joined.insert(joined.end(), cap.begin(), cap.end());
    cands[vid] = std::move(joined);
  }
  for (const auto& rec : records) {
    TokenSeq joined;
    for (const auto& cap : rec.captions)
      joined.insert(joined.end(), cap.begin(), cap.end());
    refs[rec.video_id] = std::move(joined);
    if (!rec.category.empty()) cats[rec.video_id] = rec.category;
  }
  MetricReport rep = evaluate_captions(cands, refs, cats);
  // display convention: BLEU/ROUGE/METEOR x100, CIDEr x10 (CIDEr-D is already x10)
  json j = json::parse(rep.to_json());
  j["bleu4"] = rep.bleu4 * 100.0;
  j["rouge_l"] = rep.rouge_l * 100.0;
  j["meteor"] = rep.meteor * 100.0;
  j["cider"] = rep.cider * 10.0;
  std::ofstream of(out);
  if (!of) throw std::runtime_error("cannot write report: " + out);
  of << j.dump(2) << "\n";
  if (!csv.empty()) {
    std::ofstream cf(csv);
    cf << rep.per_category_csv();
    mw.output(csv);
  }
  mw.output(out);
  mw.write(out);
  std::cout << "B4 " << j["bleu4"] << "  M " << j["meteor"] << "  C " << j["cider"]
            << "  R " << j["rouge_l"] << "  Div2 " << rep.div2 << "  R4 " << rep.rep4
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-enhanced video paragraph captioning pipeline"};
  app.require_subcommand(1);

  // make-toy
  auto* mk = app.add_subcommand("make-toy", "generate the synthetic dataset");
  std::string mk_out = "toy";
  std::uint64_t mk_seed = 1;
  ToyConfig tc;
  mk->add_option("--out", mk_out, "output directory");
  mk->add_option("--seed", mk_seed, "RNG seed");
  mk->add_option("--videos", tc.n_videos, "video count");
  mk->add_option("--events", tc.n_events, "events per video");
  mk->add_option("--vocab-size", tc.vocab_size, "target distinct word count");
  mk->add_option("--d-visual", tc.d_visual, "visual feature dim");
  mk->add_option("--frames", tc.frames_per_event, "frames per event");
  mk->add_option("--noise", tc.noise_stddev, "visual noise stddev");

  // build-theme-graphs
  auto* tg = app.add_subcommand("build-theme-graphs", "build per-class NPMI word graphs");
  std::string tg_dataset, tg_bundles, tg_out = "theme_graphs.jsonl", tg_profile = "toy",
              tg_method;
  double tg_threshold = 0.10;
  int tg_top_n = 100, tg_k = 0, tg_restarts = 10;
  std::uint64_t tg_seed = 1;
  tg->add_option("--dataset", tg_dataset)->required();
  tg->add_option("--bundles", tg_bundles)->required();
  tg->add_option("--out", tg_out);
  tg->add_option("--profile", tg_profile, "toy|activitynet|youcook2");
  tg->add_option("--method", tg_method, "vf|asr (overrides profile)");
  tg->add_option("--npmi-threshold", tg_threshold);
  tg->add_option("--top-n", tg_top_n, "words per class");
  tg->add_option("--k", tg_k, "kmeans clusters (asr)");
  tg->add_option("--restarts", tg_restarts);
  tg->add_option("--seed", tg_seed);

  // build-video-graphs
  auto* vg = app.add_subcommand("build-video-graphs", "build per-video heterogeneous graphs");
  std::string vg_dataset, vg_bundles, vg_out = "video_graphs", vg_profile = "toy",
              vg_method;
  FilterConfig fc;
  vg->add_option("--dataset", vg_dataset)->required();
  vg->add_option("--bundles", vg_bundles)->required();
  vg->add_option("--out", vg_out);
  vg->add_option("--profile", vg_profile);
  vg->add_option("--method", vg_method, "vf|asr (overrides profile)");
  vg->add_option("--no-action-threshold", fc.no_action_threshold);
  vg->add_option("--commonsense-min-action-conf", fc.commonsense_min_action_conf);
  vg->add_option("--object-sim-threshold", fc.object_sim_threshold);
  vg->add_option("--audio-sim-threshold", fc.audio_sim_threshold);
  vg->add_option("--levenshtein-ratio", fc.levenshtein_ratio_max);
  vg->add_option("--verb-sim-threshold", fc.verb_sim_threshold);

  // train
  auto* tr = app.add_subcommand("train", "train the captioning model");
  TrainFlags tf;
  tr->add_option("--dataset", tf.dataset)->required();
  tr->add_option("--bundles", tf.bundles)->required();
  tr->add_option("--features", tf.features)->required();
  tr->add_option("--video-graphs", tf.graphs);
  tr->add_option("--theme-graphs", tf.themes);
  tr->add_option("--kmeans", tf.kmeans);
  tr->add_option("--out", tf.out)->required();
  tr->add_option("--log", tf.log);
  tr->add_option("--vocab-out", tf.vocab_out);
  tr->add_option("--profile", tf.profile);
  tr->add_option("--recurrence", tf.recurrence, "none|mart|tint");
  tr->add_flag("--visual-only", tf.visual_only, "disable the node stream");
  tr->add_option("--hidden", tf.hidden);
  tr->add_option("--heads", tf.heads);
  tr->add_option("--layers", tf.layers);
  tr->add_option("--intermediate", tf.intermediate);
  tr->add_option("--memory-slots", tf.memory_slots);
  tr->add_option("--top-n-tg", tf.top_n_tg);
  tr->add_option("--top-n-vg", tf.top_n_vg);
  tr->add_option("--lr", tf.tc.lr);
  tr->add_option("--weight-decay", tf.tc.weight_decay);
  tr->add_option("--warmup-epochs", tf.tc.warmup_epochs);
  tr->add_option("--batch-size", tf.tc.batch_size);
  tr->add_option("--label-smoothing", tf.tc.label_smoothing);
  tr->add_option("--patience", tf.tc.patience);
  tr->add_option("--epochs", tf.tc.max_epochs);
  tr->add_option("--seed", tf.tc.seed);

  // caption
  auto* cp = app.add_subcommand("caption", "generate paragraphs from a checkpoint");
  CaptionFlags cf;
  cp->add_option("--checkpoint", cf.checkpoint)->required();
  cp->add_option("--vocab", cf.vocab);
  cp->add_option("--dataset", cf.dataset)->required();
  cp->add_option("--bundles", cf.bundles);
  cp->add_option("--features", cf.features)->required();
  cp->add_option("--video-graphs", cf.graphs);
  cp->add_option("--theme-graphs", cf.themes);
  cp->add_option("--kmeans", cf.kmeans);
  cp->add_option("--out", cf.out)->required();
  cp->add_option("--profile", cf.profile);
  cp->add_option("--mode", cf.mode, "nucleus|greedy");
  cp->add_option("--top-p", cf.dc.top_p);
  cp->add_option("--temperature", cf.dc.temperature);
  cp->add_option("--max-len", cf.dc.max_len);
  cp->add_option("--seed", cf.dc.seed);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score predictions against references");
  std::string ev_preds, ev_dataset, ev_out = "report.json", ev_csv;
  ev->add_option("--predictions", ev_preds)->required();
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--out", ev_out);
  ev->add_option("--csv", ev_csv, "per-category CSV table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mk->parsed()) return cmd_make_toy(mk_out, mk_seed, tc);
    if (tg->parsed()) {
      Profile p = resolve_profile(tg_profile);
      if (!tg_method.empty()) p.method = graph_method_from_name(tg_method);
      int k = tg_k > 0 ? tg_k : p.kmeans_k;
      return cmd_build_theme_graphs(tg_dataset, tg_bundles, tg_out, p, tg_threshold,
                                    tg_top_n, k, tg_restarts, tg_seed);
    }
    if (vg->parsed()) {
      Profile p = resolve_profile(vg_profile);
      GraphMethod m = vg_method.empty() ? p.method : graph_method_from_name(vg_method);
      return cmd_build_video_graphs(vg_dataset, vg_bundles, vg_out, m, fc);
    }
    if (tr->parsed()) return cmd_train(tf);
    if (cp->parsed()) return cmd_caption(cf);
    if (ev->parsed()) return cmd_evaluate(ev_preds, ev_dataset, ev_out, ev_csv);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
