#include "gemvpc/train.hpp"

#include "gemvpc/metrics.hpp"
#include "gemvpc/toy.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace gemvpc;
using nn::Mat;
using nn::Var;

namespace fs = std::filesystem;

namespace {

// Everything needed to train/decode on a small synthetic set.
struct ToyWorld {
  ToyDataset data;
  HashingEmbedder emb{64};
  TrainingLexicon lexicon;
  Vocabulary vocab;
  ThemeGraphIndex themes;
  TrainingSet set;

  explicit ToyWorld(int n_videos, std::uint64_t seed = 33) {
    ToyConfig tc;
    tc.n_videos = n_videos;
    tc.n_events = 2;
    tc.d_visual = 16;
    tc.frames_per_event = 3;
    data = generate_toy_dataset(seed, tc);
    lexicon = build_training_lexicon(data.records, data.bundles, emb);
    vocab = Vocabulary::build(data.records, 1);

    FilterConfig fc;
    for (const auto& rec : data.records) {
      set.graphs[rec.video_id] = build_video_graph(
          rec, data.bundles.at(rec.video_id), GraphMethod::VF, fc, lexicon, emb);
    }
    // single global theme graph over caption content words
    std::map<std::string, long> counts;
    std::vector<std::vector<std::string>> corpus;
    for (const auto& rec : data.records)
      for (const auto& cap : rec.captions) {
        corpus.push_back(cap);
        for (const auto& w : cap) counts[w]++;
      }
    std::vector<std::pair<std::string, long>> cv(counts.begin(), counts.end());
    themes.method = GraphMethod::VF;
    themes.global = build_theme_graph("__global__", cv, corpus, 0.10, emb);

    set.records = data.records;
    for (const auto& f : data.features) set.features[f.video_id] = f;
    set.bundles = data.bundles;
    set.themes = &themes;
    set.vocab = &vocab;
    set.embedder = &emb;
  }

  ModelConfig model_config(Recurrence rec, bool node_stream = true) const {
    ModelConfig c;
    c.hidden = 32;
    c.intermediate = 32;
    c.layers = 1;
    c.heads = 2;
    c.max_visual_tokens = 3;
    c.max_caption_len = 8;
    c.vocab_size = vocab.size();
    c.d_visual = 16;
    c.node_feat_dim = 64;
    c.recurrence = rec;
    c.top_n_tg = 5;
    c.top_n_vg = 5;
    c.memory_slots = 2;
    c.tg_layers = 1;
    c.vg_layers = 1;
    c.gat_heads = 2;
    c.use_node_stream = node_stream;
    return c;
  }
};

}  // namespace

TEST_CASE("smoothed kl loss: uniform-logit fixture and special cases") {
  Mat logits = Mat::Zero(1, 3);
  Var loss = smoothed_kl_loss(nn::constant(logits), {1}, 0.3, Vocabulary::kPad);
  // target (0.15, 0.7, 0.15) against uniform 1/3
  double want = 0.7 * std::log(2.1) + 0.3 * std::log(0.45);
  CHECK(loss.value()(0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.2798).epsilon(1e-3));

  // zero smoothing reduces to cross entropy of the gold token
  Mat lg(1, 3);
  lg << 0.3, -0.2, 1.1;
  Var ce = smoothed_kl_loss(nn::constant(lg), {2}, 0.0, Vocabulary::kPad);
  double lse = std::log(std::exp(0.3) + std::exp(-0.2) + std::exp(1.1));
  CHECK(ce.value()(0, 0) == doctest::Approx(lse - 1.1).epsilon(1e-12));

  // pad rows are excluded from the mean
  Mat two = Mat::Zero(2, 3);
  Var with_pad =
      smoothed_kl_loss(nn::constant(two), {1, Vocabulary::kPad}, 0.3, Vocabulary::kPad);
  CHECK(with_pad.value()(0, 0) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(smoothed_kl_loss(nn::constant(two), {Vocabulary::kPad, Vocabulary::kPad},
                                   0.3, Vocabulary::kPad),
                  ValidationError);
  CHECK_THROWS_AS(smoothed_kl_loss(nn::constant(two), {1}, 0.3, Vocabulary::kPad),
                  ValidationError);
}

TEST_CASE("lr schedule: linear warmup then constant") {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_epochs = 5;
  CHECK(lr_at_step(0, 10, cfg) == 0.0);
  CHECK(lr_at_step(25, 10, cfg) == doctest::Approx(5e-4));
  CHECK(lr_at_step(50, 10, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at_step(500, 10, cfg) == doctest::Approx(1e-3));
  CHECK_THROWS_AS(lr_at_step(-1, 10, cfg), ValidationError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.label_smoothing = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.lr = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("teacher-forced forward emits one logit row per target token") {
  ToyWorld w(3);
  CaptionModel model(w.model_config(Recurrence::MART), 5);
  const VideoRecord& rec = w.set.records[0];
  VideoForward vf = forward_video_teacher_forced(model, w.set, rec);
  REQUIRE(vf.logits.size() == rec.events.size());
  for (size_t e = 0; e < vf.logits.size(); ++e) {
    CHECK(static_cast<size_t>(vf.logits[e].rows()) == vf.targets[e].size());
    CHECK(vf.targets[e].back() == Vocabulary::kEos);
  }
  double acc = teacher_forced_accuracy(model, w.set);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("training loss strictly decreases over the first three epochs") {
  ToyWorld w(6);
  CaptionModel model(w.model_config(Recurrence::MART), 5);
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 2;
  tc.validate_every = 0;  // keep the unit test fast; decode is covered below
  tc.seed = 5;
  TrainResult res = train_model(model, w.set, w.set, tc, w.vocab.content_hash());
  REQUIRE(res.log.size() == 3);
  CHECK(res.log[0].train_loss > res.log[1].train_loss);
  CHECK(res.log[1].train_loss > res.log[2].train_loss);
}

TEST_CASE("epoch callback can stop training early") {
  ToyWorld w(3);
  CaptionModel model(w.model_config(Recurrence::None), 6);
  TrainConfig tc;
  tc.max_epochs = 10;
  tc.validate_every = 0;
  int calls = 0;
  tc.epoch_callback = [&](CaptionModel&, const EpochLog& el) {
    ++calls;
    return el.epoch >= 2;
  };
  TrainResult res = train_model(model, w.set, w.set, tc, w.vocab.content_hash());
  CHECK(res.log.size() == 2);
  CHECK(calls == 2);
}

TEST_CASE("nucleus sampling fixture: (2,1,0) at top_p 0.6 is deterministic") {
  Eigen::VectorXd logits(3);
  logits << 2, 1, 0;
  DecodeConfig cfg;
  cfg.top_p = 0.6;
  cfg.temperature = 1.0;
  DetRng rng(77);
  for (int i = 0; i < 20; ++i) CHECK(nucleus_sample(logits, cfg, rng) == 0);

  // top_p = 1: every token reachable
  cfg.top_p = 1.0;
  std::set<int> seen;
  for (int i = 0; i < 300; ++i) seen.insert(nucleus_sample(logits, cfg, rng));
  CHECK(seen.size() == 3);

  cfg.mode = DecodeConfig::Mode::Greedy;
  // greedy mode is handled by the decoder, not the sampler; argmax check here
  Eigen::Index best;
  logits.maxCoeff(&best);
  CHECK(best == 0);
}

TEST_CASE("caption_video is deterministic per seed and reports nodes") {
  ToyWorld w(3);
  CaptionModel model(w.model_config(Recurrence::MART), 5);
  DecodeConfig dc;
  dc.seed = 9;
  dc.max_len = 6;
  const VideoRecord& rec = w.set.records[1];
  VideoArtifacts art = w.set.artifacts(rec);
  GeneratedParagraph a = caption_video(model, art, w.themes, w.emb, w.vocab, dc);
  GeneratedParagraph b = caption_video(model, art, w.themes, w.emb, w.vocab, dc);
  REQUIRE(a.captions.size() == rec.events.size());
  CHECK(a.captions == b.captions);
  REQUIRE(a.selected_nodes.size() == rec.events.size());
  for (const auto& nodes : a.selected_nodes) CHECK(nodes.size() <= 10);
  for (const auto& cap : a.captions) CHECK(cap.size() <= 6);

  dc.seed = 10;
  dc.mode = DecodeConfig::Mode::Greedy;
  GeneratedParagraph g1 = caption_video(model, art, w.themes, w.emb, w.vocab, dc);
  dc.seed = 11;
  GeneratedParagraph g2 = caption_video(model, art, w.themes, w.emb, w.vocab, dc);
  CHECK(g1.captions == g2.captions);  // greedy ignores the sampling stream
}

TEST_CASE("paragraph json round trip") {
  GeneratedParagraph p;
  p.captions = {{"a", "man", "cooks"}, {"he", "stirs"}};
  p.selected_nodes = {{{"pan", "tg", 0.5}}, {{"stir", "action", 0.25}}};
  std::map<std::string, GeneratedParagraph> out = {{"vid1", p}};
  auto text = paragraphs_to_json(out);
  auto back = paragraphs_from_json(text);
  REQUIRE(back.count("vid1"));
  CHECK(back["vid1"].captions == p.captions);
  REQUIRE(back["vid1"].selected_nodes.size() == 2);
  CHECK(back["vid1"].selected_nodes[0][0].label == "pan");
  CHECK(back["vid1"].selected_nodes[0][0].prob == doctest::Approx(0.5));
}

TEST_CASE("checkpoint round trip restores parameters and optimizer state") {
  ToyWorld w(3);
  CaptionModel model(w.model_config(Recurrence::TinT), 5);
  // take one optimizer step so state is nontrivial
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.validate_every = 0;
  train_model(model, w.set, w.set, tc, w.vocab.content_hash());

  fs::path path = fs::temp_directory_path() / "gemvpc_ck_test.bin";
  save_checkpoint(path.string(), model, w.vocab.content_hash());
  Checkpoint ck = load_checkpoint(path.string());
  CHECK(ck.vocab_hash == w.vocab.content_hash());
  CHECK(ck.config.hidden == 32);

  CaptionModel back = model_from_checkpoint(ck);
  for (const auto& [name, v] : model.params().items()) {
    REQUIRE(back.params().has(name));
    CHECK((back.params().at(name).value() - v.value()).norm() == 0.0);
  }
  // identical forward behaviour
  VideoForward f1 = forward_video_teacher_forced(model, w.set, w.set.records[0]);
  VideoForward f2 = forward_video_teacher_forced(back, w.set, w.set.records[0]);
  CHECK((f1.logits[0].value() - f2.logits[0].value()).norm() == 0.0);

  // shape/name mismatch is rejected
  CaptionModel other(w.model_config(Recurrence::MART), 5);
  CHECK_THROWS_AS(apply_checkpoint(ck, other), ValidationError);

  // truncated files are rejected
  auto bytes = [&] {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  }();
  fs::path trunc = fs::temp_directory_path() / "gemvpc_ck_trunc.bin";
  {
    std::ofstream f(trunc, std::ios::binary);
    f.write(bytes.data(), static_cast<long>(bytes.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(trunc.string()));
}

TEST_CASE("validation cider runs end to end on the toy set") {
  ToyWorld w(3);
  CaptionModel model(w.model_config(Recurrence::None), 5);
  double c = validation_cider(model, w.set);
  CHECK(c >= 0.0);
  CHECK(c <= 10.0);
}
