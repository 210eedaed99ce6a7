#include "gemvpc/data.hpp"
#include "gemvpc/embedder.hpp"
#include "gemvpc/text.hpp"
#include "gemvpc/toy.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace gemvpc;
namespace fs = std::filesystem;

namespace {
fs::path tmpdir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("gemvpc_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("A man, RUNS fast!") ==
        std::vector<std::string>{"a", "man", "runs", "fast"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(join_tokens({"a", "b"}) == "a b");
}

TEST_CASE("levenshtein and ratio") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein_ratio("", "") == doctest::Approx(1.0));
  // "bakes a cake" vs "bakes the cake": distance 3, max len 14
  double r = levenshtein_ratio("bakes a cake", "bakes the cake");
  CHECK(r == doctest::Approx(1.0 - 3.0 / 14.0));
  CHECK(r > 0.70);
}

TEST_CASE("stem strips common suffixes") {
  CHECK(stem("jumping") == "jump");
  CHECK(stem("cats") == stem("cat"));
  CHECK(stem("run") == "run");
}

TEST_CASE("is_content_tag accepts plain and Penn tags") {
  CHECK(is_content_tag("noun"));
  CHECK(is_content_tag("verb"));
  CHECK(is_content_tag("adv"));
  CHECK(is_content_tag("NNS"));
  CHECK(is_content_tag("VBD"));
  CHECK(is_content_tag("RB"));
  CHECK_FALSE(is_content_tag("det"));
  CHECK_FALSE(is_content_tag("IN"));
}

TEST_CASE("hashing embedder is deterministic, unit-norm, input-sensitive") {
  HashingEmbedder e(64, 123);
  auto a = e.embed("cooking dinner");
  auto b = e.embed("cooking dinner");
  auto c = e.embed("surfing waves");
  CHECK((a - b).norm() == 0.0);
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK((a - c).norm() > 1e-3);
  CHECK(cosine(a, a) == doctest::Approx(1.0));
}

TEST_CASE("vocabulary case folding and min_count") {
  // corpus {"Run run RUN"}, min_count = 3: case folding makes the count 3
  VideoRecord rec;
  rec.video_id = "v";
  rec.events.push_back({0, 0.0, 1.0});
  rec.captions.push_back(tokenize("Run run RUN"));
  Vocabulary v = Vocabulary::build({rec}, 3);
  CHECK(v.lookup("run") >= Vocabulary::kNumSpecials);
  CHECK(v.size() == Vocabulary::kNumSpecials + 1);
  CHECK(v.lookup("walk") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary hash changes with content and survives save/load") {
  Vocabulary a = Vocabulary::from_tokens({"x", "y", "x"}, 1);
  Vocabulary b = Vocabulary::from_tokens({"x", "z", "x"}, 1);
  CHECK(a.content_hash() != b.content_hash());
  auto d = tmpdir("vocab");
  a.save((d / "v.json").string());
  Vocabulary a2 = Vocabulary::load((d / "v.json").string());
  CHECK(a2.content_hash() == a.content_hash());
  CHECK(a2.size() == a.size());
}

TEST_CASE("dataset round trip preserves records") {
  ToyDataset toy = generate_toy_dataset(7, {4, 2, 40, 16, 3, 0.05, "rt"});
  auto d = tmpdir("dataset");
  save_dataset(toy.records, (d / "ds.json").string());
  auto back = load_dataset((d / "ds.json").string());
  REQUIRE(back.size() == toy.records.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].video_id == toy.records[i].video_id);
    CHECK(back[i].captions == toy.records[i].captions);
    CHECK(back[i].events.size() == toy.records[i].events.size());
  }
}

TEST_CASE("bundle round trip and validation") {
  ToyDataset toy = generate_toy_dataset(3, {3, 2, 40, 16, 3, 0.05, "bb"});
  auto d = tmpdir("bundles");
  save_bundles(toy.bundles, (d / "b.jsonl").string());
  auto back = load_bundles((d / "b.jsonl").string());
  REQUIRE(back.size() == toy.bundles.size());
  for (auto& [id, b] : back) {
    CHECK_NOTHROW(validate_bundle(b));
    CHECK(b.events.size() == toy.bundles.at(id).events.size());
    CHECK(b.events[0].asr_text == toy.bundles.at(id).events[0].asr_text);
  }
  AnnotationBundle bad;
  bad.video_id = "x";
  EventAnnotations ev;
  ev.action_preds = {{"chop", 1.5}};  // confidence out of [0, 1]
  bad.events = {ev};
  CHECK_THROWS_AS(validate_bundle(bad), ValidationError);
}

TEST_CASE("feature files round trip as f32") {
  ToyDataset toy = generate_toy_dataset(11, {2, 2, 40, 16, 3, 0.05, "ft"});
  auto d = tmpdir("features");
  save_features(toy.features[0], d.string());
  auto back = load_features(d.string(), toy.features[0].video_id);
  REQUIRE(back.per_event.size() == toy.features[0].per_event.size());
  for (size_t e = 0; e < back.per_event.size(); ++e)
    CHECK((back.per_event[e] - toy.features[0].per_event[e]).norm() == 0.0f);
  CHECK_THROWS_AS(load_features(d.string(), "missing_video"), ValidationError);
}

TEST_CASE("relation vocabulary round trips and method filters differ") {
  for (RelationToken r : all_relations()) {
    CHECK(relation_from_name(relation_name(r)) == r);
  }
  CHECK_THROWS_AS(relation_from_name("bogusRelation"), ValidationError);
  int vf = 0, asr = 0;
  for (RelationToken r : all_relations()) {
    vf += relation_active_vf(r);
    asr += relation_active_asr(r);
  }
  CHECK(vf > 0);
  CHECK(asr > 0);
}

TEST_CASE("toy generator is deterministic and classes are recoverable") {
  ToyConfig cfg;
  ToyDataset a = generate_toy_dataset(42, cfg);
  ToyDataset b = generate_toy_dataset(42, cfg);
  REQUIRE(a.records.size() == 50);
  CHECK(a.records[7].captions == b.records[7].captions);
  CHECK((a.features[3].per_event[1] - b.features[3].per_event[1]).norm() == 0.0f);

  // nearest-signature classification: argmax of the mean frame feature equals
  // the class reported as the top-confidence action prediction
  auto labels = toy_class_labels(8);
  int total = 0, correct = 0;
  for (size_t v = 0; v < a.records.size(); ++v) {
    const auto& bundle = a.bundles.at(a.records[v].video_id);
    for (size_t e = 0; e < a.features[v].per_event.size(); ++e) {
      Eigen::VectorXf mean = a.features[v].per_event[e].colwise().mean();
      Eigen::Index best;
      mean.head(8).maxCoeff(&best);
      const ScoredLabel* top = nullptr;
      for (const auto& p : bundle.events[e].action_preds)
        if (!top || p.confidence > top->confidence) top = &p;
      REQUIRE(top != nullptr);
      correct += labels[best] == top->label;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.95);
}
