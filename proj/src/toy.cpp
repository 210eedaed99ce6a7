#include "gemvpc/toy.hpp"

#include "gemvpc/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace gemvpc {

namespace {

struct ToyClass {
  const char* label;     // action class label (bundle / graph head)
  const char* verb;      // third-person verb used in the caption
  const char* object;    // caption object noun
  const char* location;  // VQA location answer
  const char* audio;     // audio class label
};

constexpr ToyClass kClasses[] = {
    {"cooking", "cooks", "meal", "kitchen", "sizzling"},
    {"surfing", "surfs", "wave", "beach", "splashing"},
    {"painting", "paints", "canvas", "studio", "brushing"},
    {"running", "runs", "track", "stadium", "footsteps"},
    {"dancing", "dances", "routine", "stage", "music"},
    {"climbing", "climbs", "wall", "gym", "clinking"},
    {"reading", "reads", "book", "library", "rustling"},
    {"singing", "sings", "song", "studio", "melody"},
};
constexpr int kMaxClasses = 8;

constexpr const char* kAdverbs[] = {"quickly", "slowly", "carefully", "gracefully"};
constexpr int kMaxAdverbs = 4;

}  // namespace

std::vector<std::string> toy_class_labels(int n_classes) {
  std::vector<std::string> out;
  for (int i = 0; i < n_classes && i < kMaxClasses; ++i) out.push_back(kClasses[i].label);
  return out;
}

ToyDataset generate_toy_dataset(std::uint64_t seed, const ToyConfig& cfg) {
  if (cfg.n_videos < 1 || cfg.n_events < 1 || cfg.vocab_size < 1)
    throw std::invalid_argument("generate_toy_dataset: all sizes must be >= 1");
  // each class contributes ~4 distinct words, each adverb 1, template adds 3
  int n_classes = std::clamp(cfg.vocab_size / 5, 1, kMaxClasses);
  int n_adverbs = std::clamp(cfg.vocab_size / 10, 1, kMaxAdverbs);
  if (cfg.d_visual < n_classes)
    throw std::invalid_argument("generate_toy_dataset: d_visual smaller than class count");

  DetRng rng(seed);
  ToyDataset out;
  for (int v = 0; v < cfg.n_videos; ++v) {
    VideoRecord rec;
    rec.video_id = cfg.id_prefix + "_" + std::to_string(v);
    rec.category = "toy";
    VisualFeatureSeq feats;
    feats.video_id = rec.video_id;
    AnnotationBundle bundle;
    bundle.video_id = rec.video_id;
    double t0 = 0.0;
    for (int e = 0; e < cfg.n_events; ++e) {
      int cls = static_cast<int>(rng.uniform_int(n_classes));
      int adv = static_cast<int>(rng.uniform_int(n_adverbs));
      const ToyClass& C = kClasses[cls];
      const std::string adverb = kAdverbs[adv];

      EventSegment seg;
      seg.index = e;
      seg.start_s = t0;
      seg.end_s = t0 + 8.0 + 4.0 * rng.uniform();
      t0 = seg.end_s;
      rec.events.push_back(seg);

      rec.captions.push_back({"a", "person", C.verb, "the", C.object, adverb});

      Eigen::MatrixXf m(cfg.frames_per_event, cfg.d_visual);
      for (int r = 0; r < cfg.frames_per_event; ++r)
        for (int c = 0; c < cfg.d_visual; ++c) {
          double base = (c == cls) ? 1.0 : 0.0;
          m(r, c) = static_cast<float>(base + rng.normal(0.0, cfg.noise_stddev));
        }
      feats.per_event.push_back(std::move(m));

      EventAnnotations ev;
      ev.action_preds.push_back({C.label, rng.uniform(0.6, 1.0)});
      for (int d = 0; d < 2; ++d) {
        int other = static_cast<int>(rng.uniform_int(n_classes));
        if (other == cls) other = (other + 1) % std::max(1, n_classes);
        if (other != cls)
          ev.action_preds.push_back({kClasses[other].label, rng.uniform(0.05, 0.30)});
      }
      ev.vqa_locations = {C.location, C.location, C.location};
      ev.vqa_objects = {C.object, "person"};
      ev.detected_objects = {{C.object, rng.uniform(0.7, 1.0)},
                             {adverb, rng.uniform(0.6, 0.9)}};
      ev.audio_preds = {{{C.audio, rng.uniform(0.7, 1.0)}}};

      CommonsenseRecord cs1{C.label, RelationToken::CapableOf,
                            {adverb, std::string(C.verb) + " well"}};
      CommonsenseRecord cs2{C.label, RelationToken::HasSubEvent,
                            {C.audio, std::string("prepare the ") + C.object}};
      ev.commonsense = {cs1, cs2};

      ev.asr_text = std::string("i ") + C.verb + " the " + C.object + " " + adverb;
      ev.openie_tuples = {{C.verb, {"i", C.object, adverb}}};

      ev.pos_tags = {{"a", "det"},      {"person", "noun"}, {C.verb, "verb"},
                     {"the", "det"},    {C.object, "noun"}, {adverb, "adv"}};
      bundle.events.push_back(std::move(ev));
    }
    rec.duration = t0;
    out.records.push_back(std::move(rec));
    out.features.push_back(std::move(feats));
    out.bundles[bundle.video_id] = std::move(bundle);
  }
  return out;
}

}  // namespace gemvpc
