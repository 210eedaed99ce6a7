#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gemvpc {

// Input/format problems the caller can act on. Mapped to exit code 2 by the CLI.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EventSegment {
  int index = 0;       // 0-based timestep
  double start_s = 0;
  double end_s = 0;
};

struct VideoRecord {
  std::string video_id;
  double duration = 0;
  std::vector<EventSegment> events;
  // one token sequence per event; empty when the split carries no captions
  std::vector<std::vector<std::string>> captions;
  std::string category;

  bool has_captions() const { return !captions.empty(); }
};

struct VisualFeatureSeq {
  std::string video_id;
  // one (frames_t x d_visual) matrix per event, stored as f32 on disk
  std::vector<Eigen::MatrixXf> per_event;
};

// --- Comet-ATOMIC2020 relation vocabulary ---

enum class RelationToken {
  ObjectUse, MadeUpOf, HasProperty, CapableOf, isAfter, HasSubEvent, isBefore,
  xNeed, xAttr, xEffect, oEffect, xReact, oReact, xWant, oWant, xIntent,
};

const std::vector<RelationToken>& all_relations();
std::string relation_name(RelationToken r);
RelationToken relation_from_name(const std::string& name);  // throws ValidationError
bool relation_active_vf(RelationToken r);
bool relation_active_asr(RelationToken r);

// --- annotation bundle (the external-extractor boundary) ---

struct ScoredLabel {
  std::string label;
  double confidence = 0;
};

struct OpenIETuple {
  std::string verb;
  std::vector<std::string> args;
};

struct CommonsenseRecord {
  std::string head;
  RelationToken relation = RelationToken::CapableOf;
  std::vector<std::string> tails;  // at most 5
};

struct EventAnnotations {
  std::vector<ScoredLabel> action_preds;
  std::vector<std::string> vqa_locations;  // one answer per sampled frame
  std::vector<std::string> vqa_objects;
  std::vector<ScoredLabel> detected_objects;
  std::vector<std::vector<ScoredLabel>> audio_preds;  // per 10-second window
  std::string asr_text;
  std::vector<OpenIETuple> openie_tuples;
  std::vector<CommonsenseRecord> commonsense;
  std::vector<std::pair<std::string, std::string>> pos_tags;  // (token, tag)
};

struct AnnotationBundle {
  std::string video_id;
  std::vector<EventAnnotations> events;
};

void validate_bundle(const AnnotationBundle& b);  // throws ValidationError

// Adapter contract for plugging in real extractors later.
class BundleProducer {
 public:
  virtual ~BundleProducer() = default;
  virtual AnnotationBundle produce_bundle(const VideoRecord& video) = 0;
};

// --- vocabulary ---

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kCls = 4;
  static constexpr int kSep = 5;
  static constexpr int kNumSpecials = 6;

  Vocabulary() = default;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int min_count() const { return min_count_; }
  int lookup(const std::string& token) const;  // UNK for unknown
  const std::string& token(int id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  std::uint64_t content_hash() const;

  static Vocabulary build(const std::vector<VideoRecord>& records, int min_count);
  static Vocabulary from_tokens(const std::vector<std::string>& corpus_tokens_in_order,
                                int min_count);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  int min_count_ = 1;
};

// --- dataset / bundle / feature file IO ---

std::vector<VideoRecord> load_dataset(const std::string& path);
void save_dataset(const std::vector<VideoRecord>& records, const std::string& path);

std::map<std::string, AnnotationBundle> load_bundles(const std::string& path);
void save_bundles(const std::map<std::string, AnnotationBundle>& bundles,
                  const std::string& path);

void save_features(const VisualFeatureSeq& feats, const std::string& dir);
VisualFeatureSeq load_features(const std::string& dir, const std::string& video_id);

}  // namespace gemvpc
