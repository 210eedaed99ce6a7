#pragma once

// Teacher-forced training with smoothed-KL loss, linear warmup, early
// stopping on validation CIDEr, and best-checkpoint retention.

#include "gemvpc/artifacts.hpp"
#include "gemvpc/checkpoint.hpp"
#include "gemvpc/decode.hpp"

#include <functional>

namespace gemvpc {

class CaptionModel;
struct EpochLog;

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  double weight_decay = 0.01;
  int warmup_epochs = 5;
  int batch_size = 2;
  double label_smoothing = 0.3;
  int patience = 3;
  int max_epochs = 30;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  std::string checkpoint_path;  // best checkpoint ("" = keep in memory only)
  std::string log_path;         // JSON-lines per-epoch log ("" = no file)
  // Validation/early-stop cadence: run every k-th epoch; <= 0 disables
  // validation entirely (val_cider logged as -1, no early stop).
  int validate_every = 1;
  // Optional hook run after each epoch; returning true stops training.
  std::function<bool(CaptionModel&, const EpochLog&)> epoch_callback;

  void validate() const;  // throws ValidationError
};

// Mean KL(target || softmax(logits)) over non-pad positions; target puts
// (1 - s) on the gold token and s/(V-1) elsewhere.
nn::Var smoothed_kl_loss(const nn::Var& logits, const std::vector<int>& targets,
                         double smoothing, int pad_id);

// Linear 0 -> lr over warmup_epochs * steps_per_epoch steps, then constant.
double lr_at_step(long step, long steps_per_epoch, const TrainConfig& cfg);

struct TrainingSet {
  std::vector<VideoRecord> records;
  std::map<std::string, VisualFeatureSeq> features;
  std::map<std::string, AnnotationBundle> bundles;
  std::map<std::string, VideoGraph> graphs;
  const ThemeGraphIndex* themes = nullptr;
  const Vocabulary* vocab = nullptr;
  const TextEmbedder* embedder = nullptr;

  VideoArtifacts artifacts(const VideoRecord& rec) const;
};

struct VideoForward {
  std::vector<nn::Var> logits;           // per event
  std::vector<std::vector<int>> targets;  // per event: caption tokens + EOS
};
VideoForward forward_video_teacher_forced(const CaptionModel& model,
                                          const TrainingSet& data,
                                          const VideoRecord& rec);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0, val_cider = 0, lr = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_cider = 0;
  int best_epoch = 0;
};

// `val` may alias `train` (toy overfit runs validate on the training videos).
TrainResult train_model(CaptionModel& model, const TrainingSet& train,
                        const TrainingSet& val, const TrainConfig& cfg,
                        std::uint64_t vocab_hash);

// Fraction of non-pad caption positions whose argmax logit equals the gold
// next token, over the whole set.
double teacher_forced_accuracy(const CaptionModel& model, const TrainingSet& data);

// Greedy-decode every video and score paragraph CIDEr against ground truth.
double validation_cider(const CaptionModel& model, const TrainingSet& data);

}  // namespace gemvpc
