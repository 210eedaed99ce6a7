#include "gemvpc/train.hpp"

#include "gemvpc/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using nlohmann::json;

namespace gemvpc {

using nn::Mat;
using nn::Var;

void TrainConfig::validate() const {
  if (label_smoothing < 0 || label_smoothing >= 1)
    throw ValidationError("label_smoothing must be in [0, 1)");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (lr <= 0) throw ValidationError("lr must be positive");
}

Var smoothed_kl_loss(const Var& logits, const std::vector<int>& targets,
                     double smoothing, int pad_id) {
  if (static_cast<size_t>(logits.rows()) != targets.size())
    throw ValidationError("smoothed_kl_loss: target length mismatch");
  const int V = static_cast<int>(logits.cols());
  if (V < 2) throw ValidationError("smoothed_kl_loss: vocab too small");
  Mat target = Mat::Zero(logits.rows(), V);
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(logits.rows());
  int live = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int t = targets[i];
    if (t == pad_id) continue;
    if (t < 0 || t >= V) throw ValidationError("smoothed_kl_loss: target id out of range");
    target.row(i).setConstant(smoothing / (V - 1));
    target(i, t) = 1.0 - smoothing;
    weight(i) = 1.0;
    ++live;
  }
  if (live == 0) throw ValidationError("smoothed_kl_loss: all-pad target");
  return nn::kl_div_loss(logits, target, weight);
}

double lr_at_step(long step, long steps_per_epoch, const TrainConfig& cfg) {
  if (step < 0) throw ValidationError("lr_at_step: negative step");
  long warmup = static_cast<long>(cfg.warmup_epochs) * steps_per_epoch;
  if (warmup <= 0 || step >= warmup) return cfg.lr;
  return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
}

VideoArtifacts TrainingSet::artifacts(const VideoRecord& rec) const {
  VideoArtifacts a;
  a.record = &rec;
  auto fit = features.find(rec.video_id);
  if (fit == features.end())
    throw ValidationError("missing visual features for " + rec.video_id);
  a.features = &fit->second;
  auto bit = bundles.find(rec.video_id);
  a.bundle = bit == bundles.end() ? nullptr : &bit->second;
  auto git = graphs.find(rec.video_id);
  a.graph = git == graphs.end() ? nullptr : &git->second;
  return a;
}

VideoForward forward_video_teacher_forced(const CaptionModel& model,
                                          const TrainingSet& data,
                                          const VideoRecord& rec) {
  const auto& mc = model.config();
  VideoArtifacts art = data.artifacts(rec);
  if (!rec.has_captions())
    throw ValidationError("video without captions in training set: " + rec.video_id);
  if (mc.use_node_stream) {
    if (!art.graph) throw ValidationError("missing video graph for " + rec.video_id);
    if (!art.bundle)
      throw ValidationError("missing annotation bundle for " + rec.video_id);
  }
  Var vg_emb;
  if (mc.use_node_stream) vg_emb = model.encode_video_graph(*art.graph);

  VideoForward out;
  MemoryState mem = model.initial_memory();
  for (size_t t = 0; t < rec.events.size(); ++t) {
    std::vector<int> ids;
    for (const auto& tok : rec.captions[t]) ids.push_back(data.vocab->lookup(tok));
    int keep = std::min<int>(static_cast<int>(ids.size()), mc.max_caption_len - 1);
    std::vector<int> in_tokens = {Vocabulary::kBos};
    in_tokens.insert(in_tokens.end(), ids.begin(), ids.begin() + keep);
    std::vector<int> targets(ids.begin(), ids.begin() + keep);
    targets.push_back(Vocabulary::kEos);

    EventInputs in;
    in.t = static_cast<int>(t);
    in.visual = art.features->per_event.at(t).cast<double>();
    in.caption_in = in_tokens;
    if (mc.use_node_stream) {
      in.vg = art.graph;
      in.vg_emb = vg_emb;
      in.tg = &data.themes->resolve(art.bundle->events.at(t), *data.embedder);
      in.tg_emb = model.encode_theme_graph(*in.tg);
    }
    EventResult res = model.forward_event(in, mem);
    out.logits.push_back(res.logits);
    out.targets.push_back(std::move(targets));
  }
  return out;
}

double teacher_forced_accuracy(const CaptionModel& model, const TrainingSet& data) {
  long correct = 0, total = 0;
  for (const auto& rec : data.records) {
    VideoForward vf = forward_video_teacher_forced(model, data, rec);
    for (size_t e = 0; e < vf.logits.size(); ++e) {
      const Mat& lg = vf.logits[e].value();
      for (Eigen::Index i = 0; i < lg.rows(); ++i) {
        if (vf.targets[e][i] == Vocabulary::kPad) continue;
        Eigen::Index best;
        lg.row(i).maxCoeff(&best);
        if (static_cast<int>(best) == vf.targets[e][i]) ++correct;
        ++total;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

double validation_cider(const CaptionModel& model, const TrainingSet& data) {
  DecodeConfig dc;
  dc.mode = DecodeConfig::Mode::Greedy;
  dc.max_len = model.config().max_caption_len - 1;
  std::map<std::string, TokenSeq> cands, refs;
  for (const auto& rec : data.records) {
    GeneratedParagraph gp =
        caption_video(model, data.artifacts(rec), *data.themes, *data.embedder,
                      *data.vocab, dc);
    TokenSeq cand, ref;
    for (const auto& cap : gp.captions) cand.insert(cand.end(), cap.begin(), cap.end());
    for (const auto& cap : rec.captions) ref.insert(ref.end(), cap.begin(), cap.end());
    cands[rec.video_id] = std::move(cand);
    refs[rec.video_id] = std::move(ref);
  }
  std::vector<TokenSeq> c, r;
  for (const auto& [id, cand] : cands) {
    c.push_back(cand);
    r.push_back(refs[id]);
  }
  return cider_d(c, r);
}

TrainResult train_model(CaptionModel& model, const TrainingSet& train,
                        const TrainingSet& val, const TrainConfig& cfg,
                        std::uint64_t vocab_hash) {
  cfg.validate();
  if (train.records.empty()) throw ValidationError("empty training set");
  if (!train.vocab || !train.embedder)
    throw ValidationError("training set missing vocabulary/embedder");
  if (model.config().use_node_stream && !train.themes)
    throw ValidationError("training set missing theme graphs");

  nn::AdamW opt;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.weight_decay = cfg.weight_decay;
  opt.clip_norm = cfg.clip_norm;

  const long n_videos = static_cast<long>(train.records.size());
  const long steps_per_epoch = (n_videos + cfg.batch_size - 1) / cfg.batch_size;
  DetRng shuffle_rng = DetRng::substream(cfg.seed, "epoch-shuffle");

  std::ofstream log_file;
  if (!cfg.log_path.empty()) {
    log_file.open(cfg.log_path, std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write training log: " + cfg.log_path);
  }

  TrainResult result;
  result.best_cider = -1.0;
  int since_improve = 0;
  long step = 0;
  std::vector<int> order(n_videos);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0;
    long epoch_tokens = 0;
    double last_lr = 0;
    for (long b = 0; b < steps_per_epoch; ++b) {
      model.params().zero_grad();
      std::vector<Var> parts;
      long batch_tokens = 0;
      for (int k = 0; k < cfg.batch_size; ++k) {
        long vi = b * cfg.batch_size + k;
        if (vi >= n_videos) break;
        const VideoRecord& rec = train.records[order[vi]];
        VideoForward vf = forward_video_teacher_forced(model, train, rec);
        for (size_t e = 0; e < vf.logits.size(); ++e) {
          Var ev_loss = smoothed_kl_loss(vf.logits[e], vf.targets[e],
                                         cfg.label_smoothing, Vocabulary::kPad);
          double lv = ev_loss.value()(0, 0);
          if (!std::isfinite(lv))
            throw std::runtime_error("non-finite loss at epoch " +
                                     std::to_string(epoch) + ", batch " +
                                     std::to_string(b) + ", video " + rec.video_id +
                                     ", event " + std::to_string(e));
          long n_tok = 0;
          for (int t : vf.targets[e])
            if (t != Vocabulary::kPad) ++n_tok;
          batch_tokens += n_tok;
          parts.push_back(scale(ev_loss, static_cast<double>(n_tok)));
        }
      }
      if (parts.empty()) continue;
      Var total = parts[0];
      for (size_t i = 1; i < parts.size(); ++i) total = total + parts[i];
      total = scale(total, 1.0 / static_cast<double>(batch_tokens));
      nn::backward(total);
      last_lr = lr_at_step(step, steps_per_epoch, cfg);
      opt.step(model.params(), last_lr);
      ++step;
      epoch_loss += total.value()(0, 0) * batch_tokens;
      epoch_tokens += batch_tokens;
    }

    EpochLog el;
    el.epoch = epoch;
    el.train_loss = epoch_tokens ? epoch_loss / epoch_tokens : 0.0;
    el.lr = last_lr;
    const bool do_val = cfg.validate_every > 0 && epoch % cfg.validate_every == 0;
    el.val_cider = do_val ? validation_cider(model, val) : -1.0;
    result.log.push_back(el);
    if (log_file) {
      json j = {{"epoch", el.epoch},
                {"train_loss", el.train_loss},
                {"val_cider", el.val_cider},
                {"lr", el.lr}};
      log_file << j.dump() << "\n";
      log_file.flush();
    }

    if (do_val) {
      if (el.val_cider > result.best_cider) {
        result.best_cider = el.val_cider;
        result.best_epoch = epoch;
        since_improve = 0;
        if (!cfg.checkpoint_path.empty())
          save_checkpoint(cfg.checkpoint_path, model, vocab_hash, &opt);
      } else {
        ++since_improve;
        if (since_improve >= cfg.patience) break;
      }
    }
    if (cfg.epoch_callback && cfg.epoch_callback(model, el)) break;
  }
  // With validation disabled no best checkpoint was ever written; persist the
  // final weights so the caller still gets a usable artifact.
  if (!cfg.checkpoint_path.empty() && result.best_epoch == 0)
    save_checkpoint(cfg.checkpoint_path, model, vocab_hash, &opt);
  return result;
}

}  // namespace gemvpc
