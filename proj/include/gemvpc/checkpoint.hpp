#pragma once

// Versioned binary model checkpoints: config, vocabulary hash, parameter
// tensors, and optimizer state in one archive. Writes are atomic
// (write-temp-then-rename).

#include "gemvpc/model.hpp"

namespace gemvpc {

struct Checkpoint {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
  std::map<std::string, nn::Mat> params;
  long opt_step = 0;
  std::map<std::string, std::pair<nn::Mat, nn::Mat>> opt_state;  // (m, v)
};

void save_checkpoint(const std::string& path, const CaptionModel& model,
                     std::uint64_t vocab_hash, const nn::AdamW* opt = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Copies tensors into an existing model (and optimizer); throws
// ValidationError on any name or shape mismatch.
void apply_checkpoint(const Checkpoint& ck, CaptionModel& model,
                      nn::AdamW* opt = nullptr);

// Convenience: construct a model from the stored config and load the tensors.
CaptionModel model_from_checkpoint(const Checkpoint& ck);

}  // namespace gemvpc
