#ifndef GROUNDHOG_CHECKPOINT_H_
#define GROUNDHOG_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "groundhog/ght1.h"
#include "groundhog/model.h"
#include "groundhog/trainer.h"

namespace groundhog {

inline constexpr std::string_view kCheckpointFormat = "groundhog-ckpt/1";

// A checkpoint directory holds
//   manifest.json   config, vocabulary, parameter order, seed, step, epoch
//   weights.ght1    parameters in ModelParams::for_each order
//   optimizer.ght1  AdamW moments as "m/<name>" and "v/<name>"
// Nothing time- or host-dependent is written.
struct Checkpoint {
  Model model;
  AdamState optimizer;
  TrainOptions train;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

std::vector<Ght1Tensor> params_to_tensors(const ModelParams& p, const std::string& prefix = "");
// Fills `p` (already shaped) from tensors; throws DataError on a missing
// tensor or shape mismatch.
void tensors_to_params(const std::vector<Ght1Tensor>& tensors, ModelParams& p,
                       const std::string& prefix = "");

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);
// Model only; skips the optimizer file.
Model load_model(const std::filesystem::path& dir);

}  // namespace groundhog

#endif  // GROUNDHOG_CHECKPOINT_H_
