#ifndef GROUNDHOG_TRAINER_H_
#define GROUNDHOG_TRAINER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "groundhog/losses.h"
#include "groundhog/model.h"
#include "json.hpp"

namespace groundhog {

struct TrainOptions {
  int batch_size = 16;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::int64_t total_steps = 1000;
  LossWeights weights;
  // Worker threads for per-sample gradients; 0 picks up to 4 from the
  // hardware. Results do not depend on it.
  int threads = 0;

  bool operator==(const TrainOptions&) const = default;
};

void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

// lr * 0.5 * (1 + cos(pi * step / total)), step counted from 0.
double cosine_lr(double lr, std::int64_t step, std::int64_t total);

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static AdamState zeros(const ModelConfig& cfg);
};

// Reusable per-sample gradient buffers.
class GradWorkspace {
 public:
  std::vector<ModelParams>& buffers(const ModelConfig& cfg, std::size_t n);

 private:
  std::vector<ModelParams> buffers_;
};

// Gradient of the batch-mean total loss. Per-sample gradients are summed in
// batch order, so the result is identical for any thread count.
LossBundle batch_gradient(const Model& model, std::span<const PreparedSample* const> batch,
                          const TrainOptions& opts, ModelParams& grads,
                          GradWorkspace* workspace = nullptr);

// One AdamW update (decoupled decay on weight matrices and embeddings).
// Parameters are rounded to f32 afterwards. Throws NumericError if the loss
// or any gradient is non-finite.
LossBundle train_step(std::span<const PreparedSample* const> batch, Model& model,
                      AdamState& state, const TrainOptions& opts,
                      GradWorkspace* workspace = nullptr);

}  // namespace groundhog

#endif  // GROUNDHOG_TRAINER_H_
