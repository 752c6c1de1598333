#ifndef GROUNDHOG_LOSSES_H_
#define GROUNDHOG_LOSSES_H_

#include <optional>
#include <span>
#include <vector>

#include "groundhog/mask.h"
#include "json.hpp"

namespace groundhog {

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kBceClamp = 1e-7;

// A scalar loss and its gradient w.r.t. each predicted pixel probability.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)
LossValue dice_loss(const SoftMask& pred, const BinaryMask& gt);

// Pixel-mean binary cross-entropy with predictions clamped to
// [1e-7, 1 - 1e-7]; zero gradient where the clamp is active.
LossValue bce_loss(const SoftMask& pred, const BinaryMask& gt);

// Mean of the 1D dice losses between the column/row max projections of
// `pred` and the box indicator vectors. The gradient of each max goes to the
// first maximal pixel.
LossValue projection_loss(const SoftMask& pred, const Box& gt);
// Multi-box variant: indicators are the union of the boxes' extents. An
// empty list means "no target" (all-zero indicators).
LossValue projection_loss(const SoftMask& pred, std::span<const Box> gt);

// Dice between a vector and a {0,1} target, with gradient.
LossValue dice_loss_1d(std::span<const double> pred,
                       std::span<const double> target);

struct LossWeights {
  double lm = 1.0;
  double dice = 1.0;
  double bce = 0.1;
  double proj = 1.0;

  bool operator==(const LossWeights&) const = default;
};

// Grounding losses of one phrase: dice+bce under mask supervision, proj under
// box supervision, nothing for unsupervised spans.
struct PhraseLoss {
  std::optional<double> dice;
  std::optional<double> bce;
  std::optional<double> proj;
};

struct LossBundle {
  double lm = 0.0;
  double dice = 0.0;
  double bce = 0.0;
  double proj = 0.0;
  double total = 0.0;
  LossWeights weights;
};

// Components are averaged over the phrases that carry them, then weighted.
LossBundle total_loss(double lm, std::span<const PhraseLoss> phrases,
                      const LossWeights& weights = {});

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const LossBundle& b);

}  // namespace groundhog

#endif  // GROUNDHOG_LOSSES_H_
