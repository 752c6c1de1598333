#ifndef GROUNDHOG_METRICS_H_
#define GROUNDHOG_METRICS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "groundhog/mask.h"
#include "json.hpp"

namespace groundhog {

// (prediction, ground truth)
using MaskPair = std::pair<BinaryMask, BinaryMask>;

// Sum of intersections over sum of unions. A dataset whose every pair is
// empty/empty scores 1.
double ciou(std::span<const MaskPair> pairs);
// Mean per-pair IoU, empty/empty counting 1.
double miou(std::span<const MaskPair> pairs);
// Mean over gt masks of the best IoU among the binarized proposals.
double any_iou(std::span<const BinaryMask> gt_masks, const ProposalSet& proposals);
// Predicted mask -> box vs the enclosing box of the gt boxes; hit iff
// IoU >= 0.5. Empty predictions miss.
double box_recall_at1_merged(std::span<const BinaryMask> preds,
                             std::span<const std::vector<Box>> gt_boxes);
// Fraction of pairs with IoU >= tau.
double recall_at_iou(std::span<const MaskPair> pairs, double tau);

struct PredictedPhrase {
  std::int64_t sample_id = 0;
  std::string text;
  std::vector<Box> selected_boxes;
};

struct GtPhrase {
  std::int64_t sample_id = 0;
  std::string text;
  std::vector<Box> boxes;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Lowercase, single spaces, no surrounding whitespace or trailing . , ? ! :
std::string normalize_phrase(std::string_view text);

// A prediction is a true positive when it matches a not-yet-matched gt
// phrase of the same sample by normalized text and one of its selected
// boxes has IoU >= 0.5 with one of that phrase's boxes.
PrecisionRecall grounding_f1(std::span<const PredictedPhrase> preds,
                             std::span<const GtPhrase> gts);

struct BinaryQaMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double yes_ratio = 0.0;
};

// "yes" (true) is the positive class.
BinaryQaMetrics binary_qa_metrics(const std::vector<bool>& preds, const std::vector<bool>& gts);

struct MetricReport {
  std::string name;
  std::map<std::string, double> values;
  std::size_t count = 0;
  std::vector<double> per_sample;
};

void to_json(nlohmann::json& j, const MetricReport& r);

}  // namespace groundhog

#endif  // GROUNDHOG_METRICS_H_
