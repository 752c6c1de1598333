#include "groundhog/metrics.h"

#include <algorithm>
#include <cctype>

#include "groundhog/errors.h"

namespace groundhog {

namespace {

struct Overlap {
  std::int64_t inter = 0;
  std::int64_t uni = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("mask pair sizes differ");
  Overlap o;
  const auto& x = a.bits();
  const auto& y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    o.inter += (x[i] && y[i]) ? 1 : 0;
    o.uni += (x[i] || y[i]) ? 1 : 0;
  }
  return o;
}

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw InvalidArgument(std::string(what) + ": empty input");
}

}  // namespace

double ciou(std::span<const MaskPair> pairs) {
  require_nonempty(pairs.size(), "ciou");
  std::int64_t inter = 0, uni = 0;
  for (const auto& [p, g] : pairs) {
    const Overlap o = overlap(p, g);
    inter += o.inter;
    uni += o.uni;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double miou(std::span<const MaskPair> pairs) {
  require_nonempty(pairs.size(), "miou");
  double sum = 0.0;
  for (const auto& [p, g] : pairs) sum += iou_mask(p, g);
  return sum / static_cast<double>(pairs.size());
}

double any_iou(std::span<const BinaryMask> gt_masks, const ProposalSet& proposals) {
  require_nonempty(gt_masks.size(), "any_iou");
  if (proposals.empty()) throw InvalidArgument("any_iou: no proposals");
  std::vector<BinaryMask> bins;
  for (const auto& m : proposals.masks()) bins.push_back(binarize(m));
  double sum = 0.0;
  for (const auto& g : gt_masks) {
    double best = 0.0;
    for (const auto& b : bins) best = std::max(best, iou_mask(b, g));
    sum += best;
  }
  return sum / static_cast<double>(gt_masks.size());
}

double box_recall_at1_merged(std::span<const BinaryMask> preds,
                             std::span<const std::vector<Box>> gt_boxes) {
  require_nonempty(preds.size(), "box_recall_at1_merged");
  if (preds.size() != gt_boxes.size())
    throw InvalidArgument("box_recall_at1_merged: prediction/gt count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gt_boxes[i].empty()) throw InvalidArgument("box_recall_at1_merged: phrase without gt box");
    if (preds[i].empty()) continue;
    if (iou_box(mask_to_box(preds[i]), enclosing_box(gt_boxes[i])) >= 0.5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double recall_at_iou(std::span<const MaskPair> pairs, double tau) {
  require_nonempty(pairs.size(), "recall_at_iou");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("recall_at_iou: tau must be in (0, 1)");
  std::size_t hits = 0;
  for (const auto& [p, g] : pairs)
    if (iou_mask(p, g) >= tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

std::string normalize_phrase(std::string_view text) {
  std::string out;
  bool space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  while (!out.empty() && std::string_view(".,?!: ").find(out.back()) != std::string_view::npos)
    out.pop_back();
  return out;
}

PrecisionRecall grounding_f1(std::span<const PredictedPhrase> preds,
                             std::span<const GtPhrase> gts) {
  std::vector<std::string> gt_text;
  for (const auto& g : gts) gt_text.push_back(normalize_phrase(g.text));
  std::vector<char> matched(gts.size(), 0);
  std::size_t tp = 0;
  for (const auto& p : preds) {
    const std::string text = normalize_phrase(p.text);
    for (std::size_t k = 0; k < gts.size(); ++k) {
      if (matched[k] || gts[k].sample_id != p.sample_id || gt_text[k] != text) continue;
      bool hit = false;
      for (const Box& a : p.selected_boxes)
        for (const Box& b : gts[k].boxes) hit = hit || iou_box(a, b) >= 0.5;
      if (!hit) continue;
      matched[k] = 1;
      ++tp;
      break;
    }
  }
  PrecisionRecall out;
  if (!preds.empty()) out.precision = static_cast<double>(tp) / static_cast<double>(preds.size());
  if (!gts.empty()) out.recall = static_cast<double>(tp) / static_cast<double>(gts.size());
  if (out.precision + out.recall > 0.0)
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

BinaryQaMetrics binary_qa_metrics(const std::vector<bool>& preds, const std::vector<bool>& gts) {
  if (preds.size() != gts.size()) throw InvalidArgument("binary_qa_metrics: length mismatch");
  require_nonempty(preds.size(), "binary_qa_metrics");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && gts[i]) ++tp;
    else if (preds[i]) ++fp;
    else if (gts[i]) ++fn;
    else ++tn;
  }
  const double n = static_cast<double>(preds.size());
  BinaryQaMetrics m;
  m.accuracy = static_cast<double>(tp + tn) / n;
  if (tp + fp) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.yes_ratio = static_cast<double>(tp + fp) / n;
  return m;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"metric", r.name}, {"values", r.values}, {"count", r.count}};
  if (!r.per_sample.empty()) j["per_sample"] = r.per_sample;
}

}  // namespace groundhog
