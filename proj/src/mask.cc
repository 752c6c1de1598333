#include "groundhog/mask.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "groundhog/errors.h"

namespace groundhog {
namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw InvalidArgument("mask dimensions must be positive, got " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
}

void check_same_dims(int ha, int wa, int hb, int wb) {
  if (ha != hb || wa != wb) {
    throw DimensionError("mask dimension mismatch: " + std::to_string(ha) +
                         "x" + std::to_string(wa) + " vs " +
                         std::to_string(hb) + "x" + std::to_string(wb));
  }
}

template <typename Mask>
void check_divisible(const Mask& m, int grid_h, int grid_w) {
  if (grid_h < 1 || grid_w < 1 || grid_h > m.height() || grid_w > m.width() ||
      m.height() % grid_h != 0 || m.width() % grid_w != 0) {
    throw DimensionError("cannot block-resize " + std::to_string(m.height()) +
                         "x" + std::to_string(m.width()) + " to " +
                         std::to_string(grid_h) + "x" + std::to_string(grid_w));
  }
}

template <typename Mask, typename ValueAt>
SoftMask block_mean(const Mask& m, int grid_h, int grid_w, ValueAt value_at) {
  check_divisible(m, grid_h, grid_w);
  const int bh = m.height() / grid_h;
  const int bw = m.width() / grid_w;
  const double area = static_cast<double>(bh) * bw;
  std::vector<double> out(static_cast<std::size_t>(grid_h) * grid_w, 0.0);
  for (int gr = 0; gr < grid_h; ++gr) {
    for (int gc = 0; gc < grid_w; ++gc) {
      double sum = 0.0;
      for (int r = gr * bh; r < (gr + 1) * bh; ++r) {
        for (int c = gc * bw; c < (gc + 1) * bw; ++c) sum += value_at(r, c);
      }
      out[static_cast<std::size_t>(gr) * grid_w + gc] = sum / area;
    }
  }
  return SoftMask(grid_h, grid_w, std::move(out));
}

}  // namespace

BinaryMask::BinaryMask(int height, int width)
    : height_(height), width_(width) {
  check_dims(height, width);
  bits_.assign(static_cast<std::size_t>(height) * width, 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  check_dims(height, width);
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("BinaryMask bit count does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::int64_t BinaryMask::count() const {
  return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
}

SoftMask::SoftMask(int height, int width) : height_(height), width_(width) {
  check_dims(height, width);
  probs_.assign(static_cast<std::size_t>(height) * width, 0.0);
}

SoftMask::SoftMask(int height, int width, std::vector<double> probs)
    : height_(height), width_(width), probs_(std::move(probs)) {
  check_dims(height, width);
  if (probs_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("SoftMask value count does not match dimensions");
  }
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument("SoftMask values must lie in [0, 1]");
    }
  }
}

SoftMask SoftMask::from_binary(const BinaryMask& m) {
  std::vector<double> probs(m.bits().begin(), m.bits().end());
  return SoftMask(m.height(), m.width(), std::move(probs));
}

Box::Box(int x0_, int y0_, int x1_, int y1_)
    : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
  if (x0 < 0 || y0 < 0 || x1 <= x0 || y1 <= y0) {
    throw InvalidArgument("invalid box [" + std::to_string(x0) + "," +
                          std::to_string(y0) + "," + std::to_string(x1) + "," +
                          std::to_string(y1) + ")");
  }
}

Box enclosing_box(std::span<const Box> boxes) {
  if (boxes.empty()) throw InvalidArgument("enclosing_box of no boxes");
  Box out = boxes.front();
  for (const Box& b : boxes.subspan(1)) {
    out.x0 = std::min(out.x0, b.x0);
    out.y0 = std::min(out.y0, b.y0);
    out.x1 = std::max(out.x1, b.x1);
    out.y1 = std::max(out.y1, b.y1);
  }
  return out;
}

std::string_view to_string(ProposalTag tag) {
  return tag == ProposalTag::kOracle ? "oracle" : "distractor";
}

ProposalTag proposal_tag_from_string(std::string_view s) {
  if (s == "oracle") return ProposalTag::kOracle;
  if (s == "distractor") return ProposalTag::kDistractor;
  throw DataError("unknown proposal tag '" + std::string(s) + "'");
}

ProposalSet::ProposalSet(std::vector<SoftMask> masks,
                         std::vector<ProposalTag> tags) {
  if (masks.size() != tags.size()) {
    throw DimensionError("ProposalSet needs one tag per mask");
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    add(std::move(masks[i]), tags[i]);
  }
}

void ProposalSet::add(SoftMask mask, ProposalTag tag) {
  if (!masks_.empty()) {
    check_same_dims(height(), width(), mask.height(), mask.width());
  }
  masks_.push_back(std::move(mask));
  tags_.push_back(tag);
}

double iou_mask(const BinaryMask& a, const BinaryMask& b) {
  check_same_dims(a.height(), a.width(), b.height(), b.width());
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_box(const Box& a, const Box& b) {
  const std::int64_t iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const std::int64_t ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Box mask_to_box(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(r, c)) continue;
      x0 = std::min(x0, c);
      y0 = std::min(y0, r);
      x1 = std::max(x1, c);
      y1 = std::max(y1, r);
    }
  }
  if (x1 < 0) throw EmptyMaskError("mask_to_box on an empty mask");
  return Box(x0, y0, x1 + 1, y1 + 1);
}

BinaryMask box_to_mask(const Box& box, int height, int width) {
  BinaryMask m(height, width);
  for (int r = std::max(0, box.y0); r < std::min(height, box.y1); ++r) {
    for (int c = std::max(0, box.x0); c < std::min(width, box.x1); ++c) {
      m.set(r, c);
    }
  }
  return m;
}

SoftMask resize_mask(const BinaryMask& m, int grid_h, int grid_w) {
  return block_mean(m, grid_h, grid_w,
                    [&](int r, int c) { return m.at(r, c) ? 1.0 : 0.0; });
}

SoftMask resize_mask(const SoftMask& m, int grid_h, int grid_w) {
  return block_mean(m, grid_h, grid_w,
                    [&](int r, int c) { return m.at(r, c); });
}

MergeResult merge_proposals_traced(std::span<const double> scores,
                                   const ProposalSet& proposals) {
  if (proposals.empty()) throw InvalidArgument("merge of empty ProposalSet");
  if (scores.size() != proposals.size()) {
    throw DimensionError("merge_proposals: " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(proposals.size()) +
                         " proposals");
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw InvalidArgument("merge_proposals: score outside [0, 1]");
    }
  }
  const std::size_t n = proposals[0].size();
  std::vector<double> out(n, 0.0);
  std::vector<int> argmax(n, 0);
  const auto& first = proposals[0].probs();
  for (std::size_t i = 0; i < n; ++i) out[i] = scores[0] * first[i];
  for (std::size_t q = 1; q < proposals.size(); ++q) {
    const auto& probs = proposals[q].probs();
    const double s = scores[q];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = s * probs[i];
      if (v > out[i]) {
        out[i] = v;
        argmax[i] = static_cast<int>(q);
      }
    }
  }
  return {SoftMask(proposals.height(), proposals.width(), std::move(out)),
          std::move(argmax)};
}

SoftMask merge_proposals(std::span<const double> scores,
                         const ProposalSet& proposals) {
  return merge_proposals_traced(scores, proposals).merged;
}

BinaryMask binarize(const SoftMask& m, double tau) {
  std::vector<std::uint8_t> bits(m.size());
  const auto& probs = m.probs();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = probs[i] > tau;
  return BinaryMask(m.height(), m.width(), std::move(bits));
}

std::size_t best_match(const Pointer& pointer, const ProposalSet& proposals) {
  if (proposals.empty()) throw InvalidArgument("best_match: no proposals");
  const BinaryMask target = std::visit(
      [&](const auto& p) -> BinaryMask {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Box>) {
          return box_to_mask(p, proposals.height(), proposals.width());
        } else {
          return p;
        }
      },
      pointer);
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t q = 0; q < proposals.size(); ++q) {
    const double iou = iou_mask(target, binarize(proposals[q]));
    if (iou > best_iou) {
      best_iou = iou;
      best = q;
    }
  }
  return best;
}

RleMask rle_encode(const BinaryMask& m) {
  RleMask r{m.height(), m.width(), {}};
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (std::uint8_t b : m.bits()) {
    if (b != current) {
      r.runs.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  r.runs.push_back(run);
  return r;
}

BinaryMask rle_decode(const RleMask& r) {
  check_dims(r.height, r.width);
  const std::int64_t total = static_cast<std::int64_t>(r.height) * r.width;
  std::int64_t sum = 0;
  for (std::int64_t run : r.runs) {
    if (run < 0) throw DataError("RLE run lengths must be non-negative");
    sum += run;
  }
  if (sum != total) {
    throw DataError("RLE runs sum to " + std::to_string(sum) + ", expected " +
                    std::to_string(total));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(total));
  std::uint8_t value = 0;
  for (std::int64_t run : r.runs) {
    bits.insert(bits.end(), static_cast<std::size_t>(run), value);
    value ^= 1;
  }
  return BinaryMask(r.height, r.width, std::move(bits));
}

void to_json(nlohmann::json& j, const RleMask& r) {
  j = nlohmann::json{{"h", r.height}, {"w", r.width}, {"runs", r.runs}};
}

void from_json(const nlohmann::json& j, RleMask& r) {
  if (!j.is_object() || !j.contains("h") || !j.contains("w") ||
      !j.contains("runs")) {
    throw DataError("RLE object needs h, w and runs");
  }
  r.height = j.at("h").get<int>();
  r.width = j.at("w").get<int>();
  r.runs = j.at("runs").get<std::vector<std::int64_t>>();
}

void to_json(nlohmann::json& j, const Box& b) {
  j = nlohmann::json::array({b.x0, b.y0, b.x1, b.y1});
}

void from_json(const nlohmann::json& j, Box& b) {
  if (!j.is_array() || j.size() != 4) {
    throw DataError("box must be [x0, y0, x1, y1]");
  }
  b = Box(j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>());
}

}  // namespace groundhog
