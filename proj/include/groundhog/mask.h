#ifndef GROUNDHOG_MASK_H_
#define GROUNDHOG_MASK_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace groundhog {

// Row-major boolean raster.
class BinaryMask {
 public:
  BinaryMask() = default;
  // All-zero mask of the given size.
  BinaryMask(int height, int width);
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }
  bool at(int r, int c) const { return bits_[index(r, c)] != 0; }
  void set(int r, int c, bool v = true) { bits_[index(r, c)] = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::int64_t count() const;
  bool empty() const { return count() == 0; }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * width_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Row-major probability raster, every value in [0, 1].
class SoftMask {
 public:
  SoftMask() = default;
  SoftMask(int height, int width);
  SoftMask(int height, int width, std::vector<double> probs);
  static SoftMask from_binary(const BinaryMask& m);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return probs_.size(); }
  double at(int r, int c) const {
    return probs_[static_cast<std::size_t>(r) * width_ + c];
  }
  const std::vector<double>& probs() const { return probs_; }

  bool operator==(const SoftMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> probs_;
};

// Half-open pixel box [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 1;
  int y1 = 1;

  Box() = default;
  Box(int x0, int y0, int x1, int y1);

  std::int64_t area() const {
    return static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
  }
  bool contains(int r, int c) const {
    return c >= x0 && c < x1 && r >= y0 && r < y1;
  }
  bool operator==(const Box&) const = default;
};

// Smallest box enclosing all of `boxes`; throws InvalidArgument when empty.
Box enclosing_box(std::span<const Box> boxes);

// Alternating run lengths over the row-major raster; the first run counts
// zeros.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::int64_t> runs;

  bool operator==(const RleMask&) const = default;
};

enum class ProposalTag { kOracle, kDistractor };

std::string_view to_string(ProposalTag tag);
ProposalTag proposal_tag_from_string(std::string_view s);

// Ordered entity mask proposals sharing one raster size.
class ProposalSet {
 public:
  ProposalSet() = default;
  ProposalSet(std::vector<SoftMask> masks, std::vector<ProposalTag> tags);

  void add(SoftMask mask, ProposalTag tag);
  std::size_t size() const { return masks_.size(); }
  bool empty() const { return masks_.empty(); }
  const SoftMask& operator[](std::size_t i) const { return masks_[i]; }
  const std::vector<SoftMask>& masks() const { return masks_; }
  const std::vector<ProposalTag>& tags() const { return tags_; }
  int height() const { return masks_.empty() ? 0 : masks_[0].height(); }
  int width() const { return masks_.empty() ? 0 : masks_[0].width(); }

 private:
  std::vector<SoftMask> masks_;
  std::vector<ProposalTag> tags_;
};

using Pointer = std::variant<Box, BinaryMask>;

// |a & b| / |a | b|; two empty masks have IoU 1.
double iou_mask(const BinaryMask& a, const BinaryMask& b);
double iou_box(const Box& a, const Box& b);

// Tightest half-open box around the set pixels. Throws EmptyMaskError.
Box mask_to_box(const BinaryMask& m);

// Filled rasterization of `box`, clipped to the raster.
BinaryMask box_to_mask(const Box& box, int height, int width);

// Block area-average downsampling; dimensions must divide evenly.
SoftMask resize_mask(const BinaryMask& m, int grid_h, int grid_w);
SoftMask resize_mask(const SoftMask& m, int grid_h, int grid_w);

// Pixel-wise max of score-weighted proposals.
SoftMask merge_proposals(std::span<const double> scores,
                         const ProposalSet& proposals);

// merge_proposals plus, per pixel, the proposal attaining the max (lowest
// index on ties). Used to route gradients back to scores.
struct MergeResult {
  SoftMask merged;
  std::vector<int> argmax;
};
MergeResult merge_proposals_traced(std::span<const double> scores,
                                   const ProposalSet& proposals);

// Pixel set iff prob > tau.
BinaryMask binarize(const SoftMask& m, double tau = 0.5);

// Index of the proposal (binarized at 0.5) with the highest IoU against the
// pointer; lowest index on ties.
std::size_t best_match(const Pointer& pointer, const ProposalSet& proposals);

RleMask rle_encode(const BinaryMask& m);
BinaryMask rle_decode(const RleMask& r);

void to_json(nlohmann::json& j, const RleMask& r);
void from_json(const nlohmann::json& j, RleMask& r);
void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

}  // namespace groundhog

#endif  // GROUNDHOG_MASK_H_
