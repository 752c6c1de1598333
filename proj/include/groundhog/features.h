#ifndef GROUNDHOG_FEATURES_H_
#define GROUNDHOG_FEATURES_H_

#include <span>
#include <string_view>
#include <vector>

#include "groundhog/mask.h"
#include "groundhog/nn.h"

namespace groundhog {

// channels x grid_h x grid_w feature grid, channel-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int grid_h, int grid_w);
  FeatureMap(int channels, int grid_h, int grid_w, std::vector<double> data);

  int channels() const { return channels_; }
  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }
  double at(int c, int h, int w) const { return data_[offset(c, h, w)]; }
  double& at(int c, int h, int w) { return data_[offset(c, h, w)]; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t offset(int c, int h, int w) const {
    return (static_cast<std::size_t>(c) * grid_h_ + h) * grid_w_ + w;
  }

  int channels_ = 0;
  int grid_h_ = 0;
  int grid_w_ = 0;
  std::vector<double> data_;
};

using FeatureVector = RowVec;

struct EntityToken {
  FeatureVector vector;
  std::size_t proposal_index = 0;
};

// Which synthetic backbones contribute to entity tokens.
enum class FeatureSource { kA, kB, kAB };

std::string_view to_string(FeatureSource s);
FeatureSource feature_source_from_string(std::string_view s);
bool uses_backbone(FeatureSource s, int backbone);

// Mask-weighted channel average; throws EmptyMaskError on zero total weight.
FeatureVector mask_pool(const FeatureMap& fmap, const SoftMask& mask);

FeatureVector project(const FeatureVector& v, const MlpParams& params);

// Pooled features of every proposal for one backbone, one row per proposal.
// Masks are block-resized to the feature grid first.
Mat pool_proposals(const FeatureMap& fmap, const ProposalSet& proposals);

// token_q = sum over backbones b of project(mask_pool(fmap_b, mask_q), proj_b)
std::vector<EntityToken> entity_tokens(std::span<const FeatureMap> fmaps,
                                       const ProposalSet& proposals,
                                       std::span<const MlpParams> projections);

}  // namespace groundhog

#endif  // GROUNDHOG_FEATURES_H_
