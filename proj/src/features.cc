#include "groundhog/features.h"

#include <cmath>
#include <string>

#include "groundhog/errors.h"

namespace groundhog {

FeatureMap::FeatureMap(int channels, int grid_h, int grid_w)
    : FeatureMap(channels, grid_h, grid_w,
                 std::vector<double>(static_cast<std::size_t>(channels) *
                                         std::max(grid_h, 0) *
                                         std::max(grid_w, 0),
                                     0.0)) {}

FeatureMap::FeatureMap(int channels, int grid_h, int grid_w,
                       std::vector<double> data)
    : channels_(channels), grid_h_(grid_h), grid_w_(grid_w),
      data_(std::move(data)) {
  if (channels < 1 || grid_h < 1 || grid_w < 1) {
    throw InvalidArgument("FeatureMap dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(channels) * grid_h * grid_w) {
    throw DimensionError("FeatureMap data length does not match dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidArgument("FeatureMap values must be finite");
  }
}

std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::kA: return "A";
    case FeatureSource::kB: return "B";
    case FeatureSource::kAB: return "A+B";
  }
  return "A+B";
}

FeatureSource feature_source_from_string(std::string_view s) {
  if (s == "A") return FeatureSource::kA;
  if (s == "B") return FeatureSource::kB;
  if (s == "A+B" || s == "AB") return FeatureSource::kAB;
  throw InvalidArgument("unknown feature source '" + std::string(s) + "'");
}

bool uses_backbone(FeatureSource s, int backbone) {
  if (s == FeatureSource::kAB) return true;
  return backbone == (s == FeatureSource::kA ? 0 : 1);
}

FeatureVector mask_pool(const FeatureMap& fmap, const SoftMask& mask) {
  if (mask.height() != fmap.grid_h() || mask.width() != fmap.grid_w()) {
    throw DimensionError("mask_pool: mask is " + std::to_string(mask.height()) +
                         "x" + std::to_string(mask.width()) + ", grid is " +
                         std::to_string(fmap.grid_h()) + "x" +
                         std::to_string(fmap.grid_w()));
  }
  double total = 0.0;
  for (double m : mask.probs()) total += m;
  if (!(total > 0.0)) throw EmptyMaskError("mask_pool: all-zero mask");
  FeatureVector out = FeatureVector::Zero(fmap.channels());
  for (int c = 0; c < fmap.channels(); ++c) {
    double acc = 0.0;
    for (int h = 0; h < fmap.grid_h(); ++h) {
      for (int w = 0; w < fmap.grid_w(); ++w) {
        acc += mask.at(h, w) * fmap.at(c, h, w);
      }
    }
    out(c) = acc / total;
  }
  return out;
}

FeatureVector project(const FeatureVector& v, const MlpParams& params) {
  return mlp_forward(params, v);
}

Mat pool_proposals(const FeatureMap& fmap, const ProposalSet& proposals) {
  Mat out(static_cast<Eigen::Index>(proposals.size()), fmap.channels());
  for (std::size_t q = 0; q < proposals.size(); ++q) {
    const SoftMask grid =
        resize_mask(proposals[q], fmap.grid_h(), fmap.grid_w());
    out.row(static_cast<Eigen::Index>(q)) = mask_pool(fmap, grid);
  }
  return out;
}

std::vector<EntityToken> entity_tokens(std::span<const FeatureMap> fmaps,
                                       const ProposalSet& proposals,
                                       std::span<const MlpParams> projections) {
  if (fmaps.size() != projections.size()) {
    throw DimensionError("entity_tokens: one projection per backbone required");
  }
  if (fmaps.empty()) throw InvalidArgument("entity_tokens: no backbones");
  Mat sum;
  for (std::size_t b = 0; b < fmaps.size(); ++b) {
    Mat tokens = mlp_forward(projections[b], pool_proposals(fmaps[b], proposals));
    if (b == 0) {
      sum = std::move(tokens);
    } else {
      if (tokens.cols() != sum.cols()) {
        throw DimensionError("entity_tokens: projections disagree on output dim");
      }
      sum += tokens;
    }
  }
  std::vector<EntityToken> out;
  out.reserve(proposals.size());
  for (std::size_t q = 0; q < proposals.size(); ++q) {
    out.push_back({sum.row(static_cast<Eigen::Index>(q)), q});
  }
  return out;
}

}  // namespace groundhog
