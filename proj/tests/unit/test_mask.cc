#include <algorithm>
#include <random>
#include <vector>

#include "doctest.h"
#include "groundhog/errors.h"
#include "groundhog/mask.h"

namespace groundhog {
namespace {

BinaryMask from_rows(const std::vector<std::vector<int>>& rows) {
  BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) m.set(r, c, rows[r][c] != 0);
  return m;
}

BinaryMask random_mask(std::mt19937_64& gen, int h, int w, double p) {
  std::bernoulli_distribution bit(p);
  BinaryMask m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m.set(r, c, bit(gen));
  return m;
}

}  // namespace

TEST_CASE("iou_mask") {
  const BinaryMask a = from_rows({{1, 1}, {0, 0}});
  const BinaryMask b = from_rows({{0, 1}, {0, 1}});
  CHECK(iou_mask(a, a) == 1.0);
  CHECK(iou_mask(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(iou_mask(a, b) == iou_mask(b, a));
  CHECK(iou_mask(from_rows({{1, 0}}), from_rows({{0, 1}})) == 0.0);
  CHECK(iou_mask(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK_THROWS_AS(iou_mask(BinaryMask(2, 2), BinaryMask(2, 3)), DimensionError);
}

TEST_CASE("iou_box") {
  CHECK(iou_box({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou_box({0, 0, 2, 2}, {2, 2, 4, 4}) == 0.0);
  CHECK(iou_box({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(Box(2, 0, 2, 1), InvalidArgument);
  CHECK_THROWS_AS(Box(-1, 0, 2, 1), InvalidArgument);
}

TEST_CASE("mask_to_box") {
  BinaryMask m(4, 4);
  m.set(1, 2);
  CHECK(mask_to_box(m) == Box(2, 1, 3, 2));
  BinaryMask full(3, 5, std::vector<std::uint8_t>(15, 1));
  CHECK(mask_to_box(full) == Box(0, 0, 5, 3));
  BinaryMask two(4, 4);
  two.set(0, 0);
  two.set(2, 3);
  CHECK(mask_to_box(two) == Box(0, 0, 4, 3));
  CHECK_THROWS_AS(mask_to_box(BinaryMask(2, 2)), EmptyMaskError);

  std::mt19937_64 gen(11);
  for (int t = 0; t < 50; ++t) {
    BinaryMask r = random_mask(gen, 9, 7, 0.15);
    if (r.empty()) continue;
    const Box b = mask_to_box(r);
    bool top = false, bottom = false, left = false, right = false;
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x) {
        if (!r.at(y, x)) continue;
        CHECK(b.contains(y, x));
        top |= y == b.y0;
        bottom |= y == b.y1 - 1;
        left |= x == b.x0;
        right |= x == b.x1 - 1;
      }
    }
    CHECK((top && bottom && left && right));
  }
}

TEST_CASE("box_to_mask clips to the raster") {
  const BinaryMask m = box_to_mask({1, 1, 6, 3}, 4, 4);
  CHECK(m.count() == 6);
  CHECK(m.at(1, 1));
  CHECK_FALSE(m.at(3, 1));
}

TEST_CASE("resize_mask") {
  BinaryMask ones(4, 4, std::vector<std::uint8_t>(16, 1));
  CHECK(resize_mask(ones, 2, 2).probs() == std::vector<double>(4, 1.0));
  BinaryMask corner(4, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) corner.set(r, c);
  CHECK(resize_mask(corner, 2, 2).probs() == std::vector<double>{1, 0, 0, 0});
  BinaryMask half(4, 4);
  half.set(0, 0);
  half.set(1, 0);
  CHECK(resize_mask(half, 2, 2).at(0, 0) == 0.5);
  CHECK_THROWS_AS(resize_mask(ones, 3, 2), DimensionError);

  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask m = random_mask(gen, 32, 32, 0.3);
    const SoftMask s = resize_mask(m, 8, 8);
    double in = static_cast<double>(m.count()) / 1024.0, out = 0.0;
    for (double v : s.probs()) out += v;
    CHECK(out / 64.0 == doctest::Approx(in).epsilon(1e-12));
  }
}

TEST_CASE("merge_proposals") {
  const BinaryMask p1 = from_rows({{1, 0}, {0, 0}});
  const BinaryMask p2 = from_rows({{1, 1}, {0, 0}});
  ProposalSet set({SoftMask::from_binary(p1), SoftMask::from_binary(p2)},
                  {ProposalTag::kOracle, ProposalTag::kDistractor});
  const std::vector<double> s = {0.8, 0.5};
  CHECK(merge_proposals(s, set).probs() == std::vector<double>{0.8, 0.5, 0.0, 0.0});
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(merge_proposals(zero, set).probs() == std::vector<double>(4, 0.0));

  ProposalSet one({SoftMask::from_binary(p2)}, {ProposalTag::kOracle});
  const std::vector<double> full = {1.0};
  CHECK(merge_proposals(full, one) == SoftMask::from_binary(p2));

  const std::vector<double> bad_len = {0.5};
  CHECK_THROWS_AS(merge_proposals(bad_len, set), DimensionError);
  const std::vector<double> bad_range = {1.5, 0.0};
  CHECK_THROWS_AS(merge_proposals(bad_range, set), InvalidArgument);

  const MergeResult tr = merge_proposals_traced(s, set);
  CHECK(tr.merged == merge_proposals(s, set));
  CHECK(tr.argmax[0] == 0);
  CHECK(tr.argmax[1] == 1);
}

TEST_CASE("merge_proposals properties") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    ProposalSet set;
    std::vector<double> scores;
    for (int q = 0; q < 4; ++q) {
      std::vector<double> probs(36);
      for (double& v : probs) v = u(gen) < 0.5 ? 0.0 : u(gen);
      set.add(SoftMask(6, 6, probs), ProposalTag::kOracle);
      scores.push_back(u(gen));
    }
    const SoftMask m = merge_proposals(scores, set);
    for (std::size_t i = 0; i < m.size(); ++i) {
      double top = 0.0;
      for (std::size_t q = 0; q < set.size(); ++q) top = std::max(top, set[q].probs()[i]);
      CHECK(m.probs()[i] >= 0.0);
      CHECK(m.probs()[i] <= top);
    }
    std::vector<double> raised = scores;
    raised[t % 4] = std::min(1.0, raised[t % 4] + 0.3);
    const SoftMask m2 = merge_proposals(raised, set);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m2.probs()[i] >= m.probs()[i]);

    ProposalSet rev;
    std::vector<double> rev_scores;
    for (int q = 3; q >= 0; --q) {
      rev.add(set[q], ProposalTag::kOracle);
      rev_scores.push_back(scores[q]);
    }
    CHECK(merge_proposals(rev_scores, rev) == m);
  }
}

TEST_CASE("binarize") {
  CHECK(binarize(SoftMask(2, 2)).empty());
  const BinaryMask b = binarize(SoftMask(1, 3, {0.4, 0.6, 0.5}));
  CHECK_FALSE(b.at(0, 0));
  CHECK(b.at(0, 1));
  CHECK_FALSE(b.at(0, 2));
}

TEST_CASE("best_match") {
  BinaryMask gt(8, 8);
  for (int r = 2; r < 5; ++r)
    for (int c = 2; c < 5; ++c) gt.set(r, c);
  BinaryMask shifted(8, 8);
  for (int r = 2; r < 5; ++r)
    for (int c = 4; c < 7; ++c) shifted.set(r, c);
  ProposalSet set;
  set.add(SoftMask::from_binary(shifted), ProposalTag::kDistractor);
  set.add(SoftMask::from_binary(gt), ProposalTag::kOracle);
  CHECK(best_match(Pointer{gt}, set) == 1);

  ProposalSet dup;
  dup.add(SoftMask::from_binary(gt), ProposalTag::kOracle);
  dup.add(SoftMask::from_binary(gt), ProposalTag::kOracle);
  CHECK(best_match(Pointer{gt}, dup) == 0);
  CHECK(best_match(Pointer{Box(2, 2, 5, 5)}, set) == 1);
  CHECK_THROWS_AS(best_match(Pointer{gt}, ProposalSet{}), InvalidArgument);
}

TEST_CASE("rle") {
  CHECK(rle_encode(BinaryMask(2, 2)).runs == std::vector<std::int64_t>{4});
  CHECK(rle_encode(BinaryMask(2, 2, {1, 1, 1, 1})).runs == std::vector<std::int64_t>{0, 4});
  std::mt19937_64 gen(9);
  for (int t = 0; t < 100; ++t) {
    const BinaryMask m = random_mask(gen, 1 + t % 7, 1 + t % 5, 0.4);
    const RleMask r = rle_encode(m);
    CHECK(rle_decode(r) == m);
    for (std::size_t i = 1; i < r.runs.size(); ++i) CHECK(r.runs[i] > 0);
    nlohmann::json j = r;
    CHECK(j.at("h") == m.height());
    CHECK(j.get<RleMask>() == r);
  }
  CHECK_THROWS_AS(rle_decode(RleMask{2, 2, {3}}), DataError);
}

}  // namespace groundhog
