#include <vector>

#include "doctest.h"
#include "groundhog/errors.h"
#include "groundhog/features.h"
#include "groundhog/grounding.h"
#include "groundhog/rng.h"

namespace groundhog {
namespace {

MlpParams random_mlp(int in, int hidden, int out, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p = MlpParams::zeros(in, hidden, out);
  for (Mat* m : {&p.w1, &p.b1, &p.w2, &p.b2})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-0.5, 0.5);
  return p;
}

}  // namespace

TEST_CASE("mask_pool") {
  FeatureMap constant(2, 2, 2, std::vector<double>(8, 3.5));
  const FeatureVector v = mask_pool(constant, SoftMask(2, 2, {0.1, 0.0, 0.7, 0.2}));
  CHECK(v(0) == doctest::Approx(3.5));
  CHECK(v(1) == doctest::Approx(3.5));

  FeatureMap grid(1, 2, 2, {1, 2, 3, 4});
  CHECK(mask_pool(grid, SoftMask(2, 2, {0, 0, 1, 0}))(0) == 3.0);
  FeatureMap pair(1, 1, 2, {2, 4});
  CHECK(mask_pool(pair, SoftMask(1, 2, {0.5, 0.5}))(0) == doctest::Approx(3.0));
  CHECK(mask_pool(grid, SoftMask(2, 2, {0.2, 0.4, 0, 0}))(0) ==
        doctest::Approx(mask_pool(grid, SoftMask(2, 2, {0.1, 0.2, 0, 0}))(0)));
  CHECK_THROWS_AS(mask_pool(grid, SoftMask(2, 2)), EmptyMaskError);
  CHECK_THROWS_AS(mask_pool(grid, SoftMask(1, 2, {1, 1})), DimensionError);
}

TEST_CASE("project") {
  const MlpParams zero = MlpParams::zeros(3, 6, 4);
  FeatureVector v(3);
  v << 1, -2, 3;
  CHECK(project(v, zero).isZero());
  CHECK(project(v, zero).size() == 4);

  MlpParams id = MlpParams::zeros(3, 3, 3);
  id.w1.setIdentity();
  id.w2.setIdentity();
  FeatureVector pos(3);
  pos << 0.5, 1.0, 2.0;
  const FeatureVector out = project(pos, id);
  for (int i = 0; i < 3; ++i) CHECK(out(i) == doctest::Approx(gelu(pos(i))));
  CHECK_THROWS_AS(project(FeatureVector::Zero(2), id), DimensionError);
}

TEST_CASE("entity_tokens") {
  FeatureMap a(2, 2, 2, {1, 0, 0, 1, 0, 1, 1, 0});
  ProposalSet props;
  BinaryMask m1(4, 4), m2(4, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) m1.set(r, c);
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m2.set(r, c);
  props.add(SoftMask::from_binary(m1), ProposalTag::kOracle);
  props.add(SoftMask::from_binary(m2), ProposalTag::kOracle);

  const MlpParams proj = random_mlp(2, 4, 3, 1);
  const std::vector<FeatureMap> one = {a};
  const std::vector<MlpParams> one_p = {proj};
  const auto t1 = entity_tokens(one, props, one_p);
  REQUIRE(t1.size() == 2);
  CHECK(t1[1].proposal_index == 1);
  CHECK(t1[0].vector.isApprox(project(mask_pool(a, resize_mask(m1, 2, 2)), proj)));

  const std::vector<FeatureMap> two = {a, a};
  const std::vector<MlpParams> two_p = {proj, proj};
  const auto t2 = entity_tokens(two, props, two_p);
  for (int q = 0; q < 2; ++q) CHECK(t2[q].vector.isApprox(2.0 * t1[q].vector));

  ProposalSet swapped;
  swapped.add(props[1], ProposalTag::kOracle);
  swapped.add(props[0], ProposalTag::kOracle);
  const auto ts = entity_tokens(one, swapped, one_p);
  CHECK(ts[0].vector == t1[1].vector);
  CHECK(ts[1].vector == t1[0].vector);
  CHECK_THROWS_AS(entity_tokens(two, props, one_p), DimensionError);
}

TEST_CASE("grounding_query") {
  RowVec a(2), b(2);
  a << 1, 2;
  b << 3, 4;
  CHECK(grounding_query(a, b) == RowVec{{4.0, 6.0}});
  CHECK(grounding_query(a, b) == grounding_query(b, a));
  CHECK(grounding_query(RowVec::Zero(2), b) == b);
  CHECK(grounding_query(a, b, QueryMode::kStartOnly) == a);
  CHECK(grounding_query(a, b, QueryMode::kEndOnly) == b);
  CHECK_THROWS_AS(grounding_query(a, RowVec::Zero(3)), DimensionError);
}

TEST_CASE("score_entities") {
  const MlpParams zero = MlpParams::zeros(4, 4, 1);
  RowVec q(2);
  q << 0.3, -0.2;
  Mat ents(3, 2);
  ents << 1, 2, 1, 2, -1, 0;
  for (double s : score_entities(q, ents, zero)) CHECK(s == 0.5);

  const MlpParams head = random_mlp(4, 4, 1, 7);
  const auto s = score_entities(q, ents, head);
  CHECK(s[0] == s[1]);

  // Hand-evaluated reference: sigmoid(w2 . gelu([q, e] W1 + b1) + b2).
  for (int e = 0; e < 3; ++e) {
    double out = head.b2(0, 0);
    for (int j = 0; j < 4; ++j) {
      double pre = head.b1(0, j);
      pre += q(0) * head.w1(0, j) + q(1) * head.w1(1, j);
      pre += ents(e, 0) * head.w1(2, j) + ents(e, 1) * head.w1(3, j);
      out += gelu(pre) * head.w2(j, 0);
    }
    CHECK(s[e] == doctest::Approx(1.0 / (1.0 + std::exp(-out))).epsilon(1e-12));
    CHECK(s[e] > 0.0);
    CHECK(s[e] < 1.0);
  }
  CHECK_THROWS_AS(score_entities(q, Mat(0, 2), head), InvalidArgument);
}

TEST_CASE("ground_phrase") {
  BinaryMask m1(4, 4), m2(4, 4);
  m1.set(0, 0);
  m1.set(0, 1);
  m2.set(3, 3);
  ProposalSet props({SoftMask::from_binary(m1), SoftMask::from_binary(m2)},
                    {ProposalTag::kOracle, ProposalTag::kOracle});
  MlpParams head = MlpParams::zeros(4, 4, 1);
  RowVec q = RowVec::Zero(2);
  Mat ents(2, 2);
  ents << 1, 0, 0, 1;
  // Score driven entirely by the first entity coordinate.
  head.w1(2, 0) = 1.0;
  head.w2(0, 0) = 40.0;
  head.b2(0, 0) = -20.0;
  const GroundingResult r = ground_phrase(q, ents, head, props);
  CHECK(r.selected == std::vector<std::size_t>{0});
  CHECK(r.merged == merge_proposals(r.scores, props));
  CHECK(binarize(r.merged) == m1);

  Mat swapped(2, 2);
  swapped << 0, 1, 1, 0;
  ProposalSet sprops({props[1], props[0]}, {ProposalTag::kOracle, ProposalTag::kOracle});
  const GroundingResult rs = ground_phrase(q, swapped, head, sprops);
  CHECK(rs.scores[0] == r.scores[1]);
  CHECK(rs.merged == r.merged);

  head.b2(0, 0) = 20.0;
  head.w2(0, 0) = 0.0;
  CHECK(ground_phrase(q, ents, head, props).selected.size() == 2);
}

}  // namespace groundhog
