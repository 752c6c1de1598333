#include "groundhog/grounding.h"

#include <string>

#include "groundhog/errors.h"

namespace groundhog {

std::string_view to_string(QueryMode m) {
  switch (m) {
    case QueryMode::kStartOnly: return "start_only";
    case QueryMode::kEndOnly: return "end_only";
    case QueryMode::kSum: return "sum";
  }
  return "sum";
}

QueryMode query_mode_from_string(std::string_view s) {
  if (s == "start_only") return QueryMode::kStartOnly;
  if (s == "end_only") return QueryMode::kEndOnly;
  if (s == "sum") return QueryMode::kSum;
  throw InvalidArgument("unknown grounding-query mode '" + std::string(s) + "'");
}

GroundingQuery grounding_query(const RowVec& h_start, const RowVec& h_end,
                               QueryMode mode) {
  if (h_start.size() != h_end.size()) {
    throw DimensionError("grounding_query: hidden sizes differ");
  }
  switch (mode) {
    case QueryMode::kStartOnly: return h_start;
    case QueryMode::kEndOnly: return h_end;
    case QueryMode::kSum: return h_start + h_end;
  }
  return h_start + h_end;
}

std::vector<double> score_entities(const GroundingQuery& query,
                                   const Mat& entity_hiddens,
                                   const MlpParams& head, ScoreCache* cache) {
  if (entity_hiddens.rows() == 0) {
    throw InvalidArgument("score_entities: no entities");
  }
  if (entity_hiddens.cols() != query.size() ||
      head.in_dim() != 2 * query.size() || head.out_dim() != 1) {
    throw DimensionError("score_entities: query/entity/head sizes disagree");
  }
  const Eigen::Index n = entity_hiddens.rows();
  const Eigen::Index d = query.size();
  Mat joint(n, 2 * d);
  joint.leftCols(d) = query.replicate(n, 1);
  joint.rightCols(d) = entity_hiddens;
  MlpCache local;
  const Mat logits = mlp_forward(head, joint, cache ? &cache->mlp : &local);
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) scores[e] = sigmoid(logits(e, 0));
  if (cache != nullptr) cache->scores = scores;
  return scores;
}

std::vector<double> score_entities(const GroundingQuery& query,
                                   const Mat& entity_hiddens,
                                   const MlpParams& head) {
  return score_entities(query, entity_hiddens, head, nullptr);
}

ScoreBackward score_entities_backward(const MlpParams& head,
                                      const ScoreCache& cache,
                                      const std::vector<double>& dscores,
                                      MlpParams& head_grads) {
  const auto n = static_cast<Eigen::Index>(cache.scores.size());
  Mat dlogits(n, 1);
  for (Eigen::Index e = 0; e < n; ++e) {
    const double s = cache.scores[e];
    dlogits(e, 0) = dscores[e] * s * (1.0 - s);
  }
  const Mat djoint = mlp_backward(head, cache.mlp, dlogits, head_grads);
  const Eigen::Index d = djoint.cols() / 2;
  return {djoint.leftCols(d).colwise().sum(), djoint.rightCols(d)};
}

GroundingResult ground_phrase(const GroundingQuery& query,
                              const Mat& entity_hiddens, const MlpParams& head,
                              const ProposalSet& proposals) {
  if (static_cast<std::size_t>(entity_hiddens.rows()) != proposals.size()) {
    throw DimensionError("ground_phrase: entity count differs from proposals");
  }
  GroundingResult out;
  out.scores = score_entities(query, entity_hiddens, head);
  out.merged = merge_proposals(out.scores, proposals);
  for (std::size_t q = 0; q < out.scores.size(); ++q) {
    if (out.scores[q] > kSelectionThreshold) out.selected.push_back(q);
  }
  return out;
}

}  // namespace groundhog
