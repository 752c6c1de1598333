#ifndef GROUNDHOG_GROUNDING_H_
#define GROUNDHOG_GROUNDING_H_

#include <string_view>
#include <vector>

#include "groundhog/mask.h"
#include "groundhog/nn.h"

namespace groundhog {

using GroundingQuery = RowVec;

// How the phrase representation is formed from the two grounding tokens.
enum class QueryMode { kStartOnly, kEndOnly, kSum };

std::string_view to_string(QueryMode m);
QueryMode query_mode_from_string(std::string_view s);

GroundingQuery grounding_query(const RowVec& h_start, const RowVec& h_end,
                               QueryMode mode = QueryMode::kSum);

// Independent per-entity sigmoid(MLP([query, hidden_e])). The head maps
// 2d -> 2d -> 1.
std::vector<double> score_entities(const GroundingQuery& query,
                                   const Mat& entity_hiddens,
                                   const MlpParams& head);

// Cached forward for backprop through the scores.
struct ScoreCache {
  MlpCache mlp;
  std::vector<double> scores;
};
std::vector<double> score_entities(const GroundingQuery& query,
                                   const Mat& entity_hiddens,
                                   const MlpParams& head, ScoreCache* cache);

// Given d loss / d scores, accumulates head gradients and returns the
// gradients w.r.t. the query and the entity hidden states.
struct ScoreBackward {
  RowVec dquery;
  Mat dentity;
};
ScoreBackward score_entities_backward(const MlpParams& head,
                                      const ScoreCache& cache,
                                      const std::vector<double>& dscores,
                                      MlpParams& head_grads);

inline constexpr double kSelectionThreshold = 0.5;

struct GroundingResult {
  std::vector<double> scores;
  SoftMask merged;
  std::vector<std::size_t> selected;  // {q : score_q > 0.5}, ascending
};

GroundingResult ground_phrase(const GroundingQuery& query,
                              const Mat& entity_hiddens, const MlpParams& head,
                              const ProposalSet& proposals);

}  // namespace groundhog

#endif  // GROUNDHOG_GROUNDING_H_
