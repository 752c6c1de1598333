#ifndef GROUNDHOG_CORPUS_H_
#define GROUNDHOG_CORPUS_H_

#include <filesystem>
#include <span>
#include <vector>

#include "groundhog/synth.h"
#include "json.hpp"

namespace groundhog {

// JSON Lines corpus, one GroundedConversation per line. Masks are RLE
// objects, boxes [x0, y0, x1, y1], schema field "m3g2-toy/1". Proposal masks
// are written binarized at 0.5.

nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json proposals_to_json(const ProposalSet& p);
ProposalSet proposals_from_json(const nlohmann::json& j);
nlohmann::json pointer_to_json(const Pointer& p);
Pointer pointer_from_json(const nlohmann::json& j);

nlohmann::json conversation_to_json(const GroundedConversation& c);
// Throws DataError on schema violations (structure only; see validate()).
GroundedConversation conversation_from_json(const nlohmann::json& j);

void write_corpus(const std::filesystem::path& path,
                  std::span<const GroundedConversation> corpus);
// Parses and validates every line; errors name the 1-based line number.
std::vector<GroundedConversation> read_corpus(const std::filesystem::path& path,
                                              const Vocabulary& vocab);

}  // namespace groundhog

#endif  // GROUNDHOG_CORPUS_H_
