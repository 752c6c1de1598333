#ifndef GROUNDHOG_VOCAB_H_
#define GROUNDHOG_VOCAB_H_

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace groundhog {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kGrdToken = "<GRD>";
inline constexpr std::string_view kGrdEndToken = "</GRD>";
inline constexpr std::string_view kPtrToken = "<PTR>";

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kGrdId = 3;
inline constexpr int kGrdEndId = 4;
inline constexpr int kPtrId = 5;

inline constexpr std::size_t kMaxVocabSize = 512;

// Splits text on whitespace and peels trailing punctuation (. , ? : !) off
// each word. Inverse of join_words for text without spaces before
// punctuation.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);

// Bijective token <-> id table. Ids 0..5 are the reserved special tokens.
class Vocabulary {
 public:
  // Reserved tokens followed by `words` in first-seen order (duplicates and
  // reserved spellings skipped).
  static Vocabulary from_words(std::span<const std::string> words);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  int id(std::string_view token) const;  // throws DataError on OOV
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace groundhog

#endif  // GROUNDHOG_VOCAB_H_
