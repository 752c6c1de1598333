#include "groundhog/vocab.h"

#include <array>

#include "groundhog/errors.h"

namespace groundhog {
namespace {

bool is_punct(char c) {
  return c == '.' || c == ',' || c == '?' || c == ':' || c == '!';
}

bool is_punct_word(std::string_view w) {
  return w.size() == 1 && is_punct(w[0]);
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view word = text.substr(i, j - i);
    std::size_t stem = word.size();
    while (stem > 0 && is_punct(word[stem - 1])) --stem;
    if (stem > 0) out.emplace_back(word.substr(0, stem));
    for (std::size_t k = stem; k < word.size(); ++k) out.emplace_back(1, word[k]);
    i = j;
  }
  return out;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0 && !is_punct_word(words[i])) out += ' ';
    out += words[i];
  }
  return out;
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  Vocabulary v;
  const std::array<std::string_view, 6> reserved = {
      kPadToken, kBosToken, kEosToken, kGrdToken, kGrdEndToken, kPtrToken};
  auto add = [&](std::string_view t) {
    if (v.ids_.contains(std::string(t))) return;
    v.ids_.emplace(std::string(t), static_cast<int>(v.tokens_.size()));
    v.tokens_.emplace_back(t);
  };
  for (auto t : reserved) add(t);
  for (const auto& w : words) {
    if (w.empty() || w.find_first_of(" \t\n") != std::string::npos) {
      throw InvalidArgument("vocabulary words must be non-empty and unspaced");
    }
    add(w);
  }
  if (v.size() > kMaxVocabSize) {
    throw InvalidArgument("vocabulary exceeds " + std::to_string(kMaxVocabSize) +
                          " tokens");
  }
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) {
    throw DataError("out-of-vocabulary word '" + std::string(token) + "'");
  }
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (int i : ids) words.push_back(token(i));
  return join_words(words);
}

}  // namespace groundhog
