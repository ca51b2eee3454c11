#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rpn/errors.hpp"
#include "rpn/tensor.hpp"

namespace rpn {

// Lowercases and splits on whitespace and punctuation boundaries. Punctuation
// characters come out as standalone single-character tokens so that inserted
// marks survive re-encoding. Bytes >= 0x80 are treated as word characters and
// passed through untouched.
std::vector<std::string> tokenize(std::string_view text);

inline bool is_punct_token(std::string_view tok) {
  return tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]));
}

// Token <-> index map with two reserved slots: 0 is padding, 1 is unknown.
// Corpus tokens never receive either reserved index.
class Vocabulary {
 public:
  static constexpr Index kPadId = 0;
  static constexpr Index kUnkId = 1;

  Vocabulary();

  // Most frequent tokens first (ties broken lexicographically), capped at
  // max_size total entries including the two reserved slots.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists,
                          Index max_size);

  // Rebuild from an explicit token list (checkpoint restore). The list must
  // start with the two reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  Index encode(std::string_view token) const;
  std::vector<Index> encode_all(const std::vector<std::string>& tokens) const;
  const std::string& decode(Index id) const;

  bool contains(std::string_view token) const;
  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
};

}  // namespace rpn
