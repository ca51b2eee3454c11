#include "rpn/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace rpn {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (c >= 0x80) {
      current.push_back(static_cast<char>(c));
    } else if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  index_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists,
                             Index max_size) {
  if (max_size < 2) {
    throw ConfigError("vocabulary max_size must be >= 2 (reserved slots)");
  }
  std::unordered_map<std::string, Index> counts;
  for (const auto& list : token_lists) {
    for (const auto& tok : list) ++counts[tok];
  }
  std::vector<std::pair<std::string, Index>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    if (v.index_.emplace(tok, v.size()).second) v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw DataError("vocabulary token list must start with <pad>, <unk>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (Index i = 0; i < v.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[static_cast<std::size_t>(i)], i).second) {
      throw DataError("duplicate token in vocabulary list: " +
                      v.tokens_[static_cast<std::size_t>(i)]);
    }
  }
  return v;
}

Index Vocabulary::encode(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<Index> Vocabulary::encode_all(const std::vector<std::string>& tokens) const {
  std::vector<Index> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(encode(tok));
  return ids;
}

const std::string& Vocabulary::decode(Index id) const {
  if (id < 0 || id >= size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

}  // namespace rpn
