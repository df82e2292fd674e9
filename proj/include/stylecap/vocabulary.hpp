#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stylecap {

using TokenId = std::int32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kDelim = 3;

// Lowercase, whitespace split, commas split off as their own token.
std::vector<std::string> tokenize_words(std::string_view text);

// Word-level vocabulary. Ids 0..3 are BOS, EOS, UNK and the delimiter
// "style:"; remaining ids follow first appearance in the build texts.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(std::span<const std::string> texts);
  // Rebuilds from id order (used by checkpoints); reserved tokens must lead.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // kUnk when absent
  const std::string& token(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  std::vector<TokenId> tokenize(std::string_view text) const;
  // BOS/EOS are dropped, commas attach to the preceding word.
  std::string detokenize(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  TokenId add(std::string token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace stylecap
