#include "stylecap/vocabulary.hpp"

#include "stylecap/corpus.hpp"
#include "stylecap/errors.hpp"
#include "text_util.hpp"

namespace stylecap {
namespace {

constexpr std::string_view kReserved[] = {"<bos>", "<eos>", "<unk>", kDelimiter};

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto word : detail::split_whitespace(text)) {
    const std::string lowered = detail::to_lower(word);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= lowered.size(); ++i) {
      if (i == lowered.size() || lowered[i] == ',') {
        if (i > start) out.push_back(lowered.substr(start, i - start));
        if (i < lowered.size()) out.emplace_back(",");
        start = i + 1;
      }
    }
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (auto t : kReserved) add(std::string(t));
}

TokenId Vocabulary::add(std::string token) {
  const auto [it, inserted] =
      token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  if (inserted) id_to_token_.push_back(std::move(token));
  return it->second;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  Vocabulary v;
  for (const auto& text : texts) {
    for (auto& tok : tokenize_words(text)) v.add(std::move(tok));
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < std::size(kReserved)) throw SchemaError(0, "vocab", "missing reserved tokens");
  for (std::size_t i = 0; i < std::size(kReserved); ++i) {
    if (tokens[i] != kReserved[i]) throw SchemaError(0, "vocab", "reserved token out of place");
  }
  Vocabulary v;
  for (std::size_t i = std::size(kReserved); i < tokens.size(); ++i) {
    if (v.token_to_id_.contains(tokens[i])) throw SchemaError(0, "vocab", "duplicate token");
    v.add(std::move(tokens[i]));
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : tokenize_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (t == kBos || t == kEos) continue;
    const std::string& word = token(t);
    if (!out.empty() && word != ",") out += ' ';
    out += word;
  }
  return out;
}

}  // namespace stylecap
