#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "stylecap/corpus.hpp"
#include "stylecap/errors.hpp"
#include "stylecap/lm.hpp"
#include "stylecap/random.hpp"

namespace stylecap {

enum class Strategy { Greedy, Sampling, GtS };

std::string_view to_string(Strategy s) noexcept;
// Accepts "greedy", "sampling", "gts".
std::optional<Strategy> strategy_from_string(std::string_view s) noexcept;

struct DecodeConfig {
  Strategy strategy = Strategy::Greedy;
  double top_p = 0.9;
  int top_k = 40;
  int max_len = 64;
  std::uint64_t seed = 0;
  TokenId delimiter_id = kDelim;

  void validate() const;  // throws InvalidConfig

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

// Anything that maps a generated prefix to a next-token distribution.
template <typename M>
concept NextTokenModel = requires(const M& m, std::span<const TokenId> history) {
  { m.next_distribution(history) } -> std::convertible_to<Eigen::VectorXd>;
};

// A trained model bound to one condition vector.
class ConditionedLm {
 public:
  ConditionedLm(const ConditionalLm& model, StyleVector cond) : model_(&model), cond_(std::move(cond)) {
    if (cond_.size() != model.shape.cond) throw DimensionMismatch("condition vector length");
  }

  Eigen::VectorXd next_distribution(std::span<const TokenId> history) const {
    return forward(*model_, make_context(history, model_->shape), cond_);
  }

 private:
  const ConditionalLm* model_;
  StyleVector cond_;
};

// Restricted, renormalized distribution; tokens in descending probability
// order, ties by ascending id.
struct FilteredDistribution {
  std::vector<TokenId> tokens;
  Eigen::VectorXd probs;
};

// Keeps the k most probable tokens, then the shortest prefix of them whose
// cumulative mass reaches p times the top-k mass, and renormalizes. Throws InvalidConfig for k < 1, p outside (0, 1], or a
// distribution with negative or non-finite entries.
FilteredDistribution filter_top_k_top_p(const Eigen::Ref<const Eigen::VectorXd>& dist, int k, double p);

// Lowest id among the maximal entries.
TokenId argmax_token(const Eigen::Ref<const Eigen::VectorXd>& dist);

// Draws from a filtered distribution by inverse CDF on one uniform01 draw.
TokenId sample_token(const FilteredDistribution& filtered, Rng& rng);

struct DecodeResult {
  std::vector<TokenId> tokens;  // EOS excluded
  bool delimiter_found = false;
};

namespace detail {

inline void note_token(DecodeResult& r, TokenId t, TokenId delimiter) {
  r.tokens.push_back(t);
  if (t == delimiter) r.delimiter_found = true;
}

}  // namespace detail

// Argmax at each step until EOS or max_len tokens.
template <NextTokenModel M>
DecodeResult greedy_decode(const M& model, const DecodeConfig& cfg) {
  DecodeResult r;
  while (static_cast<int>(r.tokens.size()) < cfg.max_len) {
    const TokenId t = argmax_token(model.next_distribution(r.tokens));
    if (t == kEos) break;
    detail::note_token(r, t, cfg.delimiter_id);
  }
  return r;
}

// Top-k / top-p sampling at every step.
template <NextTokenModel M>
DecodeResult sample_decode(const M& model, const DecodeConfig& cfg, Rng& rng) {
  DecodeResult r;
  while (static_cast<int>(r.tokens.size()) < cfg.max_len) {
    const auto filtered = filter_top_k_top_p(model.next_distribution(r.tokens), cfg.top_k, cfg.top_p);
    const TokenId t = sample_token(filtered, rng);
    if (t == kEos) break;
    detail::note_token(r, t, cfg.delimiter_id);
  }
  return r;
}

// Greedy through the delimiter (inclusive), top-k / top-p sampling after it.
// Without a delimiter the output is exactly greedy_decode's.
template <NextTokenModel M>
DecodeResult gts_decode(const M& model, const DecodeConfig& cfg, Rng& rng) {
  DecodeResult r;
  while (static_cast<int>(r.tokens.size()) < cfg.max_len) {
    const auto dist = model.next_distribution(r.tokens);
    TokenId t;
    if (!r.delimiter_found) {
      t = argmax_token(dist);
    } else {
      t = sample_token(filter_top_k_top_p(dist, cfg.top_k, cfg.top_p), rng);
    }
    if (t == kEos) break;
    detail::note_token(r, t, cfg.delimiter_id);
  }
  return r;
}

template <NextTokenModel M>
DecodeResult decode(const M& model, const DecodeConfig& cfg, Rng& rng) {
  switch (cfg.strategy) {
    case Strategy::Greedy: return greedy_decode(model, cfg);
    case Strategy::Sampling: return sample_decode(model, cfg, rng);
    case Strategy::GtS: return gts_decode(model, cfg, rng);
  }
  return {};
}

// One line of a decode output file.
struct Hypothesis {
  std::string id;
  Strategy strategy = Strategy::Greedy;
  std::string text;
  std::optional<std::string> factor_phrase;  // text before the delimiter
  bool delimiter_found = false;
  std::uint64_t seed = 0;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Decodes every example with its own RNG stream derived from (cfg.seed, id).
std::vector<Hypothesis> decode_examples(const ConditionalLm& model, const std::vector<Example>& examples,
                                        const DecodeConfig& cfg);

std::string hypothesis_to_json(const Hypothesis& h);
Hypothesis hypothesis_from_json(std::string_view line, std::size_t line_no = 1);
void write_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps);
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path);

}  // namespace stylecap
