#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stylecap/corpus.hpp"
#include "stylecap/decoding.hpp"
#include "stylecap/factors.hpp"

namespace stylecap {

using TokenSequence = std::vector<std::string>;

// Tokenization shared with the language model (lowercase, commas split off).
TokenSequence metric_tokens(std::string_view text);

// Clipped n-gram statistics of one sentence pair, summable across a corpus.
struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(const TokenSequence& hyp, const TokenSequence& ref);
// Geometric mean of the four modified precisions times the brevity penalty;
// 0 when any order has no match. No smoothing.
double bleu_from_stats(const BleuStats& stats);
// Corpus-level BLEU-4 with one reference per hypothesis. Throws
// LengthMismatch and EmptyInput.
double bleu4(std::span<const TokenSequence> hypotheses, std::span<const TokenSequence> references);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);
// LCS F1 (beta = 1); 0 when the LCS is empty. Throws EmptyInput.
double rouge_l(const TokenSequence& hyp, const TokenSequence& ref);
double mean_rouge_l(std::span<const TokenSequence> hypotheses, std::span<const TokenSequence> references);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Exact-match alignment with the most matches, then the fewest chunks.
// References are limited to 64 tokens.
MeteorAlignment meteor_align(const TokenSequence& hyp, const TokenSequence& ref);
// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3,
// score = Fmean (1 - penalty). Throws EmptyInput.
double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref);

// Unique n-grams over total n-grams across the corpus; 0 when there are none.
double distinct_n(std::span<const TokenSequence> corpus, int n);

enum class FactorEvidence { PhrasePrefix, CaptionLexicon };

std::string_view to_string(FactorEvidence e) noexcept;
std::optional<FactorEvidence> factor_evidence_from_string(std::string_view s) noexcept;

// Text after the first delimiter when present, else the whole text.
std::string caption_part(std::string_view text);

// Predicted factors of a decoded text; nullopt when a phrase prefix is
// missing or malformed.
std::optional<FactorTuple> predicted_factors(std::string_view text, FactorEvidence evidence,
                                             const FactorLexicon& lexicon);

struct FactorAccuracy {
  // Percentages indexed by Factor.
  std::array<double, 4> per_factor{};
  double avg = 0;

  double of(Factor f) const { return per_factor[static_cast<std::size_t>(f)]; }
};

struct DecodedText {
  std::string id;
  std::string text;
};

struct GoldenFactors {
  std::string id;
  FactorTuple factors;
};

// Per-example correctness flags indexed by Factor; Unknown or unparseable
// predictions count as wrong. Throws IdMismatch.
std::vector<std::array<bool, 4>> factor_correctness(std::span<const DecodedText> decoded,
                                                    std::span<const GoldenFactors> golden,
                                                    FactorEvidence evidence, const FactorLexicon& lexicon);
FactorAccuracy accuracy_from_flags(std::span<const std::array<bool, 4>> flags);
FactorAccuracy factor_accuracy(std::span<const DecodedText> decoded, std::span<const GoldenFactors> golden,
                               FactorEvidence evidence, const FactorLexicon& lexicon);

struct BootstrapResult {
  double p_value = 1.0;
  double mean_a = 0;
  double mean_b = 0;
};

// Paired bootstrap on per-example scores. p is the fraction of resamples in
// which mean(A) <= mean(B), i.e. the evidence against "A is better".
// Throws LengthMismatch (unequal or fewer than 2) and InvalidConfig.
BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  int n_resamples = 1000, std::uint64_t seed = 0);

// Same test for corpus-level statistics: each resample draws example indices
// with replacement and recomputes both statistics on them.
using CorpusStatistic = std::function<double(std::span<const std::size_t>)>;
BootstrapResult bootstrap_compare_corpus(std::size_t n_examples, const CorpusStatistic& stat_a,
                                         const CorpusStatistic& stat_b, int n_resamples = 1000,
                                         std::uint64_t seed = 0);

struct PerExampleScore {
  std::string id;
  std::string hypothesis;  // caption part used for the caption metrics
  std::string reference;
  double rouge_l = 0;
  double meteor_lite = 0;
  std::array<bool, 4> factor_correct{};  // indexed by Factor

  friend bool operator==(const PerExampleScore&, const PerExampleScore&) = default;
};

struct EvalReport {
  double bleu4 = 0;
  double rouge_l = 0;
  double meteor_lite = 0;
  double distinct1 = 0;
  double distinct2 = 0;
  FactorAccuracy factors;
  FactorEvidence evidence = FactorEvidence::CaptionLexicon;
  std::vector<PerExampleScore> per_example;

  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static EvalReport load(const std::filesystem::path& path);
};

bool operator==(const FactorAccuracy& a, const FactorAccuracy& b);
bool operator==(const EvalReport& a, const EvalReport& b);

// Caption metrics use the post-delimiter text of each hypothesis; factor
// accuracy uses `evidence`. Throws IdMismatch.
EvalReport evaluate(std::span<const Hypothesis> hypotheses, std::span<const Example> references,
                    FactorEvidence evidence = FactorEvidence::CaptionLexicon,
                    const FactorLexicon& lexicon = FactorLexicon::builtin());
EvalReport evaluate_files(const std::filesystem::path& hyp_file, const std::filesystem::path& ref_file,
                          FactorEvidence evidence = FactorEvidence::CaptionLexicon,
                          const FactorLexicon& lexicon = FactorLexicon::builtin());

// Metrics accepted by compare_reports: bleu4, rouge_l, meteor_lite,
// distinct1, distinct2, gender, pitch, volume, speed, factor_avg.
const std::vector<std::string>& comparable_metrics();

struct Comparison {
  std::string metric;
  double mean_a = 0;
  double mean_b = 0;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
  int n_resamples = 0;

  std::string to_json() const;
};

// Bootstrap test of "A is better than B" on one metric of two id-aligned
// reports. Throws IdMismatch and InvalidConfig (unknown metric).
Comparison compare_reports(const EvalReport& a, const EvalReport& b, std::string_view metric,
                           int n_resamples = 1000, std::uint64_t seed = 0);

}  // namespace stylecap
