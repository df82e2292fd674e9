#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "stylecap/errors.hpp"
#include "stylecap/metrics.hpp"
#include "support.hpp"

namespace stylecap {
namespace {

TokenSequence T(std::string_view s) { return metric_tokens(s); }

std::vector<TokenSequence> corpus(std::initializer_list<std::string_view> lines) {
  std::vector<TokenSequence> out;
  for (auto l : lines) out.push_back(T(l));
  return out;
}

// Enumerates every sequence over {x, y, z} up to `max_len` tokens.
std::vector<TokenSequence> all_sequences(int max_len) {
  std::vector<TokenSequence> out = {{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (static_cast<int>(out[i].size()) == max_len) continue;
    for (const char* t : {"x", "y", "z"}) {
      auto next = out[i];
      next.push_back(t);
      out.push_back(std::move(next));
    }
  }
  return out;
}

// LCS by memoized recursion over suffix pairs.
std::size_t lcs_oracle(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) return 0;
    int& m = memo[i][j];
    if (m >= 0) return m;
    m = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

TEST(Bleu, Fixtures) {
  const auto same = corpus({"a b c d e f"});
  EXPECT_DOUBLE_EQ(bleu4(same, same), 1.0);
  EXPECT_NEAR(bleu4(corpus({"a b c d e"}), corpus({"a b c d f"})), std::pow(0.2, 0.25), 1e-12);
  EXPECT_NEAR(bleu4(corpus({"a b c d e"}), corpus({"a b c d f"})), 0.6687, 1e-4);
  EXPECT_EQ(bleu4(corpus({"a b c d"}), corpus({"e f g h"})), 0.0);
}

TEST(Bleu, ClippedMatchesAreSymmetricWhileBrevityIsNot) {
  const auto short_ = T("a b c d");
  const auto long_ = T("a b c d e f");
  const auto fwd = bleu_stats(short_, long_);
  const auto rev = bleu_stats(long_, short_);
  EXPECT_EQ(fwd.matches, rev.matches);
  EXPECT_EQ(fwd.totals, (std::array<std::size_t, 4>{4, 3, 2, 1}));
  EXPECT_EQ(rev.totals, (std::array<std::size_t, 4>{6, 5, 4, 3}));
  // Short hypothesis: perfect precisions, penalized by exp(1 - 6/4).
  EXPECT_NEAR(bleu_from_stats(fwd), std::exp(1.0 - 6.0 / 4.0), 1e-12);
  // Long hypothesis: no brevity penalty, precisions 4/6, 3/5, 2/4, 1/3.
  EXPECT_NEAR(bleu_from_stats(rev), std::pow(4.0 / 6 * 3.0 / 5 * 2.0 / 4 * 1.0 / 3, 0.25), 1e-12);
}

TEST(Bleu, CorpusLevelPoolsCounts) {
  const auto hyps = corpus({"a b c d", "e f g h"});
  const auto refs = corpus({"a b c d", "e f g x"});
  // Pooled precisions: 7/8, 5/6, 3/4, 1/2.
  EXPECT_NEAR(bleu4(hyps, refs), std::pow(7.0 / 8 * 5.0 / 6 * 3.0 / 4 * 1.0 / 2, 0.25), 1e-12);
}

TEST(Bleu, Errors) {
  EXPECT_THROW(bleu4(corpus({"a"}), corpus({"a", "b"})), LengthMismatch);
  EXPECT_THROW(bleu4(std::vector<TokenSequence>{}, std::vector<TokenSequence>{}), EmptyInput);
}

TEST(Rouge, Fixtures) {
  EXPECT_EQ(rouge_l(T("a b c d"), T("a b c d")), 1.0);
  EXPECT_EQ(lcs_length(T("a b c d"), T("a c b d")), 3u);
  EXPECT_EQ(rouge_l(T("a b c d"), T("a c b d")), 0.75);
  EXPECT_EQ(rouge_l(T("a b"), T("c d")), 0.0);
  EXPECT_THROW(rouge_l(TokenSequence{}, T("a")), EmptyInput);
  EXPECT_NEAR(mean_rouge_l(corpus({"a b", "a"}), corpus({"a b", "b"})), 0.5, 1e-15);
}

TEST(Rouge, LcsAgreesWithRecursiveOracle) {
  const auto seqs = all_sequences(5);
  ASSERT_EQ(seqs.size(), 364u);
  for (const auto& a : seqs)
    for (const auto& b : seqs) ASSERT_EQ(lcs_length(a, b), lcs_oracle(a, b));
}

TEST(Meteor, Fixtures) {
  EXPECT_EQ(meteor_lite(T("a b c d"), T("a b c d")), 0.9921875);
  EXPECT_EQ(meteor_lite(T("a b"), T("c d")), 0.0);
  EXPECT_EQ(meteor_lite(T("d c b a"), T("a b c d")), 0.5);
  const auto al = meteor_align(T("d c b a"), T("a b c d"));
  EXPECT_EQ(al.matches, 4u);
  EXPECT_EQ(al.chunks, 4u);
  EXPECT_THROW(meteor_lite(T("a"), TokenSequence{}), EmptyInput);
}

TEST(Meteor, PrefersFewestChunksAmongMaximalAlignments) {
  // "the" can pair with either reference occurrence; the second keeps one chunk.
  const auto al = meteor_align(T("the cat"), T("the dog the cat"));
  EXPECT_EQ(al.matches, 2u);
  EXPECT_EQ(al.chunks, 1u);
}

TEST(Meteor, HandComputedPartialMatch) {
  // hyp "a b x c", ref "a b c": m=3, P=3/4, R=1, chunks 2.
  const double p = 0.75, r = 1.0;
  const double fmean = 10 * p * r / (r + 9 * p);
  EXPECT_NEAR(meteor_lite(T("a b x c"), T("a b c")), fmean * (1 - 0.5 * std::pow(2.0 / 3.0, 3)), 1e-15);
}

TEST(Distinct, Fixtures) {
  EXPECT_EQ(distinct_n(corpus({"a b a", "a c"}), 1), 0.6);
  EXPECT_EQ(distinct_n(corpus({"a b a", "a c"}), 2), 1.0);
  EXPECT_EQ(distinct_n(corpus({"a a a"}), 1), 1.0 / 3.0);
  EXPECT_EQ(distinct_n(corpus({"a", "b"}), 2), 0.0);
  EXPECT_THROW(distinct_n(corpus({"a"}), 0), InvalidConfig);
}

TEST(Distinct, DuplicatingCorpusNeverIncreases) {
  Rng rng(12);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenSequence> c;
    const auto n = 1 + uniform_index(rng, 5);
    for (std::uint64_t i = 0; i < n; ++i) {
      TokenSequence s;
      const auto len = uniform_index(rng, 6);
      for (std::uint64_t j = 0; j < len; ++j) s.push_back(words[uniform_index(rng, words.size())]);
      c.push_back(s);
    }
    auto doubled = c;
    doubled.insert(doubled.end(), c.begin(), c.end());
    for (int k = 1; k <= 2; ++k) EXPECT_LE(distinct_n(doubled, k), distinct_n(c, k));
  }
}

TEST(Metrics, OnesOnIdenticalZerosOnDisjoint) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    TokenSequence a, b;
    const auto len = 4 + uniform_index(rng, 8);
    for (std::uint64_t i = 0; i < len; ++i) {
      a.push_back("w" + std::to_string(uniform_index(rng, 6)));
      b.push_back("v" + std::to_string(uniform_index(rng, 6)));
    }
    const std::vector<TokenSequence> ca = {a}, cb = {b};
    EXPECT_DOUBLE_EQ(bleu4(ca, ca), 1.0);
    EXPECT_EQ(rouge_l(a, a), 1.0);
    EXPECT_NEAR(meteor_lite(a, a), 1.0 - 0.5 * std::pow(1.0 / static_cast<double>(len), 3), 1e-15);
    EXPECT_EQ(bleu4(ca, cb), 0.0);
    EXPECT_EQ(rouge_l(a, b), 0.0);
    EXPECT_EQ(meteor_lite(a, b), 0.0);
  }
}

std::vector<GoldenFactors> golden_set(int n) {
  std::vector<GoldenFactors> g;
  for (int i = 0; i < n; ++i) {
    g.push_back({"ex-" + std::to_string(i),
                 {i % 2 ? Gender::Male : Gender::Female, static_cast<Level>(i % 3), static_cast<Level>((i + 1) % 3),
                  static_cast<Speed>((i + 2) % 3)}});
  }
  return g;
}

TEST(FactorAccuracy, PerfectFlippedAndMalformed) {
  const auto golden = golden_set(10);
  const auto& lex = FactorLexicon::builtin();
  std::vector<DecodedText> perfect, flipped, one_bad;
  for (const auto& g : golden) {
    perfect.push_back({g.id, render_factor_phrase(g.factors) + " style: anything"});
    auto f = g.factors;
    f.gender = f.gender == Gender::Male ? Gender::Female : Gender::Male;
    flipped.push_back({g.id, render_factor_phrase(f) + " style: anything"});
    one_bad.push_back(perfect.back());
  }
  one_bad[3].text = "male, loud, style: anything";

  const auto a = factor_accuracy(perfect, golden, FactorEvidence::PhrasePrefix, lex);
  for (Factor f : kAllFactors) EXPECT_EQ(a.of(f), 100.0);
  EXPECT_EQ(a.avg, 100.0);

  const auto b = factor_accuracy(flipped, golden, FactorEvidence::PhrasePrefix, lex);
  EXPECT_EQ(b.of(Factor::Gender), 0.0);
  EXPECT_EQ(b.avg, 75.0);

  const auto c = factor_accuracy(one_bad, golden, FactorEvidence::PhrasePrefix, lex);
  for (Factor f : kAllFactors) EXPECT_EQ(c.of(f), 90.0);
  EXPECT_EQ(c.avg, 90.0);
}

TEST(FactorAccuracy, LexiconEvidenceUsesCaptionPart) {
  const std::vector<GoldenFactors> golden = {{"a", {Gender::Male, Level::Normal, Level::Low, Speed::Slow}},
                                             {"b", {Gender::Female, Level::Normal, Level::Normal, Speed::Normal}}};
  // The phrase contradicts the caption; only the caption counts.
  const std::vector<DecodedText> decoded = {
      {"a", "female, high pitch, high volume, fast speed style: he whispers slowly"},
      {"b", "someone says something"}};
  const auto flags = factor_correctness(decoded, golden, FactorEvidence::CaptionLexicon, FactorLexicon::builtin());
  EXPECT_EQ(flags[0], (std::array<bool, 4>{true, true, true, true}));
  EXPECT_EQ(flags[1], (std::array<bool, 4>{false, true, true, true}));
  // Phrase evidence needs a delimiter.
  const auto phrase = factor_correctness(decoded, golden, FactorEvidence::PhrasePrefix, FactorLexicon::builtin());
  EXPECT_EQ(phrase[1], (std::array<bool, 4>{false, false, false, false}));
}

TEST(FactorAccuracy, IdMismatch) {
  const auto golden = golden_set(2);
  std::vector<DecodedText> decoded = {{"ex-0", "x"}, {"ex-9", "y"}};
  EXPECT_THROW(factor_accuracy(decoded, golden, FactorEvidence::CaptionLexicon, FactorLexicon::builtin()), IdMismatch);
  decoded.pop_back();
  EXPECT_THROW(factor_accuracy(decoded, golden, FactorEvidence::CaptionLexicon, FactorLexicon::builtin()), IdMismatch);
}

TEST(Bootstrap, IdenticalScoresGivePOne) {
  std::vector<double> a = {0.1, 0.5, 0.9, 0.3, 0.7};
  const auto r = bootstrap_compare(a, a, 1000, 1);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_DOUBLE_EQ(r.mean_a, 0.5);
}

TEST(Bootstrap, DominatedScoresGivePZero) {
  std::vector<double> a(100, 1.0), b(100, 0.0);
  EXPECT_EQ(bootstrap_compare(a, b, 1000, 2).p_value, 0.0);
  EXPECT_EQ(bootstrap_compare(b, a, 1000, 2).p_value, 1.0);
}

TEST(Bootstrap, SeedDeterministic) {
  Rng rng(14);
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = uniform01(rng);
    b[i] = uniform01(rng);
  }
  EXPECT_EQ(bootstrap_compare(a, b, 500, 7).p_value, bootstrap_compare(a, b, 500, 7).p_value);
}

TEST(Bootstrap, TinySymmetricNoiseIsInconclusive) {
  std::normal_distribution<double> normal;
  double sum_p = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < 200; ++i) {
      b[i] = uniform01(rng);
      a[i] = b[i] + 1e-3 * normal(rng);
    }
    sum_p += bootstrap_compare(a, b, 1000, seed).p_value;
  }
  const double mean_p = sum_p / 20.0;
  EXPECT_GE(mean_p, 0.2);
  EXPECT_LE(mean_p, 0.8);
}

TEST(Bootstrap, Errors) {
  std::vector<double> one = {1.0}, two = {1.0, 2.0};
  EXPECT_THROW(bootstrap_compare(one, one), LengthMismatch);
  EXPECT_THROW(bootstrap_compare(one, two), LengthMismatch);
  EXPECT_THROW(bootstrap_compare(two, two, 0), InvalidConfig);
}

Example ref_example(const std::string& id, const FactorTuple& t, const std::string& caption) {
  Example e;
  e.id = id;
  e.factors = t;
  e.caption = caption;
  e.style_vector = Eigen::VectorXd::Zero(16);
  return e;
}

std::vector<Example> reference_set() {
  return {ref_example("r0", {Gender::Male, Level::Normal, Level::Low, Speed::Slow}, "He whispers slowly"),
          ref_example("r1", {Gender::Female, Level::High, Level::Normal, Speed::Normal}, "A woman speaks in a high tone"),
          ref_example("r2", {Gender::Male, Level::Normal, Level::High, Speed::Normal}, "A male voice shouts")};
}

TEST(Evaluate, ReferencesAgainstThemselves) {
  const auto refs = reference_set();
  std::vector<Hypothesis> hyps;
  for (const auto& e : refs) hyps.push_back({e.id, Strategy::Greedy, e.caption, std::nullopt, false, 0});
  const auto r = evaluate(hyps, refs);
  EXPECT_DOUBLE_EQ(r.bleu4, 1.0);
  EXPECT_EQ(r.rouge_l, 1.0);
  EXPECT_EQ(r.factors.avg, 100.0);
  ASSERT_EQ(r.per_example.size(), 3u);
}

TEST(Evaluate, StripsFactorPhraseBeforeCaptionMetrics) {
  const auto refs = reference_set();
  std::vector<Hypothesis> hyps;
  for (const auto& e : refs) {
    const std::string text = render_factor_phrase(e.factors) + " style: " + e.caption;
    hyps.push_back({e.id, Strategy::GtS, text, render_factor_phrase(e.factors), true, 0});
  }
  const auto r = evaluate(hyps, refs, FactorEvidence::PhrasePrefix);
  EXPECT_DOUBLE_EQ(r.bleu4, 1.0);
  EXPECT_EQ(r.rouge_l, 1.0);
  EXPECT_EQ(r.factors.avg, 100.0);
  EXPECT_EQ(r.per_example[0].hypothesis, "He whispers slowly");
}

TEST(Evaluate, InvariantsAndEmptyGeneration) {
  const auto refs = reference_set();
  std::vector<Hypothesis> hyps = {{"r0", Strategy::Greedy, "", std::nullopt, false, 0},
                                  {"r1", Strategy::Greedy, "she speaks", std::nullopt, false, 0},
                                  {"r2", Strategy::Greedy, "he talks quickly", std::nullopt, false, 0}};
  const auto r = evaluate(hyps, refs);
  EXPECT_EQ(r.per_example[0].rouge_l, 0.0);
  EXPECT_NEAR(r.factors.avg,
              (r.factors.per_factor[0] + r.factors.per_factor[1] + r.factors.per_factor[2] + r.factors.per_factor[3]) /
                  4.0,
              1e-12);
  for (double v : {r.bleu4, r.rouge_l, r.meteor_lite, r.distinct1, r.distinct2}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  hyps[1].id = "zz";
  EXPECT_THROW(evaluate(hyps, refs), IdMismatch);
}

TEST(Evaluate, ReportRoundTripAndFiles) {
  const auto refs = reference_set();
  std::vector<Hypothesis> hyps = {{"r0", Strategy::Greedy, "he whispers", std::nullopt, false, 0},
                                  {"r1", Strategy::Greedy, "a woman speaks", std::nullopt, false, 0},
                                  {"r2", Strategy::Greedy, "a voice shouts loudly", std::nullopt, false, 0}};
  testing::TempDir dir("eval");
  write_hypotheses(dir / "h.jsonl", hyps);
  write_jsonl(dir / "r.jsonl", refs);
  const auto r = evaluate_files(dir / "h.jsonl", dir / "r.jsonl");
  EXPECT_EQ(r, evaluate(hyps, refs));
  r.save(dir / "report.json");
  EXPECT_EQ(EvalReport::load(dir / "report.json"), r);
  testing::write_file(dir / "junk.json", "{\"bleu4\": 1}");
  EXPECT_THROW(EvalReport::load(dir / "junk.json"), SchemaError);
}

TEST(Compare, SameReportAndDominance) {
  const auto refs = reference_set();
  std::vector<Hypothesis> good, bad;
  for (const auto& e : refs) {
    good.push_back({e.id, Strategy::Greedy, e.caption, std::nullopt, false, 0});
    bad.push_back({e.id, Strategy::Greedy, "someone says nothing", std::nullopt, false, 0});
  }
  const auto rg = evaluate(good, refs);
  const auto rb = evaluate(bad, refs);
  for (const auto& m : comparable_metrics()) {
    const auto c = compare_reports(rg, rg, m, 200, 1);
    EXPECT_EQ(c.p_value, 1.0) << m;
    EXPECT_FALSE(c.significant);
    EXPECT_EQ(c.n_resamples, 200);
  }
  EXPECT_EQ(compare_reports(rg, rb, "rouge_l", 200, 1).p_value, 0.0);
  // A resample of only the three-word reference has no 4-grams, so a few ties are expected.
  EXPECT_LE(compare_reports(rg, rb, "bleu4", 200, 1).p_value, 0.05);
  EXPECT_THROW(compare_reports(rg, rb, "bertscore"), InvalidConfig);
  auto shifted = rb;
  shifted.per_example[0].id = "other";
  EXPECT_THROW(compare_reports(rg, shifted, "rouge_l"), IdMismatch);
}

}  // namespace
}  // namespace stylecap
