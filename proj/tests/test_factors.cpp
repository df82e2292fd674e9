#include <gtest/gtest.h>

#include "stylecap/corpus.hpp"
#include "stylecap/errors.hpp"
#include "stylecap/factors.hpp"
#include "support.hpp"

namespace stylecap {
namespace {

using testing::all_golden_tuples;

TEST(FactorPhrase, RendersFixedTemplate) {
  EXPECT_EQ(render_factor_phrase({Gender::Male, Level::Low, Level::High, Speed::Normal}),
            "male, low pitch, high volume, normal speed");
  EXPECT_EQ(render_factor_phrase({Gender::Female, Level::Normal, Level::Normal, Speed::Normal}),
            "female, normal pitch, normal volume, normal speed");
  EXPECT_EQ(render_factor_phrase({Gender::Male, Level::High, Level::Low, Speed::Slow}),
            "male, high pitch, low volume, slow speed");
}

TEST(FactorPhrase, RenderRejectsUnknownGender) {
  EXPECT_THROW(render_factor_phrase({Gender::Unknown, Level::Low, Level::Low, Speed::Slow}), UnknownGender);
}

TEST(FactorPhrase, Parses) {
  EXPECT_EQ(parse_factor_phrase("male, low pitch, high volume, normal speed"),
            (FactorTuple{Gender::Male, Level::Low, Level::High, Speed::Normal}));
  EXPECT_EQ(parse_factor_phrase("female, high pitch, low volume, slow speed"),
            (FactorTuple{Gender::Female, Level::High, Level::Low, Speed::Slow}));
}

TEST(FactorPhrase, ParseIsCaseInsensitiveAndTrimsWhitespace) {
  EXPECT_EQ(parse_factor_phrase("  MALE ,Low  Pitch,   high volume , Normal speed \n"),
            (FactorTuple{Gender::Male, Level::Low, Level::High, Speed::Normal}));
}

TEST(FactorPhrase, ParseRejectsNonTemplateInput) {
  EXPECT_THROW(parse_factor_phrase("hello world"), MalformedPhrase);
  EXPECT_THROW(parse_factor_phrase(""), MalformedPhrase);
}

TEST(FactorPhrase, ParseReportsOffendingTerm) {
  try {
    parse_factor_phrase("male, low pitch, loud volume, normal speed");
    FAIL() << "expected MalformedPhrase";
  } catch (const MalformedPhrase& e) {
    EXPECT_EQ(e.position(), 2u);
  }
  try {
    parse_factor_phrase("male, high volume, low pitch, normal speed");
    FAIL() << "expected MalformedPhrase";
  } catch (const MalformedPhrase& e) {
    EXPECT_EQ(e.position(), 1u);
  }
  try {
    parse_factor_phrase("male, low pitch, high volume");
    FAIL() << "expected MalformedPhrase";
  } catch (const MalformedPhrase& e) {
    EXPECT_NE(e.reason().find("4"), std::string::npos) << e.reason();
  }
}

TEST(FactorPhrase, RoundTripsEveryGoldenTuple) {
  const auto tuples = all_golden_tuples();
  ASSERT_EQ(tuples.size(), 54u);
  for (const auto& t : tuples) EXPECT_EQ(parse_factor_phrase(render_factor_phrase(t)), t);
}

TEST(Extraction, BuiltinLexiconExamples) {
  const auto& lex = FactorLexicon::builtin();
  EXPECT_EQ(extract_factors_from_caption("He whispers slowly", lex),
            (FactorTuple{Gender::Male, Level::Normal, Level::Low, Speed::Slow}));
  EXPECT_EQ(extract_factors_from_caption("A woman says something", lex),
            (FactorTuple{Gender::Female, Level::Normal, Level::Normal, Speed::Normal}));
  EXPECT_EQ(extract_factors_from_caption("Someone talks", lex),
            (FactorTuple{Gender::Unknown, Level::Normal, Level::Normal, Speed::Normal}));
}

TEST(Extraction, FirstOccurrenceWinsPerFactor) {
  const auto& lex = FactorLexicon::builtin();
  const auto t = extract_factors_from_caption("She shouts, then he whispers quickly and slowly", lex);
  EXPECT_EQ(t.gender, Gender::Female);
  EXPECT_EQ(t.volume, Level::High);
  EXPECT_EQ(t.speed, Speed::Fast);
}

TEST(Extraction, MultiWordAndStemEntries) {
  const auto& lex = FactorLexicon::builtin();
  EXPECT_EQ(extract_factors_from_caption("A man speaks in a low tone", lex).pitch, Level::Low);
  EXPECT_EQ(extract_factors_from_caption("A man speaks in a high tone", lex).pitch, Level::High);
  EXPECT_EQ(extract_factors_from_caption("Her voice is SOFTER than before", lex).volume, Level::Low);
  EXPECT_EQ(extract_factors_from_caption("he talks at a normal volume", lex).volume, Level::Normal);
}

TEST(Extraction, IsCaseInsensitiveAndIgnoresPunctuation) {
  const auto& lex = FactorLexicon::builtin();
  EXPECT_EQ(extract_factors_from_caption("HE WHISPERS, SLOWLY.", lex),
            extract_factors_from_caption("he whispers slowly", lex));
}

TEST(Extraction, RecoversEveryTemplateFilling) {
  const auto& lex = FactorLexicon::builtin();
  for (const auto& tmpl : TemplateSet::builtin().templates()) {
    for (const auto& t : all_golden_tuples()) {
      if (!tmpl.accepts(t)) continue;
      const auto caption = TemplateSet::fill(tmpl, t);
      EXPECT_EQ(extract_factors_from_caption(caption, lex), t) << caption;
    }
  }
}

TEST(Extraction, NeverReturnsUnknownForGradedFactors) {
  Rng rng(5);
  const std::vector<std::string> words = {"he",   "she",  "loud", "quiet", "deep", "shrill", "fast",
                                          "slow", "tone", "a",    "the",   "at",   "volume", "pace"};
  const auto& lex = FactorLexicon::builtin();
  for (int trial = 0; trial < 500; ++trial) {
    std::string caption;
    const auto n = uniform_index(rng, 8);
    for (std::uint64_t i = 0; i < n; ++i) caption += words[uniform_index(rng, words.size())] + " ";
    const auto t = extract_factors_from_caption(caption, lex);
    EXPECT_EQ(t, extract_factors_from_caption(caption, lex));
    EXPECT_GE(t.class_of(Factor::Pitch), 0);
    EXPECT_LE(t.class_of(Factor::Speed), 2);
  }
}

TEST(Lexicon, ParsesEntriesAndComments) {
  const auto lex = FactorLexicon::parse(
      "# comment\n"
      "murmur*\tvolume\tlow\n"
      "\n"
      "very fast\tspeed\tfast\n");
  ASSERT_EQ(lex.entries().size(), 2u);
  EXPECT_TRUE(lex.entries()[0].prefix);
  EXPECT_EQ(lex.entries()[1].words, (std::vector<std::string>{"very", "fast"}));
  const auto t = extract_factors_from_caption("she murmurs very fast", lex);
  EXPECT_EQ(t.volume, Level::Low);
  EXPECT_EQ(t.speed, Speed::Fast);
  EXPECT_EQ(t.gender, Gender::Unknown);
}

TEST(Lexicon, RejectsBadLines) {
  try {
    FactorLexicon::parse("loud\tvolume\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(FactorLexicon::parse("ok\tvolume\tlow\nloud\tcolour\thigh\n"), SchemaError);
  EXPECT_THROW(FactorLexicon::parse("loud\tvolume\tmedium\n"), SchemaError);
}

TEST(Lexicon, LoadMissingFileIsIoError) {
  EXPECT_THROW(FactorLexicon::load("/nonexistent/lexicon.tsv"), IoError);
}

}  // namespace
}  // namespace stylecap
