#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stylecap {

enum class Gender { Male, Female, Unknown };
enum class Level { Low, Normal, High };  // pitch and volume
enum class Speed { Slow, Normal, Fast };

enum class Factor { Gender, Pitch, Volume, Speed };

inline constexpr std::array<Factor, 4> kAllFactors = {Factor::Gender, Factor::Pitch,
                                                      Factor::Volume, Factor::Speed};

struct FactorTuple {
  Gender gender = Gender::Unknown;
  Level pitch = Level::Normal;
  Level volume = Level::Normal;
  Speed speed = Speed::Normal;

  friend bool operator==(const FactorTuple&, const FactorTuple&) = default;

  // Class index of one factor: gender 0..2 (2 = Unknown), others 0..2.
  int class_of(Factor f) const noexcept;
  void set_class(Factor f, int cls);
  bool is_normal(Factor f) const noexcept;
};

// Number of golden classes per factor (gender excludes Unknown).
int class_count(Factor f) noexcept;

std::string_view to_string(Factor f) noexcept;
std::optional<Factor> factor_from_string(std::string_view s) noexcept;

// Lowercase class word as it appears in the factor phrase ("male", "low", "fast", ...).
std::string_view class_name(Factor f, int cls) noexcept;
// Inverse of class_name; Unknown gender is accepted as "unknown".
std::optional<int> class_from_name(Factor f, std::string_view name) noexcept;

// "<gender>, <pitch> pitch, <volume> volume, <speed> speed". Throws UnknownGender.
std::string render_factor_phrase(const FactorTuple& t);

// Case-insensitive, whitespace-tolerant inverse of render_factor_phrase.
// Throws MalformedPhrase.
FactorTuple parse_factor_phrase(std::string_view s);

struct LexiconEntry {
  std::vector<std::string> words;  // one or more lowercase tokens
  bool prefix = false;             // single-word stem written as "word*"
  Factor factor = Factor::Gender;
  int cls = 0;
};

// Keyword table mapping caption words onto (factor, class) pairs. Text format:
// one `keyword<TAB>factor<TAB>class` entry per line, '#' starts a comment.
// A keyword may span several space-separated words; a trailing '*' turns a
// single word into a prefix stem.
class FactorLexicon {
 public:
  FactorLexicon() = default;
  explicit FactorLexicon(std::vector<LexiconEntry> entries);

  static FactorLexicon parse(std::string_view text);
  static FactorLexicon load(const std::filesystem::path& path);
  // Lexicon shipped in data/lexicon.tsv.
  static const FactorLexicon& builtin();

  const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }

  // Longest entry matching the words starting at `pos`, if any.
  const LexiconEntry* match(const std::vector<std::string>& words, std::size_t pos) const;

 private:
  std::vector<LexiconEntry> entries_;
};

// Lowercased words of a caption: whitespace split, commas and sentence
// punctuation dropped.
std::vector<std::string> caption_words(std::string_view caption);

// Rule-based factor extraction. Pitch, volume and speed default to Normal,
// gender to Unknown; for each factor the first matching keyword wins.
FactorTuple extract_factors_from_caption(std::string_view caption, const FactorLexicon& lexicon);

}  // namespace stylecap
