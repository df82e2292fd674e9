#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stylecap/factors.hpp"
#include "stylecap/random.hpp"

namespace stylecap {

template <typename Scalar>
using StyleVectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using StyleVector = StyleVectorT<double>;

// Separator between factor phrase and caption in FCC targets.
inline constexpr std::string_view kDelimiter = "style:";

struct Example {
  std::string id;
  FactorTuple factors;  // golden; gender is never Unknown
  StyleVector style_vector;
  std::string caption;
  std::optional<std::string> fcc_target;

  friend bool operator==(const Example& a, const Example& b) {
    return a.id == b.id && a.factors == b.factors && a.style_vector == b.style_vector &&
           a.caption == b.caption && a.fcc_target == b.fcc_target;
  }
};

// One caption template. Placeholders look like {pitch:tone}; the header lists
// every factor the template verbalizes.
struct CaptionTemplate {
  std::array<bool, 4> verbalized{};  // indexed by Factor
  std::string text;

  bool verbalizes(Factor f) const { return verbalized[static_cast<std::size_t>(f)]; }
  // A factor left out of the template may only take its Normal class.
  bool accepts(const FactorTuple& t) const;
};

class TemplateSet {
 public:
  TemplateSet() = default;
  explicit TemplateSet(std::vector<CaptionTemplate> templates);

  // Format: `<factor>,<factor>,... | <template>` per line, '#' comments.
  static TemplateSet parse(std::string_view text);
  static TemplateSet load(const std::filesystem::path& path);
  static const TemplateSet& builtin();

  const std::vector<CaptionTemplate>& templates() const noexcept { return templates_; }
  bool empty() const noexcept { return templates_.empty(); }
  std::size_t size() const noexcept { return templates_.size(); }

  // Surface caption for a factor tuple; the first letter is capitalized.
  static std::string fill(const CaptionTemplate& tmpl, const FactorTuple& t);

  // Every distinct caption the set can produce over all golden tuples.
  std::vector<std::string> enumerate_captions() const;

 private:
  std::vector<CaptionTemplate> templates_;
};

struct CorpusSpec {
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  double noise_sigma = 0.5;
  int dim = 16;
  std::uint64_t seed = 7;
  TemplateSet templates = TemplateSet::builtin();
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

// Per-dimension amplitude of the noiseless class patterns.
inline constexpr double kStylePatternAmplitude = 0.5;

// Noiseless factor embedding: four equal blocks (gender, pitch, volume, speed),
// each filled with a signed pattern owned by the class. Throws UnknownGender
// and InvalidConfig (dim not a positive multiple of 16).
StyleVector style_centroid(const FactorTuple& t, int dim);

// style_centroid plus i.i.d. N(0, sigma^2) noise drawn from `rng`.
StyleVector synthesize_style_vector(const FactorTuple& t, double sigma, int dim, Rng& rng);

// Throws EmptyInput on an empty template set, InvalidConfig on bad sizes.
Dataset generate_dataset(const CorpusSpec& spec);

enum class FactorSource { Golden, Predicted };

// "<factor phrase> style: <caption>". In Predicted mode the factors come from
// the caption via the lexicon; an Unknown gender falls back to the golden one
// and increments *gender_fallbacks when given.
std::string build_fcc_target(const Example& e, FactorSource source, const FactorLexicon& lexicon,
                             std::size_t* gender_fallbacks = nullptr);

// Splits on the first " style: "; nullopt when the delimiter is absent.
struct FccParts {
  std::string phrase;
  std::string caption;
};
std::optional<FccParts> split_fcc_target(std::string_view text);

std::string example_to_json(const Example& e);
Example example_from_json(std::string_view line, std::size_t line_no = 1);

void write_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples);
std::vector<Example> read_jsonl(const std::filesystem::path& path);

}  // namespace stylecap
