#include "stylecap/factors.hpp"

#include <fstream>
#include <sstream>

#include "builtin_data.hpp"
#include "stylecap/errors.hpp"
#include "text_util.hpp"

namespace stylecap {
namespace {

constexpr std::array<std::string_view, 3> kGenderNames = {"male", "female", "unknown"};
constexpr std::array<std::string_view, 3> kLevelNames = {"low", "normal", "high"};
constexpr std::array<std::string_view, 3> kSpeedNames = {"slow", "normal", "fast"};

const std::array<std::string_view, 3>& names_for(Factor f) {
  switch (f) {
    case Factor::Gender: return kGenderNames;
    case Factor::Speed: return kSpeedNames;
    default: return kLevelNames;
  }
}

}  // namespace

int FactorTuple::class_of(Factor f) const noexcept {
  switch (f) {
    case Factor::Gender: return static_cast<int>(gender);
    case Factor::Pitch: return static_cast<int>(pitch);
    case Factor::Volume: return static_cast<int>(volume);
    case Factor::Speed: return static_cast<int>(speed);
  }
  return 0;
}

void FactorTuple::set_class(Factor f, int cls) {
  if (cls < 0 || cls > 2) throw std::out_of_range("factor class out of range");
  switch (f) {
    case Factor::Gender: gender = static_cast<Gender>(cls); break;
    case Factor::Pitch: pitch = static_cast<Level>(cls); break;
    case Factor::Volume: volume = static_cast<Level>(cls); break;
    case Factor::Speed: speed = static_cast<Speed>(cls); break;
  }
}

bool FactorTuple::is_normal(Factor f) const noexcept {
  return f != Factor::Gender && class_of(f) == 1;
}

int class_count(Factor f) noexcept { return f == Factor::Gender ? 2 : 3; }

std::string_view to_string(Factor f) noexcept {
  switch (f) {
    case Factor::Gender: return "gender";
    case Factor::Pitch: return "pitch";
    case Factor::Volume: return "volume";
    case Factor::Speed: return "speed";
  }
  return "";
}

std::optional<Factor> factor_from_string(std::string_view s) noexcept {
  for (Factor f : kAllFactors) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::string_view class_name(Factor f, int cls) noexcept {
  if (cls < 0 || cls > 2) return "";
  return names_for(f)[static_cast<std::size_t>(cls)];
}

std::optional<int> class_from_name(Factor f, std::string_view name) noexcept {
  const auto& names = names_for(f);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::string render_factor_phrase(const FactorTuple& t) {
  if (t.gender == Gender::Unknown) throw UnknownGender();
  std::string out(class_name(Factor::Gender, t.class_of(Factor::Gender)));
  for (Factor f : {Factor::Pitch, Factor::Volume, Factor::Speed}) {
    out += ", ";
    out += class_name(f, t.class_of(f));
    out += ' ';
    out += to_string(f);
  }
  return out;
}

FactorTuple parse_factor_phrase(std::string_view s) {
  const std::string lowered = detail::to_lower(detail::trim(s));
  const auto terms = detail::split(lowered, ',');
  if (terms.size() != kAllFactors.size()) {
    throw MalformedPhrase(std::min(terms.size(), kAllFactors.size()) - 1,
                          "expected 4 comma-separated terms, got " + std::to_string(terms.size()));
  }
  FactorTuple t;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Factor f = kAllFactors[i];
    const auto words = detail::split_whitespace(terms[i]);
    const std::size_t expected_words = f == Factor::Gender ? 1 : 2;
    if (words.size() != expected_words) {
      throw MalformedPhrase(i, "term '" + std::string(detail::trim(terms[i])) + "' has " +
                                   std::to_string(words.size()) + " words");
    }
    if (f != Factor::Gender && words[1] != to_string(f)) {
      throw MalformedPhrase(i, "expected '" + std::string(to_string(f)) + "', got '" +
                                   std::string(words[1]) + "'");
    }
    const auto cls = class_from_name(f, words[0]);
    if (!cls || (f == Factor::Gender && *cls == static_cast<int>(Gender::Unknown))) {
      throw MalformedPhrase(i, "unknown " + std::string(to_string(f)) + " class '" +
                                   std::string(words[0]) + "'");
    }
    t.set_class(f, *cls);
  }
  return t;
}

FactorLexicon::FactorLexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {}

FactorLexicon FactorLexicon::parse(std::string_view text) {
  std::vector<LexiconEntry> entries;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (detail::trim(raw).empty()) continue;
    const auto cols = detail::split(raw, '\t');
    if (cols.size() != 3) {
      throw SchemaError(line_no, "entry", "expected keyword<TAB>factor<TAB>class");
    }
    LexiconEntry entry;
    std::string keyword = detail::to_lower(detail::trim(cols[0]));
    if (!keyword.empty() && keyword.back() == '*') {
      keyword.pop_back();
      entry.prefix = true;
    }
    for (auto w : detail::split_whitespace(keyword)) entry.words.emplace_back(w);
    if (entry.words.empty()) throw SchemaError(line_no, "keyword", "empty keyword");
    if (entry.prefix && entry.words.size() != 1) {
      throw SchemaError(line_no, "keyword", "prefix stems must be a single word");
    }
    const auto factor = factor_from_string(detail::to_lower(detail::trim(cols[1])));
    if (!factor) throw SchemaError(line_no, "factor", "unknown factor");
    entry.factor = *factor;
    const auto cls = class_from_name(*factor, detail::to_lower(detail::trim(cols[2])));
    if (!cls || (*factor == Factor::Gender && *cls == static_cast<int>(Gender::Unknown))) {
      throw SchemaError(line_no, "class", "unknown class");
    }
    entry.cls = *cls;
    entries.push_back(std::move(entry));
  }
  return FactorLexicon(std::move(entries));
}

FactorLexicon FactorLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const FactorLexicon& FactorLexicon::builtin() {
  static const FactorLexicon lexicon = parse(detail::builtin_lexicon_text());
  return lexicon;
}

const LexiconEntry* FactorLexicon::match(const std::vector<std::string>& words,
                                         std::size_t pos) const {
  const LexiconEntry* best = nullptr;
  for (const auto& e : entries_) {
    if (pos + e.words.size() > words.size()) continue;
    if (best && best->words.size() >= e.words.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < e.words.size() && ok; ++k) {
      const std::string& w = words[pos + k];
      ok = e.prefix ? w.starts_with(e.words[k]) : w == e.words[k];
    }
    if (ok) best = &e;
  }
  return best;
}

std::vector<std::string> caption_words(std::string_view caption) {
  std::vector<std::string> words;
  for (auto raw : detail::split_whitespace(caption)) {
    std::string w = detail::to_lower(raw);
    while (!w.empty() && std::string_view(",.;:!?\"'").find(w.back()) != std::string_view::npos) {
      w.pop_back();
    }
    while (!w.empty() && std::string_view(",\"'").find(w.front()) != std::string_view::npos) {
      w.erase(w.begin());
    }
    if (!w.empty()) words.push_back(std::move(w));
  }
  return words;
}

FactorTuple extract_factors_from_caption(std::string_view caption, const FactorLexicon& lexicon) {
  FactorTuple t;  // Unknown gender, Normal elsewhere
  std::array<bool, 4> seen{};
  const auto words = caption_words(caption);
  for (std::size_t i = 0; i < words.size();) {
    const LexiconEntry* e = lexicon.match(words, i);
    if (!e) {
      ++i;
      continue;
    }
    auto& done = seen[static_cast<std::size_t>(e->factor)];
    if (!done) {
      t.set_class(e->factor, e->cls);
      done = true;
    }
    i += e->words.size();
  }
  return t;
}

}  // namespace stylecap
