#include "stylecap/corpus.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "builtin_data.hpp"
#include "json.hpp"
#include "stylecap/errors.hpp"
#include "text_util.hpp"

namespace stylecap {
namespace {

using Json = nlohmann::ordered_json;

struct SurfaceForm {
  Factor factor;
  std::string_view name;
  std::array<std::string_view, 3> words;  // by class index
};

// Every word here must be recognised by the builtin lexicon; the corpus tests
// check that extraction recovers the golden tuple for each template.
constexpr std::array<SurfaceForm, 10> kSurfaceForms = {{
    {Factor::Gender, "noun", {"man", "woman", ""}},
    {Factor::Gender, "pronoun", {"he", "she", ""}},
    {Factor::Gender, "adj", {"male", "female", ""}},
    {Factor::Gender, "poss", {"his", "her", ""}},
    {Factor::Pitch, "tone", {"low", "normal", "high"}},
    {Factor::Pitch, "adj", {"deep", "medium-pitched", "high-pitched"}},
    {Factor::Volume, "verb", {"whispers", "speaks", "shouts"}},
    {Factor::Volume, "adv", {"softly", "at a normal volume", "loudly"}},
    {Factor::Speed, "pace", {"slow", "normal", "fast"}},
    {Factor::Speed, "adv", {"slowly", "at a normal pace", "quickly"}},
}};

const SurfaceForm* find_form(Factor f, std::string_view name) {
  for (const auto& form : kSurfaceForms) {
    if (form.factor == f && form.name == name) return &form;
  }
  return nullptr;
}

struct Placeholder {
  std::size_t begin;
  std::size_t end;  // one past '}'
  const SurfaceForm* form;
};

std::vector<Placeholder> scan_placeholders(std::string_view text, std::size_t line_no) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    const auto close = text.find('}', pos);
    if (close == std::string_view::npos) throw SchemaError(line_no, "template", "unclosed '{'");
    const auto body = text.substr(pos + 1, close - pos - 1);
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) {
      throw SchemaError(line_no, "template", "placeholder needs {factor:form}");
    }
    const auto factor = factor_from_string(body.substr(0, colon));
    if (!factor) throw SchemaError(line_no, "template", "unknown factor in placeholder");
    const SurfaceForm* form = find_form(*factor, body.substr(colon + 1));
    if (!form) throw SchemaError(line_no, "template", "unknown form in placeholder");
    out.push_back({pos, close + 1, form});
    pos = close + 1;
  }
  return out;
}

Json factors_to_json(const FactorTuple& t) {
  Json j = Json::object();
  for (Factor f : kAllFactors) j[std::string(to_string(f))] = class_name(f, t.class_of(f));
  return j;
}

FactorTuple factors_from_json(const Json& j, std::size_t line_no) {
  if (!j.is_object()) throw SchemaError(line_no, "factors", "expected an object");
  FactorTuple t;
  for (Factor f : kAllFactors) {
    const std::string key(to_string(f));
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw SchemaError(line_no, "factors." + key, "missing");
    const auto cls = class_from_name(f, it->get<std::string>());
    if (!cls) throw SchemaError(line_no, "factors." + key, "unknown class");
    t.set_class(f, *cls);
  }
  return t;
}

// Hadamard rows used as class patterns; every pair differs in two positions.
constexpr std::array<std::array<double, 4>, 3> kThreeClassPatterns = {{
    {1, -1, 1, -1},
    {1, 1, -1, -1},
    {1, -1, -1, 1},
}};

}  // namespace

bool CaptionTemplate::accepts(const FactorTuple& t) const {
  for (Factor f : kAllFactors) {
    if (!verbalizes(f) && !t.is_normal(f)) return false;
  }
  return true;
}

TemplateSet::TemplateSet(std::vector<CaptionTemplate> templates)
    : templates_(std::move(templates)) {}

TemplateSet TemplateSet::parse(std::string_view text) {
  std::vector<CaptionTemplate> templates;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto bar = line.find('|');
    if (bar == std::string_view::npos) {
      throw SchemaError(line_no, "header", "expected '<factors> | <template>'");
    }
    CaptionTemplate tmpl;
    for (auto name : detail::split(line.substr(0, bar), ',')) {
      const auto f = factor_from_string(detail::to_lower(detail::trim(name)));
      if (!f) throw SchemaError(line_no, "header", "unknown factor '" + std::string(name) + "'");
      tmpl.verbalized[static_cast<std::size_t>(*f)] = true;
    }
    if (!tmpl.verbalizes(Factor::Gender)) {
      throw SchemaError(line_no, "header", "every template must verbalize gender");
    }
    tmpl.text = std::string(detail::trim(line.substr(bar + 1)));
    std::array<bool, 4> used{};
    for (const auto& ph : scan_placeholders(tmpl.text, line_no)) {
      used[static_cast<std::size_t>(ph.form->factor)] = true;
    }
    if (used != tmpl.verbalized) {
      throw SchemaError(line_no, "header", "header does not match the template's placeholders");
    }
    templates.push_back(std::move(tmpl));
  }
  return TemplateSet(std::move(templates));
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open templates " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = parse(detail::builtin_templates_text());
  return set;
}

std::string TemplateSet::fill(const CaptionTemplate& tmpl, const FactorTuple& t) {
  if (t.gender == Gender::Unknown) throw UnknownGender();
  std::string out;
  std::size_t last = 0;
  for (const auto& ph : scan_placeholders(tmpl.text, 0)) {
    out.append(tmpl.text, last, ph.begin - last);
    out.append(ph.form->words[static_cast<std::size_t>(t.class_of(ph.form->factor))]);
    last = ph.end;
  }
  out.append(tmpl.text, last);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::vector<std::string> TemplateSet::enumerate_captions() const {
  std::set<std::string> unique;
  for (int g = 0; g < 2; ++g) {
    for (int p = 0; p < 3; ++p) {
      for (int v = 0; v < 3; ++v) {
        for (int s = 0; s < 3; ++s) {
          const FactorTuple t{static_cast<Gender>(g), static_cast<Level>(p),
                              static_cast<Level>(v), static_cast<Speed>(s)};
          for (const auto& tmpl : templates_) {
            if (tmpl.accepts(t)) unique.insert(fill(tmpl, t));
          }
        }
      }
    }
  }
  return {unique.begin(), unique.end()};
}

StyleVector style_centroid(const FactorTuple& t, int dim) {
  if (t.gender == Gender::Unknown) throw UnknownGender();
  if (dim <= 0 || dim % 16 != 0) {
    throw InvalidConfig("style vector dimension must be a positive multiple of 16");
  }
  const int block = dim / 4;
  StyleVector v(dim);
  for (std::size_t fi = 0; fi < kAllFactors.size(); ++fi) {
    const Factor f = kAllFactors[fi];
    const int cls = t.class_of(f);
    // Gender uses a pattern and its negation; the rest use three Hadamard rows.
    const auto& pattern = kThreeClassPatterns[f == Factor::Gender ? 0 : cls];
    const double sign = (f == Factor::Gender && cls == 1) ? -1.0 : 1.0;
    for (int k = 0; k < block; ++k) {
      v(static_cast<int>(fi) * block + k) = sign * kStylePatternAmplitude * pattern[k % 4];
    }
  }
  return v;
}

StyleVector synthesize_style_vector(const FactorTuple& t, double sigma, int dim, Rng& rng) {
  if (!(sigma >= 0.0)) throw InvalidConfig("noise sigma must be >= 0");
  StyleVector v = style_centroid(t, dim);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int i = 0; i < dim; ++i) v(i) += noise(rng);
  }
  return v;
}

Dataset generate_dataset(const CorpusSpec& spec) {
  if (spec.templates.empty()) throw EmptyInput("template set is empty");
  if (spec.n_train == 0) throw InvalidConfig("n_train must be positive");
  Rng rng(spec.seed);
  const auto& templates = spec.templates.templates();

  auto make = [&](std::string_view split, std::size_t index) {
    FactorTuple t;
    for (Factor f : kAllFactors) {
      t.set_class(f, static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(class_count(f)))));
    }
    std::vector<const CaptionTemplate*> eligible;
    for (const auto& tmpl : templates) {
      if (tmpl.accepts(t)) eligible.push_back(&tmpl);
    }
    if (eligible.empty()) {
      throw InvalidConfig("no template can verbalize " + render_factor_phrase(t));
    }
    const auto* tmpl = eligible[uniform_index(rng, eligible.size())];

    Example e;
    std::ostringstream id;
    id << split << '-' << std::setw(6) << std::setfill('0') << index;
    e.id = id.str();
    e.factors = t;
    e.caption = TemplateSet::fill(*tmpl, t);
    e.style_vector = synthesize_style_vector(t, spec.noise_sigma, spec.dim, rng);
    e.fcc_target = build_fcc_target(e, FactorSource::Golden, FactorLexicon::builtin());
    return e;
  };

  Dataset ds;
  for (std::size_t i = 0; i < spec.n_train; ++i) ds.train.push_back(make("train", i));
  for (std::size_t i = 0; i < spec.n_dev; ++i) ds.dev.push_back(make("dev", i));
  for (std::size_t i = 0; i < spec.n_test; ++i) ds.test.push_back(make("test", i));
  return ds;
}

std::string build_fcc_target(const Example& e, FactorSource source, const FactorLexicon& lexicon,
                             std::size_t* gender_fallbacks) {
  if (e.caption.empty()) throw EmptyInput("caption is empty");
  FactorTuple t = e.factors;
  if (source == FactorSource::Predicted) {
    t = extract_factors_from_caption(e.caption, lexicon);
    if (t.gender == Gender::Unknown) {
      if (e.factors.gender == Gender::Unknown) throw UnknownGender();
      t.gender = e.factors.gender;
      if (gender_fallbacks) ++*gender_fallbacks;
    }
  }
  return render_factor_phrase(t) + " " + std::string(kDelimiter) + " " + e.caption;
}

std::optional<FccParts> split_fcc_target(std::string_view text) {
  const std::string needle = " " + std::string(kDelimiter) + " ";
  const auto pos = text.find(needle);
  if (pos == std::string_view::npos) return std::nullopt;
  return FccParts{std::string(text.substr(0, pos)), std::string(text.substr(pos + needle.size()))};
}

std::string example_to_json(const Example& e) {
  Json j;
  j["id"] = e.id;
  j["factors"] = factors_to_json(e.factors);
  j["style_vector"] = std::vector<double>(e.style_vector.data(),
                                          e.style_vector.data() + e.style_vector.size());
  j["caption"] = e.caption;
  j["fcc_target"] = e.fcc_target ? Json(*e.fcc_target) : Json(nullptr);
  return j.dump();
}

Example example_from_json(std::string_view line, std::size_t line_no) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& err) {
    throw SchemaError(line_no, "<json>", err.what());
  }
  if (!j.is_object()) throw SchemaError(line_no, "<json>", "expected an object");
  auto require = [&](const char* key) -> const Json& {
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(line_no, key, "missing");
    return *it;
  };
  Example e;
  const auto& id = require("id");
  if (!id.is_string()) throw SchemaError(line_no, "id", "expected a string");
  e.id = id.get<std::string>();
  e.factors = factors_from_json(require("factors"), line_no);
  const auto& vec = require("style_vector");
  if (!vec.is_array()) throw SchemaError(line_no, "style_vector", "expected an array");
  e.style_vector.resize(static_cast<Eigen::Index>(vec.size()));
  for (std::size_t i = 0; i < vec.size(); ++i) {
    if (!vec[i].is_number()) throw SchemaError(line_no, "style_vector", "expected numbers");
    e.style_vector(static_cast<Eigen::Index>(i)) = vec[i].get<double>();
  }
  const auto& caption = require("caption");
  if (!caption.is_string()) throw SchemaError(line_no, "caption", "expected a string");
  e.caption = caption.get<std::string>();
  if (const auto it = j.find("fcc_target"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError(line_no, "fcc_target", "expected a string or null");
    e.fcc_target = it->get<std::string>();
  }
  return e;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : examples) out << example_to_json(e) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Example> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    out.push_back(example_from_json(line, line_no));
  }
  return out;
}

}  // namespace stylecap
