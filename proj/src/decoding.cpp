#include "stylecap/decoding.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "text_util.hpp"

namespace stylecap {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Sampling: return "sampling";
    case Strategy::GtS: return "gts";
  }
  return "";
}

std::optional<Strategy> strategy_from_string(std::string_view s) noexcept {
  for (Strategy st : {Strategy::Greedy, Strategy::Sampling, Strategy::GtS}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void DecodeConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidConfig("top_p must be in (0, 1]");
  if (top_k < 1) throw InvalidConfig("top_k must be >= 1");
  if (max_len < 1) throw InvalidConfig("max_len must be >= 1");
}

FilteredDistribution filter_top_k_top_p(const Eigen::Ref<const Eigen::VectorXd>& dist, int k, double p) {
  if (k < 1) throw InvalidConfig("top_k must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidConfig("top_p must be in (0, 1]");
  if (dist.size() == 0) throw InvalidConfig("empty distribution");
  if (!dist.allFinite() || (dist.array() < 0.0).any()) {
    throw InvalidConfig("distribution has negative or non-finite entries");
  }

  std::vector<TokenId> order(static_cast<std::size_t>(dist.size()));
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return dist(a) > dist(b); });

  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  // Both sums run in the same order, so at p = 1 the running mass meets the
  // total exactly and no tolerance is needed.
  long double top_k_mass = 0.0L;
  for (std::size_t i = 0; i < keep; ++i) top_k_mass += dist(order[i]);

  const long double threshold = static_cast<long double>(p) * top_k_mass;
  std::size_t n = 0;
  long double mass = 0.0L;
  while (n < keep) {
    mass += dist(order[n]);
    ++n;
    if (mass >= threshold) break;
  }

  FilteredDistribution out;
  out.tokens.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  out.probs.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out.probs(static_cast<Eigen::Index>(i)) = dist(order[i]);
  if (mass > 0.0L) {
    out.probs /= static_cast<double>(mass);
  } else {
    out.probs.setConstant(1.0 / static_cast<double>(n));
  }
  return out;
}

TokenId argmax_token(const Eigen::Ref<const Eigen::VectorXd>& dist) {
  if (dist.size() == 0) throw InvalidConfig("empty distribution");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < dist.size(); ++i) {
    if (dist(i) > dist(best)) best = i;
  }
  return static_cast<TokenId>(best);
}

TokenId sample_token(const FilteredDistribution& filtered, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < filtered.tokens.size(); ++i) {
    cumulative += filtered.probs(static_cast<Eigen::Index>(i));
    if (u < cumulative) return filtered.tokens[i];
  }
  return filtered.tokens.back();
}

std::vector<Hypothesis> decode_examples(const ConditionalLm& model, const std::vector<Example>& examples,
                                        const DecodeConfig& cfg) {
  cfg.validate();
  std::vector<Hypothesis> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    const ConditionedLm conditioned(model, e.style_vector);
    Rng rng = stream_for(cfg.seed, e.id);
    const DecodeResult r = decode(conditioned, cfg, rng);

    Hypothesis h;
    h.id = e.id;
    h.strategy = cfg.strategy;
    h.text = model.vocab.detokenize(r.tokens);
    h.delimiter_found = r.delimiter_found;
    h.seed = cfg.seed;
    if (r.delimiter_found) {
      const auto delim = std::find(r.tokens.begin(), r.tokens.end(), cfg.delimiter_id);
      h.factor_phrase = model.vocab.detokenize(std::span(r.tokens.begin(), delim));
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::string hypothesis_to_json(const Hypothesis& h) {
  nlohmann::ordered_json j;
  j["id"] = h.id;
  j["strategy"] = to_string(h.strategy);
  j["text"] = h.text;
  j["factor_phrase"] = h.factor_phrase ? nlohmann::ordered_json(*h.factor_phrase) : nlohmann::ordered_json(nullptr);
  j["delimiter_found"] = h.delimiter_found;
  j["seed"] = h.seed;
  return j.dump();
}

Hypothesis hypothesis_from_json(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw SchemaError(line_no, "<json>", err.what());
  }
  if (!j.is_object()) throw SchemaError(line_no, "<json>", "expected an object");
  auto field = [&](const char* key) -> const nlohmann::json& {
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(line_no, key, "missing");
    return *it;
  };
  Hypothesis h;
  try {
    h.id = field("id").get<std::string>();
    const auto strategy = strategy_from_string(field("strategy").get<std::string>());
    if (!strategy) throw SchemaError(line_no, "strategy", "unknown strategy");
    h.strategy = *strategy;
    h.text = field("text").get<std::string>();
    if (const auto it = j.find("factor_phrase"); it != j.end() && !it->is_null()) {
      h.factor_phrase = it->get<std::string>();
    }
    h.delimiter_found = j.value("delimiter_found", false);
    h.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::type_error& err) {
    throw SchemaError(line_no, "<json>", err.what());
  }
  return h;
}

void write_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : hyps) out << hypothesis_to_json(h) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Hypothesis> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    out.push_back(hypothesis_from_json(line, line_no));
  }
  return out;
}

}  // namespace stylecap
