#include "stylecap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "stylecap/config.hpp"
#include "stylecap/errors.hpp"
#include "stylecap/random.hpp"
#include "stylecap/vocabulary.hpp"
#include "text_util.hpp"

namespace stylecap {
namespace {

std::string join_ngram(const TokenSequence& s, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += s[start + i];
  }
  return key;
}

std::map<std::string, std::size_t> ngram_counts(const TokenSequence& s, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[join_ngram(s, i, n)];
  return counts;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct MeteorKey {
  std::size_t i;
  std::uint64_t used;
  int prev;
  bool operator==(const MeteorKey&) const = default;
};

struct MeteorKeyHash {
  std::size_t operator()(const MeteorKey& k) const noexcept {
    return mix_seed(k.used ^ mix_seed((k.i << 8) ^ static_cast<std::uint64_t>(k.prev + 1)));
  }
};

// Better = more matches, then fewer chunks.
bool better(const MeteorAlignment& a, const MeteorAlignment& b) {
  return a.matches != b.matches ? a.matches > b.matches : a.chunks < b.chunks;
}

class MeteorSearch {
 public:
  MeteorSearch(const TokenSequence& hyp, const TokenSequence& ref) : hyp_(hyp), ref_(ref) {}

  // Best alignment of hyp[i..] given the used reference positions and the
  // reference position matched by hyp[i-1] (-1 if unmatched).
  MeteorAlignment solve(std::size_t i, std::uint64_t used, int prev) {
    if (i == hyp_.size()) return {};
    const MeteorKey key{i, used, prev};
    if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
    MeteorAlignment best = solve(i + 1, used, -1);
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if ((used >> j) & 1U || ref_[j] != hyp_[i]) continue;
      MeteorAlignment cand = solve(i + 1, used | (std::uint64_t{1} << j), static_cast<int>(j));
      cand.matches += 1;
      if (!(prev >= 0 && static_cast<std::size_t>(prev) + 1 == j)) cand.chunks += 1;
      if (better(cand, best)) best = cand;
    }
    memo_.emplace(key, best);
    return best;
  }

 private:
  const TokenSequence& hyp_;
  const TokenSequence& ref_;
  std::unordered_map<MeteorKey, MeteorAlignment, MeteorKeyHash> memo_;
};

void check_pair_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw LengthMismatch("hypothesis count " + std::to_string(a) + " != reference count " + std::to_string(b));
  }
}

Json accuracy_to_json(const FactorAccuracy& acc) {
  Json j;
  for (Factor f : kAllFactors) j[std::string(to_string(f))] = acc.of(f);
  j["avg"] = acc.avg;
  return j;
}

}  // namespace

TokenSequence metric_tokens(std::string_view text) { return tokenize_words(text); }

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_length += o.hyp_length;
  ref_length += o.ref_length;
  return *this;
}

BleuStats bleu_stats(const TokenSequence& hyp, const TokenSequence& ref) {
  BleuStats s;
  s.hyp_length = hyp.size();
  s.ref_length = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    for (const auto& [gram, count] : h) {
      s.totals[n - 1] += count;
      if (const auto it = r.find(gram); it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double c = static_cast<double>(s.hyp_length);
  const double r = static_cast<double>(s.ref_length);
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

double bleu4(std::span<const TokenSequence> hypotheses, std::span<const TokenSequence> references) {
  check_pair_lengths(hypotheses.size(), references.size());
  if (hypotheses.empty()) throw EmptyInput("empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
  return bleu_from_stats(total);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> row(b.size() + 1, 0), next(b.size() + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      next[j + 1] = a[i] == b[j] ? row[j] + 1 : std::max(row[j + 1], next[j]);
    }
    std::swap(row, next);
  }
  return row[b.size()];
}

double rouge_l(const TokenSequence& hyp, const TokenSequence& ref) {
  if (hyp.empty() || ref.empty()) throw EmptyInput("ROUGE-L needs non-empty sequences");
  const auto lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double mean_rouge_l(std::span<const TokenSequence> hypotheses, std::span<const TokenSequence> references) {
  check_pair_lengths(hypotheses.size(), references.size());
  if (hypotheses.empty()) throw EmptyInput("empty corpus");
  double sum = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) sum += rouge_l(hypotheses[i], references[i]);
  return sum / static_cast<double>(hypotheses.size());
}

MeteorAlignment meteor_align(const TokenSequence& hyp, const TokenSequence& ref) {
  if (ref.size() > 64) throw InvalidConfig("METEOR reference longer than 64 tokens");
  return MeteorSearch(hyp, ref).solve(0, 0, -1);
}

double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref) {
  if (hyp.empty() || ref.empty()) throw EmptyInput("METEOR needs non-empty sequences");
  const auto a = meteor_align(hyp, ref);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double distinct_n(std::span<const TokenSequence> corpus, int n) {
  if (n < 1) throw InvalidConfig("distinct-n needs n >= 1");
  const auto un = static_cast<std::size_t>(n);
  std::set<std::string> unique;
  std::size_t total = 0;
  for (const auto& s : corpus) {
    if (s.size() < un) continue;
    for (std::size_t i = 0; i + un <= s.size(); ++i) {
      unique.insert(join_ngram(s, i, un));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

std::string_view to_string(FactorEvidence e) noexcept {
  return e == FactorEvidence::PhrasePrefix ? "phrase" : "lexicon";
}

std::optional<FactorEvidence> factor_evidence_from_string(std::string_view s) noexcept {
  if (s == "phrase") return FactorEvidence::PhrasePrefix;
  if (s == "lexicon") return FactorEvidence::CaptionLexicon;
  return std::nullopt;
}

std::string caption_part(std::string_view text) {
  const auto words = detail::split_whitespace(text);
  const auto it = std::find(words.begin(), words.end(), std::string(kDelimiter));
  if (it == words.end()) return std::string(detail::trim(text));
  std::string out;
  for (auto w = it + 1; w != words.end(); ++w) {
    if (!out.empty()) out += ' ';
    out += *w;
  }
  return out;
}

std::optional<FactorTuple> predicted_factors(std::string_view text, FactorEvidence evidence,
                                             const FactorLexicon& lexicon) {
  if (evidence == FactorEvidence::CaptionLexicon) {
    return extract_factors_from_caption(caption_part(text), lexicon);
  }
  const auto words = detail::split_whitespace(text);
  const auto it = std::find(words.begin(), words.end(), std::string(kDelimiter));
  if (it == words.end()) return std::nullopt;
  std::string phrase;
  for (auto w = words.begin(); w != it; ++w) {
    if (!phrase.empty()) phrase += ' ';
    phrase += *w;
  }
  try {
    return parse_factor_phrase(phrase);
  } catch (const MalformedPhrase&) {
    return std::nullopt;
  }
}

std::vector<std::array<bool, 4>> factor_correctness(std::span<const DecodedText> decoded,
                                                    std::span<const GoldenFactors> golden,
                                                    FactorEvidence evidence, const FactorLexicon& lexicon) {
  if (decoded.size() != golden.size()) {
    throw IdMismatch("decoded count " + std::to_string(decoded.size()) + " != golden count " +
                     std::to_string(golden.size()));
  }
  std::vector<std::array<bool, 4>> flags(decoded.size());
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    if (decoded[i].id != golden[i].id) {
      throw IdMismatch("row " + std::to_string(i) + ": '" + decoded[i].id + "' vs '" + golden[i].id + "'");
    }
    const auto pred = predicted_factors(decoded[i].text, evidence, lexicon);
    for (Factor f : kAllFactors) {
      const auto k = static_cast<std::size_t>(f);
      flags[i][k] = pred && !(f == Factor::Gender && pred->gender == Gender::Unknown) &&
                    pred->class_of(f) == golden[i].factors.class_of(f);
    }
  }
  return flags;
}

FactorAccuracy accuracy_from_flags(std::span<const std::array<bool, 4>> flags) {
  if (flags.empty()) throw EmptyInput("no examples for factor accuracy");
  FactorAccuracy acc;
  for (std::size_t k = 0; k < 4; ++k) {
    std::size_t correct = 0;
    for (const auto& f : flags) correct += f[k] ? 1 : 0;
    acc.per_factor[k] = 100.0 * static_cast<double>(correct) / static_cast<double>(flags.size());
  }
  acc.avg = (acc.per_factor[0] + acc.per_factor[1] + acc.per_factor[2] + acc.per_factor[3]) / 4.0;
  return acc;
}

FactorAccuracy factor_accuracy(std::span<const DecodedText> decoded, std::span<const GoldenFactors> golden,
                               FactorEvidence evidence, const FactorLexicon& lexicon) {
  return accuracy_from_flags(factor_correctness(decoded, golden, evidence, lexicon));
}

BootstrapResult bootstrap_compare_corpus(std::size_t n_examples, const CorpusStatistic& stat_a,
                                         const CorpusStatistic& stat_b, int n_resamples, std::uint64_t seed) {
  if (n_examples < 2) throw LengthMismatch("bootstrap needs at least 2 examples");
  if (n_resamples < 1) throw InvalidConfig("bootstrap needs n_resamples >= 1");
  std::vector<std::size_t> idx(n_examples);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  BootstrapResult res;
  res.mean_a = stat_a(idx);
  res.mean_b = stat_b(idx);
  Rng rng(mix_seed(seed));
  std::size_t not_better = 0;
  for (int r = 0; r < n_resamples; ++r) {
    for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n_examples));
    if (stat_a(idx) <= stat_b(idx)) ++not_better;
  }
  res.p_value = static_cast<double>(not_better) / static_cast<double>(n_resamples);
  return res;
}

BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  int n_resamples, std::uint64_t seed) {
  check_pair_lengths(scores_a.size(), scores_b.size());
  auto mean_over = [](std::span<const double> s) {
    return [s](std::span<const std::size_t> idx) {
      double sum = 0.0;
      for (auto i : idx) sum += s[i];
      return sum / static_cast<double>(idx.size());
    };
  };
  auto res = bootstrap_compare_corpus(scores_a.size(), mean_over(scores_a), mean_over(scores_b), n_resamples, seed);
  res.mean_a = mean_of(scores_a);
  res.mean_b = mean_of(scores_b);
  return res;
}

bool operator==(const FactorAccuracy& a, const FactorAccuracy& b) {
  return a.per_factor == b.per_factor && a.avg == b.avg;
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  return a.bleu4 == b.bleu4 && a.rouge_l == b.rouge_l && a.meteor_lite == b.meteor_lite &&
         a.distinct1 == b.distinct1 && a.distinct2 == b.distinct2 && a.factors == b.factors &&
         a.evidence == b.evidence && a.per_example == b.per_example;
}

std::string EvalReport::to_json() const {
  Json j;
  j["bleu4"] = bleu4;
  j["rouge_l"] = rouge_l;
  j["meteor_lite"] = meteor_lite;
  j["distinct1"] = distinct1;
  j["distinct2"] = distinct2;
  j["factor_accuracy"] = accuracy_to_json(factors);
  j["factor_evidence"] = to_string(evidence);
  Json rows = Json::array();
  for (const auto& e : per_example) {
    Json row;
    row["id"] = e.id;
    row["rouge_l"] = e.rouge_l;
    row["meteor_lite"] = e.meteor_lite;
    Json flags;
    for (Factor f : kAllFactors) flags[std::string(to_string(f))] = e.factor_correct[static_cast<std::size_t>(f)];
    row["factor_correct"] = std::move(flags);
    row["hypothesis"] = e.hypothesis;
    row["reference"] = e.reference;
    rows.push_back(std::move(row));
  }
  j["per_example"] = std::move(rows);
  return j.dump(2);
}

EvalReport EvalReport::from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& err) {
    throw SchemaError(0, "<report>", err.what());
  }
  EvalReport r;
  try {
    r.bleu4 = j.at("bleu4").get<double>();
    r.rouge_l = j.at("rouge_l").get<double>();
    r.meteor_lite = j.at("meteor_lite").get<double>();
    r.distinct1 = j.at("distinct1").get<double>();
    r.distinct2 = j.at("distinct2").get<double>();
    const auto& acc = j.at("factor_accuracy");
    for (Factor f : kAllFactors) {
      r.factors.per_factor[static_cast<std::size_t>(f)] = acc.at(std::string(to_string(f))).get<double>();
    }
    r.factors.avg = acc.at("avg").get<double>();
    const auto evidence = factor_evidence_from_string(j.at("factor_evidence").get<std::string>());
    if (!evidence) throw SchemaError(0, "factor_evidence", "unknown evidence source");
    r.evidence = *evidence;
    for (const auto& row : j.at("per_example")) {
      PerExampleScore e;
      e.id = row.at("id").get<std::string>();
      e.rouge_l = row.at("rouge_l").get<double>();
      e.meteor_lite = row.at("meteor_lite").get<double>();
      for (Factor f : kAllFactors) {
        e.factor_correct[static_cast<std::size_t>(f)] =
            row.at("factor_correct").at(std::string(to_string(f))).get<bool>();
      }
      e.hypothesis = row.at("hypothesis").get<std::string>();
      e.reference = row.at("reference").get<std::string>();
      r.per_example.push_back(std::move(e));
    }
  } catch (const Json::exception& err) {
    throw SchemaError(0, "<report>", err.what());
  }
  return r;
}

void EvalReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

EvalReport evaluate(std::span<const Hypothesis> hypotheses, std::span<const Example> references,
                    FactorEvidence evidence, const FactorLexicon& lexicon) {
  if (hypotheses.size() != references.size()) {
    throw IdMismatch("hypothesis count " + std::to_string(hypotheses.size()) + " != reference count " +
                     std::to_string(references.size()));
  }
  if (hypotheses.empty()) throw EmptyInput("nothing to evaluate");

  std::vector<DecodedText> decoded;
  std::vector<GoldenFactors> golden;
  std::vector<TokenSequence> hyp_tokens, ref_tokens;
  EvalReport r;
  r.evidence = evidence;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    decoded.push_back({hypotheses[i].id, hypotheses[i].text});
    golden.push_back({references[i].id, references[i].factors});
    PerExampleScore e;
    e.id = hypotheses[i].id;
    e.hypothesis = caption_part(hypotheses[i].text);
    e.reference = references[i].caption;
    hyp_tokens.push_back(metric_tokens(e.hypothesis));
    ref_tokens.push_back(metric_tokens(e.reference));
    r.per_example.push_back(std::move(e));
  }
  const auto flags = factor_correctness(decoded, golden, evidence, lexicon);

  double rouge_sum = 0.0, meteor_sum = 0.0;
  for (std::size_t i = 0; i < r.per_example.size(); ++i) {
    auto& e = r.per_example[i];
    // An empty generation scores zero rather than aborting the corpus.
    const bool empty = hyp_tokens[i].empty() || ref_tokens[i].empty();
    e.rouge_l = empty ? 0.0 : rouge_l(hyp_tokens[i], ref_tokens[i]);
    e.meteor_lite = empty ? 0.0 : meteor_lite(hyp_tokens[i], ref_tokens[i]);
    e.factor_correct = flags[i];
    rouge_sum += e.rouge_l;
    meteor_sum += e.meteor_lite;
  }
  const auto n = static_cast<double>(r.per_example.size());
  r.bleu4 = bleu4(hyp_tokens, ref_tokens);
  r.rouge_l = rouge_sum / n;
  r.meteor_lite = meteor_sum / n;
  r.distinct1 = distinct_n(hyp_tokens, 1);
  r.distinct2 = distinct_n(hyp_tokens, 2);
  r.factors = accuracy_from_flags(flags);
  return r;
}

EvalReport evaluate_files(const std::filesystem::path& hyp_file, const std::filesystem::path& ref_file,
                          FactorEvidence evidence, const FactorLexicon& lexicon) {
  const auto hyps = read_hypotheses(hyp_file);
  const auto refs = read_jsonl(ref_file);
  return evaluate(hyps, refs, evidence, lexicon);
}

const std::vector<std::string>& comparable_metrics() {
  static const std::vector<std::string> names = {"bleu4",  "rouge_l", "meteor_lite", "distinct1", "distinct2",
                                                 "gender", "pitch",   "volume",      "speed",     "factor_avg"};
  return names;
}

std::string Comparison::to_json() const {
  Json j;
  j["metric"] = metric;
  j["mean_a"] = mean_a;
  j["mean_b"] = mean_b;
  j["p_value"] = p_value;
  j["significant_at_0.05"] = significant;
  j["n_resamples"] = n_resamples;
  return j.dump(2);
}

Comparison compare_reports(const EvalReport& a, const EvalReport& b, std::string_view metric, int n_resamples,
                           std::uint64_t seed) {
  const auto& names = comparable_metrics();
  if (std::find(names.begin(), names.end(), metric) == names.end()) {
    throw InvalidConfig("unknown metric '" + std::string(metric) + "'");
  }
  if (a.per_example.size() != b.per_example.size()) throw IdMismatch("reports cover different example counts");
  for (std::size_t i = 0; i < a.per_example.size(); ++i) {
    if (a.per_example[i].id != b.per_example[i].id) {
      throw IdMismatch("row " + std::to_string(i) + ": '" + a.per_example[i].id + "' vs '" +
                       b.per_example[i].id + "'");
    }
  }

  Comparison c;
  c.metric = std::string(metric);
  BootstrapResult res;
  if (metric == "bleu4" || metric == "distinct1" || metric == "distinct2") {
    auto tokens_of = [](const EvalReport& r, bool hyp) {
      std::vector<TokenSequence> out;
      for (const auto& e : r.per_example) out.push_back(metric_tokens(hyp ? e.hypothesis : e.reference));
      return out;
    };
    auto stat_for = [&](const EvalReport& r) -> CorpusStatistic {
      auto hyps = std::make_shared<std::vector<TokenSequence>>(tokens_of(r, true));
      if (metric == "bleu4") {
        const auto refs = tokens_of(r, false);
        auto stats = std::make_shared<std::vector<BleuStats>>();
        for (std::size_t i = 0; i < refs.size(); ++i) stats->push_back(bleu_stats((*hyps)[i], refs[i]));
        return [stats](std::span<const std::size_t> idx) {
          BleuStats total;
          for (auto i : idx) total += (*stats)[i];
          return bleu_from_stats(total);
        };
      }
      const int n = metric == "distinct1" ? 1 : 2;
      return [hyps, n](std::span<const std::size_t> idx) {
        std::vector<TokenSequence> sample;
        sample.reserve(idx.size());
        for (auto i : idx) sample.push_back((*hyps)[i]);
        return distinct_n(sample, n);
      };
    };
    res = bootstrap_compare_corpus(a.per_example.size(), stat_for(a), stat_for(b), n_resamples, seed);
  } else {
    auto scores = [&](const EvalReport& r) {
      std::vector<double> s;
      for (const auto& e : r.per_example) {
        if (metric == "rouge_l") {
          s.push_back(e.rouge_l);
        } else if (metric == "meteor_lite") {
          s.push_back(e.meteor_lite);
        } else if (metric == "factor_avg") {
          s.push_back(25.0 * static_cast<double>(std::count(e.factor_correct.begin(), e.factor_correct.end(), true)));
        } else {
          const auto f = factor_from_string(metric);
          s.push_back(e.factor_correct[static_cast<std::size_t>(*f)] ? 100.0 : 0.0);
        }
      }
      return s;
    };
    const auto sa = scores(a);
    const auto sb = scores(b);
    res = bootstrap_compare(sa, sb, n_resamples, seed);
  }
  c.mean_a = res.mean_a;
  c.mean_b = res.mean_b;
  c.p_value = res.p_value;
  c.significant = c.p_value < 0.05;
  c.n_resamples = n_resamples;
  return c;
}

}  // namespace stylecap
