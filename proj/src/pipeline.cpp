#include "stylecap/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <mutex>
#include <thread>

#include "stylecap/errors.hpp"

namespace stylecap {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slug(std::string_view name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

std::string fmt(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Json scores_to_json(const SystemScores& s) {
  Json j;
  j["system"] = s.system;
  j["bleu4"] = s.bleu4;
  j["rouge_l"] = s.rouge_l;
  j["meteor_lite"] = s.meteor_lite;
  j["distinct1"] = s.distinct1;
  j["distinct2"] = s.distinct2;
  for (Factor f : kAllFactors) j[std::string(to_string(f))] = s.factors.of(f);
  j["factor_avg"] = s.factors.avg;
  return j;
}

std::string table_row(const SystemScores& s) {
  return "| " + s.system + " | " + fmt(s.bleu4, 3) + " | " + fmt(s.rouge_l, 3) + " | " + fmt(s.meteor_lite, 3) +
         " | " + fmt(s.distinct1, 3) + " | " + fmt(s.distinct2, 3) + " | " + fmt(s.factors.of(Factor::Gender), 1) +
         " | " + fmt(s.factors.of(Factor::Pitch), 1) + " | " + fmt(s.factors.of(Factor::Speed), 1) + " | " +
         fmt(s.factors.of(Factor::Volume), 1) + " | " + fmt(s.factors.avg, 1) + " |\n";
}

constexpr std::string_view kTableHeader =
    "| System | B@4 | ROU | MET | dis-1 | dis-2 | Gender | Pitch | Speed | Volume | Avg. |\n"
    "|---|---|---|---|---|---|---|---|---|---|---|\n";

struct PlannedTest {
  std::string_view a;
  std::string_view b;
  std::string_view metric;
};

// Improvement claims test a > b; the "no degradation" claims test greedy > gts,
// where a significant result would mean GtS lost quality.
constexpr PlannedTest kPlannedTests[] = {
    {"FCC-golden / greedy", "Caption / greedy", "factor_avg"},
    {"FCC-predicted / greedy", "Caption / greedy", "factor_avg"},
    {"FCC-golden / gts", "FCC-golden / greedy", "distinct1"},
    {"FCC-golden / gts", "FCC-golden / greedy", "distinct2"},
    {"FCC-golden / greedy", "FCC-golden / gts", "factor_avg"},
    {"FCC-golden / greedy", "FCC-golden / gts", "bleu4"},
    {"FCC-golden / greedy", "FCC-golden / gts", "rouge_l"},
    {"FCC-golden / greedy", "FCC-golden / gts", "meteor_lite"},
    {"FCC-golden / gts", "FCC-golden / sampling", "factor_avg"},
    {"FCC-predicted / gts", "FCC-predicted / greedy", "distinct2"},
    {"FCC-predicted / greedy", "FCC-predicted / gts", "factor_avg"},
};

bool same_targets(const Dataset& ds, const FactorLexicon& lexicon, std::size_t* fallbacks) {
  bool same = true;
  for (const auto* split : {&ds.train, &ds.dev}) {
    for (const auto& e : *split) {
      std::size_t* counter = split == &ds.train ? fallbacks : nullptr;
      if (target_text(e, TargetMode::FccPredicted, lexicon, counter) !=
          target_text(e, TargetMode::FccGolden, lexicon)) {
        same = false;
      }
    }
  }
  return same;
}

}  // namespace

const std::vector<SystemSpec>& repro_systems() {
  static const std::vector<SystemSpec> systems = {
      {"Caption / greedy", TargetMode::Caption, Strategy::Greedy},
      {"Caption / sampling", TargetMode::Caption, Strategy::Sampling},
      {"FCC-predicted / greedy", TargetMode::FccPredicted, Strategy::Greedy},
      {"FCC-predicted / sampling", TargetMode::FccPredicted, Strategy::Sampling},
      {"FCC-predicted / gts", TargetMode::FccPredicted, Strategy::GtS},
      {"FCC-golden / greedy", TargetMode::FccGolden, Strategy::Greedy},
      {"FCC-golden / sampling", TargetMode::FccGolden, Strategy::Sampling},
      {"FCC-golden / gts", TargetMode::FccGolden, Strategy::GtS},
  };
  return systems;
}

const SystemSpec& ground_truth_system() {
  static const SystemSpec gt{"Ground truth", TargetMode::Caption, std::nullopt};
  return gt;
}

RunConfig ReproConfig::run_for_seed(std::uint64_t seed) const {
  RunConfig rc = base;
  rc.corpus.seed = seed;
  rc.train.seed = seed;
  rc.decode.seed = seed;
  return rc;
}

SystemScores SystemScores::from_report(std::string system, const EvalReport& r) {
  SystemScores s;
  s.system = std::move(system);
  s.bleu4 = r.bleu4;
  s.rouge_l = r.rouge_l;
  s.meteor_lite = r.meteor_lite;
  s.distinct1 = r.distinct1;
  s.distinct2 = r.distinct2;
  s.factors = r.factors;
  return s;
}

const SystemScores& SeedResult::scores(std::string_view system) const {
  for (const auto& s : systems) {
    if (s.system == system) return s;
  }
  throw InvalidConfig("no system named '" + std::string(system) + "'");
}

SeedResult run_seed(const ReproConfig& config, std::uint64_t seed, const ProgressFn& progress) {
  const auto start = Clock::now();
  auto say = [&](const std::string& msg) {
    if (progress) progress("[seed " + std::to_string(seed) + "] " + msg);
  };

  const RunConfig rc = config.run_for_seed(seed);
  const FactorLexicon lexicon = rc.lexicon();
  const Dataset ds = generate_dataset(rc.corpus);

  SeedResult out;
  out.seed = seed;

  say("training caption model");
  const TrainResult caption = train(ds, TargetMode::Caption, rc.train, lexicon);
  say("training fcc-golden model");
  const TrainResult golden = train(ds, TargetMode::FccGolden, rc.train, lexicon);

  // With a lexicon that recovers every golden factor the predicted targets are
  // the golden ones byte for byte, and so is the trained model.
  std::optional<TrainResult> predicted_own;
  if (same_targets(ds, lexicon, &out.gender_fallbacks)) {
    out.predicted_model_reused = true;
  } else {
    say("training fcc-predicted model");
    predicted_own = train(ds, TargetMode::FccPredicted, rc.train, lexicon);
    out.gender_fallbacks = predicted_own->gender_fallbacks;
  }
  const TrainResult& predicted = predicted_own ? *predicted_own : golden;
  out.best_epochs = {caption.best_epoch, predicted.best_epoch, golden.best_epoch};

  auto model_for = [&](TargetMode m) -> const ConditionalLm& {
    switch (m) {
      case TargetMode::Caption: return caption.model;
      case TargetMode::FccPredicted: return predicted.model;
      case TargetMode::FccGolden: return golden.model;
    }
    return caption.model;
  };

  std::optional<std::filesystem::path> dir;
  if (config.artifacts_dir) {
    dir = *config.artifacts_dir / ("seed-" + std::to_string(seed));
    std::filesystem::create_directories(*dir);
    write_json_file(*dir / "config.json", rc.to_json());
    write_jsonl(*dir / "test.jsonl", ds.test);
  }

  std::vector<EvalReport> reports;
  for (const auto& sys : repro_systems()) {
    say("decoding " + sys.name);
    DecodeConfig dc = rc.decode;
    dc.strategy = *sys.strategy;
    const auto hyps = decode_examples(model_for(sys.target), ds.test, dc);
    reports.push_back(evaluate(hyps, ds.test, config.evidence, lexicon));
    out.systems.push_back(SystemScores::from_report(sys.name, reports.back()));
    if (dir) {
      write_hypotheses(*dir / (slug(sys.name) + ".hyp.jsonl"), hyps);
      reports.back().save(*dir / (slug(sys.name) + ".report.json"));
    }
  }

  std::vector<Hypothesis> refs;
  refs.reserve(ds.test.size());
  for (const auto& e : ds.test) refs.push_back({e.id, Strategy::Greedy, e.caption, std::nullopt, false, seed});
  out.systems.push_back(
      SystemScores::from_report(ground_truth_system().name, evaluate(refs, ds.test, config.evidence, lexicon)));

  say("bootstrap tests");
  auto report_of = [&](std::string_view name) -> const EvalReport& {
    for (std::size_t i = 0; i < repro_systems().size(); ++i) {
      if (repro_systems()[i].name == name) return reports[i];
    }
    throw InvalidConfig("no system named '" + std::string(name) + "'");
  };
  for (const auto& t : kPlannedTests) {
    out.tests.push_back({std::string(t.a), std::string(t.b), std::string(t.metric),
                         compare_reports(report_of(t.a), report_of(t.b), t.metric, config.bootstrap_resamples, seed)});
  }

  out.seconds = seconds_since(start);
  say("done in " + fmt(out.seconds, 1) + " s");
  return out;
}

std::vector<DirectionalCheck> directional_checks(const std::vector<SeedResult>& seeds) {
  struct Rule {
    std::string_view key;
    std::string_view description;
    std::function<bool(const SeedResult&)> holds;
  };
  const Rule rules[] = {
      {"a", "FCC-golden greedy factor avg >= Caption greedy factor avg",
       [](const SeedResult& s) {
         return s.scores("FCC-golden / greedy").factors.avg >= s.scores("Caption / greedy").factors.avg;
       }},
      {"b", "FCC-golden GtS distinct-2 > FCC-golden greedy distinct-2",
       [](const SeedResult& s) {
         return s.scores("FCC-golden / gts").distinct2 > s.scores("FCC-golden / greedy").distinct2;
       }},
      {"c", "FCC-golden GtS factor avg >= FCC-golden sampling factor avg",
       [](const SeedResult& s) {
         return s.scores("FCC-golden / gts").factors.avg >= s.scores("FCC-golden / sampling").factors.avg;
       }},
      {"d", "Caption sampling factor avg <= Caption greedy factor avg",
       [](const SeedResult& s) {
         return s.scores("Caption / sampling").factors.avg <= s.scores("Caption / greedy").factors.avg;
       }},
  };
  const std::size_t needed = (2 * seeds.size() + 2) / 3;
  std::vector<DirectionalCheck> checks;
  for (const auto& r : rules) {
    DirectionalCheck c{std::string(r.key), std::string(r.description), {}, false};
    std::size_t held = 0;
    for (const auto& s : seeds) {
      c.per_seed.push_back(r.holds(s));
      held += c.per_seed.back() ? 1 : 0;
    }
    c.passed = !seeds.empty() && held >= needed;
    checks.push_back(std::move(c));
  }
  return checks;
}

ReproResult run_repro(const ReproConfig& config, const ProgressFn& progress) {
  if (config.seeds.empty()) throw InvalidConfig("repro needs at least one seed");
  if (config.jobs < 1) throw InvalidConfig("jobs must be >= 1");
  config.base.train.validate();
  config.base.decode.validate();

  const auto start = Clock::now();
  ReproResult result;
  result.config = config;
  result.seeds.resize(config.seeds.size());

  std::mutex progress_mutex;
  ProgressFn locked;
  if (progress) {
    locked = [&](std::string_view msg) {
      std::lock_guard lock(progress_mutex);
      progress(msg);
    };
  }

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), config.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) result.seeds[i] = run_seed(config, config.seeds[i], locked);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(config.seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
          try {
            result.seeds[i] = run_seed(config, config.seeds[i], locked);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  result.checks = directional_checks(result.seeds);
  result.seconds = seconds_since(start);
  return result;
}

bool ReproResult::all_checks_passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

SystemScores ReproResult::mean_scores(std::string_view system) const {
  SystemScores m;
  m.system = std::string(system);
  if (seeds.empty()) return m;
  for (const auto& s : seeds) {
    const auto& x = s.scores(system);
    m.bleu4 += x.bleu4;
    m.rouge_l += x.rouge_l;
    m.meteor_lite += x.meteor_lite;
    m.distinct1 += x.distinct1;
    m.distinct2 += x.distinct2;
    for (std::size_t k = 0; k < 4; ++k) m.factors.per_factor[k] += x.factors.per_factor[k];
    m.factors.avg += x.factors.avg;
  }
  const auto n = static_cast<double>(seeds.size());
  m.bleu4 /= n;
  m.rouge_l /= n;
  m.meteor_lite /= n;
  m.distinct1 /= n;
  m.distinct2 /= n;
  for (auto& v : m.factors.per_factor) v /= n;
  m.factors.avg /= n;
  return m;
}

std::string ReproResult::to_markdown() const {
  std::string md = "# Reproduction summary\n\n";
  md += "Seeds:";
  for (auto s : config.seeds) md += " " + std::to_string(s);
  md += ". Corpus " + std::to_string(config.base.corpus.n_train) + "/" + std::to_string(config.base.corpus.n_dev) +
        "/" + std::to_string(config.base.corpus.n_test) + ", noise sigma " + fmt(config.base.corpus.noise_sigma, 2) +
        ", top-p " + fmt(config.base.decode.top_p, 2) + ", top-k " + std::to_string(config.base.decode.top_k) +
        ", bootstrap n=" + std::to_string(config.bootstrap_resamples) + ", factor evidence: " +
        std::string(to_string(config.evidence)) + ". Wall clock " + fmt(seconds, 1) + " s.\n\n";

  md += "## Mean over seeds\n\n";
  md += kTableHeader;
  for (const auto& sys : repro_systems()) md += table_row(mean_scores(sys.name));
  md += table_row(mean_scores(ground_truth_system().name));
  md += "\nBERTScore is not reported: it needs pretrained contextual embeddings.\n\n";

  md += "## Directional checks\n\n| Check | Ordering |";
  for (auto s : config.seeds) md += " seed " + std::to_string(s) + " |";
  md += " Result |\n|---|---|";
  for (std::size_t i = 0; i < config.seeds.size(); ++i) md += "---|";
  md += "---|\n";
  for (const auto& c : checks) {
    md += "| (" + c.key + ") | " + c.description + " |";
    for (bool b : c.per_seed) md += b ? " yes |" : " no |";
    md += c.passed ? " PASS |\n" : " FAIL |\n";
  }

  for (const auto& s : seeds) {
    md += "\n## Seed " + std::to_string(s.seed) + "\n\n";
    md += kTableHeader;
    for (const auto& x : s.systems) md += table_row(x);
    md += "\nBest epochs (caption, fcc-predicted, fcc-golden):";
    for (int e : s.best_epochs) md += " " + std::to_string(e);
    md += ". FCC-predicted model " + std::string(s.predicted_model_reused ? "shared with" : "trained apart from") +
          " FCC-golden; gender fallbacks: " + std::to_string(s.gender_fallbacks) + ".\n\n";
    md += "| A | B | Metric | mean A | mean B | p (A not better) | p < 0.05 |\n|---|---|---|---|---|---|---|\n";
    for (const auto& t : s.tests) {
      md += "| " + t.a + " | " + t.b + " | " + t.metric + " | " + fmt(t.result.mean_a, 3) + " | " +
            fmt(t.result.mean_b, 3) + " | " + fmt(t.result.p_value, 3) + " | " +
            (t.result.significant ? "yes" : "no") + " |\n";
    }
  }
  return md;
}

Json ReproResult::to_json() const {
  Json j;
  Json cfg = config.base.to_json();
  cfg["seeds"] = config.seeds;
  cfg["bootstrap_resamples"] = config.bootstrap_resamples;
  cfg["factor_evidence"] = to_string(config.evidence);
  j["config"] = std::move(cfg);
  j["seconds"] = seconds;

  Json mean = Json::array();
  for (const auto& sys : repro_systems()) mean.push_back(scores_to_json(mean_scores(sys.name)));
  mean.push_back(scores_to_json(mean_scores(ground_truth_system().name)));
  j["mean"] = std::move(mean);

  Json checks_json = Json::array();
  for (const auto& c : checks) {
    checks_json.push_back(Json{{"key", c.key}, {"description", c.description}, {"per_seed", c.per_seed},
                               {"passed", c.passed}});
  }
  j["checks"] = std::move(checks_json);

  Json seeds_json = Json::array();
  for (const auto& s : seeds) {
    Json sj;
    sj["seed"] = s.seed;
    sj["seconds"] = s.seconds;
    sj["best_epochs"] = s.best_epochs;
    sj["predicted_model_reused"] = s.predicted_model_reused;
    sj["gender_fallbacks"] = s.gender_fallbacks;
    Json systems = Json::array();
    for (const auto& x : s.systems) systems.push_back(scores_to_json(x));
    sj["systems"] = std::move(systems);
    Json tests = Json::array();
    for (const auto& t : s.tests) {
      tests.push_back(Json{{"a", t.a}, {"b", t.b}, {"metric", t.metric}, {"mean_a", t.result.mean_a},
                           {"mean_b", t.result.mean_b}, {"p_value", t.result.p_value},
                           {"significant_at_0.05", t.result.significant}});
    }
    sj["tests"] = std::move(tests);
    seeds_json.push_back(std::move(sj));
  }
  j["seeds"] = std::move(seeds_json);
  j["footnote"] = "BERTScore is not reported: it needs pretrained contextual embeddings.";
  return j;
}

}  // namespace stylecap
