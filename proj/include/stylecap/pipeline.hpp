#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stylecap/config.hpp"
#include "stylecap/metrics.hpp"

namespace stylecap {

// One row of the results table: a training target and a decoding strategy.
// The ground-truth row has no strategy and scores the references themselves.
struct SystemSpec {
  std::string name;
  TargetMode target = TargetMode::Caption;
  std::optional<Strategy> strategy;
};

// Caption x {greedy, sampling}, FCC-predicted x {greedy, sampling, gts},
// FCC-golden x {greedy, sampling, gts}.
const std::vector<SystemSpec>& repro_systems();
const SystemSpec& ground_truth_system();

struct ReproConfig {
  RunConfig base;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int bootstrap_resamples = 1000;
  FactorEvidence evidence = FactorEvidence::CaptionLexicon;
  int jobs = 1;  // seeds run concurrently up to this many at a time
  std::optional<std::filesystem::path> artifacts_dir;  // per-seed hypotheses and reports

  // Seed s overrides the corpus, training and decoding seeds.
  RunConfig run_for_seed(std::uint64_t seed) const;
};

// Scores of one system on one seed; per-example rows are dropped.
struct SystemScores {
  std::string system;
  double bleu4 = 0;
  double rouge_l = 0;
  double meteor_lite = 0;
  double distinct1 = 0;
  double distinct2 = 0;
  FactorAccuracy factors;

  static SystemScores from_report(std::string system, const EvalReport& r);
};

// A paired bootstrap test of "a is better than b".
struct SignificanceTest {
  std::string a;
  std::string b;
  std::string metric;
  Comparison result;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<SystemScores> systems;  // repro_systems() order, then ground truth
  std::vector<SignificanceTest> tests;
  std::vector<int> best_epochs;       // per trained target: caption, fcc-predicted, fcc-golden
  std::size_t gender_fallbacks = 0;   // FCC-predicted targets that needed the golden gender
  bool predicted_model_reused = false;
  double seconds = 0;

  const SystemScores& scores(std::string_view system) const;
};

// One directional ordering checked on every seed.
struct DirectionalCheck {
  std::string key;  // "a".."d"
  std::string description;
  std::vector<bool> per_seed;
  bool passed = false;  // holds on at least two thirds of the seeds, rounded up
};

struct ReproResult {
  ReproConfig config;
  std::vector<SeedResult> seeds;
  std::vector<DirectionalCheck> checks;
  double seconds = 0;

  bool all_checks_passed() const;
  // Mean over seeds of one system.
  SystemScores mean_scores(std::string_view system) const;
  std::string to_markdown() const;
  Json to_json() const;
};

using ProgressFn = std::function<void(std::string_view)>;

SeedResult run_seed(const ReproConfig& config, std::uint64_t seed, const ProgressFn& progress = {});
std::vector<DirectionalCheck> directional_checks(const std::vector<SeedResult>& seeds);
ReproResult run_repro(const ReproConfig& config, const ProgressFn& progress = {});

}  // namespace stylecap
