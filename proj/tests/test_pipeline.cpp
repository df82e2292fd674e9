#include <gtest/gtest.h>

#include "stylecap/pipeline.hpp"
#include "support.hpp"

namespace stylecap {
namespace {

ReproConfig tiny_repro() {
  ReproConfig c;
  c.base.corpus.n_train = 60;
  c.base.corpus.n_dev = 20;
  c.base.corpus.n_test = 20;
  c.base.train.max_epochs = 2;
  c.base.train.patience = 1;
  c.base.train.shape.embed = 8;
  c.base.train.shape.hidden = 16;
  c.seeds = {5};
  c.bootstrap_resamples = 50;
  return c;
}

TEST(Repro, SystemMatrix) {
  const auto& systems = repro_systems();
  ASSERT_EQ(systems.size(), 8u);
  int gts = 0;
  for (const auto& s : systems) {
    ASSERT_TRUE(s.strategy);
    if (*s.strategy == Strategy::GtS) {
      ++gts;
      EXPECT_NE(s.target, TargetMode::Caption) << s.name;
    }
  }
  EXPECT_EQ(gts, 2);
  EXPECT_FALSE(ground_truth_system().strategy);
}

TEST(Repro, SeedOverridesEveryStage) {
  const auto c = tiny_repro();
  const auto r = c.run_for_seed(9);
  EXPECT_EQ(r.corpus.seed, 9u);
  EXPECT_EQ(r.train.seed, 9u);
  EXPECT_EQ(r.decode.seed, 9u);
  EXPECT_EQ(r.corpus.n_train, 60u);
}

TEST(Repro, DirectionalChecksUseTwoThirdsMajority) {
  auto make_seed = [](double golden_greedy, double caption_greedy) {
    SeedResult s;
    for (const auto& sys : repro_systems()) {
      SystemScores sc;
      sc.system = sys.name;
      sc.factors.avg = 50;
      s.systems.push_back(sc);
    }
    for (auto& sc : s.systems) {
      if (sc.system == "FCC-golden / greedy") sc.factors.avg = golden_greedy;
      if (sc.system == "Caption / greedy") sc.factors.avg = caption_greedy;
    }
    return s;
  };
  const std::vector<SeedResult> seeds = {make_seed(90, 80), make_seed(90, 80), make_seed(70, 80)};
  const auto checks = directional_checks(seeds);
  ASSERT_FALSE(checks.empty());
  EXPECT_EQ(checks[0].per_seed, (std::vector<bool>{true, true, false}));
  EXPECT_TRUE(checks[0].passed);
}

TEST(Repro, TinyRunProducesFullTable) {
  testing::TempDir dir("repro");
  auto c = tiny_repro();
  c.artifacts_dir = dir.path();
  const auto r = run_repro(c);
  ASSERT_EQ(r.seeds.size(), 1u);
  const auto& s = r.seeds[0];
  EXPECT_EQ(s.systems.size(), 9u);
  EXPECT_EQ(s.systems.back().system, ground_truth_system().name);
  EXPECT_EQ(s.scores("Ground truth").rouge_l, 1.0);
  EXPECT_EQ(s.tests.size(), 11u);
  for (const auto& t : s.tests) EXPECT_EQ(t.result.n_resamples, 50);
  EXPECT_EQ(r.checks.size(), 4u);

  const auto md = r.to_markdown();
  for (const auto& sys : repro_systems()) EXPECT_NE(md.find(sys.name), std::string::npos) << sys.name;
  EXPECT_NE(md.find("BERTScore"), std::string::npos);

  const auto j = r.to_json();
  EXPECT_EQ(j.at("config").at("corpus").at("n_train"), 60);
  EXPECT_TRUE(std::filesystem::exists(dir / "seed-5" / "config.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "seed-5" / "test.jsonl"));
}

}  // namespace
}  // namespace stylecap
