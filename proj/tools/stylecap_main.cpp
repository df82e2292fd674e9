#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stylecap/config.hpp"
#include "stylecap/errors.hpp"
#include "stylecap/metrics.hpp"
#include "stylecap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stylecap;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kSchema = 4 };

template <typename T>
void override_field(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

RunConfig base_config(const std::optional<std::string>& path) {
  return path ? RunConfig::load(*path) : RunConfig{};
}

// Path flags re-resolve the corpus templates, which live inside CorpusSpec.
void apply_paths(RunConfig& rc, const std::optional<std::string>& templates, const std::optional<std::string>& lexicon) {
  override_field(lexicon, rc.lexicon_path);
  if (templates) {
    rc.templates_path = *templates;
    rc.corpus.templates = rc.templates();
  }
}

void echo_config(const fs::path& artifact, const RunConfig& rc) {
  write_json_file(fs::path(artifact.string() + ".config.json"), rc.to_json());
}

Dataset load_dataset_dir(const fs::path& dir, bool need_test) {
  if (!fs::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  Dataset ds;
  ds.train = read_jsonl(dir / "train.jsonl");
  ds.dev = read_jsonl(dir / "dev.jsonl");
  if (need_test) ds.test = read_jsonl(dir / "test.jsonl");
  return ds;
}

Strategy parse_strategy(const std::string& s) {
  const auto v = strategy_from_string(s);
  if (!v) throw UsageError("unknown strategy '" + s + "' (expected greedy, sampling or gts)");
  return *v;
}

TargetMode parse_target(const std::string& s) {
  const auto v = target_mode_from_string(s);
  if (!v) throw UsageError("unknown target '" + s + "' (expected caption, fcc-golden or fcc-predicted)");
  return *v;
}

FactorEvidence parse_evidence(const std::string& s) {
  const auto v = factor_evidence_from_string(s);
  if (!v) throw UsageError("unknown factor evidence '" + s + "' (expected lexicon or phrase)");
  return *v;
}

void print_report(const EvalReport& r) {
  std::cout << "bleu4 " << r.bleu4 << "\nrouge_l " << r.rouge_l << "\nmeteor_lite " << r.meteor_lite
            << "\ndistinct1 " << r.distinct1 << "\ndistinct2 " << r.distinct2;
  for (Factor f : kAllFactors) std::cout << '\n' << to_string(f) << ' ' << r.factors.of(f);
  std::cout << "\nfactor_avg " << r.factors.avg << '\n';
}

struct CorpusFlags {
  std::optional<std::size_t> n_train, n_dev, n_test;
  std::optional<double> noise;
  std::optional<int> dim;

  void add(CLI::App* app) {
    app->add_option("--train", n_train, "training examples");
    app->add_option("--dev", n_dev, "development examples");
    app->add_option("--test", n_test, "test examples");
    app->add_option("--noise", noise, "style vector noise sigma");
    app->add_option("--dim", dim, "style vector dimension (multiple of 16)");
  }

  void apply_to(CorpusSpec& c) const {
    override_field(n_train, c.n_train);
    override_field(n_dev, c.n_dev);
    override_field(n_test, c.n_test);
    override_field(noise, c.noise_sigma);
    override_field(dim, c.dim);
    if (c.n_train == 0 || c.n_dev == 0 || c.n_test == 0) throw UsageError("split sizes must be positive");
    if (!(c.noise_sigma >= 0.0)) throw UsageError("--noise must be >= 0");
  }
};

struct TrainFlags {
  std::optional<double> lr, weight_decay;
  std::optional<int> epochs, patience;
  std::optional<std::size_t> batch_size;

  void add(CLI::App* app) {
    app->add_option("--lr", lr, "AdamW learning rate");
    app->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay");
    app->add_option("--epochs", epochs, "maximum epochs");
    app->add_option("--patience", patience, "early-stopping patience");
    app->add_option("--batch-size", batch_size, "sequences per optimizer step");
  }

  void apply_to(TrainConfig& t) const {
    override_field(lr, t.optimizer.learning_rate);
    override_field(weight_decay, t.optimizer.weight_decay);
    override_field(epochs, t.max_epochs);
    override_field(patience, t.patience);
    override_field(batch_size, t.batch_size);
  }
};

struct DecodeFlags {
  std::optional<std::string> strategy;
  std::optional<double> top_p;
  std::optional<int> top_k, max_len;

  void add(CLI::App* app) {
    app->add_option("--strategy", strategy, "greedy, sampling or gts");
    app->add_option("--top-p", top_p, "nucleus threshold");
    app->add_option("--top-k", top_k, "top-k cutoff");
    app->add_option("--max-len", max_len, "maximum generated tokens");
  }

  void apply_to(DecodeConfig& d) const {
    if (strategy) d.strategy = parse_strategy(*strategy);
    override_field(top_p, d.top_p);
    override_field(top_k, d.top_k);
    override_field(max_len, d.max_len);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor-conditioned style captioning laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stylecap 0.1.0");

  std::optional<std::string> config_path, templates_path, lexicon_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config; flags override its fields")->check(CLI::ExistingFile);
    sub->add_option("--templates", templates_path, "caption template file");
    sub->add_option("--lexicon", lexicon_path, "factor lexicon file");
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate train/dev/test JSONL files");
  add_common(gen);
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  CorpusFlags gen_corpus;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen_corpus.add(gen);

  // train
  auto* trn = app.add_subcommand("train", "train a conditional language model");
  add_common(trn);
  std::string trn_data, trn_out;
  std::optional<std::string> trn_target, trn_log;
  std::optional<std::uint64_t> trn_seed;
  TrainFlags trn_flags;
  trn->add_option("--data", trn_data, "directory with train.jsonl and dev.jsonl")->required();
  trn->add_option("--out", trn_out, "checkpoint path")->required();
  trn->add_option("--target", trn_target, "caption, fcc-golden or fcc-predicted");
  trn->add_option("--log", trn_log, "training log (default: <out>.log.jsonl)");
  trn->add_option("--seed", trn_seed, "initialization and shuffling seed");
  trn_flags.add(trn);

  // decode
  auto* dec = app.add_subcommand("decode", "decode captions for a JSONL split");
  add_common(dec);
  std::string dec_ckpt, dec_input, dec_out;
  std::optional<std::uint64_t> dec_seed;
  DecodeFlags dec_flags;
  dec->add_option("--checkpoint", dec_ckpt, "checkpoint path")->required();
  dec->add_option("--input", dec_input, "examples to caption (JSONL)")->required();
  dec->add_option("--out", dec_out, "hypothesis JSONL path")->required();
  dec->add_option("--seed", dec_seed, "sampling seed");
  dec_flags.add(dec);

  // eval
  auto* ev = app.add_subcommand("eval", "score hypotheses against references");
  std::string ev_hyp, ev_ref;
  std::optional<std::string> ev_out, ev_lexicon;
  std::string ev_evidence = "lexicon";
  ev->add_option("--hyp", ev_hyp, "hypothesis JSONL")->required();
  ev->add_option("--ref", ev_ref, "reference examples JSONL")->required();
  ev->add_option("--out", ev_out, "report JSON path");
  ev->add_option("--evidence", ev_evidence, "factor evidence: lexicon (caption text) or phrase (FCC prefix)");
  ev->add_option("--lexicon", ev_lexicon, "factor lexicon file");

  // compare
  auto* cmp = app.add_subcommand("compare", "paired bootstrap test of report A against report B");
  std::string cmp_a, cmp_b, cmp_metric = "factor_avg";
  std::optional<std::string> cmp_out;
  int cmp_n = 1000;
  std::uint64_t cmp_seed = 0;
  cmp->add_option("--a", cmp_a, "report of system A")->required();
  cmp->add_option("--b", cmp_b, "report of system B")->required();
  cmp->add_option("--metric", cmp_metric, "metric to test");
  cmp->add_option("--n", cmp_n, "bootstrap resamples");
  cmp->add_option("--seed", cmp_seed, "bootstrap seed");
  cmp->add_option("--out", cmp_out, "comparison JSON path");

  // repro
  auto* rep = app.add_subcommand("repro", "train, decode and score the full system matrix over several seeds");
  add_common(rep);
  std::string rep_out;
  std::vector<std::uint64_t> rep_seeds = {1, 2, 3};
  int rep_jobs = 1;
  int rep_bootstrap = 1000;
  std::string rep_evidence = "lexicon";
  bool rep_artifacts = false, rep_quiet = false, rep_strict = false;
  CorpusFlags rep_corpus;
  TrainFlags rep_train;
  DecodeFlags rep_decode;
  rep->add_option("--out", rep_out, "output directory")->required();
  rep->add_option("--seeds", rep_seeds, "seeds (each sets corpus, training and decoding seeds)")->delimiter(',');
  rep->add_option("--jobs", rep_jobs, "seeds run in parallel");
  rep->add_option("--bootstrap", rep_bootstrap, "bootstrap resamples");
  rep->add_option("--evidence", rep_evidence, "factor evidence: lexicon or phrase");
  rep->add_flag("--artifacts", rep_artifacts, "also write per-seed hypotheses and reports");
  rep->add_flag("--quiet", rep_quiet, "no progress output");
  rep->add_flag("--strict", rep_strict, "exit with status 1 when a directional check fails");
  rep_corpus.add(rep);
  rep_train.add(rep);
  rep_decode.add(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      RunConfig rc = base_config(config_path);
      apply_paths(rc, templates_path, lexicon_path);
      gen_corpus.apply_to(rc.corpus);
      override_field(gen_seed, rc.corpus.seed);
      const Dataset ds = generate_dataset(rc.corpus);
      const fs::path out(gen_out);
      fs::create_directories(out);
      write_jsonl(out / "train.jsonl", ds.train);
      write_jsonl(out / "dev.jsonl", ds.dev);
      write_jsonl(out / "test.jsonl", ds.test);
      write_json_file(out / "config.json", rc.to_json());
      std::cout << "wrote " << ds.train.size() << '/' << ds.dev.size() << '/' << ds.test.size() << " examples to "
                << out.string() << '\n';
    } else if (trn->parsed()) {
      RunConfig rc = base_config(config_path);
      apply_paths(rc, templates_path, lexicon_path);
      trn_flags.apply_to(rc.train);
      override_field(trn_seed, rc.train.seed);
      if (trn_target) rc.target = parse_target(*trn_target);
      const Dataset ds = load_dataset_dir(trn_data, false);
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult result = train(ds, rc.target, rc.train, rc.lexicon());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_checkpoint(trn_out, {result.model, rc.train, rc.target});
      write_training_log(trn_log.value_or(trn_out + ".log.jsonl"), result.log);
      echo_config(trn_out, rc);
      std::cout << "target " << to_string(rc.target) << ": best epoch " << result.best_epoch << " of "
                << result.stopped_epoch << ", dev loss " << result.log[result.best_epoch - 1].dev_loss << ", "
                << secs << " s\n";
      if (rc.target == TargetMode::FccPredicted) {
        std::cout << "gender fallbacks: " << result.gender_fallbacks << '\n';
      }
    } else if (dec->parsed()) {
      RunConfig rc = base_config(config_path);
      apply_paths(rc, templates_path, lexicon_path);
      dec_flags.apply_to(rc.decode);
      override_field(dec_seed, rc.decode.seed);
      try {
        rc.decode.validate();
      } catch (const InvalidConfig& e) {
        throw UsageError(e.what());
      }
      const Checkpoint ckpt = load_checkpoint(dec_ckpt);
      rc.train = ckpt.config;
      rc.target = ckpt.target;
      const auto examples = read_jsonl(dec_input);
      const auto hyps = decode_examples(ckpt.model, examples, rc.decode);
      write_hypotheses(dec_out, hyps);
      echo_config(dec_out, rc);
      std::cout << "decoded " << hyps.size() << " examples with " << to_string(rc.decode.strategy) << '\n';
    } else if (ev->parsed()) {
      const FactorLexicon lexicon = ev_lexicon ? FactorLexicon::load(*ev_lexicon) : FactorLexicon::builtin();
      const EvalReport report = evaluate_files(ev_hyp, ev_ref, parse_evidence(ev_evidence), lexicon);
      if (ev_out) report.save(*ev_out);
      print_report(report);
    } else if (cmp->parsed()) {
      if (cmp_n < 1) throw UsageError("--n must be >= 1");
      const auto& names = comparable_metrics();
      if (std::find(names.begin(), names.end(), cmp_metric) == names.end()) {
        throw UsageError("unknown metric '" + cmp_metric + "'");
      }
      const Comparison c = compare_reports(EvalReport::load(cmp_a), EvalReport::load(cmp_b), cmp_metric, cmp_n, cmp_seed);
      if (cmp_out) {
        std::ofstream out(*cmp_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + *cmp_out);
        out << c.to_json() << '\n';
      }
      std::cout << c.to_json() << '\n';
    } else if (rep->parsed()) {
      ReproConfig cfg;
      cfg.base = base_config(config_path);
      apply_paths(cfg.base, templates_path, lexicon_path);
      rep_corpus.apply_to(cfg.base.corpus);
      rep_train.apply_to(cfg.base.train);
      rep_decode.apply_to(cfg.base.decode);
      if (rep_seeds.empty()) throw UsageError("--seeds needs at least one seed");
      if (rep_jobs < 1) throw UsageError("--jobs must be >= 1");
      if (rep_bootstrap < 1) throw UsageError("--bootstrap must be >= 1");
      cfg.seeds = rep_seeds;
      cfg.jobs = rep_jobs;
      cfg.bootstrap_resamples = rep_bootstrap;
      cfg.evidence = parse_evidence(rep_evidence);
      const fs::path out(rep_out);
      fs::create_directories(out);
      if (rep_artifacts) cfg.artifacts_dir = out;
      ProgressFn progress;
      if (!rep_quiet) progress = [](std::string_view msg) { std::cerr << msg << '\n'; };
      const ReproResult result = run_repro(cfg, progress);
      const std::string md = result.to_markdown();
      {
        std::ofstream f(out / "repro.md", std::ios::binary);
        if (!f) throw IoError("cannot write " + (out / "repro.md").string());
        f << md;
      }
      write_json_file(out / "repro.json", result.to_json());
      std::cout << md;
      return rep_strict && !result.all_checks_passed() ? kFailure : kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const VersionMismatch& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const IdMismatch& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
