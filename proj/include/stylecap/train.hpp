#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stylecap/adamw.hpp"
#include "stylecap/corpus.hpp"
#include "stylecap/lm.hpp"

namespace stylecap {

enum class TargetMode { Caption, FccGolden, FccPredicted };

std::string_view to_string(TargetMode m) noexcept;
// Accepts "caption", "fcc-golden", "fcc-predicted".
std::optional<TargetMode> target_mode_from_string(std::string_view s) noexcept;

struct TrainConfig {
  AdamWConfig optimizer;
  std::size_t batch_size = 16;  // sequences per optimizer step
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 1;
  // Vocabulary size and condition width are filled in from the data.
  LmShape shape;

  void validate() const;  // throws InvalidConfig

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double dev_loss = 0;
};

// Tracks the best dev loss. Training stops once the number of consecutive
// epochs without improvement exceeds `patience`.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Records the dev loss of the next epoch; returns true on a new best.
  bool update(double dev_loss);
  bool should_stop() const noexcept { return stale_ > patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0;
};

// Training text of one example under a target mode.
std::string target_text(const Example& e, TargetMode mode, const FactorLexicon& lexicon,
                        std::size_t* gender_fallbacks = nullptr);

struct TrainResult {
  ConditionalLm model;  // parameters of the best dev epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  int stopped_epoch = 0;
  std::size_t gender_fallbacks = 0;  // FccPredicted only
};

// Mini-batch AdamW on mean next-token cross-entropy with dev-loss early
// stopping. Deterministic given (dataset, mode, config). Throws EmptyInput
// when the train or dev split is empty.
TrainResult train(const Dataset& dataset, TargetMode mode, const TrainConfig& config,
                  const FactorLexicon& lexicon = FactorLexicon::builtin());

// Mean cross-entropy of a split under the model.
double split_loss(const ConditionalLm& model, const std::vector<Example>& split, TargetMode mode,
                  const FactorLexicon& lexicon = FactorLexicon::builtin());

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

struct Checkpoint {
  ConditionalLm model;
  TrainConfig config;
  TargetMode target = TargetMode::Caption;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::string_view kCheckpointMagic = "stylecap-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// JSON document: magic, version, target, config echo, vocabulary, then the
// flat parameter arrays in zip_tensors order, each row-major with its shape.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError, VersionMismatch (bad magic or version), SchemaError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stylecap
