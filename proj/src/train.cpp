#include "stylecap/train.hpp"

#include <fstream>
#include <numeric>

#include "stylecap/config.hpp"
#include "stylecap/errors.hpp"

namespace stylecap {
namespace {

using Sequence = ConditionedSequence<double>;

std::vector<Sequence> encode(const std::vector<Example>& split, const std::vector<std::string>& texts,
                             const Vocabulary& vocab) {
  std::vector<Sequence> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    out.push_back({vocab.tokenize(texts[i]), split[i].style_vector});
  }
  return out;
}

std::vector<std::string> texts_for(const std::vector<Example>& split, TargetMode mode,
                                   const FactorLexicon& lexicon, std::size_t* fallbacks) {
  std::vector<std::string> texts;
  texts.reserve(split.size());
  for (const auto& e : split) texts.push_back(target_text(e, mode, lexicon, fallbacks));
  return texts;
}

}  // namespace

std::string_view to_string(TargetMode m) noexcept {
  switch (m) {
    case TargetMode::Caption: return "caption";
    case TargetMode::FccGolden: return "fcc-golden";
    case TargetMode::FccPredicted: return "fcc-predicted";
  }
  return "";
}

std::optional<TargetMode> target_mode_from_string(std::string_view s) noexcept {
  for (TargetMode m : {TargetMode::Caption, TargetMode::FccGolden, TargetMode::FccPredicted}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(optimizer.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw InvalidConfig("AdamW betas must be in [0, 1)");
  }
  if (!(optimizer.epsilon > 0.0)) throw InvalidConfig("epsilon must be positive");
  if (!(optimizer.weight_decay >= 0.0)) throw InvalidConfig("weight decay must be >= 0");
  if (batch_size == 0) throw InvalidConfig("batch size must be positive");
  if (max_epochs < 1) throw InvalidConfig("max epochs must be positive");
  if (patience < 0 || patience > max_epochs) throw InvalidConfig("patience must be in [0, max_epochs]");
  if (shape.embed < 1 || shape.hidden < 1 || shape.context < 1 || shape.memory < 0) {
    throw InvalidConfig("invalid model shape");
  }
}

bool EarlyStopping::update(double dev_loss) {
  ++epoch_;
  if (epoch_ == 1 || dev_loss < best_loss_) {
    best_loss_ = dev_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::string target_text(const Example& e, TargetMode mode, const FactorLexicon& lexicon,
                        std::size_t* gender_fallbacks) {
  switch (mode) {
    case TargetMode::Caption: return e.caption;
    case TargetMode::FccGolden: return build_fcc_target(e, FactorSource::Golden, lexicon);
    case TargetMode::FccPredicted:
      return build_fcc_target(e, FactorSource::Predicted, lexicon, gender_fallbacks);
  }
  return e.caption;
}

TrainResult train(const Dataset& dataset, TargetMode mode, const TrainConfig& config,
                  const FactorLexicon& lexicon) {
  config.validate();
  if (dataset.train.empty()) throw EmptyInput("training split is empty");
  if (dataset.dev.empty()) throw EmptyInput("dev split is empty");

  TrainResult result;
  const auto train_texts = texts_for(dataset.train, mode, lexicon, &result.gender_fallbacks);
  const auto dev_texts = texts_for(dataset.dev, mode, lexicon, nullptr);

  LmShape shape = config.shape;
  shape.cond = static_cast<int>(dataset.train.front().style_vector.size());
  Rng rng(config.seed);
  ConditionalLm model = make_random_model<double>(Vocabulary::build(train_texts), shape, rng);
  shape = model.shape;

  const auto train_seqs = encode(dataset.train, train_texts, model.vocab);
  const auto dev_seqs = encode(dataset.dev, dev_texts, model.vocab);
  const auto dev_batch = make_batch<double>(std::span<const Sequence>(dev_seqs), shape);

  auto state = AdamWState<double>::zeros(shape);
  long step = 0;
  std::vector<std::size_t> order(train_seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Sequence*> members;

  LmParameters<double> best = model.params;
  EarlyStopping stopper(config.patience);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    double loss_sum = 0.0;
    Eigen::Index rows = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      members.clear();
      for (std::size_t i = start; i < end; ++i) members.push_back(&train_seqs[order[i]]);
      const auto batch = make_batch<double>(std::span<const Sequence* const>(members), shape);
      const auto lg = loss_and_gradients(model, batch);
      loss_sum += lg.loss * static_cast<double>(batch.rows());
      rows += batch.rows();
      adamw_step(model.params, lg.gradients, state, config.optimizer, ++step);
      if (!all_finite(model.params)) {
        throw Error("non-finite parameters after optimizer step " + std::to_string(step));
      }
    }
    const double dev_loss = batch_loss(model, dev_batch);
    result.log.push_back({epoch, loss_sum / static_cast<double>(rows), dev_loss});
    if (stopper.update(dev_loss)) best = model.params;
    result.stopped_epoch = epoch;
    if (stopper.should_stop()) break;
  }

  model.params = std::move(best);
  result.best_epoch = stopper.best_epoch();
  result.model = std::move(model);
  return result;
}

double split_loss(const ConditionalLm& model, const std::vector<Example>& split, TargetMode mode,
                  const FactorLexicon& lexicon) {
  if (split.empty()) throw EmptyInput("split is empty");
  const auto seqs = encode(split, texts_for(split, mode, lexicon, nullptr), model.vocab);
  return batch_loss(model, make_batch<double>(std::span<const Sequence>(seqs), model.shape));
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : log) {
    out << Json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"dev_loss", r.dev_loss}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Json j;
  j["magic"] = kCheckpointMagic;
  j["version"] = kCheckpointVersion;
  j["target"] = to_string(ckpt.target);
  j["config"] = to_json(ckpt.config);
  j["shape"] = to_json(ckpt.model.shape);
  j["vocab"] = ckpt.model.vocab.tokens();
  Json params = Json::array();
  zip_tensors(
      [&](std::string_view name, const auto& t) {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(t.size()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
          for (Eigen::Index c = 0; c < t.cols(); ++c) flat.push_back(t(r, c));
        params.push_back(Json{{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", flat}});
      },
      ckpt.model.params);
  j["parameters"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error&) {
    throw VersionMismatch(path.string() + " is not a checkpoint");
  }
  if (!j.is_object() || j.value("magic", std::string()) != kCheckpointMagic) {
    throw VersionMismatch(path.string() + ": bad checkpoint magic");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw VersionMismatch(path.string() + ": unsupported checkpoint version");
  }
  Checkpoint ckpt;
  try {
    const auto target = target_mode_from_string(j.at("target").get<std::string>());
    if (!target) throw SchemaError(0, "target", "unknown target mode");
    ckpt.target = *target;
    ckpt.config = train_config_from_json(j.at("config"));
    ckpt.model.shape = shape_from_json(j.at("shape"));
    ckpt.model.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    if (static_cast<int>(ckpt.model.vocab.size()) != ckpt.model.shape.vocab) {
      throw SchemaError(0, "vocab", "size does not match shape");
    }
    ckpt.model.params = LmParameters<double>::zeros(ckpt.model.shape);
    const auto& params = j.at("parameters");
    std::size_t index = 0;
    zip_tensors(
        [&](std::string_view name, auto& t) {
          if (index >= params.size()) throw SchemaError(0, std::string(name), "missing tensor");
          const auto& entry = params[index++];
          if (entry.at("name").get<std::string>() != name || entry.at("rows").get<Eigen::Index>() != t.rows() ||
              entry.at("cols").get<Eigen::Index>() != t.cols()) {
            throw SchemaError(0, std::string(name), "tensor name or shape mismatch");
          }
          const auto flat = entry.at("data").get<std::vector<double>>();
          if (flat.size() != static_cast<std::size_t>(t.size())) {
            throw SchemaError(0, std::string(name), "wrong element count");
          }
          std::size_t k = 0;
          for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = flat[k++];
        },
        ckpt.model.params);
  } catch (const Json::exception& err) {
    throw SchemaError(0, "<checkpoint>", err.what());
  }
  return ckpt;
}

}  // namespace stylecap
