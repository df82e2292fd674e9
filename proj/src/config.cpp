#include "stylecap/config.hpp"

#include <fstream>
#include <sstream>

#include "stylecap/errors.hpp"

namespace stylecap {
namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception& err) {
    throw SchemaError(0, key, err.what());
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  const auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_object()) throw SchemaError(0, key, "expected an object");
  return *it;
}

}  // namespace

Json to_json(const LmShape& s) {
  return Json{{"vocab", s.vocab},     {"embed", s.embed}, {"context", s.context},
              {"memory", s.memory},   {"cond", s.cond},   {"hidden", s.hidden}};
}

Json to_json(const AdamWConfig& c) {
  return Json{{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
              {"epsilon", c.epsilon},             {"weight_decay", c.weight_decay}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"optimizer", to_json(c.optimizer)}, {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},        {"patience", c.patience},
              {"seed", c.seed},                    {"shape", to_json(c.shape)}};
}

Json to_json(const DecodeConfig& c) {
  return Json{{"strategy", to_string(c.strategy)}, {"top_p", c.top_p},     {"top_k", c.top_k},
              {"max_len", c.max_len},              {"seed", c.seed},       {"delimiter_id", c.delimiter_id}};
}

Json to_json(const CorpusSpec& c, const std::string& templates) {
  return Json{{"n_train", c.n_train}, {"n_dev", c.n_dev}, {"n_test", c.n_test},
              {"noise_sigma", c.noise_sigma}, {"dim", c.dim}, {"seed", c.seed},
              {"templates", templates}};
}

LmShape shape_from_json(const Json& j, LmShape s) {
  read_if(j, "vocab", s.vocab);
  read_if(j, "embed", s.embed);
  read_if(j, "context", s.context);
  read_if(j, "memory", s.memory);
  read_if(j, "cond", s.cond);
  read_if(j, "hidden", s.hidden);
  return s;
}

AdamWConfig adamw_from_json(const Json& j, AdamWConfig c) {
  read_if(j, "learning_rate", c.learning_rate);
  read_if(j, "beta1", c.beta1);
  read_if(j, "beta2", c.beta2);
  read_if(j, "epsilon", c.epsilon);
  read_if(j, "weight_decay", c.weight_decay);
  return c;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  c.optimizer = adamw_from_json(section(j, "optimizer"), c.optimizer);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "max_epochs", c.max_epochs);
  read_if(j, "patience", c.patience);
  read_if(j, "seed", c.seed);
  c.shape = shape_from_json(section(j, "shape"), c.shape);
  return c;
}

DecodeConfig decode_config_from_json(const Json& j, DecodeConfig c) {
  if (const auto it = j.find("strategy"); it != j.end()) {
    const auto s = it->is_string() ? strategy_from_string(it->get<std::string>()) : std::nullopt;
    if (!s) throw SchemaError(0, "strategy", "unknown strategy");
    c.strategy = *s;
  }
  read_if(j, "top_p", c.top_p);
  read_if(j, "top_k", c.top_k);
  read_if(j, "max_len", c.max_len);
  read_if(j, "seed", c.seed);
  read_if(j, "delimiter_id", c.delimiter_id);
  return c;
}

CorpusSpec corpus_spec_from_json(const Json& j, CorpusSpec c) {
  read_if(j, "n_train", c.n_train);
  read_if(j, "n_dev", c.n_dev);
  read_if(j, "n_test", c.n_test);
  read_if(j, "noise_sigma", c.noise_sigma);
  read_if(j, "dim", c.dim);
  read_if(j, "seed", c.seed);
  return c;
}

Json RunConfig::to_json() const {
  return Json{{"corpus", stylecap::to_json(corpus, templates_path.empty() ? "builtin" : templates_path)},
              {"train", stylecap::to_json(train)},
              {"target", stylecap::to_string(target)},
              {"decode", stylecap::to_json(decode)},
              {"paths", Json{{"templates", templates_path}, {"lexicon", lexicon_path}}}};
}

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError(0, "<config>", "expected an object");
  RunConfig rc;
  const auto& paths = section(j, "paths");
  read_if(paths, "templates", rc.templates_path);
  read_if(paths, "lexicon", rc.lexicon_path);
  rc.corpus = corpus_spec_from_json(section(j, "corpus"), rc.corpus);
  rc.corpus.templates = rc.templates();
  rc.train = train_config_from_json(section(j, "train"), rc.train);
  rc.decode = decode_config_from_json(section(j, "decode"), rc.decode);
  if (const auto it = j.find("target"); it != j.end()) {
    const auto m = it->is_string() ? target_mode_from_string(it->get<std::string>()) : std::nullopt;
    if (!m) throw SchemaError(0, "target", "unknown target mode");
    rc.target = *m;
  }
  return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

FactorLexicon RunConfig::lexicon() const {
  return lexicon_path.empty() ? FactorLexicon::builtin() : FactorLexicon::load(lexicon_path);
}

TemplateSet RunConfig::templates() const {
  return templates_path.empty() ? TemplateSet::builtin() : TemplateSet::load(templates_path);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& err) {
    throw SchemaError(err.byte, "<json>", path.string() + ": " + err.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace stylecap
