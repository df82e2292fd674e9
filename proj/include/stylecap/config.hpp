#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "stylecap/corpus.hpp"
#include "stylecap/decoding.hpp"
#include "stylecap/train.hpp"

namespace stylecap {

using Json = nlohmann::ordered_json;

Json to_json(const LmShape& s);
Json to_json(const AdamWConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const DecodeConfig& c);
// Template text is not echoed; `templates` names its source instead.
Json to_json(const CorpusSpec& c, const std::string& templates = "builtin");

// Each reader starts from `base` and overrides only the keys present.
LmShape shape_from_json(const Json& j, LmShape base = {});
AdamWConfig adamw_from_json(const Json& j, AdamWConfig base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
DecodeConfig decode_config_from_json(const Json& j, DecodeConfig base = {});
CorpusSpec corpus_spec_from_json(const Json& j, CorpusSpec base = {});

// Every module config plus file locations; one JSON file with sections
// "corpus", "train", "decode", "paths".
struct RunConfig {
  CorpusSpec corpus;
  std::string templates_path;  // empty: builtin
  std::string lexicon_path;    // empty: builtin
  TrainConfig train;
  TargetMode target = TargetMode::FccGolden;
  DecodeConfig decode;

  Json to_json() const;
  static RunConfig from_json(const Json& j);
  static RunConfig load(const std::filesystem::path& path);

  FactorLexicon lexicon() const;
  TemplateSet templates() const;
};

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace stylecap
