#pragma once

// Training configuration documents and their JSON form. See
// docs/pipeline_config.md for the schema.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "afg/adamw.hpp"
#include "afg/model.hpp"
#include "afg/synthetic.hpp"

namespace afg {

struct SyntheticSpec {
  StageRole role = StageRole::summarize;
  std::size_t size = 1;
  std::size_t length_scale = 1;
  std::uint64_t seed = 0;
};

struct StageConfig {
  std::string name;
  // Exactly one of these is set.
  std::optional<std::string> corpus_path;
  std::optional<SyntheticSpec> synthetic;
  std::size_t epochs = 1;
  std::size_t batch_size = 2;
  OptimizerConfig optimizer{};
  double eval_fraction = 0.2;
  std::uint64_t seed = 0;
  // Documents that omit these get the model's position limits.
  std::size_t max_src_len = 512;
  std::size_t max_tgt_len = 64;

  void validate(const ModelConfig& model) const;
};

struct PipelineConfig {
  ModelConfig model{};
  std::uint64_t seed = 0;  // model initialization
  std::vector<StageConfig> stages;
  std::optional<std::string> init_checkpoint;
  std::optional<std::string> vocab_path;
  std::size_t vocab_min_freq = 1;

  void validate() const;
};

// Stage learning rate when the document omits it.
inline constexpr double kPretrainLearningRate = 1e-4;
inline constexpr double kFinalStageLearningRate = 5e-5;

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OptimizerConfig& cfg);
nlohmann::json to_json(const StageConfig& cfg);
nlohmann::json to_json(const PipelineConfig& cfg);

// Relative corpus, vocab and checkpoint paths resolve against base_dir.
// Throws ConfigError on missing or mistyped fields.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace afg
