#include "afg/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "afg/errors.hpp"

namespace afg {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ConfigError(std::string(what) + ": unknown field \"" + key + "\"");
  }
}

template <class T>
T field(const json& j, const char* what, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + ": field \"" + key + "\" has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* what, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, what, key) : fallback;
}

std::size_t size_field(const json& j, const char* what, const char* key) {
  const auto& v = j.contains(key) ? j.at(key) : json();
  if (!v.is_number_unsigned()) {
    throw ConfigError(std::string(what) + ": field \"" + key + "\" must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::size_t size_field_or(const json& j, const char* what, const char* key, std::size_t fallback) {
  return j.contains(key) ? size_field(j, what, key) : fallback;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (base_dir.empty() || path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

OptimizerConfig optimizer_from_json(const json& j, double default_lr) {
  reject_unknown(j, "optimizer", {"lr", "beta1", "beta2", "eps", "weight_decay"});
  OptimizerConfig o;
  o.lr = field_or<double>(j, "optimizer", "lr", default_lr);
  o.beta1 = field_or<double>(j, "optimizer", "beta1", o.beta1);
  o.beta2 = field_or<double>(j, "optimizer", "beta2", o.beta2);
  o.eps = field_or<double>(j, "optimizer", "eps", o.eps);
  o.weight_decay = field_or<double>(j, "optimizer", "weight_decay", o.weight_decay);
  o.validate();
  return o;
}

StageConfig stage_from_json(const json& j, bool is_last, const ModelConfig& model, const std::string& base_dir) {
  reject_unknown(j, "stage", {"name", "corpus_path", "synthetic", "epochs", "batch_size", "optimizer",
                              "eval_fraction", "seed", "max_src_len", "max_tgt_len"});
  StageConfig s;
  s.name = field<std::string>(j, "stage", "name");
  const std::string what = "stage " + s.name;
  if (j.contains("corpus_path")) s.corpus_path = resolve(field<std::string>(j, what.c_str(), "corpus_path"), base_dir);
  if (j.contains("synthetic")) {
    const json& syn = j.at("synthetic");
    reject_unknown(syn, "synthetic", {"role", "size", "length_scale", "seed"});
    SyntheticSpec spec;
    spec.role = parse_role(field<std::string>(syn, "synthetic", "role"));
    spec.size = size_field(syn, "synthetic", "size");
    spec.length_scale = size_field_or(syn, "synthetic", "length_scale", 1);
    spec.seed = field_or<std::uint64_t>(syn, "synthetic", "seed", 0);
    s.synthetic = spec;
  }
  s.epochs = size_field(j, what.c_str(), "epochs");
  s.batch_size = size_field_or(j, what.c_str(), "batch_size", s.batch_size);
  const double default_lr = is_last ? kFinalStageLearningRate : kPretrainLearningRate;
  s.optimizer = optimizer_from_json(j.value("optimizer", json::object()), default_lr);
  s.eval_fraction = field_or<double>(j, what.c_str(), "eval_fraction", s.eval_fraction);
  s.seed = field_or<std::uint64_t>(j, what.c_str(), "seed", s.seed);
  s.max_src_len = size_field_or(j, what.c_str(), "max_src_len", model.max_src_pos);
  s.max_tgt_len = size_field_or(j, what.c_str(), "max_tgt_len", model.max_tgt_pos);
  return s;
}

}  // namespace

void StageConfig::validate(const ModelConfig& model) const {
  const std::string what = "stage " + name;
  if (name.empty()) throw ConfigError("stage name must be non-empty");
  if (corpus_path.has_value() == synthetic.has_value()) {
    throw ConfigError(what + ": set exactly one of corpus_path or synthetic");
  }
  if (batch_size < 1) throw ConfigError(what + ": batch_size must be >= 1");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError(what + ": eval_fraction must be in (0, 1)");
  if (max_src_len < 2 || max_src_len > model.max_src_pos) {
    throw ConfigError(what + ": max_src_len must be in [2, max_src_pos=" + std::to_string(model.max_src_pos) + "]");
  }
  if (max_tgt_len < 2 || max_tgt_len > model.max_tgt_pos) {
    throw ConfigError(what + ": max_tgt_len must be in [2, max_tgt_pos=" + std::to_string(model.max_tgt_pos) + "]");
  }
  optimizer.validate();
}

void PipelineConfig::validate() const {
  model.attention.validate();
  if (stages.empty()) throw ConfigError("pipeline needs at least one stage");
  std::set<std::string> names;
  for (const auto& s : stages) {
    s.validate(model);
    if (!names.insert(s.name).second) throw ConfigError("duplicate stage name " + s.name);
  }
  if (vocab_min_freq < 1) throw ConfigError("vocab_min_freq must be >= 1");
}

json to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"d_model", c.d_model},
              {"heads", c.heads},
              {"enc_layers", c.enc_layers},
              {"dec_layers", c.dec_layers},
              {"d_ff", c.d_ff},
              {"max_src_pos", c.max_src_pos},
              {"max_tgt_pos", c.max_tgt_pos},
              {"attention", {{"window", c.attention.window}, {"global_indices", c.attention.global_indices}}},
              {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const json& j) {
  reject_unknown(j, "model", {"vocab_size", "d_model", "heads", "enc_layers", "dec_layers", "d_ff", "max_src_pos",
                              "max_tgt_pos", "attention", "dropout"});
  ModelConfig c;
  c.vocab_size = size_field_or(j, "model", "vocab_size", c.vocab_size);
  c.d_model = size_field_or(j, "model", "d_model", c.d_model);
  c.heads = size_field_or(j, "model", "heads", c.heads);
  c.enc_layers = size_field_or(j, "model", "enc_layers", c.enc_layers);
  c.dec_layers = size_field_or(j, "model", "dec_layers", c.dec_layers);
  c.d_ff = size_field_or(j, "model", "d_ff", c.d_ff);
  c.max_src_pos = size_field_or(j, "model", "max_src_pos", c.max_src_pos);
  c.max_tgt_pos = size_field_or(j, "model", "max_tgt_pos", c.max_tgt_pos);
  c.dropout = field_or<double>(j, "model", "dropout", c.dropout);
  if (j.contains("attention")) {
    const json& a = j.at("attention");
    reject_unknown(a, "attention", {"window", "global_indices"});
    c.attention.window = size_field_or(a, "attention", "window", c.attention.window);
    c.attention.global_indices =
        field_or<std::vector<std::size_t>>(a, "attention", "global_indices", c.attention.global_indices);
  }
  c.attention.validate();
  return c;
}

json to_json(const OptimizerConfig& o) {
  return json{{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}, {"weight_decay", o.weight_decay}};
}

json to_json(const StageConfig& s) {
  json j{{"name", s.name},
         {"epochs", s.epochs},
         {"batch_size", s.batch_size},
         {"optimizer", to_json(s.optimizer)},
         {"eval_fraction", s.eval_fraction},
         {"seed", s.seed},
         {"max_src_len", s.max_src_len},
         {"max_tgt_len", s.max_tgt_len}};
  if (s.corpus_path) j["corpus_path"] = *s.corpus_path;
  if (s.synthetic) {
    j["synthetic"] = {{"role", role_name(s.synthetic->role)},
                      {"size", s.synthetic->size},
                      {"length_scale", s.synthetic->length_scale},
                      {"seed", s.synthetic->seed}};
  }
  return j;
}

json to_json(const PipelineConfig& p) {
  json j{{"model", to_json(p.model)}, {"seed", p.seed}, {"vocab_min_freq", p.vocab_min_freq}};
  j["stages"] = json::array();
  for (const auto& s : p.stages) j["stages"].push_back(to_json(s));
  if (p.init_checkpoint) j["init_checkpoint"] = *p.init_checkpoint;
  if (p.vocab_path) j["vocab_path"] = *p.vocab_path;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j, const std::string& base_dir) {
  reject_unknown(j, "pipeline", {"model", "seed", "stages", "init_checkpoint", "vocab_path", "vocab_min_freq"});
  PipelineConfig p;
  p.model = model_config_from_json(j.value("model", json::object()));
  p.seed = field_or<std::uint64_t>(j, "pipeline", "seed", 0);
  p.vocab_min_freq = size_field_or(j, "pipeline", "vocab_min_freq", 1);
  if (j.contains("init_checkpoint") && !j.at("init_checkpoint").is_null()) {
    p.init_checkpoint = resolve(field<std::string>(j, "pipeline", "init_checkpoint"), base_dir);
  }
  if (j.contains("vocab_path") && !j.at("vocab_path").is_null()) {
    p.vocab_path = resolve(field<std::string>(j, "pipeline", "vocab_path"), base_dir);
  }
  if (!j.contains("stages") || !j.at("stages").is_array()) throw ConfigError("pipeline: \"stages\" must be an array");
  const auto& stages = j.at("stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    p.stages.push_back(stage_from_json(stages[i], i + 1 == stages.size(), p.model, base_dir));
  }
  p.validate();
  return p;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read pipeline config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("pipeline config " + path + " is not valid JSON: " + e.what());
  }
  return pipeline_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace afg
