#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "afg/adamw.hpp"
#include "afg/checkpoint.hpp"
#include "afg/config.hpp"
#include "afg/errors.hpp"
#include "afg/pipeline.hpp"

namespace afg {
namespace {

namespace fs = std::filesystem;

TEST(AdamW, FirstStepByHand) {
  // m_hat = 2, v_hat = 4, update = 0.1 * 2 / (2 + 1e-8)
  std::vector<Real> theta{1.0}, m{0.0}, v{0.0};
  const std::vector<Real> g{2.0};
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  adamw_update(theta, g, m, v, 1, cfg);
  EXPECT_NEAR(theta[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(theta[0], 0.9, 1e-8);
}

TEST(AdamW, FiveStepTraceOnSquare) {
  // f(theta) = theta^2, g = 2 theta, lr 0.1, no decay; values from an
  // independent 50-digit evaluation of the update.
  const double want[5] = {0.90000000049999995, 0.80041222869179218, 0.70158627294602960, 0.60393906057374480,
                          0.50796365926434073};
  std::vector<Real> theta{1.0}, m{0.0}, v{0.0};
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  for (std::uint64_t t = 1; t <= 5; ++t) {
    const std::vector<Real> g{2.0 * theta[0]};
    adamw_update(theta, g, m, v, t, cfg);
    EXPECT_NEAR(theta[0], want[t - 1], 1e-9) << "step " << t;
  }
}

TEST(AdamW, ZeroGradientCases) {
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  std::vector<Real> theta{3.0}, m{0.0}, v{0.0};
  const std::vector<Real> g{0.0};
  adamw_update(theta, g, m, v, 1, cfg);
  EXPECT_EQ(theta[0], 3.0);
  cfg.weight_decay = 0.5;
  adamw_update(theta, g, m, v, 2, cfg);
  EXPECT_NEAR(theta[0], 3.0 * (1 - 0.1 * 0.5), 1e-15);
}

TEST(AdamW, Validation) {
  std::vector<Real> theta{1.0, 2.0}, m{0.0}, v{0.0, 0.0};
  const std::vector<Real> g{0.0, 0.0};
  EXPECT_THROW(adamw_update(theta, g, m, v, 1, OptimizerConfig{}), ShapeError);
  OptimizerConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = OptimizerConfig{};
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

ModelConfig small_model() {
  ModelConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.d_ff = 32;
  c.max_src_pos = 64;
  c.max_tgt_pos = 24;
  c.attention.window = 8;
  return c;
}

StageConfig synthetic_stage(std::string name, StageRole role, std::size_t size, std::size_t epochs) {
  StageConfig s;
  s.name = std::move(name);
  s.synthetic = SyntheticSpec{role, size, 1, 7};
  s.epochs = epochs;
  s.batch_size = 2;
  s.max_src_len = 64;
  s.max_tgt_len = 24;
  s.seed = 3;
  s.optimizer.lr = 1e-3;
  return s;
}

PipelineConfig small_pipeline() {
  PipelineConfig p;
  p.model = small_model();
  p.seed = 11;
  p.stages = {synthetic_stage("pretrain", StageRole::summarize, 12, 1),
              synthetic_stage("review", StageRole::review, 10, 2),
              synthetic_stage("feedback", StageRole::feedback, 10, 2)};
  return p;
}

Checkpoint fresh_checkpoint(const std::vector<std::string>& texts) {
  Checkpoint c;
  c.vocab = build_vocab(texts, 1, 1000);
  c.config = small_model();
  c.config.vocab_size = c.vocab.size();
  c.params = init_model(c.config, 1);
  c.optimizer = AdamWState::zeros_like(c.params);
  return c;
}

Corpus summary_corpus(std::size_t n) { return make_synthetic(StageRole::summarize, n, 1, 4).corpus; }

std::vector<std::string> texts_of(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& p : c.pairs) {
    out.push_back(p.source);
    out.push_back(p.target);
  }
  return out;
}

TEST(EncodeBounded, HeadKeptWithEos) {
  const Vocab v(std::vector<std::string>{"a", "b", "c"});
  bool cut = false;
  EXPECT_EQ(encode_bounded(v, "a b c", 10, &cut), (std::vector<TokenId>{1, 4, 5, 6, 2}));
  EXPECT_FALSE(cut);
  EXPECT_EQ(encode_bounded(v, "a b c", 4, &cut), (std::vector<TokenId>{1, 4, 5, 2}));
  EXPECT_TRUE(cut);
}

TEST(RunStage, ZeroEpochsIsNoOp) {
  const Corpus corpus = summary_corpus(10);
  const Checkpoint start = fresh_checkpoint(texts_of(corpus));
  StageConfig s = synthetic_stage("noop", StageRole::summarize, 10, 0);
  const StageResult r = run_stage(start, s, corpus);
  EXPECT_TRUE(r.checkpoint.params.bitwise_equal(start.params));
  EXPECT_TRUE(r.metrics.empty());
  ASSERT_EQ(r.checkpoint.provenance.size(), 1u);
  EXPECT_EQ(r.checkpoint.provenance[0], (StageRecord{"noop", 0}));
}

TEST(RunStage, OneMetricPerEpochAndDeterministic) {
  const Corpus corpus = summary_corpus(10);
  const Checkpoint start = fresh_checkpoint(texts_of(corpus));
  const StageConfig s = synthetic_stage("s", StageRole::summarize, 10, 3);
  const StageResult a = run_stage(start, s, corpus), b = run_stage(start, s, corpus);
  ASSERT_EQ(a.metrics.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.metrics[i].epoch, i + 1);
    EXPECT_EQ(metric_line(a.metrics[i]), metric_line(b.metrics[i]));
  }
  EXPECT_TRUE(a.checkpoint.params.bitwise_equal(b.checkpoint.params));
  EXPECT_LT(a.metrics.back().train_loss, a.metrics.front().train_loss);
  EXPECT_FALSE(a.checkpoint.params.bitwise_equal(start.params));
  EXPECT_EQ(a.checkpoint.optimizer.step, 12u);  // 8 train pairs / batch 2 * 3 epochs
}

TEST(RunStage, NonFiniteLossAborts) {
  const Corpus corpus = summary_corpus(10);
  Checkpoint start = fresh_checkpoint(texts_of(corpus));
  start.params.entries().back().value.mutable_data()[0] = std::nan("");
  EXPECT_THROW(run_stage(start, synthetic_stage("s", StageRole::summarize, 10, 1), corpus), TrainingError);
}

TEST(RunStage, CountsTruncations) {
  const Corpus corpus = summary_corpus(10);
  const Checkpoint start = fresh_checkpoint(texts_of(corpus));
  StageConfig s = synthetic_stage("s", StageRole::summarize, 10, 1);
  s.max_src_len = 20;
  std::ostringstream log;
  StageHooks hooks;
  hooks.log = &log;
  const StageResult r = run_stage(start, s, corpus, hooks);
  EXPECT_EQ(r.truncated_sources, 10u);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST(RunPipeline, HandOffResetsMomentsAndKeepsWeights) {
  std::vector<ModelParams> entries, exits;
  PipelineOptions opts;
  opts.hooks.on_stage_start = [&](const ModelParams& p, const AdamWState& s) {
    EXPECT_TRUE(s.all_zero());
    entries.push_back(p.deep_copy());
  };
  opts.hooks.on_stage_end = [&](const Checkpoint& c) { exits.push_back(c.params.deep_copy()); };
  const PipelineResult r = run_pipeline(small_pipeline(), opts);
  ASSERT_EQ(entries.size(), 3u);
  ASSERT_EQ(exits.size(), 3u);
  EXPECT_TRUE(entries[1].bitwise_equal(exits[0]));
  EXPECT_TRUE(entries[2].bitwise_equal(exits[1]));
  EXPECT_TRUE(r.checkpoint.params.bitwise_equal(exits[2]));
  ASSERT_EQ(r.checkpoint.provenance.size(), 3u);
  EXPECT_EQ(r.checkpoint.provenance[0], (StageRecord{"pretrain", 1}));
  EXPECT_EQ(r.checkpoint.provenance[1], (StageRecord{"review", 2}));
  EXPECT_EQ(r.checkpoint.provenance[2], (StageRecord{"feedback", 2}));
  EXPECT_EQ(r.logs.size(), 3u);
  EXPECT_EQ(r.logs[1].size(), 2u);
}

TEST(RunPipeline, Deterministic) {
  const PipelineResult a = run_pipeline(small_pipeline()), b = run_pipeline(small_pipeline());
  EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
  EXPECT_EQ(metric_log_jsonl(a.logs), metric_log_jsonl(b.logs));
  EXPECT_EQ(metric_summary_json(a), metric_summary_json(b));
}

TEST(RunPipeline, StageErrorsNameTheStage) {
  PipelineConfig p = small_pipeline();
  p.stages[1].synthetic.reset();
  p.stages[1].corpus_path = "/nonexistent/review.jsonl";
  try {
    run_pipeline(p);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stage review"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("/nonexistent/review.jsonl"), std::string::npos) << e.what();
  }
}

TEST(RunPipeline, InitCheckpointSeedsFirstStage) {
  PipelineConfig p = small_pipeline();
  p.stages.resize(1);
  const PipelineResult first = run_pipeline(p);
  const auto path = (fs::temp_directory_path() / "afg_init_ckpt.bin").string();
  save_checkpoint(first.checkpoint, path);
  p.init_checkpoint = path;
  p.stages[0].epochs = 0;
  const PipelineResult second = run_pipeline(p);
  EXPECT_TRUE(second.checkpoint.params.bitwise_equal(first.checkpoint.params));
  ASSERT_EQ(second.checkpoint.provenance.size(), 2u);
  p.model.d_model = 8;
  EXPECT_THROW(run_pipeline(p), CheckpointError);
  fs::remove(path);
}

TEST(MetricLog, OneJsonObjectPerEpoch) {
  const PipelineResult r = run_pipeline(small_pipeline());
  std::istringstream in(metric_log_jsonl(r.logs));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("train_loss"));
    EXPECT_TRUE(j["rouge"]["rougeLsum"].contains("f1"));
    ++n;
  }
  EXPECT_EQ(n, 5u);
  const auto summary = nlohmann::json::parse(metric_summary_json(r));
  EXPECT_EQ(summary["provenance"].size(), 3u);
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    const Corpus corpus = summary_corpus(10);
    ckpt = run_stage(fresh_checkpoint(texts_of(corpus)), synthetic_stage("s", StageRole::summarize, 10, 1), corpus)
               .checkpoint;
  }
  void TearDown() override { fs::remove(path); }
  std::string bytes() {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  }
  void write(const std::string& b) { std::ofstream(path, std::ios::binary) << b; }

  Checkpoint ckpt;
  std::string path = (fs::temp_directory_path() / "afg_ckpt_test.bin").string();
};

TEST_F(CheckpointFile, RoundTripIsBitwise) {
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_TRUE(back.params.bitwise_equal(ckpt.params));
  EXPECT_EQ(back.optimizer.m, ckpt.optimizer.m);
  EXPECT_EQ(back.optimizer.v, ckpt.optimizer.v);
  EXPECT_EQ(back.optimizer.step, ckpt.optimizer.step);
  EXPECT_EQ(back.vocab, ckpt.vocab);
  EXPECT_TRUE(back.config == ckpt.config);
  EXPECT_EQ(back.provenance, ckpt.provenance);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ckpt));
}

TEST_F(CheckpointFile, TruncationIsAChecksumError) {
  save_checkpoint(ckpt, path);
  const std::string b = bytes();
  write(b.substr(0, b.size() - 9));
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointFile, FlippedPayloadByteIsAChecksumError) {
  save_checkpoint(ckpt, path);
  std::string b = bytes();
  b[b.size() - 100] ^= 0x10;
  write(b);
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointFile, VersionMismatchIsRejected) {
  std::string b = serialize_checkpoint(ckpt);
  const std::string key = "\"version\":1";
  const auto at = b.find(key);
  ASSERT_NE(at, std::string::npos);
  b.replace(at, key.size(), "\"version\":2");
  EXPECT_THROW(parse_checkpoint(b), CheckpointError);
  EXPECT_THROW(parse_checkpoint("garbage"), CheckpointError);
}

TEST_F(CheckpointFile, MismatchedModelConfigIsRejected) {
  ModelConfig other = ckpt.config;
  other.d_ff = 48;
  EXPECT_THROW(check_compatible(ckpt.params, other), CheckpointError);
  other = ckpt.config;
  other.vocab_size += 1;
  EXPECT_THROW(check_compatible(ckpt.params, other), CheckpointError);
  EXPECT_NO_THROW(check_compatible(ckpt.params, ckpt.config));
}

TEST(PipelineConfigDoc, ParsesWithDefaults) {
  const auto j = nlohmann::json::parse(R"({
    "model": {"d_model": 16, "heads": 2, "attention": {"window": 4}},
    "seed": 3,
    "stages": [
      {"name": "a", "synthetic": {"role": "summarize", "size": 20}, "epochs": 1},
      {"name": "b", "corpus_path": "data/b.jsonl", "epochs": 2, "optimizer": {"weight_decay": 0}}
    ]})");
  const PipelineConfig p = pipeline_config_from_json(j, "/base");
  EXPECT_EQ(p.model.d_model, 16u);
  EXPECT_EQ(p.model.attention.global_indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(p.stages[0].optimizer.lr, 1e-4);
  EXPECT_EQ(p.stages[1].optimizer.lr, 5e-5);
  EXPECT_EQ(p.stages[1].optimizer.weight_decay, 0.0);
  EXPECT_EQ(p.stages[0].batch_size, 2u);
  EXPECT_EQ(*p.stages[1].corpus_path, "/base/data/b.jsonl");
  const PipelineConfig again = pipeline_config_from_json(to_json(p));
  EXPECT_EQ(to_json(again), to_json(p));
}

TEST(PipelineConfigDoc, RejectsBadDocuments) {
  const auto bad = [](const char* text) { return nlohmann::json::parse(text); };
  EXPECT_THROW(pipeline_config_from_json(bad(R"({"stages": []})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(bad(R"({"stages": [{"name": "a", "epochs": 1}]})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(bad(
                   R"({"stages": [{"name": "a", "epochs": 1, "corpus_path": "x", "bogus": 1}]})")),
               ConfigError);
  EXPECT_THROW(pipeline_config_from_json(bad(
                   R"({"stages": [{"name": "a", "epochs": 1, "corpus_path": "x"},
                                  {"name": "a", "epochs": 1, "corpus_path": "y"}]})")),
               ConfigError);
  EXPECT_THROW(pipeline_config_from_json(bad(
                   R"({"stages": [{"name": "a", "epochs": -1, "corpus_path": "x"}]})")),
               ConfigError);
  EXPECT_THROW(pipeline_config_from_json(bad(
                   R"({"stages": [{"name": "a", "epochs": 1, "corpus_path": "x", "max_tgt_len": 65}]})")),
               ConfigError);
  EXPECT_THROW(load_pipeline_config("/nonexistent/pipeline.json"), ConfigError);
}

}  // namespace
}  // namespace afg
