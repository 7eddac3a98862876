#pragma once

// Staged training: each stage trains the weights handed over by the previous
// one with fresh AdamW moments, and evaluates at the end of every epoch.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "afg/checkpoint.hpp"
#include "afg/config.hpp"
#include "afg/corpus.hpp"
#include "afg/rouge.hpp"

namespace afg {

struct EpochMetrics {
  std::string stage;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double eval_loss = 0.0;
  RougeReport rouge;
};

using MetricLog = std::vector<EpochMetrics>;

struct StageHooks {
  // Called after the optimizer state is reset, before the first update.
  std::function<void(const ModelParams&, const AdamWState&)> on_stage_start;
  std::function<void(const EpochMetrics&)> on_epoch_end;
  std::function<void(const Checkpoint&)> on_stage_end;
  // Plain-text progress and warnings; nullptr is silent.
  std::ostream* log = nullptr;
};

struct StageResult {
  Checkpoint checkpoint;
  MetricLog metrics;
  std::size_t truncated_sources = 0;
  std::size_t truncated_targets = 0;
};

// Source for a stage: its corpus file or generated synthetic pairs.
Corpus load_stage_corpus(const StageConfig& scfg);

// bos + tokens + eos, head-kept and re-terminated with eos when longer than
// max_len. Sets *truncated when it cut anything.
std::vector<TokenId> encode_bounded(const Vocab& vocab, const std::string& text, std::size_t max_len,
                                    bool* truncated = nullptr);

// Trains `start` (weights, vocab, provenance) on one stage. The optimizer
// state of `start` is ignored; the stage begins from zero moments.
StageResult run_stage(const Checkpoint& start, const StageConfig& scfg, const Corpus& corpus,
                      const StageHooks& hooks = {});

struct PipelineResult {
  Checkpoint checkpoint;
  std::vector<MetricLog> logs;  // one per stage
};

struct PipelineOptions {
  // Overrides vocab_path / vocabulary building when set.
  std::optional<Vocab> vocab;
  StageHooks hooks;
};

// Runs every stage in order. Failures are rethrown as the same error type
// with the stage name prefixed.
PipelineResult run_pipeline(const PipelineConfig& pcfg, const PipelineOptions& opts = {});

// One JSON object per epoch, keys: stage, epoch, train_loss, eval_loss, rouge.
std::string metric_line(const EpochMetrics& m);
std::string metric_log_jsonl(const std::vector<MetricLog>& logs);
// Final per-stage metrics and checkpoint provenance.
std::string metric_summary_json(const PipelineResult& result);

}  // namespace afg
