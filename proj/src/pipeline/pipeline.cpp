#include "afg/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <ostream>

#include "afg/errors.hpp"
#include "afg/generation.hpp"
#include "afg/ops.hpp"
#include "afg/rng.hpp"

namespace afg {

using nlohmann::json;

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kDropoutStream = 0x4450;

struct EncodedSplit {
  std::vector<SequencePair> pairs;
  std::vector<std::string> references;
};

EncodedSplit encode_split(const Vocab& vocab, const Corpus& corpus, const StageConfig& scfg, StageResult& result) {
  EncodedSplit out;
  for (const auto& ex : corpus.pairs) {
    bool cut_src = false, cut_tgt = false;
    out.pairs.push_back({encode_bounded(vocab, ex.source, scfg.max_src_len, &cut_src),
                         encode_bounded(vocab, ex.target, scfg.max_tgt_len, &cut_tgt)});
    out.references.push_back(ex.target);
    result.truncated_sources += cut_src;
    result.truncated_targets += cut_tgt;
  }
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

// Eval loss (mean per-pair) and corpus ROUGE of greedy outputs.
std::pair<double, RougeReport> evaluate(const ModelParams& params, const ModelConfig& cfg, const Vocab& vocab,
                                        const EncodedSplit& split, const GenerationConfig& gcfg) {
  NoGradGuard no_grad;
  double loss_sum = 0.0;
  std::vector<std::pair<std::string, std::string>> scored;
  scored.reserve(split.pairs.size());
  for (std::size_t i = 0; i < split.pairs.size(); ++i) {
    const SequencePair& pair = split.pairs[i];
    const Tensor enc = encode_source(params, pair.src, cfg);
    const std::span<const TokenId> tgt(pair.tgt);
    const Tensor logits = decode_logits(params, enc, tgt.first(tgt.size() - 1), cfg);
    loss_sum += cross_entropy_logits(logits, tgt.subspan(1), kPadId).item();
    scored.emplace_back(decode(vocab, greedy_decode_encoded(params, enc, gcfg, cfg)), split.references[i]);
  }
  return {loss_sum / static_cast<double>(split.pairs.size()), corpus_rouge(scored)};
}

json score_json(const RougeScore& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

json report_json(const RougeReport& r) {
  return {{"rouge1", score_json(r.rouge1)},
          {"rouge2", score_json(r.rouge2)},
          {"rougeL", score_json(r.rougeL)},
          {"rougeLsum", score_json(r.rougeLsum)}};
}

json metrics_json(const EpochMetrics& m) {
  return {{"stage", m.stage},
          {"epoch", m.epoch},
          {"train_loss", m.train_loss},
          {"eval_loss", m.eval_loss},
          {"rouge", report_json(m.rouge)}};
}

template <class E>
[[noreturn]] void rethrow_in_stage(const std::string& stage, const E& e) {
  throw E("stage " + stage + ": " + e.what());
}

}  // namespace

Corpus load_stage_corpus(const StageConfig& scfg) {
  if (scfg.corpus_path) return load_corpus(*scfg.corpus_path);
  if (!scfg.synthetic) throw ConfigError("stage " + scfg.name + " has no corpus");
  const SyntheticSpec& s = *scfg.synthetic;
  return make_synthetic(s.role, s.size, s.length_scale, s.seed).corpus;
}

std::vector<TokenId> encode_bounded(const Vocab& vocab, const std::string& text, std::size_t max_len,
                                    bool* truncated) {
  if (max_len < 2) throw ConfigError("sequence length limit must be >= 2");
  std::vector<TokenId> ids = encode(vocab, text, true);
  const bool cut = ids.size() > max_len;
  if (cut) {
    ids.resize(max_len);
    ids.back() = kEosId;
  }
  if (truncated) *truncated = cut;
  return ids;
}

StageResult run_stage(const Checkpoint& start, const StageConfig& scfg, const Corpus& corpus, const StageHooks& hooks) {
  const ModelConfig& cfg = start.config;
  scfg.validate(cfg);
  if (cfg.vocab_size != start.vocab.size()) {
    throw ConfigError("model vocab_size " + std::to_string(cfg.vocab_size) + " does not match vocabulary of " +
                      std::to_string(start.vocab.size()));
  }
  check_compatible(start.params, cfg);

  StageResult result;
  Checkpoint& out = result.checkpoint;
  out.config = cfg;
  out.vocab = start.vocab;
  out.params = start.params.deep_copy();
  out.optimizer = AdamWState::zeros_like(out.params);
  out.provenance = start.provenance;

  const SplitCorpus split = split_corpus(corpus, scfg.eval_fraction, scfg.seed);
  const EncodedSplit train = encode_split(out.vocab, split.train, scfg, result);
  const EncodedSplit eval = encode_split(out.vocab, split.eval, scfg, result);
  if (hooks.log && (result.truncated_sources || result.truncated_targets)) {
    *hooks.log << "warning: stage " << scfg.name << ": truncated " << result.truncated_sources << " sources to "
               << scfg.max_src_len << " tokens and " << result.truncated_targets << " targets to " << scfg.max_tgt_len
               << " tokens\n";
  }
  GenerationConfig gcfg;
  gcfg.max_new_tokens = std::min(scfg.max_tgt_len, cfg.max_tgt_pos) - 1;

  if (hooks.on_stage_start) hooks.on_stage_start(out.params, out.optimizer);

  Rng dropout_rng(derive_seed(scfg.seed, kDropoutStream));
  ForwardOptions fopts;
  if (cfg.dropout > 0.0) fopts.dropout_rng = &dropout_rng;

  std::vector<std::size_t> order(train.pairs.size());
  std::vector<SequencePair> batch;
  for (std::size_t epoch = 1; epoch <= scfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(derive_seed(scfg.seed, kShuffleStream), epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += scfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + scfg.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train.pairs[order[i]]);
      out.params.zero_grad();
      Tensor loss = forward_loss(out.params, batch, cfg, fopts);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite training loss " + std::to_string(value) + " at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(begin / scfg.batch_size + 1));
      }
      loss.backward();
      adamw_step(out.params, out.optimizer, scfg.optimizer);
      loss_sum += value * static_cast<double>(end - begin);
    }
    out.params.zero_grad();

    EpochMetrics m;
    m.stage = scfg.name;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    std::tie(m.eval_loss, m.rouge) = evaluate(out.params, cfg, out.vocab, eval, gcfg);
    if (hooks.log) {
      *hooks.log << "stage " << scfg.name << " epoch " << epoch << "/" << scfg.epochs << " train_loss "
                 << fmt(m.train_loss) << " eval_loss " << fmt(m.eval_loss) << " rouge1_f1 " << fmt(m.rouge.rouge1.f1)
                 << "\n";
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(m);
    result.metrics.push_back(std::move(m));
  }
  out.provenance.push_back({scfg.name, scfg.epochs});
  if (hooks.on_stage_end) hooks.on_stage_end(out);
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& pcfg, const PipelineOptions& opts) {
  pcfg.validate();
  std::vector<Corpus> corpora;
  for (const auto& s : pcfg.stages) {
    try {
      corpora.push_back(load_stage_corpus(s));
    } catch (const DataError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const ConfigError& e) {
      rethrow_in_stage(s.name, e);
    }
  }

  Checkpoint current;
  if (pcfg.init_checkpoint) {
    current = load_checkpoint(*pcfg.init_checkpoint);
    ModelConfig expected = pcfg.model;
    expected.vocab_size = current.config.vocab_size;
    if (!(expected == current.config)) {
      throw CheckpointError("init checkpoint " + *pcfg.init_checkpoint + " was trained with a different model config");
    }
    check_compatible(current.params, current.config);
  } else {
    if (opts.vocab) {
      current.vocab = *opts.vocab;
    } else if (pcfg.vocab_path) {
      current.vocab = Vocab::load(*pcfg.vocab_path);
    } else {
      std::vector<std::string> texts;
      for (const auto& c : corpora) {
        for (const auto& ex : c.pairs) {
          texts.push_back(ex.source);
          texts.push_back(ex.target);
        }
      }
      current.vocab = build_vocab(texts, pcfg.vocab_min_freq, std::numeric_limits<std::size_t>::max());
    }
    current.config = pcfg.model;
    current.config.vocab_size = current.vocab.size();
    current.params = init_model(current.config, pcfg.seed);
  }

  PipelineResult result;
  for (std::size_t i = 0; i < pcfg.stages.size(); ++i) {
    const StageConfig& s = pcfg.stages[i];
    try {
      StageResult r = run_stage(current, s, corpora[i], opts.hooks);
      current = std::move(r.checkpoint);
      result.logs.push_back(std::move(r.metrics));
    } catch (const TrainingError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const DataError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const ConfigError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const LengthError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const CheckpointError& e) {
      rethrow_in_stage(s.name, e);
    } catch (const Error& e) {
      rethrow_in_stage(s.name, e);
    }
  }
  result.checkpoint = std::move(current);
  return result;
}

std::string metric_line(const EpochMetrics& m) { return metrics_json(m).dump(); }

std::string metric_log_jsonl(const std::vector<MetricLog>& logs) {
  std::string out;
  for (const auto& log : logs) {
    for (const auto& m : log) out += metric_line(m) + "\n";
  }
  return out;
}

std::string metric_summary_json(const PipelineResult& result) {
  json stages = json::array();
  for (const auto& log : result.logs) {
    if (log.empty()) continue;
    stages.push_back(metrics_json(log.back()));
  }
  json provenance = json::array();
  for (const auto& r : result.checkpoint.provenance) provenance.push_back({{"stage", r.stage}, {"epochs", r.epochs}});
  json doc{{"final", stages}, {"provenance", provenance}};
  return doc.dump(2) + "\n";
}

}  // namespace afg
