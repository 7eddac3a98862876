// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "afg/adamw.hpp"
#include "afg/attention.hpp"
#include "afg/checkpoint.hpp"
#include "afg/cli.hpp"
#include "afg/errors.hpp"
#include "afg/generation.hpp"
#include "afg/model.hpp"
#include "afg/ops.hpp"
#include "afg/pipeline.hpp"
#include "afg/rouge.hpp"
#include "afg/synthetic.hpp"
#include "grad_check.hpp"

namespace {

using namespace afg;
using afg::testing::grad_check;
using afg::testing::random_tensor;
using afg::testing::weighted_sum;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("afg_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1. Finite-difference gradients.
Outcome gradient_correctness() {
  Rng rng(1);
  std::vector<std::pair<std::string, std::function<double()>>> checks;
  const auto check = [&](std::string name, std::function<Tensor()> f, std::vector<Tensor> inputs) {
    checks.emplace_back(std::move(name), [f, inputs] { return grad_check(f, inputs).max_rel_error; });
  };
  Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 5}), bt = random_tensor(rng, {5, 4});
  Tensor c = random_tensor(rng, {3, 4}), w35 = random_tensor(rng, {3, 5}, -1, 1, false),
         w34 = random_tensor(rng, {3, 4}, -1, 1, false), row = random_tensor(rng, {4}),
         gain = random_tensor(rng, {4}, 0.5, 1.5);
  check("matmul", [=] { return weighted_sum(matmul(a, b), w35); }, {a, b});
  check("matmul_nt", [=] { return weighted_sum(matmul_nt(a, bt), w35); }, {a, bt});
  check("add", [=] { return weighted_sum(add(a, c), w34); }, {a, c});
  check("add_row", [=] { return weighted_sum(add_row(a, row), w34); }, {a, row});
  check("mul", [=] { return weighted_sum(mul(a, c), w34); }, {a, c});
  check("scale", [=] { return weighted_sum(scale(a, -2.5), w34); }, {a});
  check("sum/mean", [=] { return mul(sum(a), mean(c)); }, {a, c});
  check("softmax", [=] { return weighted_sum(softmax_rows(a), w34); }, {a});
  Tensor sq = random_tensor(rng, {4, 4}), w44 = random_tensor(rng, {4, 4}, -1, 1, false);
  const Tensor causal = causal_mask(4).to_additive();
  check("masked softmax", [=] { return weighted_sum(softmax_rows(sq, causal), w44); }, {sq});
  check("layer_norm", [=] { return weighted_sum(layer_norm(a, gain, row), w34); }, {a, gain, row});
  check("gelu", [=] { return weighted_sum(gelu(scale(a, 2.0)), w34); }, {a});
  const std::vector<TokenId> targets{1, 0, 3};
  check("cross_entropy", [=] { return cross_entropy_logits(a, targets, 0); }, {a});
  Tensor table = random_tensor(rng, {6, 4});
  const std::vector<TokenId> ids{5, 2, 5};
  check("embedding", [=] { return weighted_sum(embedding(table, ids), w34); }, {table});
  check("leading_rows", [=] { return weighted_sum(leading_rows(table, 3), w34); }, {table});
  check("slice/concat", [=] {
        const std::vector<Tensor> parts{slice_cols(a, 2, 2), slice_cols(c, 0, 2)};
        return weighted_sum(concat_cols(parts), w34);
      }, {a, c});
  check("dropout", [=] {
        Rng r(7);
        return weighted_sum(dropout(a, 0.25, r), w34);
      }, {a});
  Tensor q = random_tensor(rng, {4, 4}), k = random_tensor(rng, {4, 4}), v = random_tensor(rng, {4, 4});
  AttentionConfig acfg;
  acfg.window = 2;
  acfg.global_indices = {0};
  const AttentionMask sparse = build_sparse_mask(4, acfg);
  check("attend (sparse)", [=] { return weighted_sum(attend(q, k, v, &sparse), w44); }, {q, k, v});
  AttentionWeights aw{random_tensor(rng, {4, 4}), random_tensor(rng, {4}), random_tensor(rng, {4, 4}),
                      random_tensor(rng, {4}),    random_tensor(rng, {4, 4}), random_tensor(rng, {4}),
                      random_tensor(rng, {4, 4}), random_tensor(rng, {4})};
  Tensor mem = random_tensor(rng, {5, 4});
  check("multi_head_attend", [=] { return weighted_sum(multi_head_attend(q, mem, mem, aw, 2, nullptr), w44); },
      {q, mem, aw.wq, aw.bq, aw.wk, aw.bk, aw.wv, aw.bv, aw.wo, aw.bo});

  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& [name, check] : checks) {
    const double e = check();
    if (e > worst_op) {
      worst_op = e;
      worst_name = name;
    }
  }

  ModelConfig cfg;
  cfg.vocab_size = 8;
  cfg.d_model = 4;
  cfg.heads = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.d_ff = 8;
  cfg.max_src_pos = 8;
  cfg.max_tgt_pos = 6;
  cfg.attention.window = 2;
  ModelParams p = init_model(cfg, 3);
  for (auto& e : p.entries())
    for (Real& x : e.value.mutable_data()) x += rng.uniform(-0.3, 0.3);
  const std::vector<SequencePair> batch{{{1, 4, 5, 6, 7, 2}, {1, 5, 7, 2}}, {{1, 3, 2}, {1, 6, 2}}};
  std::vector<Tensor> leaves;
  for (const auto& e : p.entries()) leaves.push_back(e.value);
  const double e2e = grad_check([&] { return forward_loss(p, batch, cfg); }, leaves).max_rel_error;

  return {worst_op <= 1e-4 && e2e <= 1e-3,
          std::to_string(checks.size()) + " ops max rel err " + fmt("%.2e", worst_op) + " (" + worst_name +
              "), end-to-end " + fmt("%.2e", e2e)};
}

// 2. Sliding-window attention with a window covering the sequence is dense.
Outcome sparse_dense_equivalence() {
  Rng rng(2);
  double worst = 0.0;
  for (std::size_t n : {2, 4, 8, 16, 32}) {
    for (std::size_t w : {2 * n, 4 * n}) {
      AttentionConfig cfg;
      cfg.window = w;
      cfg.global_indices.clear();
      const Tensor q = random_tensor(rng, {n, 8}, -2, 2, false), k = random_tensor(rng, {n, 8}, -2, 2, false),
                   v = random_tensor(rng, {n, 8}, -2, 2, false);
      const AttentionMask mask = build_sparse_mask(n, cfg);
      const Tensor s = attend(q, k, v, &mask), d = attend(q, k, v);
      for (std::size_t i = 0; i < s.numel(); ++i) worst = std::max(worst, std::abs(s.at(i) - d.at(i)));
    }
  }
  return {worst <= 1e-10, "max |delta| " + fmt("%.2e", worst)};
}

// 3. Closed-form pair counts and near-linear growth.
Outcome scaling_witness() {
  std::size_t cases = 0, mismatches = 0;
  std::vector<char> is_global;
  for (std::size_t w : {2, 4, 8}) {
    for (std::size_t n = 1; n <= 64; ++n) {
      std::vector<std::vector<std::size_t>> sets{{}};
      for (std::size_t a = 0; a < n; ++a) {
        sets.push_back({a});
        for (std::size_t b = a + 1; b < n; ++b) sets.push_back({a, b});
      }
      for (const auto& g : sets) {
        is_global.assign(n, 0);
        for (std::size_t x : g) is_global[x] = 1;
        std::uint64_t brute = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            brute += ((i > j ? i - j : j - i) <= w / 2 || is_global[i] || is_global[j]) ? 1 : 0;
        AttentionConfig cfg;
        cfg.window = w;
        cfg.global_indices = g;
        ++cases;
        mismatches += attention_pair_count(n, cfg) != brute;
      }
    }
  }
  AttentionConfig cfg;
  cfg.window = 8;
  cfg.global_indices = {0};
  double worst_ratio = 0.0;
  bool dense_exact = true;
  for (std::size_t n : {128, 256, 512}) {
    worst_ratio = std::max(worst_ratio, static_cast<double>(attention_pair_count(2 * n, cfg)) /
                                            static_cast<double>(attention_pair_count(n, cfg)));
    dense_exact = dense_exact && dense_pair_count(2 * n) == 4 * dense_pair_count(n);
  }
  return {mismatches == 0 && worst_ratio <= 2.2 && dense_exact,
          std::to_string(cases) + " configurations, " + std::to_string(mismatches) + " mismatches; sparse ratio " +
              fmt("%.4f", worst_ratio) + ", dense ratio " + (dense_exact ? "4" : "not 4")};
}

// 4. ROUGE hand fixtures and LCS against exhaustive search.
Outcome rouge_oracle() {
  struct Fixture {
    RougeScore got;
    double p, r, f;
  };
  const std::vector<Fixture> fixtures{
      {rouge_n("the cat sat", "the cat sat", 1), 1, 1, 1},
      {rouge_n("the cat", "the cat sat", 1), 1, 2.0 / 3.0, 0.8},
      {rouge_n("a b c", "a b d", 2), 0.5, 0.5, 0.5},
      {rouge_n("the the the", "the cat", 1), 1.0 / 3.0, 0.5, 0.4},
      {rouge_l("x y z", "x y z"), 1, 1, 1},
      {rouge_l("a c b", "a b c"), 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0},
      {rouge_l("", "a b c"), 0, 0, 0},
      {rouge_lsum("a b c .", "a b c ."), 1, 1, 1},
      {rouge_lsum("a b . c d .", "c d . a b ."), 1, 1, 1},
      {rouge_lsum("a b c", "a b c"), 1, 1, 1},
      {rouge_lsum("a a .", "a . a ."), 1, 0.75, 6.0 / 7.0},
  };
  std::size_t bad = 0;
  for (const auto& fx : fixtures) {
    bad += std::abs(fx.got.precision - fx.p) > 1e-9 || std::abs(fx.got.recall - fx.r) > 1e-9 ||
           std::abs(fx.got.f1 - fx.f) > 1e-9;
  }
  bad += !(rouge_l("a b . c d .", "c d . a b .").f1 < 1.0);
  const std::vector<std::pair<std::string, std::string>> mixed{{"a b c .", "a b c ."}, {"x y .", "p q"}};
  const RougeReport m = corpus_rouge(mixed);
  for (double f : {m.rouge1.f1, m.rouge2.f1, m.rougeL.f1, m.rougeLsum.f1}) bad += std::abs(f - 0.5) > 1e-9;

  Rng rng(4);
  const std::vector<std::string> alphabet{"a", "b", "c", "d"};
  std::size_t lcs_bad = 0;
  for (int t = 0; t < 200; ++t) {
    Tokens x(rng.index(11)), y(rng.index(11));
    for (auto& s : x) s = alphabet[rng.index(4)];
    for (auto& s : y) s = alphabet[rng.index(4)];
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << x.size()); ++mask) {
      std::size_t j = 0, len = 0;
      bool ok = true;
      for (std::size_t i = 0; i < x.size() && ok; ++i) {
        if (!(mask >> i & 1u)) continue;
        while (j < y.size() && y[j] != x[i]) ++j;
        if (j == y.size()) ok = false;
        else {
          ++j;
          ++len;
        }
      }
      if (ok) best = std::max(best, len);
    }
    lcs_bad += lcs_length(x, y) != best;
  }
  return {bad == 0 && lcs_bad == 0, std::to_string(fixtures.size() + 5) + " fixtures, " + std::to_string(bad) +
                                        " off; 200 LCS pairs, " + std::to_string(lcs_bad) + " off"};
}

ModelConfig base_model() {
  ModelConfig c;
  c.d_model = 64;
  c.heads = 4;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.d_ff = 128;
  c.max_src_pos = 256;
  c.max_tgt_pos = 64;
  c.attention.window = 16;
  c.attention.global_indices = {0};
  return c;
}

// 5. Memorizing eight summarize pairs.
Outcome overfit_memorization() {
  // Ten generated pairs split 8/2; the eight training pairs are the ones
  // that must be memorized.
  const Corpus corpus = make_synthetic(StageRole::summarize, 10, 1, 5).corpus;
  Checkpoint start;
  std::vector<std::string> texts;
  for (const auto& p : corpus.pairs) {
    texts.push_back(p.source);
    texts.push_back(p.target);
  }
  start.vocab = build_vocab(texts, 1, 10000);
  start.config = base_model();
  start.config.vocab_size = start.vocab.size();
  start.params = init_model(start.config, 5);

  StageConfig s;
  s.name = "overfit";
  s.synthetic = SyntheticSpec{StageRole::summarize, 10, 1, 5};
  s.epochs = 500;
  s.batch_size = 2;
  s.eval_fraction = 0.2;
  s.seed = 5;
  s.max_src_len = 64;
  s.max_tgt_len = 64;
  s.optimizer.lr = 5e-4;
  const StageResult r = run_stage(start, s, corpus);
  const Checkpoint& ck = r.checkpoint;

  const SplitCorpus split = split_corpus(corpus, s.eval_fraction, s.seed);
  GenerationConfig g;
  g.max_new_tokens = ck.config.max_tgt_pos - 1;
  std::size_t exact = 0, longest_src = 0;
  std::vector<std::pair<std::string, std::string>> scored;
  for (const auto& p : split.train.pairs) {
    const auto src = encode_bounded(ck.vocab, p.source, s.max_src_len);
    longest_src = std::max(longest_src, src.size());
    const auto out = greedy_decode(ck.params, src, g, ck.config);
    const auto want = encode(ck.vocab, p.target, false);
    exact += out == want;
    scored.emplace_back(decode(ck.vocab, out), p.target);
  }
  const double loss = r.metrics.back().train_loss, f1 = corpus_rouge(scored).rouge1.f1;
  const bool decreased = r.metrics.back().train_loss < r.metrics.front().train_loss;
  return {split.train.size() == 8 && longest_src <= 64 && loss < 0.1 && exact >= 7 && f1 >= 0.95 && decreased,
          "final train loss " + fmt("%.4f", loss) + ", exact " + std::to_string(exact) + "/" +
              std::to_string(split.train.size()) + ", ROUGE-1 F1 " + fmt("%.4f", f1)};
}

PipelineConfig benchmark_config(std::uint64_t seed, bool with_pretraining) {
  PipelineConfig p;
  p.model = base_model();
  p.seed = seed;
  const auto stage = [&](std::string name, StageRole role, std::size_t size, std::size_t scale, std::size_t epochs,
                         double eval_fraction, double lr) {
    StageConfig s;
    s.name = std::move(name);
    s.synthetic = SyntheticSpec{role, size, scale, derive_seed(seed, s.name.size())};
    s.epochs = epochs;
    s.batch_size = 2;
    s.eval_fraction = eval_fraction;
    s.seed = derive_seed(seed, 100 + s.name.size());
    s.max_src_len = p.model.max_src_pos;
    s.max_tgt_len = p.model.max_tgt_pos;
    s.optimizer.lr = lr;
    return s;
  };
  if (with_pretraining) {
    p.stages.push_back(stage("summarize", StageRole::summarize, 2000, 1, 1, 0.05, kPretrainLearningRate));
    p.stages.push_back(stage("review", StageRole::review, 500, 1, 18, 0.1, kPretrainLearningRate));
  }
  p.stages.push_back(stage("feedback", StageRole::feedback, 70, 1, 50, 0.2, kFinalStageLearningRate));
  return p;
}

// 6. Pretraining stages help the small fine-tuning stage.
Outcome transfer_benefit() {
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const PipelineConfig full = benchmark_config(seed, true);
    const PipelineConfig only = benchmark_config(seed, false);
    // Both runs share one vocabulary so the architectures are identical.
    std::vector<std::string> texts;
    for (const auto& s : full.stages) {
      for (const auto& p : load_stage_corpus(s).pairs) {
        texts.push_back(p.source);
        texts.push_back(p.target);
      }
    }
    PipelineOptions opts;
    opts.vocab = build_vocab(texts, 1, std::numeric_limits<std::size_t>::max());
    const PipelineResult a = run_pipeline(full, opts);
    const PipelineResult b = run_pipeline(only, opts);
    const double fa = a.logs.back().back().rouge.rouge1.f1, fb = b.logs.back().back().rouge.rouge1.f1;
    const bool ok = fa >= fb + 0.10;
    all = all && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " pipeline " +
              fmt("%.4f", fa) + " vs fine-tune-only " + fmt("%.4f", fb) + " (" + fmt("%+.4f", fa - fb) + ")";
  }
  return {all, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// 7. Training twice through the command line gives identical files.
Outcome determinism() {
  const fs::path dir = scratch_dir("determinism");
  std::ostringstream out, err;
  for (const char* role : {"summarize", "review", "feedback"}) {
    cli::run({"make-synthetic", "--role", role, "--size", "24", "--seed", "8", "--out",
              (dir / (std::string(role) + ".jsonl")).string()},
             out, err);
  }
  std::ofstream(dir / "pipeline.json") << R"({
    "model": {"d_model": 32, "heads": 4, "enc_layers": 1, "dec_layers": 1, "d_ff": 64,
              "max_src_pos": 128, "max_tgt_pos": 48, "dropout": 0.1},
    "seed": 4,
    "stages": [
      {"name": "summarize", "corpus_path": "summarize.jsonl", "epochs": 1, "seed": 1},
      {"name": "review", "corpus_path": "review.jsonl", "epochs": 2, "seed": 2},
      {"name": "feedback", "corpus_path": "feedback.jsonl", "epochs": 2, "seed": 3}
    ]})";
  int codes = 0;
  for (const char* tag : {"a", "b"}) {
    codes += cli::run({"train", "--pipeline-config", (dir / "pipeline.json").string(), "--out-checkpoint",
                       (dir / (std::string("ckpt_") + tag)).string(), "--log",
                       (dir / (std::string("log_") + tag)).string()},
                      out, err);
  }
  const std::string ca = slurp(dir / "ckpt_a"), la = slurp(dir / "log_a");
  const bool same = codes == 0 && !ca.empty() && ca == slurp(dir / "ckpt_b") && !la.empty() &&
                    la == slurp(dir / "log_b") && slurp(dir / "log_a.summary.json") == slurp(dir / "log_b.summary.json");
  fs::remove_all(dir);
  return {same, "checkpoint " + std::to_string(ca.size()) + " bytes, log " + std::to_string(la.size()) +
                    " bytes, " + (same ? "identical" : "different or failed: " + err.str())};
}

// 8. AdamW on f(theta) = theta^2.
Outcome adamw_trace() {
  const double want[5] = {0.90000000049999995, 0.80041222869179218, 0.70158627294602960, 0.60393906057374480,
                          0.50796365926434073};
  ModelParams params;
  params.add("theta", Tensor::scalar(1.0, true));
  AdamWState state = AdamWState::zeros_like(params);
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    params.zero_grad();
    Tensor theta = params.get("theta");
    mul(theta, theta).backward();
    adamw_step(params, state, cfg);
    worst = std::max(worst, std::abs(params.get("theta").item() - want[t]));
  }
  return {worst <= 1e-9, "5 steps, max deviation " + fmt("%.2e", worst) + ", step 1 theta " +
                             fmt("%.10f", want[0])};
}

// 9. Checkpoint round trip and corruption.
Outcome checkpoint_round_trip() {
  const fs::path dir = scratch_dir("checkpoint");
  PipelineConfig p;
  p.model = base_model();
  p.model.d_model = 32;
  p.model.d_ff = 64;
  p.model.enc_layers = p.model.dec_layers = 1;
  StageConfig s;
  s.name = "train";
  s.synthetic = SyntheticSpec{StageRole::review, 20, 1, 3};
  s.epochs = 2;
  s.max_src_len = p.model.max_src_pos;
  s.max_tgt_len = p.model.max_tgt_pos;
  p.stages = {s};
  const Checkpoint trained = run_pipeline(p).checkpoint;
  const std::string path = (dir / "ckpt.bin").string();
  save_checkpoint(trained, path);
  const Checkpoint back = load_checkpoint(path);
  const bool identical = back.params.bitwise_equal(trained.params) && back.optimizer.m == trained.optimizer.m &&
                         back.optimizer.v == trained.optimizer.v && back.provenance == trained.provenance &&
                         back.vocab == trained.vocab && back.config == trained.config &&
                         trained.optimizer.step > 0;

  std::string bytes = slurp(path);
  const auto rejected = [&](const std::string& corrupt) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << corrupt;
    try {
      load_checkpoint(path);
    } catch (const CheckpointError& e) {
      return std::string(e.what()).find("checksum") != std::string::npos;
    }
    return false;
  };
  std::string flipped = bytes;
  flipped[flipped.size() / 2 + flipped.size() / 4] ^= 0x01;
  const bool flip_ok = rejected(flipped);
  const bool trunc_ok = rejected(bytes.substr(0, bytes.size() - 8));
  fs::remove_all(dir);
  return {identical && flip_ok && trunc_ok,
          std::string("round trip ") + (identical ? "bitwise identical" : "DIFFERS") + ", flipped byte " +
              (flip_ok ? "rejected" : "ACCEPTED") + ", truncation " + (trunc_ok ? "rejected" : "ACCEPTED")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"gradient correctness", gradient_correctness},
      {"sparse/dense attention equivalence", sparse_dense_equivalence},
      {"attention scaling witness", scaling_witness},
      {"ROUGE oracle", rouge_oracle},
      {"overfit memorization", overfit_memorization},
      {"transfer benefit", transfer_benefit},
      {"training determinism", determinism},
      {"AdamW trace", adamw_trace},
      {"checkpoint round trip", checkpoint_round_trip},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
