#include "afg/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "afg/attention.hpp"
#include "afg/checkpoint.hpp"
#include "afg/errors.hpp"
#include "afg/generation.hpp"
#include "afg/pipeline.hpp"
#include "afg/rouge.hpp"
#include "afg/synthetic.hpp"

namespace afg::cli {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << content;
  if (!f) throw DataError("failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

struct SyntheticArgs {
  std::string role;
  std::size_t size = 0;
  std::size_t length_scale = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest_out;
};

struct TrainArgs {
  std::string config;
  std::string checkpoint;
  std::string log;
};

struct GenerateArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::size_t max_new_tokens = 0;  // 0: max_tgt_pos - 1
};

struct RougeArgs {
  std::string candidates;
  std::string references;
  std::string out;
};

struct BenchArgs {
  std::vector<std::size_t> n_list;
  std::size_t window = 16;
  std::size_t globals = 1;
  std::string out;
};

struct VocabArgs {
  std::vector<std::string> corpora;
  std::size_t min_freq = 1;
  std::size_t max_size = 0;  // 0: unlimited
  std::string out;
};

void cmd_make_synthetic(const SyntheticArgs& a) {
  const StageRole role = parse_role(a.role);
  const SyntheticCorpus syn = make_synthetic(role, a.size, a.length_scale, a.seed);
  write_file(a.out, corpus_to_jsonl(syn.corpus));
  if (!a.manifest_out.empty()) write_file(a.manifest_out, manifest_json(role, a.seed, syn.manifest));
}

void cmd_train(const TrainArgs& a, std::ostream& err) {
  const PipelineConfig pcfg = load_pipeline_config(a.config);
  PipelineOptions opts;
  opts.hooks.log = &err;
  const PipelineResult result = run_pipeline(pcfg, opts);
  save_checkpoint(result.checkpoint, a.checkpoint);
  if (!a.log.empty()) {
    write_file(a.log, metric_log_jsonl(result.logs));
    write_file(a.log + ".summary.json", metric_summary_json(result));
  }
}

void cmd_generate(const GenerateArgs& a, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  check_compatible(ckpt.params, ckpt.config);
  if (ckpt.vocab.size() != ckpt.config.vocab_size) {
    throw CheckpointError("checkpoint vocabulary has " + std::to_string(ckpt.vocab.size()) +
                          " tokens but its model config expects " + std::to_string(ckpt.config.vocab_size));
  }
  GenerationConfig gcfg;
  gcfg.max_new_tokens = a.max_new_tokens == 0 ? ckpt.config.max_tgt_pos - 1 : a.max_new_tokens;
  gcfg.validate(ckpt.config);

  const std::vector<std::string> lines = read_lines(a.input);
  std::string out;
  std::size_t truncated = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = a.input + ":" + std::to_string(i + 1) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(where + "malformed JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("source") ||
        !j["source"].is_string()) {
      throw DataError(where + "expected string fields \"id\" and \"source\"");
    }
    bool cut = false;
    const auto src = encode_bounded(ckpt.vocab, j["source"].get<std::string>(), ckpt.config.max_src_pos, &cut);
    truncated += cut;
    const std::string text = decode(ckpt.vocab, greedy_decode(ckpt.params, src, gcfg, ckpt.config));
    out += nlohmann::json{{"id", j["id"]}, {"output", text}}.dump() + "\n";
  }
  if (truncated) {
    err << "warning: truncated " << truncated << " sources to " << ckpt.config.max_src_pos << " tokens\n";
  }
  write_file(a.out, out);
}

void cmd_rouge(const RougeArgs& a, std::ostream& out) {
  const auto cands = read_lines(a.candidates);
  const auto refs = read_lines(a.references);
  if (cands.size() != refs.size()) {
    throw DataError("candidates have " + std::to_string(cands.size()) + " lines but references have " +
                    std::to_string(refs.size()));
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < cands.size(); ++i) pairs.emplace_back(cands[i], refs[i]);
  const std::string report = rouge_report_json(corpus_rouge(pairs));
  if (a.out.empty()) {
    out << report;
  } else {
    write_file(a.out, report);
  }
}

void cmd_attn_bench(const BenchArgs& a, std::ostream& out) {
  AttentionConfig acfg;
  acfg.window = a.window;
  acfg.global_indices.clear();
  for (std::size_t g = 0; g < a.globals; ++g) acfg.global_indices.push_back(g);
  acfg.validate();
  std::string csv = "n,dense_pairs,sparse_pairs,window,globals\n";
  for (std::size_t n : a.n_list) {
    if (n < 1) throw ConfigError("--n-list entries must be >= 1");
    if (a.globals > n) throw ConfigError("--globals " + std::to_string(a.globals) + " exceeds n=" + std::to_string(n));
    csv += std::to_string(n) + "," + std::to_string(dense_pair_count(n)) + "," +
           std::to_string(attention_pair_count(n, acfg)) + "," + std::to_string(a.window) + "," +
           std::to_string(a.globals) + "\n";
  }
  if (a.out.empty()) {
    out << csv;
  } else {
    write_file(a.out, csv);
  }
}

void cmd_build_vocab(const VocabArgs& a) {
  std::vector<std::string> texts;
  for (const auto& path : a.corpora) {
    for (const auto& ex : load_corpus(path).pairs) {
      texts.push_back(ex.source);
      texts.push_back(ex.target);
    }
  }
  const std::size_t max_size = a.max_size == 0 ? std::numeric_limits<std::size_t>::max() : a.max_size;
  build_vocab(texts, a.min_freq, max_size).save(a.out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-document feedback generation toolkit", "afg"};
  app.require_subcommand(1);

  SyntheticArgs syn;
  auto* make = app.add_subcommand("make-synthetic", "Write a synthetic corpus (JSONL) and its defect manifest");
  make->add_option("--role", syn.role, "Stage role")
      ->required()
      ->check(CLI::IsMember({"summarize", "review", "feedback"}));
  make->add_option("--size", syn.size, "Number of pairs")->required()->check(CLI::PositiveNumber);
  make->add_option("--length-scale", syn.length_scale, "Source length multiplier for the feedback role")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  make->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  make->add_option("--out", syn.out, "Corpus JSONL path")->required();
  make->add_option("--manifest-out", syn.manifest_out, "Manifest JSON path (planted defects per id)");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Run a staged training pipeline");
  tr->add_option("--pipeline-config", train.config, "Pipeline config JSON")->required();
  tr->add_option("--out-checkpoint", train.checkpoint, "Final checkpoint path")->required();
  tr->add_option("--log", train.log, "Metric log JSONL path; a .summary.json is written next to it");

  GenerateArgs gen;
  auto* ge = app.add_subcommand("generate", "Greedy-decode targets for a JSONL file of {id, source}");
  ge->add_option("--checkpoint", gen.checkpoint, "Checkpoint path")->required();
  ge->add_option("--input-file", gen.input, "Input JSONL")->required();
  ge->add_option("--out", gen.out, "Output JSONL of {id, output}")->required();
  ge->add_option("--max-new-tokens", gen.max_new_tokens, "Decoding limit (default max_tgt_pos - 1)");

  RougeArgs rouge;
  auto* ro = app.add_subcommand("rouge", "Score aligned candidate and reference lines");
  ro->add_option("--candidates", rouge.candidates, "Candidate file, one text per line")->required();
  ro->add_option("--references", rouge.references, "Reference file, one text per line")->required();
  ro->add_option("--out", rouge.out, "Report JSON path (default stdout)");

  BenchArgs bench;
  auto* be = app.add_subcommand("attn-bench", "Dense vs sliding-window attended pair counts as CSV");
  be->add_option("--n-list", bench.n_list, "Sequence lengths, comma separated")->required()->delimiter(',');
  be->add_option("--window", bench.window, "Window size w (half-window w/2)")->capture_default_str();
  be->add_option("--globals", bench.globals, "Number of global positions, taken as 0..g-1")->capture_default_str();
  be->add_option("--out", bench.out, "CSV path (default stdout)");

  VocabArgs vocab;
  auto* vo = app.add_subcommand("build-vocab", "Build a vocabulary file from corpora");
  vo->add_option("--corpus", vocab.corpora, "Corpus JSONL (repeatable)")->required();
  vo->add_option("--min-freq", vocab.min_freq, "Minimum token count")->capture_default_str()->check(CLI::PositiveNumber);
  vo->add_option("--max-size", vocab.max_size, "Vocabulary size cap including specials (0: none)")
      ->capture_default_str();
  vo->add_option("--out", vocab.out, "Vocabulary path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*make) cmd_make_synthetic(syn);
    if (*tr) cmd_train(train, err);
    if (*ge) cmd_generate(gen, err);
    if (*ro) cmd_rouge(rouge, out);
    if (*be) cmd_attn_bench(bench, out);
    if (*vo) cmd_build_vocab(vocab);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kTrainingFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

}  // namespace afg::cli
