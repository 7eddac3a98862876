#include "afg/corpus.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <unordered_set>

#include "afg/errors.hpp"
#include "afg/rng.hpp"

namespace afg {

using nlohmann::json;

void Corpus::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& p : pairs) {
    if (p.id.empty()) throw DataError("corpus " + name + ": empty id");
    if (p.source.empty() || p.target.empty()) throw DataError("corpus " + name + ": empty source or target in " + p.id);
    if (!seen.insert(p.id).second) throw DataError("corpus " + name + ": duplicate id " + p.id);
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path);
  Corpus corpus;
  corpus.name = path;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = [&] { return path + ":" + std::to_string(line_no) + ": "; };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where() + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where() + "expected a JSON object");
    ExamplePair pair;
    for (const char* key : {"id", "source", "target"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw DataError(where() + "missing string field \"" + key + "\"");
      }
    }
    pair.id = obj["id"].get<std::string>();
    pair.source = obj["source"].get<std::string>();
    pair.target = obj["target"].get<std::string>();
    if (pair.id.empty() || pair.source.empty() || pair.target.empty()) {
      throw DataError(where() + "id, source and target must be non-empty");
    }
    if (!seen.insert(pair.id).second) throw DataError(where() + "duplicate id " + pair.id);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& p : corpus.pairs) {
    json obj = json::object();
    obj["id"] = p.id;
    obj["source"] = p.source;
    obj["target"] = p.target;
    // nlohmann sorts keys; emit in the documented order instead.
    out += "{\"id\":" + obj["id"].dump() + ",\"source\":" + obj["source"].dump() +
           ",\"target\":" + obj["target"].dump() + "}\n";
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path);
  out << corpus_to_jsonl(corpus);
  if (!out) throw DataError("failed writing corpus file " + path);
}

std::size_t eval_count(std::size_t size, double eval_fraction) {
  return static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(size) + 0.5));
}

SplitCorpus split_corpus(const Corpus& corpus, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must be in (0, 1), got " + std::to_string(eval_fraction));
  }
  const std::size_t n = corpus.size();
  const std::size_t n_eval = eval_count(n, eval_fraction);
  if (n < 2 || n_eval == 0 || n_eval >= n) {
    throw DataError("corpus " + corpus.name + " with " + std::to_string(n) + " pairs is too small for eval_fraction " +
                    std::to_string(eval_fraction));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  SplitCorpus split;
  split.eval_fraction = eval_fraction;
  split.seed = seed;
  split.train.name = corpus.name + "/train";
  split.eval.name = corpus.name + "/eval";
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_eval ? split.eval : split.train).pairs.push_back(corpus.pairs[order[i]]);
  }
  return split;
}

}  // namespace afg
