#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace afg {

struct ExamplePair {
  std::string id;
  std::string source;
  std::string target;

  friend bool operator==(const ExamplePair&, const ExamplePair&) = default;
};

struct Corpus {
  std::string name;
  std::vector<ExamplePair> pairs;

  std::size_t size() const { return pairs.size(); }
  // Throws DataError on empty fields or duplicate ids.
  void validate() const;
};

struct SplitCorpus {
  Corpus train;
  Corpus eval;
  double eval_fraction = 0.2;
  std::uint64_t seed = 0;
};

// JSONL, one {"id", "source", "target"} object per line, UTF-8. Blank
// lines are skipped. Errors name the 1-based line number.
Corpus load_corpus(const std::string& path);
// Same format; written with keys in id/source/target order.
void save_corpus(const Corpus& corpus, const std::string& path);
std::string corpus_to_jsonl(const Corpus& corpus);

// Round-half-up of eval_fraction * size.
std::size_t eval_count(std::size_t size, double eval_fraction);

// Seeded uniform shuffle, then the first eval_count items form the eval
// split. Both splits keep the shuffled order. Throws DataError when either
// side would be empty.
SplitCorpus split_corpus(const Corpus& corpus, double eval_fraction, std::uint64_t seed);

}  // namespace afg
