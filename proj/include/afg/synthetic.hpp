#pragma once

// Seeded synthetic corpora standing in for the three training stages.
//
//   summarize  six templated sentences; the target is the sentences that
//              carry a keyword, verbatim and in order.
//   review     a document in five headed sections with planted defects
//              (a missing heading, an adjacent repeated word); the target
//              is templated feedback naming every defect.
//   feedback   the review generator with length_scale times as many
//              sentences per section.
//
// Targets are a deterministic function of sources: expected_target()
// recomputes them from the source text alone.

#include <cstdint>
#include <string>
#include <vector>

#include "afg/corpus.hpp"

namespace afg {

enum class StageRole { summarize, review, feedback };

StageRole parse_role(const std::string& name);  // throws ConfigError
std::string role_name(StageRole role);

struct PlantedDefect {
  std::string kind;  // "missing_heading" or "repeated_word"
  std::string detail;  // section name or the repeated word

  friend bool operator==(const PlantedDefect&, const PlantedDefect&) = default;
};

// Per example: planted defects (review/feedback) or selected keyword
// sentence indices (summarize).
struct ManifestEntry {
  std::string id;
  std::vector<PlantedDefect> defects;
  std::vector<std::size_t> keyword_sentences;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<ManifestEntry> manifest;
};

// length_scale stretches feedback sources only; the other roles have a
// fixed base length. Throws ConfigError for size or length_scale < 1.
SyntheticCorpus make_synthetic(StageRole role, std::size_t size, std::size_t length_scale, std::uint64_t seed);

// Rule-based target for a synthetic source.
std::string expected_target(StageRole role, const std::string& source);

// {"role": ..., "seed": ..., "entries": [{"id": ..., "defects": [...]}, ...]}
std::string manifest_json(StageRole role, std::uint64_t seed, const std::vector<ManifestEntry>& manifest);

// Section headings used by the review family, in document order.
const std::vector<std::string>& review_sections();

}  // namespace afg
