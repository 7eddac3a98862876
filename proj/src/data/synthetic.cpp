#include "afg/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "afg/errors.hpp"
#include "afg/rng.hpp"
#include "afg/tokenizer.hpp"

namespace afg {

namespace {

const std::vector<std::string> kAdjectives = {
    "small", "large", "stable", "rapid", "novel",  "simple", "complex", "dense", "thin",  "bright",
    "weak",  "strong", "early", "late",  "broad",  "narrow", "warm",    "cold",  "clear", "rough"};

const std::vector<std::string> kNouns = {
    "sample",  "model",    "crystal",  "solvent", "surface", "molecule", "reaction", "phase",
    "signal",  "sensor",   "bond",     "film",    "particle", "energy",  "field",    "process",
    "metal",   "polymer",  "compound", "powder",  "mixture", "channel", "fibre",    "coating",
    "pigment", "oxide",    "salt",     "vapour",  "gel",     "glass",   "resin",    "alloy"};

const std::vector<std::string> kVerbs = {"affects", "controls", "improves", "reduces", "changes",
                                         "supports", "drives",  "limits",   "follows", "reveals",
                                         "shapes",   "blocks",  "absorbs",  "emits",   "binds"};

const std::vector<std::string> kKeywords = {"protein", "enzyme",   "lattice", "isotope",  "ligand",   "spectrum",
                                            "quantum", "membrane", "plasma",  "nanotube", "electrode", "catalyst"};

const std::vector<std::string> kSections = {"abstract", "introduction", "method", "results", "conclusion"};

constexpr std::size_t kSummarySentences = 6;
constexpr std::size_t kReviewSentencesPerSection = 2;
constexpr double kMissingHeadingRate = 0.3;
constexpr double kRepeatedWordRate = 0.3;
constexpr std::size_t kMaxDefects = 4;
// Slots of the sentence template that may be duplicated (content words).
constexpr std::size_t kRepeatableSlots[] = {1, 2, 3, 5, 6};

using Sentence = std::vector<std::string>;

const std::string& pick(Rng& rng, const std::vector<std::string>& words) { return words[rng.index(words.size())]; }

// "the <adj> <noun> <verb> the <adj> <noun> ."
Sentence make_sentence(Rng& rng, const std::string* subject_override) {
  Sentence s;
  s.push_back("the");
  s.push_back(pick(rng, kAdjectives));
  const std::string& noun = pick(rng, kNouns);
  s.push_back(subject_override ? *subject_override : noun);
  s.push_back(pick(rng, kVerbs));
  s.push_back("the");
  s.push_back(pick(rng, kAdjectives));
  s.push_back(pick(rng, kNouns));
  s.push_back(".");
  return s;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

bool is_keyword(const std::string& w) { return std::find(kKeywords.begin(), kKeywords.end(), w) != kKeywords.end(); }

std::string closing_sentence(std::size_t defects) {
  if (defects == 0) return "overall the document is well organised .";
  if (defects <= 2) return "overall the document needs minor revision .";
  return "overall the document needs major revision .";
}

std::string review_target(const std::vector<std::string>& missing, const std::vector<std::string>& repeated) {
  std::vector<std::string> parts;
  for (const auto& s : missing) parts.push_back("the " + s + " heading is missing .");
  for (const auto& w : repeated) parts.push_back("the word " + w + " is repeated .");
  parts.push_back(closing_sentence(missing.size() + repeated.size()));
  return join(parts);
}

std::string make_id(StageRole role, std::uint64_t seed, std::size_t index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-%llu-%05zu", role_name(role).c_str(), static_cast<unsigned long long>(seed),
                index);
  return buf;
}

ExamplePair make_summary_pair(Rng& rng, ManifestEntry& entry) {
  const std::size_t k = 1 + rng.index(2);
  std::set<std::size_t> chosen;
  while (chosen.size() < k) chosen.insert(rng.index(kSummarySentences));
  std::vector<std::string> source, target;
  for (std::size_t i = 0; i < kSummarySentences; ++i) {
    const bool keyed = chosen.count(i) != 0;
    const std::string keyword = keyed ? pick(rng, kKeywords) : std::string();
    const Sentence s = make_sentence(rng, keyed ? &keyword : nullptr);
    source.insert(source.end(), s.begin(), s.end());
    if (keyed) target.insert(target.end(), s.begin(), s.end());
  }
  entry.keyword_sentences.assign(chosen.begin(), chosen.end());
  return {entry.id, join(source), join(target)};
}

ExamplePair make_review_pair(Rng& rng, std::size_t sentences_per_section, ManifestEntry& entry) {
  std::vector<bool> missing(kSections.size(), false);
  std::size_t planted = 0;
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (rng.bernoulli(kMissingHeadingRate) && planted < kMaxDefects) {
      missing[s] = true;
      ++planted;
    }
  }
  std::vector<std::vector<Sentence>> body(kSections.size());
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    for (std::size_t i = 0; i < sentences_per_section; ++i) body[s].push_back(make_sentence(rng, nullptr));
  }
  // At most one duplicated slot per section, so duplicates never touch.
  std::vector<std::pair<std::size_t, std::size_t>> dup_at(kSections.size(), {SIZE_MAX, SIZE_MAX});
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (rng.bernoulli(kRepeatedWordRate) && planted < kMaxDefects) {
      const std::size_t sentence = rng.index(sentences_per_section);
      const std::size_t slot = kRepeatableSlots[rng.index(std::size(kRepeatableSlots))];
      dup_at[s] = {sentence, slot};
      ++planted;
    }
  }

  std::vector<std::string> source, missing_names, repeated_words;
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (!missing[s]) continue;
    missing_names.push_back(kSections[s]);
    entry.defects.push_back({"missing_heading", kSections[s]});
  }
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (dup_at[s].first == SIZE_MAX) continue;
    repeated_words.push_back(body[s][dup_at[s].first][dup_at[s].second]);
  }
  // Defects are listed headings first, then repeated words in document order.
  for (const auto& w : repeated_words) entry.defects.push_back({"repeated_word", w});

  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (!missing[s]) {
      source.push_back(kSections[s]);
      source.push_back(":");
    }
    for (std::size_t i = 0; i < body[s].size(); ++i) {
      for (std::size_t slot = 0; slot < body[s][i].size(); ++slot) {
        source.push_back(body[s][i][slot]);
        if (dup_at[s] == std::make_pair(i, slot)) source.push_back(body[s][i][slot]);
      }
    }
  }
  return {entry.id, join(source), review_target(missing_names, repeated_words)};
}

}  // namespace

const std::vector<std::string>& review_sections() { return kSections; }

StageRole parse_role(const std::string& name) {
  if (name == "summarize") return StageRole::summarize;
  if (name == "review") return StageRole::review;
  if (name == "feedback") return StageRole::feedback;
  throw ConfigError("unknown stage role '" + name + "' (expected summarize, review or feedback)");
}

std::string role_name(StageRole role) {
  switch (role) {
    case StageRole::summarize:
      return "summarize";
    case StageRole::review:
      return "review";
    case StageRole::feedback:
      return "feedback";
  }
  return "unknown";
}

SyntheticCorpus make_synthetic(StageRole role, std::size_t size, std::size_t length_scale, std::uint64_t seed) {
  if (size < 1) throw ConfigError("synthetic corpus size must be >= 1");
  if (length_scale < 1) throw ConfigError("synthetic length_scale must be >= 1");
  Rng rng(seed);
  SyntheticCorpus out;
  out.corpus.name = "synthetic-" + role_name(role);
  const std::size_t per_section =
      kReviewSentencesPerSection * (role == StageRole::feedback ? length_scale : std::size_t{1});
  for (std::size_t i = 0; i < size; ++i) {
    ManifestEntry entry;
    entry.id = make_id(role, seed, i);
    out.corpus.pairs.push_back(role == StageRole::summarize ? make_summary_pair(rng, entry)
                                                            : make_review_pair(rng, per_section, entry));
    out.manifest.push_back(std::move(entry));
  }
  return out;
}

std::string expected_target(StageRole role, const std::string& source) {
  const std::vector<std::string> tokens = split_tokens(source);
  if (role == StageRole::summarize) {
    std::vector<std::string> out, sentence;
    bool keyed = false;
    for (const auto& t : tokens) {
      sentence.push_back(t);
      keyed = keyed || is_keyword(t);
      if (t == ".") {
        if (keyed) out.insert(out.end(), sentence.begin(), sentence.end());
        sentence.clear();
        keyed = false;
      }
    }
    return join(out);
  }
  std::vector<std::string> missing, repeated;
  for (const auto& section : kSections) {
    bool present = false;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      present = present || (tokens[i] == section && tokens[i + 1] == ":");
    }
    if (!present) missing.push_back(section);
  }
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == tokens[i + 1] && tokens[i] != "." && tokens[i] != ":") {
      repeated.push_back(tokens[i]);
      ++i;
    }
  }
  return review_target(missing, repeated);
}

std::string manifest_json(StageRole role, std::uint64_t seed, const std::vector<ManifestEntry>& manifest) {
  nlohmann::json doc;
  doc["role"] = role_name(role);
  doc["seed"] = seed;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : manifest) {
    nlohmann::json entry;
    entry["id"] = e.id;
    entry["defects"] = nlohmann::json::array();
    for (const auto& d : e.defects) entry["defects"].push_back({{"kind", d.kind}, {"detail", d.detail}});
    entry["keyword_sentences"] = e.keyword_sentences;
    doc["entries"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

}  // namespace afg
