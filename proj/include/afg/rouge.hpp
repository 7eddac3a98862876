#pragma once

// ROUGE-1/2, ROUGE-L and ROUGE-Lsum on the tokenizer's normalization
// (lowercased, punctuation split). F1 is the headline number; precision and
// recall are kept alongside.

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace afg {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // P = overlap/candidate_total, R = overlap/reference_total; all zero when
  // either side is empty.
  static RougeScore from_counts(double overlap, double candidate_total, double reference_total);
};

struct RougeReport {
  RougeScore rouge1, rouge2, rougeL, rougeLsum;
};

using Tokens = std::vector<std::string>;

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);
RougeScore rouge_lsum(std::string_view candidate, std::string_view reference);
RougeReport rouge_report(std::string_view candidate, std::string_view reference);

// Arithmetic mean of per-pair P, R and F1. Throws DataError when empty.
RougeReport corpus_rouge(std::span<const std::pair<std::string, std::string>> pairs);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
// Positions in b covered by one longest common subsequence (standard
// backtrace: match, else step up when dp[i-1][j] >= dp[i][j-1]).
std::vector<std::size_t> lcs_positions(std::span<const std::string> a, std::span<const std::string> b);

// Sentences end after '.', '!' or '?' that is followed by whitespace or the
// end of text. Returned sentences are trimmed; blank ones are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// {"rouge1": {"precision": p, "recall": r, "f1": f}, ...} with six decimals.
std::string rouge_report_json(const RougeReport& report);

}  // namespace afg
