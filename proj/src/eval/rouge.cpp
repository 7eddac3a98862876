#include "afg/rouge.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "afg/errors.hpp"
#include "afg/tokenizer.hpp"

namespace afg {

RougeScore RougeScore::from_counts(double overlap, double candidate_total, double reference_total) {
  RougeScore s;
  if (candidate_total <= 0 || reference_total <= 0) return s;
  s.precision = overlap / candidate_total;
  s.recall = overlap / reference_total;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::vector<std::vector<std::size_t>> lcs_table(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return dp;
}

}  // namespace

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1) throw ConfigError("rouge_n: n must be >= 1");
  const auto nn = static_cast<std::size_t>(n);
  const auto cand = ngram_counts(split_tokens(candidate), nn);
  const auto ref = ngram_counts(split_tokens(reference), nn);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [gram, c] : cand) cand_total += c;
  for (const auto& [gram, c] : ref) {
    ref_total += c;
    const auto it = cand.find(gram);
    if (it != cand.end()) overlap += std::min(c, it->second);
  }
  return RougeScore::from_counts(static_cast<double>(overlap), static_cast<double>(cand_total),
                                 static_cast<double>(ref_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  return lcs_table(a, b)[a.size()][b.size()];
}

std::vector<std::size_t> lcs_positions(std::span<const std::string> a, std::span<const std::string> b) {
  const auto dp = lcs_table(a, b);
  std::vector<std::size_t> positions;
  std::size_t i = a.size(), j = b.size();
  while (i > 0 && j > 0) {
    if (a[i - 1] == b[j - 1]) {
      positions.push_back(j - 1);
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(positions.begin(), positions.end());
  return positions;
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  const Tokens cand = split_tokens(candidate);
  const Tokens ref = split_tokens(reference);
  return RougeScore::from_counts(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
                                 static_cast<double>(ref.size()));
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  const auto push = [&](std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    if (e > b) out.emplace_back(s.substr(b, e - b));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_ws(text[i + 1]))) {
      push(text.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < text.size()) push(text.substr(start));
  return out;
}

RougeScore rouge_lsum(std::string_view candidate, std::string_view reference) {
  std::vector<Tokens> cand_sents, ref_sents;
  std::map<std::string, std::size_t> cand_counts, ref_counts;
  std::size_t cand_total = 0, ref_total = 0;
  for (const auto& s : split_sentences(candidate)) {
    Tokens t = split_tokens(s);
    if (t.empty()) continue;
    for (const auto& tok : t) ++cand_counts[tok];
    cand_total += t.size();
    cand_sents.push_back(std::move(t));
  }
  for (const auto& s : split_sentences(reference)) {
    Tokens t = split_tokens(s);
    if (t.empty()) continue;
    for (const auto& tok : t) ++ref_counts[tok];
    ref_total += t.size();
    ref_sents.push_back(std::move(t));
  }
  if (cand_total == 0 || ref_total == 0) return {};

  // Union of LCS hits per reference sentence, each hit clipped by the
  // remaining token multiplicity on both sides.
  std::size_t hits = 0;
  for (const auto& ref : ref_sents) {
    std::vector<bool> covered(ref.size(), false);
    for (const auto& cand : cand_sents) {
      for (std::size_t pos : lcs_positions(cand, ref)) covered[pos] = true;
    }
    for (std::size_t pos = 0; pos < ref.size(); ++pos) {
      if (!covered[pos]) continue;
      auto& c = cand_counts[ref[pos]];
      auto& r = ref_counts[ref[pos]];
      if (c > 0 && r > 0) {
        ++hits;
        --c;
        --r;
      }
    }
  }
  return RougeScore::from_counts(static_cast<double>(hits), static_cast<double>(cand_total),
                                 static_cast<double>(ref_total));
}

RougeReport rouge_report(std::string_view candidate, std::string_view reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference),
          rouge_lsum(candidate, reference)};
}

RougeReport corpus_rouge(std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw DataError("corpus_rouge: no candidate/reference pairs");
  RougeReport total;
  const auto accumulate = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (const auto& [cand, ref] : pairs) {
    const RougeReport r = rouge_report(cand, ref);
    accumulate(total.rouge1, r.rouge1);
    accumulate(total.rouge2, r.rouge2);
    accumulate(total.rougeL, r.rougeL);
    accumulate(total.rougeLsum, r.rougeLsum);
  }
  const double n = static_cast<double>(pairs.size());
  for (RougeScore* s : {&total.rouge1, &total.rouge2, &total.rougeL, &total.rougeLsum}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }
  return total;
}

std::string rouge_report_json(const RougeReport& report) {
  const auto score = [](const char* name, const RougeScore& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "\"%s\": {\"precision\": %.6f, \"recall\": %.6f, \"f1\": %.6f}", name,
                  s.precision, s.recall, s.f1);
    return std::string(buf);
  };
  return "{" + score("rouge1", report.rouge1) + ", " + score("rouge2", report.rouge2) + ", " +
         score("rougeL", report.rougeL) + ", " + score("rougeLsum", report.rougeLsum) + "}\n";
}

}  // namespace afg
