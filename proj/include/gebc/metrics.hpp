#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "gebc/common.hpp"

namespace gebc {

struct EvalKey {
  std::string video_id;
  std::string boundary_id;
  std::string type;  // "subject" | "before" | "after"

  auto operator<=>(const EvalKey&) const = default;
};

struct EvalPair {
  std::string candidate;
  std::vector<std::string> references;  // non-empty
  EvalKey key;
};

// Lowercase + light suffix stemming, shared by both metrics' tokenization.
std::vector<std::string> metric_tokens(const std::string& text);

// LCS F-measure, beta = 1.2, max over references. Tokens, not characters.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::vector<std::string>>& references);
double rouge_l_text(const std::string& candidate,
                    const std::vector<std::string>& references);

// CIDEr-D over a corpus: n = 1..4, reference-side IDF, clipped TF-IDF cosine
// with a sigma = 6 Gaussian length penalty, scaled by 10.
struct CiderResult {
  std::vector<double> per_pair;  // aligned with input order
  double mean = 0.0;
};
CiderResult cider(const std::vector<EvalPair>& corpus);

struct MetricScores {
  double cider = 0.0;
  double rouge_l = 0.0;
  double average = 0.0;  // mean of the implemented metrics
  size_t n_pairs = 0;
};

struct MetricReport {
  MetricScores pooled;
  std::map<std::string, MetricScores> per_type;
  std::string note;  // SPICE omission etc.
};

MetricReport evaluate_pairs(const std::vector<EvalPair>& pairs);

std::string report_to_json(const MetricReport& report);
// Aligned plain-text table: Avg. / CIDEr / ROUGE-L columns.
std::string report_to_table(const MetricReport& report);

}  // namespace gebc
