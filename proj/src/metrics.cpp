#include "gebc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gebc {

namespace {

constexpr double kRougeBeta = 1.2;
constexpr int kMaxNgram = 4;
constexpr double kCiderSigma = 6.0;

std::string stem(std::string w) {
  auto ends_with = [&](const char* s) {
    const size_t n = std::strlen(s);
    return w.size() > n + 2 && w.compare(w.size() - n, n, s) == 0;
  };
  if (ends_with("ing")) {
    w.resize(w.size() - 3);
  } else if (ends_with("ed") || ends_with("es")) {
    w.resize(w.size() - 2);
  } else if (w.size() > 3 && w.back() == 's' && w[w.size() - 2] != 's') {
    w.pop_back();
  }
  return w;
}

size_t lcs_length(const std::vector<std::string>& a,
                  const std::vector<std::string>& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

using NgramCounts = std::map<std::vector<std::string>, double>;

NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (int(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[{tokens.begin() + i, tokens.begin() + i + n}] += 1.0;
  }
  return counts;
}

}  // namespace

std::vector<std::string> metric_tokens(const std::string& text) {
  std::string lowered = text;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  std::istringstream iss(lowered);
  std::string w;
  std::vector<std::string> out;
  while (iss >> w) out.push_back(stem(w));
  return out;
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::vector<std::string>>& references) {
  if (candidate.empty()) throw DataError("rouge_l: empty candidate");
  if (references.empty()) throw DataError("rouge_l: no references");
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = double(lcs_length(candidate, ref));
    const double r = lcs / double(ref.size());
    const double p = lcs / double(candidate.size());
    double f = 0.0;
    if (r + p > 0.0) {
      const double b2 = kRougeBeta * kRougeBeta;
      f = (1.0 + b2) * r * p / (r + b2 * p);
    }
    best = std::max(best, f);
  }
  return best;
}

double rouge_l_text(const std::string& candidate,
                    const std::vector<std::string>& references) {
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(metric_tokens(r));
  return rouge_l(metric_tokens(candidate), refs);
}

CiderResult cider(const std::vector<EvalPair>& corpus) {
  std::set<EvalKey> keys;
  for (const auto& p : corpus) {
    if (p.references.empty()) throw DataError("cider: pair without references");
    keys.insert(p.key);
  }
  if (keys.size() < 2) {
    throw DataError("cider: degenerate corpus with fewer than 2 distinct keys");
  }
  if (keys.size() != corpus.size()) {
    throw DataError("cider: duplicate keys in corpus");
  }
  const double n_docs = double(corpus.size());

  // Reference-side document frequencies: an n-gram counts once per key.
  std::map<int, std::map<std::vector<std::string>, double>> df;
  std::vector<std::vector<std::vector<std::string>>> ref_tokens(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    std::map<int, std::set<std::vector<std::string>>> seen;
    for (const auto& ref : corpus[i].references) {
      auto toks = metric_tokens(ref);
      for (int n = 1; n <= kMaxNgram; ++n) {
        for (const auto& [gram, cnt] : ngram_counts(toks, n)) seen[n].insert(gram);
      }
      ref_tokens[i].push_back(std::move(toks));
    }
    for (int n = 1; n <= kMaxNgram; ++n) {
      for (const auto& gram : seen[n]) df[n][gram] += 1.0;
    }
  }

  auto tfidf = [&](const std::vector<std::string>& toks, int n) {
    NgramCounts vec = ngram_counts(toks, n);
    for (auto& [gram, v] : vec) {
      auto it = df[n].find(gram);
      const double d = it == df[n].end() ? 1.0 : std::max(1.0, it->second);
      v *= std::log(n_docs / d);
    }
    return vec;
  };

  CiderResult result;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const auto cand = metric_tokens(corpus[i].candidate);
    double score_sum_over_n = 0.0;
    for (int n = 1; n <= kMaxNgram; ++n) {
      const NgramCounts gc = tfidf(cand, n);
      double norm_c = 0.0;
      for (const auto& [gram, v] : gc) norm_c += v * v;
      norm_c = std::sqrt(norm_c);
      double ref_avg = 0.0;
      for (const auto& rtoks : ref_tokens[i]) {
        const NgramCounts gr = tfidf(rtoks, n);
        double norm_r = 0.0, dot = 0.0;
        for (const auto& [gram, v] : gr) norm_r += v * v;
        norm_r = std::sqrt(norm_r);
        for (const auto& [gram, v] : gc) {
          auto it = gr.find(gram);
          if (it != gr.end()) dot += std::min(v, it->second) * it->second;
        }
        double sim = 0.0;
        if (norm_c > 0.0 && norm_r > 0.0) sim = dot / (norm_c * norm_r);
        const double dl = double(cand.size()) - double(rtoks.size());
        sim *= std::exp(-dl * dl / (2.0 * kCiderSigma * kCiderSigma));
        ref_avg += sim;
      }
      score_sum_over_n += ref_avg / double(ref_tokens[i].size());
    }
    result.per_pair.push_back(10.0 * score_sum_over_n / double(kMaxNgram));
  }
  for (double s : result.per_pair) result.mean += s;
  result.mean /= double(result.per_pair.size());
  return result;
}

namespace {

MetricScores score_subset(const std::vector<EvalPair>& pairs) {
  MetricScores s;
  s.n_pairs = pairs.size();
  double rsum = 0.0;
  for (const auto& p : pairs) rsum += rouge_l_text(p.candidate, p.references);
  s.rouge_l = rsum / double(pairs.size());
  s.cider = cider(pairs).mean;
  s.average = (s.cider + s.rouge_l) / 2.0;
  return s;
}

}  // namespace

MetricReport evaluate_pairs(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw DataError("evaluate: no prediction/reference pairs");
  MetricReport report;
  report.note =
      "SPICE not implemented; average is the mean of CIDEr-D and ROUGE-L";
  report.pooled = score_subset(pairs);
  std::map<std::string, std::vector<EvalPair>> by_type;
  for (const auto& p : pairs) by_type[p.key.type].push_back(p);
  for (const auto& [type, subset] : by_type) {
    report.per_type[type] = score_subset(subset);
  }
  return report;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["note"] = report.note;
  auto scores_json = [](const MetricScores& s) {
    return nlohmann::json{{"cider", s.cider},
                          {"rouge_l", s.rouge_l},
                          {"average", s.average},
                          {"n_pairs", s.n_pairs}};
  };
  j["pooled"] = scores_json(report.pooled);
  for (const auto& [type, s] : report.per_type) {
    j["per_type"][type] = scores_json(s);
  }
  return j.dump(2);
}

std::string report_to_table(const MetricReport& report) {
  std::string out;
  out += "# " + report.note + "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s %8s\n", "Split", "Avg.",
                "CIDEr", "ROUGE-L", "Pairs");
  out += buf;
  auto row = [&](const std::string& name, const MetricScores& s) {
    std::snprintf(buf, sizeof(buf), "%-12s %8.2f %8.2f %8.2f %8zu\n",
                  name.c_str(), s.average, s.cider, s.rouge_l, s.n_pairs);
    out += buf;
  };
  row("pooled", report.pooled);
  for (const auto& [type, s] : report.per_type) row(type, s);
  return out;
}

}  // namespace gebc
