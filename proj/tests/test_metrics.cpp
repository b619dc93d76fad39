#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gebc/evaluate.hpp"
#include "gebc/metrics.hpp"
#include "helpers.hpp"

using namespace gebc;

namespace {

EvalPair make_pair(const std::string& cand, std::vector<std::string> refs,
                   const std::string& type, const std::string& bnd) {
  EvalPair p;
  p.candidate = cand;
  p.references = std::move(refs);
  p.key = {"v0", bnd, type};
  return p;
}

// Shared fixture: two caption types, one exact hit, one partial hit each.
std::vector<EvalPair> fixture_pairs() {
  return {
      make_pair("the red circle", {"the red circle"}, "subject", "b0"),
      make_pair("is moving to the left side", {"is on the left side"}, "before",
                "b0"),
      make_pair("the blue square", {"the green square"}, "subject", "b1"),
      make_pair("is near the top edge", {"is near the bottom edge"}, "before",
                "b1"),
  };
}

}  // namespace

TEST_CASE("metric tokenization lowercases and strips light suffixes") {
  CHECK(metric_tokens("The RED Circle") ==
        std::vector<std::string>{"the", "red", "circle"});
  CHECK(metric_tokens("moving moved boxes") ==
        std::vector<std::string>{"mov", "mov", "box"});
  CHECK(metric_tokens("cats glass is") ==
        std::vector<std::string>{"cat", "glass", "is"});
  CHECK(metric_tokens("").empty());
}

TEST_CASE("identical candidate and reference score ROUGE-L of exactly 1") {
  CHECK(rouge_l_text("the red circle", {"the red circle"}) == doctest::Approx(1.0));
  CHECK(rouge_l_text("a", {"completely different words", "a"}) ==
        doctest::Approx(1.0));  // max over references
}

TEST_CASE("hand-computed ROUGE-L for a 3-vs-2 token overlap") {
  // LCS = 2, recall = 1, precision = 2/3, beta = 1.2:
  // (1 + 1.44) * 1 * (2/3) / (1 + 1.44 * (2/3)) = 0.8299319728
  const double f = rouge_l({"a", "b", "c"}, {{"a", "b"}});
  CHECK(f == doctest::Approx(0.8299319728).epsilon(1e-9));
}

TEST_CASE("disjoint token sets score zero and degenerate inputs throw") {
  CHECK(rouge_l({"x", "y"}, {{"p", "q", "r"}}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(rouge_l({}, {{"a"}}), DataError);
  CHECK_THROWS_AS(rouge_l({"a"}, {}), DataError);
}

TEST_CASE("CIDEr-D gives the full score of 10 to exact matches") {
  // Two keys with disjoint 5-token captions: every n-gram has nonzero IDF,
  // the clipped cosine is 1 for every n, and the length penalty is 1.
  std::vector<EvalPair> pairs = {
      make_pair("the red circle turns left", {"the red circle turns left"},
                "subject", "b0"),
      make_pair("a green square sits still", {"a green square sits still"},
                "subject", "b1"),
  };
  const CiderResult r = cider(pairs);
  REQUIRE(r.per_pair.size() == 2);
  CHECK(r.per_pair[0] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(r.per_pair[1] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(r.mean == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("CIDEr-D rejects degenerate corpora") {
  std::vector<EvalPair> one = {
      make_pair("the red circle", {"the red circle"}, "subject", "b0")};
  CHECK_THROWS_AS(cider(one), DataError);

  auto dup = fixture_pairs();
  dup[1].key = dup[0].key;
  CHECK_THROWS_AS(cider(dup), DataError);

  auto no_ref = fixture_pairs();
  no_ref[2].references.clear();
  CHECK_THROWS_AS(cider(no_ref), DataError);
}

TEST_CASE("full report matches independently computed golden values") {
  const MetricReport rep = evaluate_pairs(fixture_pairs());

  CHECK(rep.pooled.n_pairs == 4);
  CHECK(rep.pooled.rouge_l == doctest::Approx(0.8015151515).epsilon(1e-9));
  CHECK(rep.pooled.cider == doctest::Approx(3.9677718471).epsilon(1e-9));
  CHECK(rep.pooled.average == doctest::Approx(2.3846434993).epsilon(1e-9));

  REQUIRE(rep.per_type.count("before") == 1);
  REQUIRE(rep.per_type.count("subject") == 1);
  const MetricScores& bef = rep.per_type.at("before");
  CHECK(bef.n_pairs == 2);
  CHECK(bef.rouge_l == doctest::Approx(0.7696969697).epsilon(1e-9));
  CHECK(bef.cider == doctest::Approx(3.4939070588).epsilon(1e-9));
  CHECK(bef.average == doctest::Approx(2.1318020143).epsilon(1e-9));
  const MetricScores& subj = rep.per_type.at("subject");
  CHECK(subj.n_pairs == 2);
  CHECK(subj.rouge_l == doctest::Approx(0.8333333333).epsilon(1e-9));
  CHECK(subj.cider == doctest::Approx(4.375).epsilon(1e-9));
  CHECK(subj.average == doctest::Approx(2.6041666667).epsilon(1e-9));

  CHECK(rep.note.find("SPICE not implemented") != std::string::npos);
  CHECK_THROWS_AS(evaluate_pairs({}), DataError);
}

TEST_CASE("report rendering includes every split and the note") {
  const MetricReport rep = evaluate_pairs(fixture_pairs());
  const std::string table = report_to_table(rep);
  CHECK(table.find("pooled") != std::string::npos);
  CHECK(table.find("subject") != std::string::npos);
  CHECK(table.find("before") != std::string::npos);
  CHECK(table.find("ROUGE-L") != std::string::npos);

  const std::string json = report_to_json(rep);
  CHECK(json.find("\"pooled\"") != std::string::npos);
  CHECK(json.find("\"n_pairs\": 4") != std::string::npos);
}

TEST_CASE("evaluation is deterministic") {
  const auto a = report_to_json(evaluate_pairs(fixture_pairs()));
  const auto b = report_to_json(evaluate_pairs(fixture_pairs()));
  CHECK(a == b);
}

TEST_CASE("predictions JSONL round-trips and joins against the manifest") {
  auto corpus = gebc::testutil::make_tiny_corpus("metrics_eval", 8);

  // Ground-truth predictions: every record, every type, rank 0.
  std::vector<Prediction> preds;
  for (const auto& r : corpus.records) {
    preds.push_back({r.video_id, r.boundary_id, "subject", 0, r.captions.subject, -0.1});
    preds.push_back({r.video_id, r.boundary_id, "before", 0, r.captions.status_before, -0.2});
    preds.push_back({r.video_id, r.boundary_id, "after", 0, r.captions.status_after, -0.3});
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "gebc_preds.jsonl").string();
  write_predictions(path, preds);
  const auto back = load_predictions(path);
  REQUIRE(back.size() == preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].caption == preds[i].caption);
    CHECK(back[i].type == preds[i].type);
    CHECK(back[i].rank == preds[i].rank);
  }

  // Perfect predictions score perfect ROUGE-L everywhere.
  const MetricReport rep = evaluate_predictions(preds, corpus.records);
  CHECK(rep.pooled.n_pairs == corpus.records.size() * 3);
  CHECK(rep.pooled.rouge_l == doctest::Approx(1.0));

  // A missing rank-0 entry is an error naming the key.
  std::vector<Prediction> missing(preds.begin() + 1, preds.end());
  CHECK_THROWS_AS(evaluate_predictions(missing, corpus.records), DataError);

  // Duplicate rank-0 entries for one key are rejected too.
  auto dup = preds;
  dup.push_back(preds[0]);
  CHECK_THROWS_AS(evaluate_predictions(dup, corpus.records), DataError);
}
