#include "gebc/evaluate.hpp"

#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

using json = nlohmann::json;

namespace gebc {

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions: " + path);
  std::vector<Prediction> preds;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("predictions line " + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    Prediction p;
    try {
      p.video_id = j.at("video_id").get<std::string>();
      p.boundary_id = j.at("boundary_id").get<std::string>();
      p.type = j.at("type").get<std::string>();
      p.rank = j.at("rank").get<int>();
      p.caption = j.at("caption").get<std::string>();
      p.score = j.at("score").get<double>();
    } catch (const json::exception& e) {
      throw DataError("predictions line " + std::to_string(line_no) +
                      ": bad record: " + e.what());
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

void write_predictions(const std::string& path,
                       const std::vector<Prediction>& preds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write predictions: " + path);
  for (const auto& p : preds) {
    json j;
    j["video_id"] = p.video_id;
    j["boundary_id"] = p.boundary_id;
    j["type"] = p.type;
    j["rank"] = p.rank;
    j["caption"] = p.caption;
    j["score"] = p.score;
    os << j.dump() << "\n";
  }
}

MetricReport evaluate_predictions(const std::vector<Prediction>& preds,
                                  const std::vector<BoundaryRecord>& records) {
  std::map<EvalKey, std::string> rank0;
  for (const auto& p : preds) {
    if (p.rank != 0) continue;
    EvalKey key{p.video_id, p.boundary_id, p.type};
    if (rank0.count(key)) {
      throw DataError("duplicate rank-0 prediction for (" + p.video_id + ", " +
                      p.boundary_id + ", " + p.type + ")");
    }
    rank0[key] = p.caption;
  }
  std::vector<EvalPair> pairs;
  std::string missing;
  for (const auto& r : records) {
    const std::pair<std::string, const std::string*> types[] = {
        {"subject", &r.captions.subject},
        {"before", &r.captions.status_before},
        {"after", &r.captions.status_after}};
    for (const auto& [type, ref] : types) {
      EvalKey key{r.video_id, r.boundary_id, type};
      auto it = rank0.find(key);
      if (it == rank0.end()) {
        missing += " (" + r.video_id + ", " + r.boundary_id + ", " + type + ")";
        continue;
      }
      EvalPair p;
      p.key = key;
      p.candidate = it->second;
      p.references = {*ref};
      pairs.push_back(std::move(p));
    }
  }
  if (!missing.empty()) {
    throw DataError("missing rank-0 predictions for keys:" + missing);
  }
  return evaluate_pairs(pairs);
}

}  // namespace gebc
