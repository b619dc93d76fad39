#pragma once

#include <string>
#include <vector>

#include "gebc/corpus.hpp"
#include "gebc/metrics.hpp"

namespace gebc {

struct Prediction {
  std::string video_id;
  std::string boundary_id;
  std::string type;  // "subject" | "before" | "after"
  int rank = 0;
  std::string caption;
  double score = 0.0;
};

std::vector<Prediction> load_predictions(const std::string& path);
void write_predictions(const std::string& path,
                       const std::vector<Prediction>& preds);

// Joins rank-0 predictions to manifest references; every (key, type) must
// have exactly one rank-0 prediction.
MetricReport evaluate_predictions(const std::vector<Prediction>& preds,
                                  const std::vector<BoundaryRecord>& records);

}  // namespace gebc
