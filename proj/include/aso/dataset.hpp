#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aso/error.hpp"

namespace aso {

// One row of features.jsonl.
struct FeatureRow {
  std::string video_id;
  std::string dimension;
  std::vector<double> features;
};

// One row of predictions.jsonl; also used for latent truth and exported
// ground-truth labels.
struct ScoreRow {
  std::string video_id;
  std::string dimension;
  double score = 0.0;
};

// A training/evaluation example for one quality dimension.
struct Example {
  std::string video_id;
  std::vector<double> features;
  double target = 0.0;
};

// Joins features with targets on (dimension, video_id). Rows without a
// matching target are skipped; the result is grouped by dimension, and
// within a dimension follows the order of `features`.
inline std::map<std::string, std::vector<Example>> join_examples(
    std::span<const FeatureRow> features, std::span<const ScoreRow> targets) {
  std::map<std::pair<std::string, std::string>, double> by_key;
  for (const auto& t : targets) {
    if (!by_key.emplace(std::pair{t.dimension, t.video_id}, t.score).second) {
      throw InputError("duplicate target for video '" + t.video_id +
                       "' dimension '" + t.dimension + "'");
    }
  }
  std::map<std::string, std::vector<Example>> out;
  for (const auto& f : features) {
    auto it = by_key.find({f.dimension, f.video_id});
    if (it == by_key.end()) continue;
    out[f.dimension].push_back({f.video_id, f.features, it->second});
  }
  return out;
}

}  // namespace aso
