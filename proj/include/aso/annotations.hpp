#pragma once

// Multi-rater annotations: aggregation into MOS labels, agreement
// statistics, and rescaling of external MOS ranges onto 1-5.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aso/error.hpp"
#include "aso/score_space.hpp"

namespace aso {

struct AnnotationRecord {
  std::string video_id;
  std::string dimension;
  std::string rater_id;
  double score = 0.0;
  std::vector<std::string> tags;

  void validate() const {
    if (video_id.empty() || dimension.empty() || rater_id.empty()) {
      throw InputError("annotation: ids must be non-empty");
    }
    if (!std::isfinite(score)) {
      throw InputError("annotation: score for '" + video_id + "' is not finite");
    }
  }
};

inline constexpr char kInsufficientRaters[] = "insufficient_raters";
inline constexpr char kExcessiveVariance[] = "excessive_variance";

struct AggregatedLabel {
  std::string video_id;
  std::string dimension;
  double mos_raw = 0.0;
  double mos_snapped = 0.0;
  std::size_t n_raters = 0;
  double variance = 0.0;
  bool filtered = false;
  std::string filter_reason;
};

struct AggregateOptions {
  std::size_t min_raters = 3;
  double var_threshold = 1.0;
};

using GroupKey = std::pair<std::string, std::string>;  // (dimension, video)

// Scores grouped by (dimension, video_id), in key order.
inline std::map<GroupKey, std::vector<double>> group_scores(
    std::span<const AnnotationRecord> records) {
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& r : records) {
    r.validate();
    groups[{r.dimension, r.video_id}].push_back(r.score);
  }
  return groups;
}

inline std::vector<AggregatedLabel> aggregate(
    std::span<const AnnotationRecord> records, const ScoreGrid& grid,
    const AggregateOptions& opts = {}) {
  if (!(opts.var_threshold > 0.0)) {
    throw InputError("aggregate: var_threshold must be > 0");
  }
  std::vector<AggregatedLabel> out;
  for (auto& [key, scores] : group_scores(records)) {
    // Sorting makes the floating-point sums independent of record order.
    std::sort(scores.begin(), scores.end());
    const double n = static_cast<double>(scores.size());
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= n;

    AggregatedLabel label;
    label.dimension = key.first;
    label.video_id = key.second;
    label.mos_raw = mean;
    label.mos_snapped = snap(mean, grid);
    label.n_raters = scores.size();
    label.variance = var;
    if (scores.size() < opts.min_raters) {
      label.filtered = true;
      label.filter_reason = kInsufficientRaters;
    } else if (var > opts.var_threshold) {
      label.filtered = true;
      label.filter_reason = kExcessiveVariance;
    }
    out.push_back(std::move(label));
  }
  return out;
}

inline constexpr double kRelaxedMatchThreshold = 1.0;

struct RelaxedMatch {
  double value = 0.0;
  std::size_t n_units = 0;  // units with >= 2 ratings
  std::size_t n_pairs = 0;
};

// Pooled fraction of unordered rating pairs within `threshold`.
inline RelaxedMatch relaxed_match_units(
    std::span<const std::vector<double>> units,
    double threshold = kRelaxedMatchThreshold) {
  RelaxedMatch rm;
  std::size_t hits = 0;
  for (const auto& scores : units) {
    if (scores.size() < 2) continue;
    ++rm.n_units;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      for (std::size_t j = i + 1; j < scores.size(); ++j) {
        ++rm.n_pairs;
        if (std::abs(scores[i] - scores[j]) <= threshold) ++hits;
      }
    }
  }
  if (rm.n_pairs == 0) {
    throw UndefinedMetricError("relaxed_match: no unit with two or more ratings");
  }
  rm.value = static_cast<double>(hits) / static_cast<double>(rm.n_pairs);
  return rm;
}

enum class AlphaMetric { Interval, Ordinal };

struct AlphaResult {
  double alpha = 0.0;
  std::size_t n_units = 0;
  std::size_t n_values = 0;  // pairable values
};

// Krippendorff's alpha for one set of units (each a list of ratings), via
// the coincidence matrix. Units with a single rating are skipped.
inline AlphaResult krippendorff_alpha_units(
    std::span<const std::vector<double>> units,
    AlphaMetric metric = AlphaMetric::Interval) {
  std::vector<double> values;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    values.insert(values.end(), u.begin(), u.end());
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t k = values.size();
  auto index = [&](double v) {
    return static_cast<std::size_t>(
        std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  std::vector<double> coincidence(k * k, 0.0);
  AlphaResult result;
  for (const auto& u : units) {
    const std::size_t m = u.size();
    if (m < 2) continue;
    ++result.n_units;
    result.n_values += m;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i != j) coincidence[index(u[i]) * k + index(u[j])] += w;
      }
    }
  }
  if (result.n_values < 2) {
    throw UndefinedMetricError("krippendorff_alpha: fewer than two pairable values");
  }

  std::vector<double> marginal(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginal[c] += coincidence[c * k + d];
  }
  const double n = static_cast<double>(result.n_values);

  auto distance = [&](std::size_t c, std::size_t d) {
    if (metric == AlphaMetric::Interval) {
      const double diff = values[c] - values[d];
      return diff * diff;
    }
    const std::size_t lo = std::min(c, d), hi = std::max(c, d);
    double span = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) span += marginal[g];
    span -= 0.5 * (marginal[c] + marginal[d]);
    return span * span;
  };

  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      if (c == d) continue;
      const double delta = distance(c, d);
      observed += coincidence[c * k + d] * delta;
      expected += marginal[c] * marginal[d] * delta;
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (expected == 0.0) {
    throw UndefinedMetricError(
        "krippendorff_alpha: all pooled values identical (expected "
        "disagreement is zero)");
  }
  result.alpha = 1.0 - observed / expected;
  return result;
}

// Units (one per video) of every dimension, in dimension order.
inline std::map<std::string, std::vector<std::vector<double>>> units_by_dimension(
    std::span<const AnnotationRecord> records) {
  std::map<std::string, std::vector<std::vector<double>>> units;
  for (auto& [key, scores] : group_scores(records)) {
    std::sort(scores.begin(), scores.end());
    units[key.first].push_back(std::move(scores));
  }
  return units;
}

// Agreement summary of one dimension. A statistic that is undefined on the
// data is left empty with the reason recorded.
struct AgreementRow {
  std::string dimension;
  std::optional<double> relaxed_match;
  std::optional<double> alpha;
  std::string undefined_reason;
  std::size_t n_units = 0;
  std::size_t n_pairs = 0;
};

inline std::vector<AgreementRow> agreement_by_dimension(
    std::span<const AnnotationRecord> records,
    AlphaMetric metric = AlphaMetric::Interval,
    double threshold = kRelaxedMatchThreshold) {
  std::vector<AgreementRow> out;
  for (const auto& [dim, units] : units_by_dimension(records)) {
    AgreementRow row;
    row.dimension = dim;
    for (const auto& u : units) {
      if (u.size() < 2) continue;
      ++row.n_units;
      row.n_pairs += u.size() * (u.size() - 1) / 2;
    }
    try {
      row.relaxed_match = relaxed_match_units(units, threshold).value;
    } catch (const UndefinedMetricError& e) {
      row.undefined_reason = e.what();
    }
    try {
      row.alpha = krippendorff_alpha_units(units, metric).alpha;
    } catch (const UndefinedMetricError& e) {
      if (!row.undefined_reason.empty()) row.undefined_reason += "; ";
      row.undefined_reason += e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

struct NormalizeResult {
  double value = 0.0;
  bool clamped = false;
};

// Affine map of [src_min, src_max] onto [1, 5]; out-of-range input clamps.
inline NormalizeResult normalize_mos_checked(double value, double src_min,
                                             double src_max) {
  if (!std::isfinite(src_min) || !std::isfinite(src_max) || !(src_max > src_min)) {
    throw InputError("normalize_mos: need finite src_max > src_min");
  }
  if (!std::isfinite(value)) throw InputError("normalize_mos: value not finite");
  NormalizeResult r;
  double v = value;
  if (v < src_min || v > src_max) {
    r.clamped = true;
    v = std::clamp(v, src_min, src_max);
  }
  r.value = 1.0 + 4.0 * (v - src_min) / (src_max - src_min);
  return r;
}

inline double normalize_mos(double value, double src_min, double src_max) {
  return normalize_mos_checked(value, src_min, src_max).value;
}

}  // namespace aso
