#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aso/error.hpp"

namespace aso::metrics {

inline constexpr double kDefaultAccTolerance = 0.5;

namespace detail {

inline void require_pairs(std::span<const double> a, std::span<const double> b,
                          std::size_t min_len, const char* what) {
  if (a.size() != b.size()) {
    throw InputError(std::string(what) + ": length mismatch (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  if (a.size() < min_len) {
    throw InputError(std::string(what) + ": need at least " +
                     std::to_string(min_len) + " pairs");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw InputError(std::string(what) + ": non-finite value at index " +
                       std::to_string(i));
    }
  }
}

// Pearson correlation; throws UndefinedMetricError on zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y,
                      const char* what) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedMetricError(std::string(what) +
                               ": zero variance in one of the inputs");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

// 1-based average ranks (ties share the mean of their positions).
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

// Fraction of predictions with |pred - gt| <= tol.
inline double acc_at(std::span<const double> preds, std::span<const double> gts,
                     double tol = kDefaultAccTolerance) {
  detail::require_pairs(preds, gts, 1, "acc_at");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (std::abs(preds[i] - gts[i]) <= tol) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

inline double srcc(std::span<const double> preds, std::span<const double> gts) {
  detail::require_pairs(preds, gts, 2, "srcc");
  const auto rp = average_ranks(preds);
  const auto rg = average_ranks(gts);
  return detail::pearson(rp, rg, "srcc");
}

inline double plcc(std::span<const double> preds, std::span<const double> gts) {
  detail::require_pairs(preds, gts, 2, "plcc");
  return detail::pearson(preds, gts, "plcc");
}

inline double mae(std::span<const double> preds, std::span<const double> gts) {
  detail::require_pairs(preds, gts, 1, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += std::abs(preds[i] - gts[i]);
  }
  return total / static_cast<double>(preds.size());
}

// A metric value, or the reason it is undefined.
struct MaybeMetric {
  std::optional<double> value;
  std::string reason;

  bool defined() const { return value.has_value(); }
};

struct EvalReport {
  std::string dimension;
  std::size_t n = 0;
  double acc = 0.0;
  MaybeMetric srcc;
  MaybeMetric plcc;
  double mae = 0.0;

  bool complete() const { return srcc.defined() && plcc.defined(); }
};

namespace detail {

template <typename F>
MaybeMetric try_metric(F&& f) {
  try {
    return {f(), {}};
  } catch (const UndefinedMetricError& e) {
    return {std::nullopt, e.what()};
  } catch (const InputError& e) {
    return {std::nullopt, e.what()};
  }
}

}  // namespace detail

inline EvalReport evaluate(std::span<const double> preds,
                           std::span<const double> gts, std::string dimension) {
  EvalReport r;
  r.dimension = std::move(dimension);
  r.n = preds.size();
  r.acc = acc_at(preds, gts);
  r.mae = mae(preds, gts);
  r.srcc = detail::try_metric([&] { return srcc(preds, gts); });
  r.plcc = detail::try_metric([&] { return plcc(preds, gts); });
  return r;
}

}  // namespace aso::metrics
