#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aso/error.hpp"

namespace aso {

inline constexpr double kGridTolerance = 1e-9;
inline constexpr double kNormTolerance = 1e-9;

// The finite ordered label set: min, min + step, ..., max.
class ScoreGrid {
 public:
  ScoreGrid() : ScoreGrid(1.0, 5.0, 0.5) {}

  ScoreGrid(double min_score, double max_score, double step)
      : min_(min_score), max_(max_score), step_(step) {
    if (!std::isfinite(min_score) || !std::isfinite(max_score) ||
        !std::isfinite(step)) {
      throw InputError("score grid: bounds and step must be finite");
    }
    if (step <= 0.0) throw InputError("score grid: step must be positive");
    if (max_score <= min_score) {
      throw InputError("score grid: max_score must exceed min_score");
    }
    const double span = (max_score - min_score) / step;
    const double rounded = std::round(span);
    if (std::abs(span - rounded) > kGridTolerance) {
      std::ostringstream msg;
      msg << "score grid: (max - min) / step = " << span
          << " is not an integer";
      throw InputError(msg.str());
    }
    count_ = static_cast<std::size_t>(rounded) + 1;
  }

  double min_score() const { return min_; }
  double max_score() const { return max_; }
  double step() const { return step_; }
  std::size_t size() const { return count_; }

  double level(std::size_t i) const {
    return i + 1 == count_ ? max_ : min_ + static_cast<double>(i) * step_;
  }

  std::vector<double> levels() const {
    std::vector<double> out(count_);
    for (std::size_t i = 0; i < count_; ++i) out[i] = level(i);
    return out;
  }

  // Index of an on-grid value (within kGridTolerance), or nullopt.
  std::optional<std::size_t> index_of(double value) const {
    if (!std::isfinite(value)) return std::nullopt;
    const double t = (value - min_) / step_;
    const double r = std::round(t);
    if (r < 0.0 || r > static_cast<double>(count_ - 1)) return std::nullopt;
    if (std::abs(value - level(static_cast<std::size_t>(r))) > kGridTolerance) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(r);
  }

  std::size_t require_index(double value, const char* what = "score") const {
    auto idx = index_of(value);
    if (!idx) {
      std::ostringstream msg;
      msg << what << " " << value << " is not a level of the grid ["
          << min_ << ", " << max_ << "] step " << step_;
      throw InputError(msg.str());
    }
    return *idx;
  }

  // Nearest grid index; exact midpoints go to the even index.
  std::size_t snap_index(double value) const {
    if (!std::isfinite(value)) throw InputError("snap: value is not finite");
    const double t = (value - min_) / step_;
    if (t <= 0.0) return 0;
    const double last = static_cast<double>(count_ - 1);
    if (t >= last) return count_ - 1;
    double r = std::floor(t);
    const double frac = t - r;
    if (frac > 0.5 || (frac == 0.5 && std::fmod(r, 2.0) != 0.0)) r += 1.0;
    return static_cast<std::size_t>(r);
  }

  friend bool operator==(const ScoreGrid& a, const ScoreGrid& b) {
    return a.min_ == b.min_ && a.max_ == b.max_ && a.step_ == b.step_;
  }

 private:
  double min_;
  double max_;
  double step_;
  std::size_t count_ = 0;
};

inline double snap(double value, const ScoreGrid& grid) {
  return grid.level(grid.snap_index(value));
}

// A probability vector over the levels of a grid. Construction validates
// non-negativity and normalization; nothing is renormalized silently.
class ScoreDistribution {
 public:
  ScoreDistribution(ScoreGrid grid, std::vector<double> probs)
      : grid_(std::move(grid)), probs_(std::move(probs)) {
    if (probs_.size() != grid_.size()) {
      throw InputError("distribution: probability count " +
                       std::to_string(probs_.size()) + " != grid size " +
                       std::to_string(grid_.size()));
    }
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InputError("distribution: entries must be finite and >= 0");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kNormTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "distribution: mass sums to " << total << ", expected 1";
      throw InputError(msg.str());
    }
  }

  static ScoreDistribution uniform(const ScoreGrid& grid) {
    return {grid, std::vector<double>(grid.size(), 1.0 / grid.size())};
  }

  static ScoreDistribution one_hot(const ScoreGrid& grid, std::size_t index) {
    if (index >= grid.size()) throw InputError("one_hot: index out of range");
    std::vector<double> p(grid.size(), 0.0);
    p[index] = 1.0;
    return {grid, std::move(p)};
  }

  const ScoreGrid& grid() const { return grid_; }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }

 private:
  ScoreGrid grid_;
  std::vector<double> probs_;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw InputError(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace detail

// log-softmax with max subtraction; always finite for finite input.
inline std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw InputError("log_softmax: empty logits");
  detail::require_finite(logits, "log_softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - m);
  const double log_total = std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] - m - log_total;
  }
  return out;
}

inline std::vector<double> softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw InputError("softmax: empty logits");
  detail::require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

inline ScoreDistribution softmax(std::span<const double> logits,
                                 const ScoreGrid& grid) {
  if (logits.size() != grid.size()) {
    throw InputError("softmax: " + std::to_string(logits.size()) +
                     " logits for a grid of " + std::to_string(grid.size()) +
                     " levels");
  }
  return {grid, softmax_values(logits)};
}

// KL(p || q) in nats over raw probability vectors, 0 log 0 = 0.
inline double kl_divergence(std::span<const double> p,
                            std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      throw DomainError("kl_divergence: q has zero mass at level " +
                        std::to_string(i) + " where p > 0");
    }
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  // Rounding can leave a tiny negative value for p == q.
  return std::max(kl, 0.0);
}

inline double kl_divergence(const ScoreDistribution& p,
                            const ScoreDistribution& q) {
  if (!(p.grid() == q.grid())) {
    throw InputError("kl_divergence: distributions are on different grids");
  }
  return kl_divergence(p.probs(), q.probs());
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

inline double expected_score(const ScoreDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * d.grid().level(i);
  return std::clamp(s, d.grid().min_score(), d.grid().max_score());
}

// Level with maximal mass; ties go to the lowest score.
inline double argmax_score(const ScoreDistribution& d) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] > d[best]) best = i;
  }
  return d.grid().level(best);
}

}  // namespace aso
