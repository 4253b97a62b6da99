#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "aso/error.hpp"
#include "aso/score_space.hpp"

namespace aso {

enum class RewardKind { Abs, Squared, Accuracy, Distribution, Composite };

inline std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Abs: return "abs";
    case RewardKind::Squared: return "squared";
    case RewardKind::Accuracy: return "accuracy";
    case RewardKind::Distribution: return "distribution";
    case RewardKind::Composite: return "composite";
  }
  return "abs";
}

inline RewardKind parse_reward_kind(std::string_view name) {
  if (name == "abs") return RewardKind::Abs;
  if (name == "squared") return RewardKind::Squared;
  if (name == "accuracy") return RewardKind::Accuracy;
  if (name == "distribution") return RewardKind::Distribution;
  if (name == "composite") return RewardKind::Composite;
  throw InputError("unknown reward kind '" + std::string(name) + "'");
}

// Offset of the distribution reward: R_dist = 5 - |pred - gt|.
inline constexpr double kDistributionRewardCeiling = 5.0;

struct RewardSpec {
  RewardKind kind = RewardKind::Abs;
  double beta = 1.0;
  double w_acc = 1.0;
  double w_dist = 1.0;

  void validate() const {
    if (!std::isfinite(beta) || beta < 0.0) {
      throw InputError("reward: beta must be finite and >= 0");
    }
    if ((kind == RewardKind::Abs || kind == RewardKind::Squared) &&
        !(beta > 0.0)) {
      throw InputError("reward: beta must be > 0 for abs/squared rewards");
    }
    if (w_acc < 0.0 || w_dist < 0.0 || !std::isfinite(w_acc) ||
        !std::isfinite(w_dist)) {
      throw InputError("reward: composite weights must be finite and >= 0");
    }
    if (kind == RewardKind::Composite && !(w_acc + w_dist > 0.0)) {
      throw InputError("reward: composite weights must not both be zero");
    }
  }
};

inline double reward_abs(double s, double s_star, double beta,
                         const ScoreGrid& grid) {
  grid.require_index(s, "reward_abs: s");
  grid.require_index(s_star, "reward_abs: s_star");
  if (!(beta > 0.0)) throw InputError("reward_abs: beta must be > 0");
  return -beta * std::abs(s - s_star);
}

inline double reward_squared(double s, double s_star, const ScoreGrid& grid,
                             double beta = 1.0) {
  grid.require_index(s, "reward_squared: s");
  grid.require_index(s_star, "reward_squared: s_star");
  if (!(beta > 0.0)) throw InputError("reward_squared: beta must be > 0");
  const double d = s - s_star;
  return -beta * d * d;
}

// 1 when both values snap to the same grid level.
inline double reward_accuracy(double pred, double gt, const ScoreGrid& grid) {
  return grid.snap_index(pred) == grid.snap_index(gt) ? 1.0 : 0.0;
}

inline double reward_distribution(double pred, double gt) {
  if (!std::isfinite(pred) || !std::isfinite(gt)) {
    throw InputError("reward_distribution: non-finite input");
  }
  return kDistributionRewardCeiling - std::abs(pred - gt);
}

inline double reward_composite(double pred, double gt, const RewardSpec& spec,
                               const ScoreGrid& grid) {
  if (spec.kind != RewardKind::Composite) {
    throw InputError("reward_composite: spec kind is not composite");
  }
  return spec.w_acc * reward_accuracy(pred, gt, grid) +
         spec.w_dist * reward_distribution(pred, gt);
}

// Scalar reward of predicting s against target s_star under any spec.
inline double reward(double s, double s_star, const RewardSpec& spec,
                     const ScoreGrid& grid) {
  switch (spec.kind) {
    case RewardKind::Abs: return reward_abs(s, s_star, spec.beta, grid);
    case RewardKind::Squared:
      return reward_squared(s, s_star, grid, spec.beta);
    case RewardKind::Accuracy: return reward_accuracy(s, s_star, grid);
    case RewardKind::Distribution: return reward_distribution(s, s_star);
    case RewardKind::Composite: return reward_composite(s, s_star, spec, grid);
  }
  throw InputError("reward: unhandled kind");
}

// One reward per grid level against the target level s_star.
inline std::vector<double> reward_vector(const ScoreGrid& grid, double s_star,
                                         const RewardSpec& spec) {
  const std::size_t target = grid.require_index(s_star, "reward_vector: s_star");
  const double t = grid.level(target);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[i] = reward(grid.level(i), t, spec, grid);
  }
  return out;
}

}  // namespace aso
