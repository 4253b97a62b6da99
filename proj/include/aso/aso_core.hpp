#pragma once

// KL-regularized one-step bandit over a score grid.
//
// For one item with reference policy pi_ref and per-level rewards R, the
// objective
//
//   F(pi) = sum_s pi(s) R(s) - lambda * KL(pi || pi_ref)
//
// is strictly concave on the simplex and is maximized by the Boltzmann tilt
//
//   pi*(s) = pi_ref(s) exp(R(s) / lambda) / Z,
//   Z      = sum_s pi_ref(s) exp(R(s) / lambda).
//
// Training a parametric policy then reduces to cross-entropy against pi*
// as a soft target, whose gradient w.r.t. the logits is softmax(z) - pi*.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aso/error.hpp"
#include "aso/rewards.hpp"
#include "aso/score_space.hpp"

namespace aso {

inline constexpr double kDefaultLambda = 1.0;

struct TeacherPolicy {
  ScoreDistribution dist;
  double log_partition = 0.0;
  double lambda = kDefaultLambda;
  std::vector<double> rewards;
  std::optional<RewardSpec> reward_spec;
  std::optional<double> s_star;

  const ScoreGrid& grid() const { return dist.grid(); }
};

namespace detail {

inline void require_lambda(double lambda, const char* what) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InputError(std::string(what) + ": lambda must be finite and > 0");
  }
}

inline void require_rewards(std::span<const double> rewards, std::size_t n,
                            const char* what) {
  if (rewards.size() != n) {
    throw InputError(std::string(what) + ": " +
                     std::to_string(rewards.size()) + " rewards for " +
                     std::to_string(n) + " levels");
  }
  for (double r : rewards) {
    if (std::isnan(r) || r == std::numeric_limits<double>::infinity()) {
      throw InputError(std::string(what) + ": rewards must be < +inf");
    }
  }
}

}  // namespace detail

// F_x(pi) = E_pi[R] - lambda KL(pi || pi_ref).
inline double objective(const ScoreDistribution& pi,
                        const ScoreDistribution& pi_ref,
                        std::span<const double> rewards, double lambda) {
  detail::require_lambda(lambda, "objective");
  if (!(pi.grid() == pi_ref.grid())) {
    throw InputError("objective: pi and pi_ref are on different grids");
  }
  detail::require_rewards(rewards, pi.size(), "objective");
  double expected = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] > 0.0) expected += pi[i] * rewards[i];
  }
  return expected - lambda * kl_divergence(pi.probs(), pi_ref.probs());
}

// Closed-form maximizer of the objective, computed in log space.
inline TeacherPolicy optimal_policy(const ScoreDistribution& pi_ref,
                                    std::span<const double> rewards,
                                    double lambda) {
  detail::require_lambda(lambda, "optimal_policy");
  const std::size_t n = pi_ref.size();
  detail::require_rewards(rewards, n, "optimal_policy");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_weight(n, kNegInf);
  double peak = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (pi_ref[i] <= 0.0 || rewards[i] == kNegInf) continue;
    log_weight[i] = std::log(pi_ref[i]) + rewards[i] / lambda;
    peak = std::max(peak, log_weight[i]);
  }
  if (peak == kNegInf) {
    throw DegenerateInputError(
        "optimal_policy: every level with reference mass has reward -inf");
  }
  double total = 0.0;
  for (double lw : log_weight) {
    if (lw != kNegInf) total += std::exp(lw - peak);
  }
  const double log_z = peak + std::log(total);
  std::vector<double> probs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (log_weight[i] != kNegInf) probs[i] = std::exp(log_weight[i] - log_z);
  }
  return TeacherPolicy{ScoreDistribution(pi_ref.grid(), std::move(probs)),
                       log_z,
                       lambda,
                       std::vector<double>(rewards.begin(), rewards.end()),
                       std::nullopt,
                       std::nullopt};
}

// Teacher for a target level under a reward spec.
inline TeacherPolicy make_teacher(const ScoreDistribution& pi_ref,
                                  double s_star, const RewardSpec& spec,
                                  double lambda) {
  spec.validate();
  auto teacher =
      optimal_policy(pi_ref, reward_vector(pi_ref.grid(), s_star, spec), lambda);
  teacher.reward_spec = spec;
  teacher.s_star = pi_ref.grid().level(pi_ref.grid().require_index(s_star));
  return teacher;
}

// Cross-entropy of softmax(logits) against the teacher as a soft target.
inline double soft_ce_loss(const TeacherPolicy& teacher,
                           std::span<const double> logits) {
  if (logits.size() != teacher.dist.size()) {
    throw InputError("soft_ce_loss: logit count does not match the grid");
  }
  const auto log_p = log_softmax(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    if (teacher.dist[i] > 0.0) loss -= teacher.dist[i] * log_p[i];
  }
  return loss;
}

// d soft_ce_loss / d logits = softmax(logits) - pi*.
inline std::vector<double> soft_ce_grad(const TeacherPolicy& teacher,
                                        std::span<const double> logits) {
  if (logits.size() != teacher.dist.size()) {
    throw InputError("soft_ce_grad: logit count does not match the grid");
  }
  auto grad = softmax_values(logits);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= teacher.dist[i];
  return grad;
}

struct TeacherItem {
  std::string id;
  ScoreDistribution pi_ref;
  double s_star;
};

// Builds one teacher per item; errors are re-thrown with the item id.
inline std::vector<TeacherPolicy> teacher_batch(
    std::span<const TeacherItem> items, const RewardSpec& spec,
    double lambda) {
  std::vector<TeacherPolicy> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    try {
      out.push_back(make_teacher(item.pi_ref, item.s_star, spec, lambda));
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError("item '" + item.id + "': " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("item '" + item.id + "': " + e.what());
    } catch (const InputError& e) {
      throw InputError("item '" + item.id + "': " + e.what());
    }
  }
  return out;
}

}  // namespace aso
