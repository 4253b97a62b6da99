#pragma once

// Independent numeric checks for the closed-form teacher and for analytic
// gradients. Nothing here calls optimal_policy except verify_instance,
// which compares against it.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aso/aso_core.hpp"
#include "aso/error.hpp"
#include "aso/rewards.hpp"
#include "aso/rng.hpp"
#include "aso/score_space.hpp"

namespace aso::oracle {

struct NumericMaximum {
  ScoreDistribution dist;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Objective evaluated from log-probabilities so that vanishing masses do not
// need log(0).
inline double objective_from_log(std::span<const double> log_pi,
                                 std::span<const double> log_ref,
                                 std::span<const double> rewards,
                                 double lambda) {
  double value = 0.0;
  for (std::size_t i = 0; i < log_pi.size(); ++i) {
    if (log_pi[i] == kNegInf) continue;
    const double p = std::exp(log_pi[i]);
    if (p == 0.0) continue;
    value += p * (rewards[i] - lambda * (log_pi[i] - log_ref[i]));
  }
  return value;
}

inline void normalize_log(std::vector<double>& log_pi) {
  double peak = kNegInf;
  for (double v : log_pi) peak = std::max(peak, v);
  double total = 0.0;
  for (double v : log_pi) {
    if (v != kNegInf) total += std::exp(v - peak);
  }
  const double log_total = peak + std::log(total);
  for (auto& v : log_pi) {
    if (v != kNegInf) v -= log_total;
  }
}

inline std::vector<double> exp_all(std::span<const double> log_pi) {
  std::vector<double> p(log_pi.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = log_pi[i] == kNegInf ? 0.0 : std::exp(log_pi[i]);
  }
  return p;
}

}  // namespace detail

// Exponentiated-gradient (mirror) ascent on the simplex, started from the
// uniform distribution over the feasible levels. The step size is chosen by
// backtracking so that the objective never decreases. Stops when the
// iterate moves less than `tol` in the max-norm, or after max_iters.
inline NumericMaximum maximize_objective_numeric(
    const ScoreDistribution& pi_ref, std::span<const double> rewards,
    double lambda, std::size_t max_iters = 5000, double tol = 1e-10) {
  aso::detail::require_lambda(lambda, "maximize_objective_numeric");
  aso::detail::require_rewards(rewards, pi_ref.size(),
                               "maximize_objective_numeric");
  if (max_iters < 1) {
    throw InputError("maximize_objective_numeric: max_iters must be >= 1");
  }
  using detail::kNegInf;
  const std::size_t n = pi_ref.size();

  std::vector<double> log_ref(n, kNegInf);
  std::vector<double> log_pi(n, kNegInf);
  std::size_t feasible = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pi_ref[i] > 0.0) log_ref[i] = std::log(pi_ref[i]);
    if (pi_ref[i] > 0.0 && rewards[i] != kNegInf) ++feasible;
  }
  if (feasible == 0) {
    throw DegenerateInputError(
        "maximize_objective_numeric: no level has both reference mass and a "
        "finite reward");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (pi_ref[i] > 0.0 && rewards[i] != kNegInf) {
      log_pi[i] = -std::log(static_cast<double>(feasible));
    }
  }

  double value = detail::objective_from_log(log_pi, log_ref, rewards, lambda);
  double step = 1.0;
  std::vector<double> candidate(n);
  std::size_t iter = 0;
  bool converged = false;

  while (iter < max_iters) {
    ++iter;
    // Gradient of F w.r.t. pi, dropping the constant -lambda which the
    // normalization removes anyway.
    step = std::min(step * 2.0, 1e12);
    bool accepted = false;
    double new_value = value;
    while (step > 1e-30) {
      for (std::size_t i = 0; i < n; ++i) {
        if (log_pi[i] == kNegInf) {
          candidate[i] = kNegInf;
          continue;
        }
        const double grad = rewards[i] - lambda * (log_pi[i] - log_ref[i]);
        candidate[i] = log_pi[i] + step * grad;
      }
      detail::normalize_log(candidate);
      new_value = detail::objective_from_log(candidate, log_ref, rewards, lambda);
      if (new_value >= value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No ascent step exists at working precision.
      converged = true;
      break;
    }
    double movement = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = log_pi[i] == kNegInf ? 0.0 : std::exp(log_pi[i]);
      const double b = candidate[i] == kNegInf ? 0.0 : std::exp(candidate[i]);
      movement = std::max(movement, std::abs(a - b));
    }
    log_pi.swap(candidate);
    value = new_value;
    if (movement < tol) {
      converged = true;
      break;
    }
  }

  auto probs = detail::exp_all(log_pi);
  double total = 0.0;
  for (double p : probs) total += p;
  for (auto& p : probs) p /= total;
  return {ScoreDistribution(pi_ref.grid(), std::move(probs)), value, iter,
          converged};
}

using LossFn = std::function<double(std::span<const double>)>;

// Central differences, one coordinate at a time.
inline std::vector<double> finite_diff_grad(const LossFn& loss,
                                            std::span<const double> at,
                                            double h = 1e-5) {
  if (!(h > 0.0)) throw InputError("finite_diff_grad: h must be > 0");
  std::vector<double> z(at.begin(), at.end());
  std::vector<double> grad(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double saved = z[i];
    z[i] = saved + h;
    const double up = loss(z);
    z[i] = saved - h;
    const double down = loss(z);
    z[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DomainError("finite_diff_grad: loss is not finite at coordinate " +
                        std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

struct OracleReport {
  std::size_t instance = 0;
  double lambda = 0.0;
  double analytic_objective = 0.0;
  double numeric_objective = 0.0;
  double gap = 0.0;  // analytic - numeric
  double kl_to_analytic = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct VerifyOptions {
  RewardSpec reward;
  std::size_t max_iters = 5000;
  double tol = 1e-10;
  double gap_tolerance = 1e-8;
  double kl_tolerance = 1e-6;
};

inline bool passes(const OracleReport& r, const VerifyOptions& opts) {
  return r.gap >= -opts.gap_tolerance && r.kl_to_analytic <= opts.kl_tolerance;
}

// Numeric maximum vs closed form on a single instance.
inline OracleReport verify_instance(std::size_t id,
                                    const ScoreDistribution& pi_ref,
                                    std::span<const double> rewards,
                                    double lambda,
                                    const VerifyOptions& opts = {}) {
  const auto teacher = optimal_policy(pi_ref, rewards, lambda);
  const auto numeric = maximize_objective_numeric(pi_ref, rewards, lambda,
                                                  opts.max_iters, opts.tol);
  OracleReport r;
  r.instance = id;
  r.lambda = lambda;
  r.analytic_objective = objective(teacher.dist, pi_ref, rewards, lambda);
  r.numeric_objective = numeric.objective;
  r.gap = r.analytic_objective - r.numeric_objective;
  r.kl_to_analytic = kl_divergence(numeric.dist, teacher.dist);
  r.iterations = numeric.iterations;
  r.converged = numeric.converged;
  return r;
}

// Random instances: pi_ref ~ Dirichlet(1), s* uniform on the grid, rewards
// from opts.reward. One report per (instance, lambda), in instance order.
inline std::vector<OracleReport> verify_closed_form(
    std::size_t n_instances, const ScoreGrid& grid,
    std::span<const double> lambdas, std::uint64_t seed,
    const VerifyOptions& opts = {}) {
  if (n_instances < 1) {
    throw InputError("verify_closed_form: n_instances must be >= 1");
  }
  opts.reward.validate();
  Rng rng(seed);
  std::vector<OracleReport> reports;
  reports.reserve(n_instances * lambdas.size());
  for (std::size_t k = 0; k < n_instances; ++k) {
    ScoreDistribution pi_ref(grid, rng.dirichlet_flat(grid.size()));
    const double s_star = grid.level(rng.uniform_index(grid.size()));
    const auto rewards = reward_vector(grid, s_star, opts.reward);
    for (double lambda : lambdas) {
      reports.push_back(verify_instance(k, pi_ref, rewards, lambda, opts));
    }
  }
  return reports;
}

}  // namespace aso::oracle
