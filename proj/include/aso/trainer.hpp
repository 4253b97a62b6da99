#pragma once

// Linear score policy (features -> logits over the grid) and the three
// training procedures compared on it: hard-label SFT, GRPO on the one-step
// bandit, and soft-target training against the closed-form teacher (ASO).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aso/aso_core.hpp"
#include "aso/dataset.hpp"
#include "aso/error.hpp"
#include "aso/rewards.hpp"
#include "aso/rng.hpp"
#include "aso/score_space.hpp"

namespace aso {

// Learning rate used for the 7B backbone in the reference setup. Kept for
// documentation; at toy scale it barely moves a linear model.
inline constexpr double kBackboneLearningRate = 5e-6;

enum class Method { Sft, Aso, Grpo };
enum class OptimizerKind { Sgd, AdaptiveMoments };
enum class ReferenceKind { Snapshot, Uniform };
enum class PredictMode { Expected, Argmax };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Sft: return "sft";
    case Method::Aso: return "aso";
    case Method::Grpo: return "grpo";
  }
  return "sft";
}

inline Method parse_method(std::string_view s) {
  if (s == "sft") return Method::Sft;
  if (s == "aso") return Method::Aso;
  if (s == "grpo") return Method::Grpo;
  throw InputError("unknown training method '" + std::string(s) + "'");
}

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::AdaptiveMoments;
  throw InputError("unknown optimizer '" + std::string(s) + "'");
}

inline std::string_view to_string(ReferenceKind k) {
  return k == ReferenceKind::Snapshot ? "snapshot" : "uniform";
}

inline ReferenceKind parse_reference(std::string_view s) {
  if (s == "snapshot") return ReferenceKind::Snapshot;
  if (s == "uniform") return ReferenceKind::Uniform;
  throw InputError("unknown reference policy '" + std::string(s) + "'");
}

inline std::string_view to_string(PredictMode m) {
  return m == PredictMode::Expected ? "expected" : "argmax";
}

inline PredictMode parse_predict_mode(std::string_view s) {
  if (s == "expected") return PredictMode::Expected;
  if (s == "argmax") return PredictMode::Argmax;
  throw InputError("unknown predict mode '" + std::string(s) + "'");
}

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_epsilon = 0.2;
  double kl_coeff = 0.1;
  double std_floor = 1e-6;

  void validate() const {
    if (group_size < 2) throw InputError("grpo: group_size must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
      throw InputError("grpo: clip_epsilon must be in (0, 1)");
    }
    if (!(kl_coeff >= 0.0)) throw InputError("grpo: kl_coeff must be >= 0");
    if (!(std_floor > 0.0)) throw InputError("grpo: std_floor must be > 0");
  }
};

struct TrainConfig {
  Method method = Method::Sft;
  double learning_rate = 1e-2;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::AdaptiveMoments;
  ReferenceKind reference = ReferenceKind::Snapshot;
  double lambda = kDefaultLambda;
  GrpoConfig grpo;
  RewardSpec reward;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InputError("train: learning_rate must be > 0");
    }
    if (batch_size < 1) throw InputError("train: batch_size must be >= 1");
    if (!(lambda > 0.0)) throw InputError("aso: lambda must be > 0");
    grpo.validate();
    reward.validate();
  }
};

// logits = W * features + b, with W stored row-major (|S| x d).
struct LinearScorer {
  ScoreGrid grid;
  std::size_t feature_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static LinearScorer zeros(const ScoreGrid& grid, std::size_t feature_dim) {
    if (feature_dim < 1) throw InputError("scorer: feature_dim must be >= 1");
    return {grid, feature_dim,
            std::vector<double>(grid.size() * feature_dim, 0.0),
            std::vector<double>(grid.size(), 0.0)};
  }

  void validate() const {
    if (weights.size() != grid.size() * feature_dim ||
        bias.size() != grid.size()) {
      throw InputError("scorer: parameter shapes do not match grid and "
                       "feature_dim");
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw DomainError("scorer: non-finite weight");
    }
    for (double b : bias) {
      if (!std::isfinite(b)) throw DomainError("scorer: non-finite bias");
    }
  }

  friend bool operator==(const LinearScorer&, const LinearScorer&) = default;
};

inline std::vector<double> forward(const LinearScorer& model,
                                   std::span<const double> features) {
  if (features.size() != model.feature_dim) {
    throw InputError("forward: feature length " +
                     std::to_string(features.size()) + " != model dim " +
                     std::to_string(model.feature_dim));
  }
  detail::require_finite(features, "forward");
  const std::size_t n = model.grid.size(), d = model.feature_dim;
  std::vector<double> logits(model.bias);
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = model.weights.data() + s * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += row[k] * features[k];
    logits[s] += acc;
  }
  return logits;
}

inline ScoreDistribution policy(const LinearScorer& model,
                                std::span<const double> features) {
  return softmax(forward(model, features), model.grid);
}

inline double predict(const LinearScorer& model,
                      std::span<const double> features, PredictMode mode) {
  const auto dist = policy(model, features);
  return mode == PredictMode::Expected ? expected_score(dist)
                                       : argmax_score(dist);
}

// -log softmax(logits)[gt].
inline double sft_loss(double gt, std::span<const double> logits,
                       const ScoreGrid& grid) {
  const std::size_t idx = grid.require_index(gt, "sft_loss: target");
  if (logits.size() != grid.size()) {
    throw InputError("sft_loss: logit count does not match the grid");
  }
  return -log_softmax(logits)[idx];
}

// d sft_loss / d logits = softmax(logits) - onehot(gt).
inline std::vector<double> sft_grad(double gt, std::span<const double> logits,
                                    const ScoreGrid& grid) {
  const std::size_t idx = grid.require_index(gt, "sft_grad: target");
  if (logits.size() != grid.size()) {
    throw InputError("sft_grad: logit count does not match the grid");
  }
  auto g = softmax_values(logits);
  g[idx] -= 1.0;
  return g;
}

// Gradient w.r.t. the model parameters, same layout as LinearScorer.
struct ParamGrad {
  std::vector<double> weights;
  std::vector<double> bias;

  static ParamGrad zeros_like(const LinearScorer& m) {
    return {std::vector<double>(m.weights.size(), 0.0),
            std::vector<double>(m.bias.size(), 0.0)};
  }

  // Chain rule through the linear layer: dW += g x features^T, db += g.
  void accumulate(std::span<const double> logit_grad,
                  std::span<const double> features, double scale) {
    const std::size_t d = features.size();
    for (std::size_t s = 0; s < logit_grad.size(); ++s) {
      const double g = scale * logit_grad[s];
      bias[s] += g;
      double* row = weights.data() + s * d;
      for (std::size_t k = 0; k < d; ++k) row[k] += g * features[k];
    }
  }
};

class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer(OptimizerKind kind, double learning_rate)
      : kind_(kind), lr_(learning_rate) {}

  void apply(LinearScorer& model, const ParamGrad& grad) {
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < model.weights.size(); ++i) {
        model.weights[i] -= lr_ * grad.weights[i];
      }
      for (std::size_t i = 0; i < model.bias.size(); ++i) {
        model.bias[i] -= lr_ * grad.bias[i];
      }
    } else {
      if (m_w_.empty()) {
        m_w_.assign(model.weights.size(), 0.0);
        v_w_.assign(model.weights.size(), 0.0);
        m_b_.assign(model.bias.size(), 0.0);
        v_b_.assign(model.bias.size(), 0.0);
      }
      ++t_;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
      adam_update(model.weights, grad.weights, m_w_, v_w_, c1, c2);
      adam_update(model.bias, grad.bias, m_b_, v_b_, c1, c2);
    }
    model.validate();
  }

  std::size_t steps() const { return t_; }

 private:
  void adam_update(std::vector<double>& param, const std::vector<double>& g,
                   std::vector<double>& m, std::vector<double>& v, double c1,
                   double c2) const {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      param[i] -= lr_ * m_hat / (std::sqrt(v_hat) + kEpsilon);
    }
  }

  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_w_, v_w_, m_b_, v_b_;
};

// Reference policy pi_ref(.|x) as a function of the item's features.
using ReferenceFn = std::function<ScoreDistribution(std::span<const double>)>;

inline ReferenceFn snapshot_reference(LinearScorer frozen) {
  return [m = std::move(frozen)](std::span<const double> features) {
    return policy(m, features);
  };
}

inline ReferenceFn uniform_reference(const ScoreGrid& grid) {
  return [grid](std::span<const double>) {
    return ScoreDistribution::uniform(grid);
  };
}

struct StepResult {
  double loss = 0.0;         // batch mean, before the update
  double mean_reward = 0.0;  // GRPO: mean sampled reward
  double mean_kl = 0.0;      // GRPO: mean KL(pi_theta || pi_ref)
};

namespace detail {

inline void require_batch(std::span<const Example> batch, const char* what) {
  if (batch.empty()) throw InputError(std::string(what) + ": empty batch");
}

inline std::string item_context(const Example& ex) {
  return "item '" + ex.video_id + "': ";
}

}  // namespace detail

// Batch-mean ASO loss and gradient; the model is not modified.
inline std::pair<double, ParamGrad> aso_gradient(const LinearScorer& model,
                                                 std::span<const Example> batch,
                                                 const ReferenceFn& reference,
                                                 const TrainConfig& config) {
  detail::require_batch(batch, "aso_step");
  auto grad = ParamGrad::zeros_like(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    std::optional<TeacherPolicy> teacher;
    try {
      teacher = make_teacher(reference(ex.features), ex.target, config.reward,
                             config.lambda);
    } catch (const Error& e) {
      throw InputError(detail::item_context(ex) + e.what());
    }
    const auto logits = forward(model, ex.features);
    loss += soft_ce_loss(*teacher, logits);
    grad.accumulate(soft_ce_grad(*teacher, logits), ex.features, scale);
  }
  return {loss * scale, std::move(grad)};
}

inline std::pair<double, ParamGrad> sft_gradient(const LinearScorer& model,
                                                 std::span<const Example> batch) {
  detail::require_batch(batch, "sft_step");
  auto grad = ParamGrad::zeros_like(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto logits = forward(model, ex.features);
    loss += sft_loss(ex.target, logits, model.grid);
    grad.accumulate(sft_grad(ex.target, logits, model.grid), ex.features,
                    scale);
  }
  return {loss * scale, std::move(grad)};
}

inline StepResult aso_step(LinearScorer& model, Optimizer& opt,
                           std::span<const Example> batch,
                           const ReferenceFn& reference,
                           const TrainConfig& config) {
  auto [loss, grad] = aso_gradient(model, batch, reference, config);
  opt.apply(model, grad);
  return {loss, 0.0, 0.0};
}

inline StepResult sft_step(LinearScorer& model, Optimizer& opt,
                           std::span<const Example> batch) {
  auto [loss, grad] = sft_gradient(model, batch);
  opt.apply(model, grad);
  return {loss, 0.0, 0.0};
}

// Group-relative advantages; all zero when the group's rewards do not vary.
inline std::vector<double> group_advantages(std::span<const double> rewards,
                                            double std_floor) {
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < std_floor) return adv;
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

// Clipped-ratio surrogate J = mean_i min(rho_i A_i, clip(rho_i) A_i) and its
// gradient w.r.t. the current logits. rho_i = p(s_i) / p_old(s_i).
inline std::pair<double, std::vector<double>> clipped_surrogate(
    std::span<const double> logits, std::span<const double> old_probs,
    std::span<const std::size_t> samples, std::span<const double> advantages,
    double clip_epsilon) {
  const auto p = softmax_values(logits);
  std::vector<double> grad(p.size(), 0.0);
  double value = 0.0;
  const double inv_g = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t s = samples[i];
    const double a = advantages[i];
    const double rho = p[s] / old_probs[s];
    const double clipped =
        std::clamp(rho, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    value += inv_g * std::min(rho * a, clipped * a);
    const bool flat = (a > 0.0 && rho > 1.0 + clip_epsilon) ||
                      (a < 0.0 && rho < 1.0 - clip_epsilon);
    if (flat || a == 0.0) continue;
    // d rho / d z_k = rho * (1[k == s] - p_k)
    for (std::size_t k = 0; k < p.size(); ++k) {
      grad[k] += inv_g * a * rho * ((k == s ? 1.0 : 0.0) - p[k]);
    }
  }
  return {value, grad};
}

// d KL(softmax(z) || q) / dz_k = p_k (log p_k - log q_k - KL).
inline std::pair<double, std::vector<double>> kl_to_reference(
    std::span<const double> logits, std::span<const double> ref) {
  const auto p = softmax_values(logits);
  const auto log_p = log_softmax(logits);
  const double kl = kl_divergence(p, ref);
  std::vector<double> grad(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) grad[k] = p[k] * (log_p[k] - std::log(ref[k]) - kl);
  }
  return {kl, grad};
}

inline StepResult grpo_step(LinearScorer& model, Optimizer& opt,
                            std::span<const Example> batch,
                            const ReferenceFn& reference,
                            const TrainConfig& config, Rng& rng) {
  detail::require_batch(batch, "grpo_step");
  const auto& g = config.grpo;
  const auto& grid = model.grid;
  auto grad = ParamGrad::zeros_like(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  StepResult out;
  std::vector<std::size_t> samples(g.group_size);
  std::vector<double> rewards(g.group_size);
  for (const auto& ex : batch) {
    const double target = grid.level(grid.require_index(ex.target, "target"));
    const auto logits = forward(model, ex.features);
    const auto old_probs = softmax_values(logits);
    for (std::size_t i = 0; i < g.group_size; ++i) {
      samples[i] = rng.categorical(old_probs);
      rewards[i] = reward(grid.level(samples[i]), target, config.reward, grid);
    }
    const auto adv = group_advantages(rewards, g.std_floor);
    auto [surrogate, surrogate_grad] =
        clipped_surrogate(logits, old_probs, samples, adv, g.clip_epsilon);
    const auto ref = reference(ex.features);
    auto [kl, kl_grad] = kl_to_reference(logits, ref.probs());

    // Minimize -(J - kl_coeff * KL).
    std::vector<double> item_grad(logits.size());
    for (std::size_t k = 0; k < item_grad.size(); ++k) {
      item_grad[k] = -surrogate_grad[k] + g.kl_coeff * kl_grad[k];
    }
    grad.accumulate(item_grad, ex.features, scale);
    out.loss += scale * (g.kl_coeff * kl - surrogate);
    out.mean_kl += scale * kl;
    out.mean_reward +=
        scale * std::accumulate(rewards.begin(), rewards.end(), 0.0) /
        static_cast<double>(g.group_size);
  }
  opt.apply(model, grad);
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double mean_reward = 0.0;  // expected reward under the policy
  double mean_kl = 0.0;      // KL(pi_theta || pi_ref)
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  LinearScorer model;
  TrainHistory history;
};

// Expected reward and KL to the reference, averaged over `data`.
inline std::pair<double, double> policy_summary(const LinearScorer& model,
                                                std::span<const Example> data,
                                                const ReferenceFn& reference,
                                                const RewardSpec& spec) {
  double reward_sum = 0.0, kl_sum = 0.0;
  for (const auto& ex : data) {
    const auto p = policy(model, ex.features);
    const auto r = reward_vector(model.grid, ex.target, spec);
    for (std::size_t s = 0; s < p.size(); ++s) reward_sum += p[s] * r[s];
    kl_sum += kl_divergence(p, reference(ex.features));
  }
  const double n = static_cast<double>(data.size());
  return {reward_sum / n, kl_sum / n};
}

// Shuffled mini-batch training. For ASO and GRPO the reference policy is
// the model as it stands before the first update (or uniform, if configured).
inline TrainResult train(std::span<const Example> dataset,
                         const TrainConfig& config,
                         std::optional<LinearScorer> init = std::nullopt,
                         const ScoreGrid& grid = ScoreGrid{}) {
  config.validate();
  if (dataset.empty()) throw InputError("train: empty dataset");
  const std::size_t d = dataset.front().features.size();
  for (const auto& ex : dataset) {
    if (ex.features.size() != d) {
      throw InputError(detail::item_context(ex) +
                       "inconsistent feature dimension");
    }
    grid.require_index(ex.target, "train target");
  }
  LinearScorer model = init ? *init : LinearScorer::zeros(grid, d);
  model.validate();
  if (!(model.grid == grid) || model.feature_dim != d) {
    throw InputError("train: initial model does not match grid/feature_dim");
  }

  const ReferenceFn reference = config.reference == ReferenceKind::Snapshot
                                    ? snapshot_reference(model)
                                    : uniform_reference(grid);
  Optimizer opt(config.optimizer, config.learning_rate);
  Rng rng(config.seed);
  std::vector<Example> order(dataset.begin(), dataset.end());
  TrainHistory history;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      std::span<const Example> batch(order.data() + start, len);
      StepResult step;
      switch (config.method) {
        case Method::Sft: step = sft_step(model, opt, batch); break;
        case Method::Aso:
          step = aso_step(model, opt, batch, reference, config);
          break;
        case Method::Grpo:
          step = grpo_step(model, opt, batch, reference, config, rng);
          break;
      }
      loss_sum += step.loss * static_cast<double>(len);
    }
    auto [mean_reward, mean_kl] =
        policy_summary(model, dataset, reference, config.reward);
    history.push_back({epoch + 1, loss_sum / static_cast<double>(order.size()),
                       mean_reward, mean_kl});
  }
  return {std::move(model), std::move(history)};
}

}  // namespace aso
