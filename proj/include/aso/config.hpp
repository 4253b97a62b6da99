#pragma once

// Run configuration: one JSON document, defaults for every key, unknown keys
// rejected, `section.key=value` overrides applied on top.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aso/annotations.hpp"
#include "aso/error.hpp"
#include "aso/io.hpp"
#include "aso/oracle.hpp"
#include "aso/rewards.hpp"
#include "aso/score_space.hpp"
#include "aso/synth.hpp"
#include "aso/trainer.hpp"

namespace aso {

struct VerifyConfig {
  std::size_t n_instances = 1000;
  std::vector<double> lambdas = {0.1, 1.0, 10.0};
  std::size_t max_iters = 5000;
  double tol = 1e-10;
  double gap_tolerance = 1e-8;
  double kl_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct IaaConfig {
  AlphaMetric metric = AlphaMetric::Interval;
  double relaxed_threshold = kRelaxedMatchThreshold;
};

struct PathsConfig {
  std::string features;
  std::string annotations;
  std::string ground_truth;
  std::string predictions;
  std::string model;
};

struct RunConfig {
  ScoreGrid grid;
  TrainConfig train;  // also carries reward, aso.lambda and grpo
  PredictMode predict_mode = PredictMode::Expected;
  double holdout_fraction = 0.2;
  std::string init_model;
  SynthConfig synth;
  AggregateOptions aggregate;
  IaaConfig iaa;
  VerifyConfig verify;
  PathsConfig paths;

  void validate() const {
    train.validate();
    synth.validate();
    if (!(aggregate.var_threshold > 0.0)) {
      throw InputError("aggregate.var_threshold must be > 0");
    }
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw InputError("train.holdout_fraction must be in [0, 1)");
    }
    if (verify.n_instances < 1) {
      throw InputError("verify.n_instances must be >= 1");
    }
    if (verify.lambdas.empty()) throw InputError("verify.lambdas is empty");
    for (double l : verify.lambdas) {
      if (!(l > 0.0)) throw InputError("verify.lambdas must all be > 0");
    }
    if (verify.max_iters < 1) throw InputError("verify.max_iters must be >= 1");
    if (!(iaa.relaxed_threshold >= 0.0)) {
      throw InputError("iaa.relaxed_threshold must be >= 0");
    }
  }
};

inline std::string_view to_string(AlphaMetric m) {
  return m == AlphaMetric::Interval ? "interval" : "ordinal";
}

inline AlphaMetric parse_alpha_metric(std::string_view s) {
  if (s == "interval") return AlphaMetric::Interval;
  if (s == "ordinal") return AlphaMetric::Ordinal;
  throw InputError("unknown alpha metric '" + std::string(s) + "'");
}

inline io::Json to_json(const RunConfig& c) {
  using io::Json;
  Json j;
  j["grid"] = io::grid_to_json(c.grid);
  j["reward"] = {{"kind", to_string(c.train.reward.kind)},
                 {"beta", c.train.reward.beta},
                 {"w_acc", c.train.reward.w_acc},
                 {"w_dist", c.train.reward.w_dist}};
  j["aso"] = {{"lambda", c.train.lambda}};
  j["grpo"] = {{"group_size", c.train.grpo.group_size},
               {"clip_epsilon", c.train.grpo.clip_epsilon},
               {"kl_coeff", c.train.grpo.kl_coeff},
               {"std_floor", c.train.grpo.std_floor}};
  j["train"] = {{"method", to_string(c.train.method)},
                {"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed},
                {"optimizer", to_string(c.train.optimizer)},
                {"reference", to_string(c.train.reference)},
                {"predict_mode", to_string(c.predict_mode)},
                {"holdout_fraction", c.holdout_fraction},
                {"init_model", c.init_model}};
  j["synth"] = {{"n_items", c.synth.n_items},
                {"n_raters", c.synth.n_raters},
                {"n_dims", c.synth.n_dims},
                {"feature_dim", c.synth.feature_dim},
                {"rater_noise_sigma", c.synth.rater_noise_sigma},
                {"feature_noise_sigma", c.synth.feature_noise_sigma},
                {"seed", c.synth.seed}};
  j["aggregate"] = {{"min_raters", c.aggregate.min_raters},
                    {"var_threshold", c.aggregate.var_threshold}};
  j["iaa"] = {{"metric", to_string(c.iaa.metric)},
              {"relaxed_threshold", c.iaa.relaxed_threshold}};
  j["verify"] = {{"n_instances", c.verify.n_instances},
                 {"lambdas", c.verify.lambdas},
                 {"max_iters", c.verify.max_iters},
                 {"tol", c.verify.tol},
                 {"gap_tolerance", c.verify.gap_tolerance},
                 {"kl_tolerance", c.verify.kl_tolerance},
                 {"seed", c.verify.seed}};
  j["paths"] = {{"features", c.paths.features},
                {"annotations", c.paths.annotations},
                {"ground_truth", c.paths.ground_truth},
                {"predictions", c.paths.predictions},
                {"model", c.paths.model}};
  return j;
}

namespace detail {

// Overlays `patch` onto `base`; every key in `patch` must already exist.
inline void merge_strict(io::Json& base, const io::Json& patch,
                         const std::string& prefix) {
  if (!patch.is_object()) {
    throw InputError("config: '" + (prefix.empty() ? "<root>" : prefix) +
                     "' must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    auto target = base.find(it.key());
    if (target == base.end()) throw InputError("config: unknown key '" + key + "'");
    if (target->is_object()) {
      merge_strict(*target, it.value(), key);
    } else {
      *target = it.value();
    }
  }
}

template <typename T>
T get_as(const io::Json& j, const char* section, const char* key) {
  try {
    const auto& v = j.at(section).at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw InputError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw InputError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw InputError("");
      if (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0) throw InputError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw InputError(std::string("config: '") + section + "." + key +
                     "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig from_json(const io::Json& j) {
  using detail::get_as;
  RunConfig c;
  c.grid = ScoreGrid(get_as<double>(j, "grid", "min"),
                     get_as<double>(j, "grid", "max"),
                     get_as<double>(j, "grid", "step"));
  auto& t = c.train;
  t.reward.kind = parse_reward_kind(get_as<std::string>(j, "reward", "kind"));
  t.reward.beta = get_as<double>(j, "reward", "beta");
  t.reward.w_acc = get_as<double>(j, "reward", "w_acc");
  t.reward.w_dist = get_as<double>(j, "reward", "w_dist");
  t.lambda = get_as<double>(j, "aso", "lambda");
  t.grpo.group_size = get_as<std::size_t>(j, "grpo", "group_size");
  t.grpo.clip_epsilon = get_as<double>(j, "grpo", "clip_epsilon");
  t.grpo.kl_coeff = get_as<double>(j, "grpo", "kl_coeff");
  t.grpo.std_floor = get_as<double>(j, "grpo", "std_floor");
  t.method = parse_method(get_as<std::string>(j, "train", "method"));
  t.learning_rate = get_as<double>(j, "train", "learning_rate");
  t.epochs = get_as<std::size_t>(j, "train", "epochs");
  t.batch_size = get_as<std::size_t>(j, "train", "batch_size");
  t.seed = get_as<std::uint64_t>(j, "train", "seed");
  t.optimizer = parse_optimizer(get_as<std::string>(j, "train", "optimizer"));
  t.reference = parse_reference(get_as<std::string>(j, "train", "reference"));
  c.predict_mode =
      parse_predict_mode(get_as<std::string>(j, "train", "predict_mode"));
  c.holdout_fraction = get_as<double>(j, "train", "holdout_fraction");
  c.init_model = get_as<std::string>(j, "train", "init_model");
  c.synth.n_items = get_as<std::size_t>(j, "synth", "n_items");
  c.synth.n_raters = get_as<std::size_t>(j, "synth", "n_raters");
  c.synth.n_dims = get_as<std::size_t>(j, "synth", "n_dims");
  c.synth.feature_dim = get_as<std::size_t>(j, "synth", "feature_dim");
  c.synth.rater_noise_sigma = get_as<double>(j, "synth", "rater_noise_sigma");
  c.synth.feature_noise_sigma = get_as<double>(j, "synth", "feature_noise_sigma");
  c.synth.seed = get_as<std::uint64_t>(j, "synth", "seed");
  c.aggregate.min_raters = get_as<std::size_t>(j, "aggregate", "min_raters");
  c.aggregate.var_threshold = get_as<double>(j, "aggregate", "var_threshold");
  c.iaa.metric = parse_alpha_metric(get_as<std::string>(j, "iaa", "metric"));
  c.iaa.relaxed_threshold = get_as<double>(j, "iaa", "relaxed_threshold");
  c.verify.n_instances = get_as<std::size_t>(j, "verify", "n_instances");
  c.verify.lambdas = get_as<std::vector<double>>(j, "verify", "lambdas");
  c.verify.max_iters = get_as<std::size_t>(j, "verify", "max_iters");
  c.verify.tol = get_as<double>(j, "verify", "tol");
  c.verify.gap_tolerance = get_as<double>(j, "verify", "gap_tolerance");
  c.verify.kl_tolerance = get_as<double>(j, "verify", "kl_tolerance");
  c.verify.seed = get_as<std::uint64_t>(j, "verify", "seed");
  c.paths.features = get_as<std::string>(j, "paths", "features");
  c.paths.annotations = get_as<std::string>(j, "paths", "annotations");
  c.paths.ground_truth = get_as<std::string>(j, "paths", "ground_truth");
  c.paths.predictions = get_as<std::string>(j, "paths", "predictions");
  c.paths.model = get_as<std::string>(j, "paths", "model");
  return c;
}

// Parses "section.key=value". The value is read as JSON when it parses as
// JSON and taken as a plain string otherwise.
inline void apply_override(io::Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InputError("--set expects KEY=VALUE, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  io::Json value;
  try {
    value = io::Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  io::Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    auto it = node->find(part);
    if (it == node->end()) throw InputError("config: unknown key '" + key + "'");
    if (dot == std::string::npos) {
      if (it->is_object()) {
        throw InputError("config: '" + key + "' is a section, not a value");
      }
      *it = value;
      return;
    }
    if (!it->is_object()) throw InputError("config: unknown key '" + key + "'");
    node = &*it;
    start = dot + 1;
  }
}

// Defaults, then the optional config file, then each override, then the
// optional global seed (applied to every seeded section).
inline RunConfig resolve_config(const std::filesystem::path& file,
                                const std::vector<std::string>& overrides,
                                std::optional<std::uint64_t> seed = std::nullopt) {
  io::Json doc = to_json(RunConfig{});
  if (!file.empty()) {
    io::Json user;
    try {
      user = io::Json::parse(io::read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(file.string() + ": malformed config: " + e.what());
    }
    detail::merge_strict(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) {
    doc["train"]["seed"] = *seed;
    doc["synth"]["seed"] = *seed;
    doc["verify"]["seed"] = *seed;
  }
  RunConfig c = from_json(doc);
  c.validate();
  return c;
}

}  // namespace aso
