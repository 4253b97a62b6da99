#pragma once

// Seeded stand-in for a multi-rater quality corpus. Each (item, dimension)
// has a latent quality q ~ U[grid.min, grid.max], a feature vector
// w_d * q + noise along a fixed per-dimension direction w_d, and rater
// scores snap(clamp(q + N(0, sigma^2))).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "aso/annotations.hpp"
#include "aso/dataset.hpp"
#include "aso/error.hpp"
#include "aso/rng.hpp"
#include "aso/score_space.hpp"

namespace aso {

inline const std::vector<std::string>& default_dimension_names() {
  static const std::vector<std::string> names = {
      "motion_quality", "motion_amplitude", "aesthetic_quality",
      "content_quality", "clarity_quality"};
  return names;
}

inline std::string dimension_name(std::size_t d) {
  const auto& names = default_dimension_names();
  return d < names.size() ? names[d] : "dim_" + std::to_string(d);
}

struct SynthConfig {
  std::size_t n_items = 1000;
  std::size_t n_raters = 3;
  std::size_t n_dims = 5;
  std::size_t feature_dim = 8;
  double rater_noise_sigma = 0.4;
  double feature_noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_items < 1) throw InputError("synth: n_items must be >= 1");
    if (n_raters < 1) throw InputError("synth: n_raters must be >= 1");
    if (n_dims < 1) throw InputError("synth: n_dims must be >= 1");
    if (feature_dim < 1) throw InputError("synth: feature_dim must be >= 1");
    if (!(rater_noise_sigma >= 0.0) || !(feature_noise_sigma >= 0.0)) {
      throw InputError("synth: noise sigmas must be >= 0");
    }
  }
};

struct SynthData {
  std::vector<FeatureRow> features;
  std::vector<AnnotationRecord> annotations;
  std::vector<ScoreRow> latent;
};

inline std::string video_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vid_%06zu", i);
  return buf;
}

inline SynthData generate(const SynthConfig& config,
                          const ScoreGrid& grid = ScoreGrid{}) {
  config.validate();
  Rng rng(config.seed);

  std::vector<std::vector<double>> directions(config.n_dims);
  for (auto& w : directions) {
    w.resize(config.feature_dim);
    double norm = 0.0;
    for (auto& x : w) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      w[0] = 1.0;
      norm = 1.0;
    }
    for (auto& x : w) x /= norm;
  }

  SynthData data;
  data.features.reserve(config.n_items * config.n_dims);
  data.latent.reserve(config.n_items * config.n_dims);
  data.annotations.reserve(config.n_items * config.n_dims * config.n_raters);
  const double lo = grid.min_score(), hi = grid.max_score();
  for (std::size_t i = 0; i < config.n_items; ++i) {
    const std::string vid = video_name(i);
    for (std::size_t d = 0; d < config.n_dims; ++d) {
      const std::string dim = dimension_name(d);
      const double q = rng.uniform(lo, hi);
      std::vector<double> phi(config.feature_dim);
      for (std::size_t k = 0; k < config.feature_dim; ++k) {
        phi[k] = directions[d][k] * q +
                 config.feature_noise_sigma * rng.normal();
      }
      data.features.push_back({vid, dim, std::move(phi)});
      data.latent.push_back({vid, dim, q});
      for (std::size_t r = 0; r < config.n_raters; ++r) {
        const double raw =
            std::clamp(q + config.rater_noise_sigma * rng.normal(), lo, hi);
        data.annotations.push_back(
            {vid, dim, "rater_" + std::to_string(r), snap(raw, grid), {}});
      }
    }
  }
  return data;
}

}  // namespace aso
