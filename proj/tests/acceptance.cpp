// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Run without arguments for the full suite, or pass
// criterion numbers (e.g. `aso_acceptance 1 6`) to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aso/annotations.hpp"
#include "aso/aso_core.hpp"
#include "aso/config.hpp"
#include "aso/metrics.hpp"
#include "aso/oracle.hpp"
#include "aso/synth.hpp"
#include "aso/trainer.hpp"
#include "commands.hpp"
#include "reference.hpp"

namespace {

using namespace aso;
namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Outcome closed_form_optimality() {
  const VerifyConfig v;
  oracle::VerifyOptions opts;
  opts.max_iters = v.max_iters;
  opts.tol = v.tol;
  const auto reports =
      oracle::verify_closed_form(v.n_instances, ScoreGrid{}, v.lambdas, v.seed, opts);
  double worst_gap = 0.0, worst_kl = 0.0;
  std::size_t failures = 0;
  for (const auto& r : reports) {
    worst_gap = std::min(worst_gap, r.gap);
    worst_kl = std::max(worst_kl, r.kl_to_analytic);
    if (!oracle::passes(r, opts)) ++failures;
  }
  return {failures == 0 && reports.size() == v.n_instances * v.lambdas.size(),
          std::to_string(reports.size()) + " checks, min gap " + fmt(worst_gap) +
              ", max KL " + fmt(worst_kl)};
}

Outcome gradient_correctness() {
  ScoreGrid g;
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ScoreDistribution ref(g, rng.dirichlet_flat(g.size()));
    const double lambda = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const auto teacher =
        make_teacher(ref, g.level(rng.uniform_index(g.size())), RewardSpec{}, lambda);
    std::vector<double> z(g.size());
    for (auto& x : z) x = rng.normal(0.0, 2.0);
    const auto analytic = soft_ce_grad(teacher, z);
    const auto numeric = oracle::finite_diff_grad(
        [&](std::span<const double> x) { return soft_ce_loss(teacher, x); }, z, 1e-5);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    worst = std::max(worst, diff / std::max(scale, 1e-300));
  }
  return {worst < 1e-6, "max relative error " + fmt(worst)};
}

double max_abs_diff(const ScoreDistribution& a, const ScoreDistribution& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Outcome analytic_identities() {
  ScoreGrid g;
  Rng rng(3);
  double shift = 0.0, scale = 0.0, constant = 0.0;
  std::size_t kl_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ScoreDistribution ref(g, rng.dirichlet_flat(g.size()));
    const double s_star = g.level(rng.uniform_index(g.size()));
    const double lambda = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    RewardSpec spec;
    spec.beta = rng.uniform(0.5, 2.0);
    const auto r = reward_vector(g, s_star, spec);
    const auto base = optimal_policy(ref, r, lambda);

    const double c = rng.uniform(-10.0, 10.0);
    auto shifted = r;
    for (auto& x : shifted) x += c;
    shift = std::max(shift, max_abs_diff(base.dist, optimal_policy(ref, shifted, lambda).dist));

    const double k = rng.uniform(0.2, 5.0);
    RewardSpec scaled = spec;
    scaled.beta *= k;
    scale = std::max(scale, max_abs_diff(base.dist, make_teacher(ref, s_star, scaled,
                                                                 lambda * k).dist));

    const auto flat = optimal_policy(ref, std::vector<double>(g.size(), c), lambda);
    constant = std::max(constant, max_abs_diff(flat.dist, ref));

    double prev = std::numeric_limits<double>::infinity();
    for (double l : {0.1, 0.3, 1.0, 3.0, 10.0}) {
      const double kl = kl_divergence(optimal_policy(ref, r, l).dist, ref);
      if (kl > prev + 1e-12) ++kl_violations;
      prev = kl;
    }
  }
  const bool ok = shift <= 1e-12 && scale <= 1e-12 && constant <= 1e-12 && kl_violations == 0;
  return {ok, "shift " + fmt(shift) + ", scale " + fmt(scale) + ", constant " +
                  fmt(constant) + ", KL order violations " +
                  std::to_string(kl_violations)};
}

Outcome limit_behavior() {
  ScoreGrid g;
  Rng rng(4);
  double warm = 0.0, cold = 1.0, cold_grad = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ScoreDistribution ref(g, rng.dirichlet_flat(g.size()));
    const double s_star = g.level(rng.uniform_index(g.size()));
    warm = std::max(warm, max_abs_diff(make_teacher(ref, s_star, RewardSpec{}, 1e6).dist, ref));
    const auto t = make_teacher(ref, s_star, RewardSpec{}, 1e-3);
    cold = std::min(cold, t.dist[*g.index_of(s_star)]);

    std::vector<double> z(g.size());
    for (auto& x : z) x = rng.normal(0.0, 2.0);
    const auto aso_g = soft_ce_grad(make_teacher(ref, s_star, RewardSpec{}, 1e-6), z);
    const auto sft_g = sft_grad(s_star, z, g);
    for (std::size_t i = 0; i < z.size(); ++i) {
      cold_grad = std::max(cold_grad, std::abs(aso_g[i] - sft_g[i]));
    }
  }
  const bool ok = warm <= 1e-5 && cold >= 1.0 - 1e-6 && cold_grad <= 1e-9;
  return {ok, "lambda=1e6 max dev " + fmt(warm) + ", lambda=1e-3 min mass " + fmt(cold) +
                  ", lambda=1e-6 grad diff " + fmt(cold_grad)};
}

Outcome metric_oracles() {
  Rng rng(5);
  double worst = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.uniform_index(90);
    std::vector<double> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::round(rng.uniform(1, 5) * 4) / 4;
      y[i] = std::round(rng.uniform(1, 5) * 2) / 2;
    }
    const auto check = [&](double a, double b) {
      worst = std::max(worst, std::abs(a - b));
      ++compared;
    };
    check(metrics::srcc(p, y), reference::spearman(p, y));
    check(metrics::plcc(p, y), reference::pearson(p, y));
    check(metrics::mae(p, y), reference::mae(p, y));
    check(metrics::acc_at(p, y, 0.5), reference::acc(p, y, 0.5));

    std::vector<std::vector<double>> units(5 + rng.uniform_index(40));
    for (auto& u : units) {
      u.resize(2 + rng.uniform_index(4));
      const double q = rng.uniform(1, 5);
      for (auto& x : u) x = snap(std::clamp(q + rng.normal(0, 0.8), 1.0, 5.0), ScoreGrid{});
    }
    check(relaxed_match_units(units).value, reference::relaxed_match(units, 1.0));
    check(krippendorff_alpha_units(units).alpha, reference::interval_alpha(units));
  }
  using Units = std::vector<std::vector<double>>;
  const double neg = krippendorff_alpha_units(Units{{1, 2}, {2, 1}}).alpha;
  const double one = krippendorff_alpha_units(Units{{1, 1}, {2, 2}, {3, 3}}).alpha;
  const bool ok = worst <= 1e-10 && neg == -0.5 && one == 1.0;
  return {ok, std::to_string(compared) + " comparisons, max diff " + fmt(worst) +
                  ", alpha hand cases " + fmt(neg) + " / " + fmt(one)};
}

// Held-out SRCC and MAE averaged over dimensions, per method, for one seed.
// SFT trains from zero; ASO and GRPO start from the SFT checkpoint and keep
// it frozen as their reference policy.
struct SuiteScore {
  double srcc = 0.0;
  double mae = 0.0;
};

std::map<Method, SuiteScore> run_suite(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_items = 2000;
  sc.n_dims = 5;
  sc.feature_dim = 8;
  sc.rater_noise_sigma = 0.4;
  sc.seed = seed;
  const ScoreGrid grid;
  const auto data = generate(sc, grid);
  std::vector<ScoreRow> gt;
  for (const auto& l : aggregate(data.annotations, grid)) {
    if (!l.filtered) gt.push_back({l.video_id, l.dimension, l.mos_snapped});
  }
  const RunConfig defaults;
  const auto held = cli::holdout_videos(data.features, defaults.holdout_fraction, seed);
  const auto by_dim = join_examples(data.features, gt);
  std::map<Method, SuiteScore> scores;
  for (const auto& [dim, examples] : by_dim) {
    std::vector<Example> train_set, eval_set;
    for (const auto& ex : examples) {
      (held.count(ex.video_id) ? eval_set : train_set).push_back(ex);
    }
    TrainConfig tc = defaults.train;
    tc.epochs = 50;
    tc.seed = seed;
    tc.method = Method::Sft;
    const auto sft = train(train_set, tc, std::nullopt, grid).model;
    for (Method m : {Method::Sft, Method::Aso, Method::Grpo}) {
      LinearScorer model = sft;
      if (m != Method::Sft) {
        tc.method = m;
        model = train(train_set, tc, sft, grid).model;
      }
      std::vector<double> preds, gts;
      for (const auto& ex : eval_set) {
        preds.push_back(predict(model, ex.features, defaults.predict_mode));
        gts.push_back(ex.target);
      }
      scores[m].srcc += metrics::srcc(preds, gts) / static_cast<double>(by_dim.size());
      scores[m].mae += metrics::mae(preds, gts) / static_cast<double>(by_dim.size());
    }
  }
  return scores;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Outcome ablation_direction() {
  std::vector<double> aso_srcc, aso_mae, sft_srcc, sft_mae, grpo_srcc;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto scores = run_suite(seed);
    const auto& a = scores[Method::Aso];
    const auto& s = scores[Method::Sft];
    const auto& g = scores[Method::Grpo];
    aso_srcc.push_back(a.srcc);
    aso_mae.push_back(a.mae);
    sft_srcc.push_back(s.srcc);
    sft_mae.push_back(s.mae);
    grpo_srcc.push_back(g.srcc);
  }
  const bool srcc_ok = mean(aso_srcc) >= mean(sft_srcc) - 0.01;
  const bool mae_ok = mean(aso_mae) <= mean(sft_mae) + 0.01;
  const bool std_ok = stddev(aso_srcc) <= stddev(grpo_srcc);
  return {srcc_ok && mae_ok && std_ok,
          "SRCC aso " + fmt(mean(aso_srcc)) + " sft " + fmt(mean(sft_srcc)) + " grpo " +
              fmt(mean(grpo_srcc)) + "; MAE aso " + fmt(mean(aso_mae)) + " sft " +
              fmt(mean(sft_mae)) + "; SRCC std aso " + fmt(stddev(aso_srcc)) + " grpo " +
              fmt(stddev(grpo_srcc))};
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "aso_acceptance_repro";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> steps{
      {"gen-synth"},
      {"aggregate"},
      {"--set", "train.method=aso", "train"},
      {"--set", "train.method=sft", "train"},
      {"--set", "train.method=grpo", "train"},
      {"--set", "verify.n_instances=20", "verify"}};
  std::ostringstream sink;
  for (const char* run_name : {"a", "b"}) {
    for (const auto& step : steps) {
      std::vector<std::string> args{"--out", (root / run_name).string(), "--seed", "7",
                                    "--set", "synth.n_items=200", "--set",
                                    "train.epochs=5"};
      args.insert(args.end(), step.begin(), step.end());
      if (cli::run(args, sink, sink) != cli::kExitOk) {
        return {false, "step '" + step.back() + "' failed: " + sink.str()};
      }
    }
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const auto other = root / "b" / entry.path().filename();
    if (!fs::exists(other) || io::read_file(entry.path()) != io::read_file(other)) {
      ++differing;
    }
  }
  fs::remove_all(root);
  return {files > 0 && differing == 0,
          std::to_string(files) + " files compared, " + std::to_string(differing) +
              " differ"};
}

Outcome defaults_audit() {
  const auto j = to_json(resolve_config({}, {}));
  const bool ok = j["aso"]["lambda"] == 1.0 && j["reward"]["beta"] == 1.0 &&
                  j["grpo"]["group_size"] == 8 && j["grpo"]["kl_coeff"] == 0.1;
  return {ok, "aso.lambda " + j["aso"]["lambda"].dump() + ", reward.beta " +
                  j["reward"]["beta"].dump() + ", grpo.group_size " +
                  j["grpo"]["group_size"].dump() + ", grpo.kl_coeff " +
                  j["grpo"]["kl_coeff"].dump()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "closed-form optimality", closed_form_optimality},
      {2, "gradient correctness", gradient_correctness},
      {3, "analytic identities", analytic_identities},
      {4, "limit behavior", limit_behavior},
      {5, "metric oracles", metric_oracles},
      {6, "ablation direction", ablation_direction},
      {7, "reproducibility", reproducibility},
      {8, "defaults audit", defaults_audit},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
