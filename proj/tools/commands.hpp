#pragma once

// Subcommand drivers for the `aso` command-line tool.
//
// Exit status: 0 success, 1 warnings only (an undefined metric, or a failed
// oracle check for `verify`), 2 errors.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aso/annotations.hpp"
#include "aso/aso_core.hpp"
#include "aso/config.hpp"
#include "aso/dataset.hpp"
#include "aso/error.hpp"
#include "aso/io.hpp"
#include "aso/metrics.hpp"
#include "aso/oracle.hpp"
#include "aso/synth.hpp"
#include "aso/trainer.hpp"

namespace aso::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitWarning = 1;
inline constexpr int kExitError = 2;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

struct Context {
  RunConfig config;
  fs::path out;
  std::ostream& out_stream;

  // Flag value, else configured path, else <out>/<fallback>.
  fs::path input(const std::string& flag, const std::string& configured,
                 const char* fallback) const {
    if (!flag.empty()) return flag;
    if (!configured.empty()) return configured;
    return out / fallback;
  }
};

inline void echo_config(const Context& ctx, const std::string& command) {
  io::write_atomic(ctx.out / ("config." + command + ".json"),
                   to_json(ctx.config).dump(2) + "\n");
}

inline int cmd_gen_synth(const Context& ctx) {
  const auto data = generate(ctx.config.synth, ctx.config.grid);
  io::write_jsonl<FeatureRow>(ctx.out / "features.jsonl", data.features);
  io::write_jsonl<AnnotationRecord>(ctx.out / "annotations.jsonl",
                                    data.annotations);
  io::write_jsonl<ScoreRow>(ctx.out / "latent.jsonl", data.latent);
  echo_config(ctx, "gen-synth");
  ctx.out_stream << "items: " << ctx.config.synth.n_items
                 << "  dimensions: " << ctx.config.synth.n_dims
                 << "  feature rows: " << data.features.size()
                 << "  annotation records: " << data.annotations.size() << "\n";
  return kExitOk;
}

inline int cmd_aggregate(const Context& ctx, const std::string& annotations) {
  const auto records = io::read_annotations(
      ctx.input(annotations, ctx.config.paths.annotations, "annotations.jsonl"));
  const auto labels = aggregate(records, ctx.config.grid, ctx.config.aggregate);
  std::vector<ScoreRow> exported;
  std::map<std::string, std::size_t> filtered;
  for (const auto& l : labels) {
    if (l.filtered) {
      ++filtered[l.filter_reason];
    } else {
      exported.push_back({l.video_id, l.dimension, l.mos_snapped});
    }
  }
  io::write_jsonl<AggregatedLabel>(ctx.out / "labels.jsonl", labels);
  io::write_jsonl<ScoreRow>(ctx.out / "ground_truth.jsonl", exported);
  echo_config(ctx, "aggregate");
  ctx.out_stream << "records: " << records.size() << "  labels: " << labels.size()
                 << "  exported: " << exported.size();
  for (const auto& [reason, n] : filtered) {
    ctx.out_stream << "  " << reason << ": " << n;
  }
  ctx.out_stream << "\n";
  return kExitOk;
}

inline std::string fixed3(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << *v;
  return s.str();
}

inline int cmd_iaa(const Context& ctx, const std::string& annotations) {
  const auto records = io::read_annotations(
      ctx.input(annotations, ctx.config.paths.annotations, "annotations.jsonl"));
  if (records.empty()) throw InputError("iaa: no annotation records");
  const auto rows = agreement_by_dimension(records, ctx.config.iaa.metric,
                                           ctx.config.iaa.relaxed_threshold);
  io::write_atomic(ctx.out / "iaa.csv", io::agreement_csv(rows));
  echo_config(ctx, "iaa");
  bool undefined = false;
  ctx.out_stream << std::left << std::setw(20) << "dimension" << std::setw(10)
                 << "relaxed" << std::setw(10) << "alpha" << std::setw(10)
                 << "units" << "pairs\n";
  for (const auto& r : rows) {
    ctx.out_stream << std::left << std::setw(20) << r.dimension << std::setw(10)
                   << fixed3(r.relaxed_match) << std::setw(10) << fixed3(r.alpha)
                   << std::setw(10) << r.n_units << r.n_pairs << "\n";
    if (!r.relaxed_match || !r.alpha) {
      undefined = true;
      ctx.out_stream << "  warning: " << r.dimension << ": "
                     << r.undefined_reason << "\n";
    }
  }
  return undefined ? kExitWarning : kExitOk;
}

inline std::map<std::pair<std::string, std::string>, const FeatureRow*>
index_features(const std::vector<FeatureRow>& rows) {
  std::map<std::pair<std::string, std::string>, const FeatureRow*> out;
  for (const auto& r : rows) out[{r.dimension, r.video_id}] = &r;
  return out;
}

inline int cmd_teacher(const Context& ctx, const std::string& ground_truth,
                       const std::string& features_path,
                       const std::string& model_path) {
  const auto& cfg = ctx.config;
  const auto targets = io::read_scores(
      ctx.input(ground_truth, cfg.paths.ground_truth, "ground_truth.jsonl"));
  const std::string model_file =
      !model_path.empty() ? model_path : cfg.paths.model;
  std::optional<LinearScorer> model;
  std::vector<FeatureRow> features;
  if (!model_file.empty()) {
    model = io::read_checkpoint(model_file);
    if (!(model->grid == cfg.grid)) {
      throw InputError("teacher: checkpoint grid differs from configured grid");
    }
    features = io::read_features(
        ctx.input(features_path, cfg.paths.features, "features.jsonl"));
  }
  const auto feature_index = index_features(features);

  std::vector<TeacherItem> items;
  std::vector<const ScoreRow*> sources;
  for (const auto& t : targets) {
    ScoreDistribution ref = ScoreDistribution::uniform(cfg.grid);
    if (model) {
      auto it = feature_index.find({t.dimension, t.video_id});
      if (it == feature_index.end()) {
        throw InputError("teacher: no features for video '" + t.video_id +
                         "' dimension '" + t.dimension + "'");
      }
      ref = policy(*model, it->second->features);
    }
    items.push_back({t.dimension + "/" + t.video_id, std::move(ref), t.score});
    sources.push_back(&t);
  }
  const auto teachers = teacher_batch(items, cfg.train.reward, cfg.train.lambda);
  std::vector<io::TeacherRow> rows;
  rows.reserve(teachers.size());
  for (std::size_t i = 0; i < teachers.size(); ++i) {
    const auto p = teachers[i].dist.probs();
    rows.push_back({sources[i]->video_id, sources[i]->dimension,
                    std::vector<double>(p.begin(), p.end()),
                    teachers[i].log_partition});
  }
  io::write_jsonl<io::TeacherRow>(ctx.out / "teachers.jsonl", rows);
  echo_config(ctx, "teacher");
  ctx.out_stream << "teachers: " << rows.size() << "  reference: "
                 << (model ? "checkpoint" : "uniform")
                 << "  lambda: " << cfg.train.lambda << "\n";
  return kExitOk;
}

// Video ids held out from training, chosen by a seeded permutation.
inline std::set<std::string> holdout_videos(const std::vector<FeatureRow>& rows,
                                            double fraction,
                                            std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& r : rows) unique.insert(r.video_id);
  std::vector<std::string> ids(unique.begin(), unique.end());
  Rng rng(seed ^ 0x5eed5eed5eed5eedULL);
  rng.shuffle(ids);
  const auto n = static_cast<std::size_t>(fraction * static_cast<double>(ids.size()));
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline int cmd_train(const Context& ctx, const std::string& features_path,
                     const std::string& ground_truth,
                     const std::string& only_dimension) {
  const auto& cfg = ctx.config;
  const auto features = io::read_features(
      ctx.input(features_path, cfg.paths.features, "features.jsonl"));
  const auto targets = io::read_scores(
      ctx.input(ground_truth, cfg.paths.ground_truth, "ground_truth.jsonl"));
  const auto by_dim = join_examples(features, targets);
  if (by_dim.empty()) throw InputError("train: no feature rows match a target");
  const auto held = holdout_videos(features, cfg.holdout_fraction, cfg.train.seed);

  std::optional<LinearScorer> init;
  if (!cfg.init_model.empty()) init = io::read_checkpoint(cfg.init_model);

  const std::string method(to_string(cfg.train.method));
  std::vector<ScoreRow> predictions;
  std::size_t trained = 0;
  for (const auto& [dim, examples] : by_dim) {
    if (!only_dimension.empty() && dim != only_dimension) continue;
    std::vector<Example> train_set, eval_set;
    for (const auto& ex : examples) {
      (held.count(ex.video_id) ? eval_set : train_set).push_back(ex);
    }
    if (train_set.empty()) {
      throw InputError("train: dimension '" + dim + "' has no training items");
    }
    if (eval_set.empty()) eval_set = train_set;
    auto result = train(train_set, cfg.train, init, cfg.grid);
    io::write_checkpoint(ctx.out / ("model_" + method + "_" + dim + ".json"),
                         result.model);
    io::write_atomic(ctx.out / ("history_" + method + "_" + dim + ".csv"),
                     io::history_csv(result.history));
    for (const auto& ex : eval_set) {
      predictions.push_back(
          {ex.video_id, dim, predict(result.model, ex.features, cfg.predict_mode)});
    }
    ++trained;
    const auto& last = result.history;
    ctx.out_stream << dim << ": method " << method << "  train " << train_set.size()
                   << "  eval " << eval_set.size();
    if (!last.empty()) {
      ctx.out_stream << "  final loss " << last.back().loss << "  mean kl "
                     << last.back().mean_kl;
    }
    ctx.out_stream << "\n";
  }
  if (trained == 0) {
    throw InputError("train: dimension '" + only_dimension + "' not found");
  }
  io::write_jsonl<ScoreRow>(ctx.out / ("predictions_" + method + ".jsonl"),
                            predictions);
  echo_config(ctx, "train");
  return kExitOk;
}

inline int cmd_eval(const Context& ctx, const std::string& predictions_path,
                    const std::string& ground_truth) {
  const auto& cfg = ctx.config;
  const auto preds = io::read_scores(
      ctx.input(predictions_path, cfg.paths.predictions, "predictions.jsonl"));
  const auto gts = io::read_scores(
      ctx.input(ground_truth, cfg.paths.ground_truth, "ground_truth.jsonl"));
  std::map<std::pair<std::string, std::string>, double> gt_index;
  for (const auto& g : gts) gt_index[{g.dimension, g.video_id}] = g.score;

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (const auto& p : preds) {
    auto it = gt_index.find({p.dimension, p.video_id});
    if (it == gt_index.end()) {
      throw InputError("eval: no ground truth for video '" + p.video_id +
                       "' dimension '" + p.dimension + "'");
    }
    pairs[p.dimension].first.push_back(p.score);
    pairs[p.dimension].second.push_back(it->second);
  }
  if (pairs.empty()) throw InputError("eval: no predictions");

  std::vector<metrics::EvalReport> reports;
  for (const auto& [dim, v] : pairs) {
    reports.push_back(metrics::evaluate(v.first, v.second, dim));
  }
  io::write_atomic(ctx.out / "eval.csv", io::eval_csv(reports));
  io::Json arr = io::Json::array();
  for (const auto& r : reports) arr.push_back(io::to_json(r));
  io::write_atomic(ctx.out / "eval.json", arr.dump(2) + "\n");
  echo_config(ctx, "eval");

  bool undefined = false;
  auto& os = ctx.out_stream;
  os << std::left << std::setw(20) << "dimension" << std::setw(8) << "n"
     << std::setw(8) << "Acc" << std::setw(8) << "SRCC" << std::setw(8) << "PLCC"
     << "MAE\n";
  for (const auto& r : reports) {
    os << std::left << std::setw(20) << r.dimension << std::setw(8) << r.n
       << std::setw(8) << fixed3(r.acc) << std::setw(8) << fixed3(r.srcc.value)
       << std::setw(8) << fixed3(r.plcc.value) << fixed3(r.mae) << "\n";
    if (!r.complete()) undefined = true;
  }
  for (const auto& r : reports) {
    if (!r.srcc.defined()) os << "  warning: " << r.dimension << ": " << r.srcc.reason << "\n";
    if (!r.plcc.defined()) os << "  warning: " << r.dimension << ": " << r.plcc.reason << "\n";
  }
  return undefined ? kExitWarning : kExitOk;
}

inline int cmd_verify(const Context& ctx) {
  const auto& v = ctx.config.verify;
  oracle::VerifyOptions opts;
  opts.reward = ctx.config.train.reward;
  opts.max_iters = v.max_iters;
  opts.tol = v.tol;
  opts.gap_tolerance = v.gap_tolerance;
  opts.kl_tolerance = v.kl_tolerance;
  const auto reports = oracle::verify_closed_form(v.n_instances, ctx.config.grid,
                                                  v.lambdas, v.seed, opts);
  std::string jsonl;
  std::size_t failures = 0;
  double worst_gap = 0.0, worst_kl = 0.0;
  for (const auto& r : reports) {
    jsonl += io::dump_line(io::to_json(r));
    if (!oracle::passes(r, opts)) ++failures;
    worst_gap = std::min(worst_gap, r.gap);
    worst_kl = std::max(worst_kl, r.kl_to_analytic);
  }
  io::write_atomic(ctx.out / "verify.jsonl", jsonl);
  echo_config(ctx, "verify");
  ctx.out_stream << (failures == 0 ? "PASS" : "FAIL") << ": " << reports.size()
                 << " checks, " << failures << " violations, min gap "
                 << worst_gap << ", max KL " << worst_kl << "\n";
  return failures == 0 ? kExitOk : kExitWarning;
}

// Rescales the "score" field of every line; other fields pass through.
inline int cmd_normalize(const Context& ctx, const std::string& input,
                         const std::string& output, double src_min,
                         double src_max) {
  if (input.empty()) throw InputError("normalize: --input is required");
  const std::string file = input;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + file + "'");
  std::string line, result;
  std::size_t lineno = 0, clamped = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    io::Json obj;
    try {
      obj = io::Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(file + ":" + std::to_string(lineno) +
                       ": malformed JSON: " + e.what());
    }
    io::LineContext c(file, lineno, obj);
    auto r = normalize_mos_checked(c.number("score"), src_min, src_max);
    if (r.clamped) ++clamped;
    obj["score"] = r.value;
    result += io::dump_line(obj);
    ++rows;
  }
  const fs::path dest = output.empty() ? ctx.out / "normalized.jsonl" : fs::path(output);
  io::write_atomic(dest, result);
  echo_config(ctx, "normalize");
  ctx.out_stream << "normalized " << rows << " scores from [" << src_min << ", "
                 << src_max << "] to [1, 5]";
  if (clamped) ctx.out_stream << "  warning: " << clamped << " clamped";
  ctx.out_stream << "\n";
  return kExitOk;
}

// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Analytic score optimization toolkit", "aso"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--set", g.overrides, "Override a config key: section.key=value")
      ->allow_extra_args(false);
  app.add_option("--out", g.out_dir, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed for every seeded stage");

  std::string annotations, features, ground_truth, predictions, model, dimension,
      input, output;
  double src_min = 0.0, src_max = 0.0;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic corpus");
  auto* agg = app.add_subcommand("aggregate", "Aggregate ratings into labels");
  agg->add_option("--annotations", annotations);
  auto* iaa = app.add_subcommand("iaa", "Inter-annotator agreement per dimension");
  iaa->add_option("--annotations", annotations);
  auto* teach = app.add_subcommand("teacher", "Export closed-form teacher policies");
  teach->add_option("--ground-truth", ground_truth);
  teach->add_option("--features", features);
  teach->add_option("--model", model, "Reference checkpoint (uniform if omitted)");
  auto* tr = app.add_subcommand("train", "Train one scorer per dimension");
  tr->add_option("--features", features);
  tr->add_option("--ground-truth", ground_truth);
  tr->add_option("--dimension", dimension, "Train only this dimension");
  auto* ev = app.add_subcommand("eval", "Acc@0.5 / SRCC / PLCC / MAE per dimension");
  ev->add_option("--predictions", predictions);
  ev->add_option("--ground-truth", ground_truth);
  auto* ver = app.add_subcommand("verify", "Check the closed form against a numeric maximizer");
  auto* norm = app.add_subcommand("normalize", "Map a score column onto 1-5");
  norm->add_option("--input", input)->required();
  norm->add_option("--output", output);
  norm->add_option("--src-min", src_min)->required();
  norm->add_option("--src-max", src_max)->required();

  // CLI11 expects argv order with the program name first, reversed.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    Context ctx{resolve_config(g.config_path, g.overrides, g.seed), g.out_dir, out};
    if (*gen) return cmd_gen_synth(ctx);
    if (*agg) return cmd_aggregate(ctx, annotations);
    if (*iaa) return cmd_iaa(ctx, annotations);
    if (*teach) return cmd_teacher(ctx, ground_truth, features, model);
    if (*tr) return cmd_train(ctx, features, ground_truth, dimension);
    if (*ev) return cmd_eval(ctx, predictions, ground_truth);
    if (*ver) return cmd_verify(ctx);
    if (*norm) return cmd_normalize(ctx, input, output, src_min, src_max);
  } catch (const UndefinedMetricError& e) {
    err << "warning: " << e.what() << "\n";
    return kExitWarning;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace aso::cli
