#pragma once

// On-disk formats: JSONL datasets, JSON checkpoints, CSV tables.
// Every JSONL line is one object with keys in the documented order; doubles
// are written with shortest round-trip precision. Files are written to a
// temporary sibling and renamed into place.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aso/annotations.hpp"
#include "aso/aso_core.hpp"
#include "aso/dataset.hpp"
#include "aso/error.hpp"
#include "aso/metrics.hpp"
#include "aso/oracle.hpp"
#include "aso/score_space.hpp"
#include "aso/trainer.hpp"
#include "json.hpp"

namespace aso::io {

using Json = nlohmann::ordered_json;

// Writes `content` to `path` via a temp file and rename.
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory '" +
                    path.parent_path().string() + "': " + ec.message());
    }
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot rename '" + tmp.string() + "' to '" +
                  path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string dump_line(const Json& j) { return j.dump() + "\n"; }

// Shortest decimal that round-trips, as used in JSON output.
inline std::string format_double(double v) { return Json(v).dump(); }

// Field accessors used while parsing a JSONL object. Errors name the file,
// the 1-based line number and the field.
class LineContext {
 public:
  LineContext(const std::string& file, std::size_t line, const Json& obj)
      : file_(file), line_(line), obj_(obj) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw InputError(file_ + ":" + std::to_string(line_) + ": field '" + field +
                     "': " + what);
  }

  const Json& field(const std::string& name) const {
    auto it = obj_.find(name);
    if (it == obj_.end()) fail(name, "missing");
    return *it;
  }

  std::string str(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_string()) fail(name, "expected a string");
    return v.get<std::string>();
  }

  double number(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_number()) fail(name, "expected a number");
    return v.get<double>();
  }

  std::vector<double> numbers(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_array()) fail(name, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) fail(name, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_array()) fail(name, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(name, "expected an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

 private:
  const std::string& file_;
  std::size_t line_;
  const Json& obj_;
};

// Parses every non-empty line of a JSONL file with `parse_row`.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path,
                          const std::function<T(const LineContext&)>& parse_row) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + file + "'");
  std::vector<T> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(file + ":" + std::to_string(lineno) +
                       ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw InputError(file + ":" + std::to_string(lineno) +
                       ": expected a JSON object");
    }
    rows.push_back(parse_row(LineContext(file, lineno, obj)));
  }
  return rows;
}

// --- annotations.jsonl -----------------------------------------------------

inline Json to_json(const AnnotationRecord& r) {
  Json j;
  j["video_id"] = r.video_id;
  j["dimension"] = r.dimension;
  j["rater_id"] = r.rater_id;
  j["score"] = r.score;
  j["tags"] = r.tags;
  return j;
}

inline std::vector<AnnotationRecord> read_annotations(
    const std::filesystem::path& path) {
  return read_jsonl<AnnotationRecord>(path, [](const LineContext& c) {
    AnnotationRecord r{c.str("video_id"), c.str("dimension"), c.str("rater_id"),
                       c.number("score"), c.strings("tags")};
    if (r.video_id.empty()) c.fail("video_id", "must be non-empty");
    if (r.dimension.empty()) c.fail("dimension", "must be non-empty");
    if (r.rater_id.empty()) c.fail("rater_id", "must be non-empty");
    return r;
  });
}

// --- features.jsonl --------------------------------------------------------

inline Json to_json(const FeatureRow& r) {
  Json j;
  j["video_id"] = r.video_id;
  j["dimension"] = r.dimension;
  j["features"] = r.features;
  return j;
}

inline std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  return read_jsonl<FeatureRow>(path, [](const LineContext& c) {
    return FeatureRow{c.str("video_id"), c.str("dimension"),
                      c.numbers("features")};
  });
}

// --- predictions.jsonl (also latent / ground-truth exports) ---------------

inline Json to_json(const ScoreRow& r) {
  Json j;
  j["video_id"] = r.video_id;
  j["dimension"] = r.dimension;
  j["score"] = r.score;
  return j;
}

inline std::vector<ScoreRow> read_scores(const std::filesystem::path& path) {
  return read_jsonl<ScoreRow>(path, [](const LineContext& c) {
    return ScoreRow{c.str("video_id"), c.str("dimension"), c.number("score")};
  });
}

// --- teachers.jsonl ----------------------------------------------------------

struct TeacherRow {
  std::string video_id;
  std::string dimension;
  std::vector<double> probs;
  double log_partition = 0.0;
};

inline Json to_json(const TeacherRow& r) {
  Json j;
  j["video_id"] = r.video_id;
  j["dimension"] = r.dimension;
  j["probs"] = r.probs;
  j["log_partition"] = r.log_partition;
  return j;
}

inline std::vector<TeacherRow> read_teachers(const std::filesystem::path& path) {
  return read_jsonl<TeacherRow>(path, [](const LineContext& c) {
    return TeacherRow{c.str("video_id"), c.str("dimension"), c.numbers("probs"),
                      c.number("log_partition")};
  });
}

// --- labels.jsonl (aggregation output) -------------------------------------

inline Json to_json(const AggregatedLabel& l) {
  Json j;
  j["video_id"] = l.video_id;
  j["dimension"] = l.dimension;
  j["mos_raw"] = l.mos_raw;
  j["mos_snapped"] = l.mos_snapped;
  j["n_raters"] = l.n_raters;
  j["variance"] = l.variance;
  j["filtered"] = l.filtered;
  j["filter_reason"] = l.filter_reason;
  return j;
}

inline std::vector<AggregatedLabel> read_labels(const std::filesystem::path& path) {
  return read_jsonl<AggregatedLabel>(path, [](const LineContext& c) {
    AggregatedLabel l;
    l.video_id = c.str("video_id");
    l.dimension = c.str("dimension");
    l.mos_raw = c.number("mos_raw");
    l.mos_snapped = c.number("mos_snapped");
    const auto& n = c.field("n_raters");
    if (!n.is_number_unsigned()) c.fail("n_raters", "expected a count");
    l.n_raters = n.get<std::size_t>();
    l.variance = c.number("variance");
    const auto& f = c.field("filtered");
    if (!f.is_boolean()) c.fail("filtered", "expected a boolean");
    l.filtered = f.get<bool>();
    l.filter_reason = c.str("filter_reason");
    return l;
  });
}

template <typename Row>
std::string to_jsonl(std::span<const Row> rows) {
  std::string out;
  for (const auto& r : rows) out += dump_line(to_json(r));
  return out;
}

template <typename Row>
void write_jsonl(const std::filesystem::path& path, std::span<const Row> rows) {
  write_atomic(path, to_jsonl(rows));
}

// --- checkpoints -------------------------------------------------------------

inline Json grid_to_json(const ScoreGrid& g) {
  Json j;
  j["min"] = g.min_score();
  j["max"] = g.max_score();
  j["step"] = g.step();
  return j;
}

inline ScoreGrid grid_from_json(const Json& j) {
  try {
    return ScoreGrid(j.at("min").get<double>(), j.at("max").get<double>(),
                     j.at("step").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid: ") + e.what());
  }
}

inline Json to_json(const LinearScorer& m) {
  Json j;
  j["grid"] = grid_to_json(m.grid);
  j["feature_dim"] = m.feature_dim;
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  return j;
}

inline LinearScorer scorer_from_json(const Json& j) {
  LinearScorer m;
  try {
    m.grid = grid_from_json(j.at("grid"));
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

inline void write_checkpoint(const std::filesystem::path& path,
                             const LinearScorer& m) {
  write_atomic(path, to_json(m).dump(2) + "\n");
}

inline LinearScorer read_checkpoint(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": malformed checkpoint: " + e.what());
  }
  try {
    return scorer_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// --- CSV tables --------------------------------------------------------------

inline std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,loss,mean_reward,mean_kl\n";
  for (const auto& r : h) {
    out += std::to_string(r.epoch) + "," + format_double(r.loss) + "," +
           format_double(r.mean_reward) + "," + format_double(r.mean_kl) + "\n";
  }
  return out;
}

inline TrainHistory parse_history_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "epoch,loss,mean_reward,mean_kl") {
    throw InputError("history csv: unexpected header '" + line + "'");
  }
  TrainHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw InputError("history csv: expected 4 columns");
    h.push_back({std::stoul(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                 std::stod(cells[3])});
  }
  return h;
}

inline std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline std::string agreement_csv(std::span<const AgreementRow> rows) {
  std::string out = "dimension,relaxed_match,alpha,n_units,n_pairs\n";
  for (const auto& r : rows) {
    out += r.dimension + "," + optional_cell(r.relaxed_match) + "," +
           optional_cell(r.alpha) + "," + std::to_string(r.n_units) + "," +
           std::to_string(r.n_pairs) + "\n";
  }
  return out;
}

inline std::string eval_csv(std::span<const metrics::EvalReport> rows) {
  std::string out = "dimension,n,acc,srcc,plcc,mae\n";
  for (const auto& r : rows) {
    out += r.dimension + "," + std::to_string(r.n) + "," +
           format_double(r.acc) + "," + optional_cell(r.srcc.value) + "," +
           optional_cell(r.plcc.value) + "," + format_double(r.mae) + "\n";
  }
  return out;
}

inline Json to_json(const metrics::EvalReport& r) {
  Json j;
  j["dimension"] = r.dimension;
  j["n"] = r.n;
  j["acc"] = r.acc;
  auto put = [&](const char* key, const metrics::MaybeMetric& m) {
    if (m.value) {
      j[key] = *m.value;
    } else {
      j[key] = nullptr;
      j[std::string(key) + "_undefined"] = m.reason;
    }
  };
  put("srcc", r.srcc);
  put("plcc", r.plcc);
  j["mae"] = r.mae;
  return j;
}

inline Json to_json(const oracle::OracleReport& r) {
  Json j;
  j["instance"] = r.instance;
  j["lambda"] = r.lambda;
  j["analytic_objective"] = r.analytic_objective;
  j["numeric_objective"] = r.numeric_objective;
  j["gap"] = r.gap;
  j["kl_to_analytic"] = r.kl_to_analytic;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

}  // namespace aso::io
