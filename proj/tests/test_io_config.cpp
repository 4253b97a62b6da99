#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aso/config.hpp"
#include "aso/io.hpp"
#include "aso/synth.hpp"
#include "aso/trainer.hpp"

namespace aso {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("aso_io_" + std::string(::testing::UnitTest::GetInstance()
                                        ->current_test_info()
                                        ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    return dir_ / name;
  }

  fs::path dir_;
};

using IoRoundTrip = TempDir;
using ConfigFile = TempDir;

TEST_F(IoRoundTrip, SyntheticTablesSurviveWriteAndRead) {
  SynthConfig c;
  c.n_items = 20;
  const auto d = generate(c);
  io::write_jsonl<FeatureRow>(dir_ / "f.jsonl", d.features);
  io::write_jsonl<AnnotationRecord>(dir_ / "a.jsonl", d.annotations);
  io::write_jsonl<ScoreRow>(dir_ / "s.jsonl", d.latent);
  const auto f = io::read_features(dir_ / "f.jsonl");
  const auto a = io::read_annotations(dir_ / "a.jsonl");
  const auto s = io::read_scores(dir_ / "s.jsonl");
  ASSERT_EQ(f.size(), d.features.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f[i].video_id, d.features[i].video_id);
    EXPECT_EQ(f[i].features, d.features[i].features);  // exact doubles
  }
  ASSERT_EQ(a.size(), d.annotations.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rater_id, d.annotations[i].rater_id);
    EXPECT_EQ(a[i].score, d.annotations[i].score);
  }
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].score, d.latent[i].score);
  EXPECT_EQ(io::to_jsonl<ScoreRow>(s), io::read_file(dir_ / "s.jsonl"));
}

TEST_F(IoRoundTrip, AnnotationLayoutIsExact) {
  const std::vector<AnnotationRecord> r{{"v1", "clarity_quality", "r0", 3.5, {"blur"}}};
  EXPECT_EQ(io::to_jsonl<AnnotationRecord>(r),
            "{\"video_id\":\"v1\",\"dimension\":\"clarity_quality\",\"rater_id\":"
            "\"r0\",\"score\":3.5,\"tags\":[\"blur\"]}\n");
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(io::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST_F(IoRoundTrip, TeachersLabelsCheckpointsHistory) {
  const std::vector<io::TeacherRow> t{{"v", "d", {0.25, 0.5, 0.25}, -0.5471675747360587}};
  io::write_jsonl<io::TeacherRow>(dir_ / "t.jsonl", t);
  const auto t2 = io::read_teachers(dir_ / "t.jsonl");
  EXPECT_EQ(t2[0].probs, t[0].probs);
  EXPECT_EQ(t2[0].log_partition, t[0].log_partition);

  const std::vector<AggregatedLabel> l{{"v", "d", 3.25, 3.0, 4, 0.1875, false, ""},
                                       {"w", "d", 3.0, 3.0, 2, 0.0, true,
                                        std::string(kInsufficientRaters)}};
  io::write_jsonl<AggregatedLabel>(dir_ / "l.jsonl", l);
  const auto l2 = io::read_labels(dir_ / "l.jsonl");
  EXPECT_EQ(l2[0].mos_raw, 3.25);
  EXPECT_EQ(l2[0].n_raters, 4u);
  EXPECT_TRUE(l2[1].filtered);
  EXPECT_EQ(l2[1].filter_reason, kInsufficientRaters);

  auto m = LinearScorer::zeros(ScoreGrid{}, 3);
  Rng rng(1);
  for (auto& w : m.weights) w = rng.normal();
  for (auto& b : m.bias) b = rng.normal();
  io::write_checkpoint(dir_ / "m.json", m);
  EXPECT_EQ(io::read_checkpoint(dir_ / "m.json"), m);

  const TrainHistory h{{1, 2.1972245773362196, -1.25, 0.0}, {2, 1.5, -0.75, 0.125}};
  const auto h2 = io::parse_history_csv(io::history_csv(h));
  ASSERT_EQ(h2.size(), 2u);
  EXPECT_EQ(h2[0].loss, h[0].loss);
  EXPECT_EQ(h2[1].mean_kl, h[1].mean_kl);
}

TEST_F(IoRoundTrip, MalformedLinesNameFileLineAndField) {
  const auto path = write("bad.jsonl",
                          "{\"video_id\":\"v\",\"dimension\":\"d\",\"score\":1}\n"
                          "{\"video_id\":\"v\",\"dimension\":\"d\",\"score\":\"x\"}\n");
  try {
    io::read_scores(path);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.jsonl:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'score'"), std::string::npos) << msg;
  }
  const auto broken = write("broken.jsonl", "\n{not json\n");
  try {
    io::read_scores(broken);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.jsonl:2"), std::string::npos);
  }
  const auto missing = write("missing.jsonl", "{\"video_id\":\"v\",\"dimension\":\"d\"}\n");
  EXPECT_THROW(io::read_scores(missing), InputError);
  EXPECT_THROW(io::read_scores(dir_ / "absent.jsonl"), IoError);
}

TEST(ConfigDefaults, AuditedValues) {
  const auto c = resolve_config({}, {});
  EXPECT_EQ(c.train.lambda, 1.0);
  EXPECT_EQ(c.train.reward.beta, 1.0);
  EXPECT_EQ(c.train.grpo.group_size, 8u);
  EXPECT_EQ(c.train.grpo.kl_coeff, 0.1);
  EXPECT_EQ(c.train.grpo.clip_epsilon, 0.2);
  EXPECT_EQ(c.train.grpo.std_floor, 1e-6);
  EXPECT_EQ(c.grid, ScoreGrid(1.0, 5.0, 0.5));
  EXPECT_EQ(c.synth.n_raters, 3u);
  EXPECT_EQ(c.synth.feature_dim, 8u);
  EXPECT_EQ(c.synth.rater_noise_sigma, 0.4);
  const auto j = to_json(c);
  EXPECT_EQ(j["aso"]["lambda"], 1.0);
  EXPECT_EQ(j["reward"]["kind"], "abs");
}

TEST_F(ConfigFile, FileThenOverridesThenSeed) {
  const auto path = write("c.json", R"({"aso": {"lambda": 0.5}, "train": {"epochs": 7}})");
  auto c = resolve_config(path, {"train.method=aso", "grpo.group_size=4"});
  EXPECT_EQ(c.train.lambda, 0.5);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.train.method, Method::Aso);
  EXPECT_EQ(c.train.grpo.group_size, 4u);
  c = resolve_config(path, {"aso.lambda=2"}, 99);
  EXPECT_EQ(c.train.lambda, 2.0);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.synth.seed, 99u);
  EXPECT_EQ(c.verify.seed, 99u);
}

TEST_F(ConfigFile, RoundTripsThroughJson) {
  auto c = resolve_config({}, {"reward.kind=composite", "train.optimizer=sgd",
                               "verify.lambdas=[0.5,2]", "iaa.metric=ordinal"});
  const auto path = write("echo.json", to_json(c).dump(2));
  const auto back = resolve_config(path, {});
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST_F(ConfigFile, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(resolve_config(write("a.json", R"({"aso": {"lamda": 1}})"), {}), InputError);
  EXPECT_THROW(resolve_config(write("b.json", R"({"extra": {}})"), {}), InputError);
  EXPECT_THROW(resolve_config(write("c.json", "{oops"), {}), InputError);
  EXPECT_THROW(resolve_config({}, {"aso.lambda"}), InputError);
  EXPECT_THROW(resolve_config({}, {"nope.x=1"}), InputError);
  EXPECT_THROW(resolve_config({}, {"aso=1"}), InputError);
  EXPECT_THROW(resolve_config({}, {"aso.lambda=\"big\""}), InputError);
  EXPECT_THROW(resolve_config({}, {"train.epochs=-1"}), InputError);
  EXPECT_THROW(resolve_config({}, {"train.method=dpo"}), InputError);
  EXPECT_THROW(resolve_config({}, {"synth.n_items=0"}), InputError);
  EXPECT_THROW(resolve_config({}, {"grpo.group_size=1"}), InputError);
  EXPECT_THROW(resolve_config({}, {"train.learning_rate=0"}), InputError);
  EXPECT_THROW(resolve_config({}, {"grid.step=0.3"}), InputError);
}

}  // namespace
}  // namespace aso
