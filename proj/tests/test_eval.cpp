#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "cmot/eval/report.hpp"
#include "support/eval_fixtures.hpp"

using namespace cmot;
using namespace cmot::eval;

using namespace support;

TEST(Iou, BasicCases) {
  const BoundingBox a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {20, 20, 5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, {10, 0, 5, 5}), 0.0);
  EXPECT_NEAR(iou(a, {5, 0, 10, 10}), 50.0 / 150.0, 1e-12);
}

TEST(Iou, MatchesRasterisationOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.0, 20.0), size(1.0, 15.0);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a{pos(rng), pos(rng), size(rng), size(rng)};
    const BoundingBox b{pos(rng), pos(rng), size(rng), size(rng)};
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    worst = std::max(worst, std::abs(iou(a, b) - raster_iou(a, b)));
  }
  EXPECT_LT(worst, 5e-3);
}

TEST(CenterError, MatchesComponentwiseFormula) {
  EXPECT_DOUBLE_EQ(center_error({0, 0, 10, 10}, {3, 4, 10, 10}), 5.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 100.0), s(1.0, 40.0);
  for (int i = 0; i < 200; ++i) {
    const BoundingBox a{u(rng), u(rng), s(rng), s(rng)};
    const BoundingBox b{u(rng), u(rng), s(rng), s(rng)};
    EXPECT_NEAR(center_error(a, b), centre_distance(a, b), 1e-9);
  }
}

TEST(NormCenterError, ReferenceScale) {
  const BoundingBox gt{0, 0, 100, 100};
  EXPECT_DOUBLE_EQ(norm_center_error(gt, gt), 0.0);
  EXPECT_NEAR(norm_center_error({20, 0, 100, 100}, gt), 20.0, 1e-12);
  EXPECT_NEAR(norm_center_error({10, 20, 50, 100}, {0, 0, 50, 100}), 28.284271247461902, 1e-9);
  EXPECT_THROW(norm_center_error(gt, {0, 0, 0, 10}), ValidationError);
}

TEST(Evaluate, PerfectTracker) {
  const auto seq = fixture_sequence(7);
  const auto r = evaluate({{seq.id, seq.ground_truth()}}, {seq});
  EXPECT_DOUBLE_EQ(r.overall.pr, 1.0);
  EXPECT_DOUBLE_EQ(r.overall.npr, 1.0);
  EXPECT_DOUBLE_EQ(r.overall.sr1, 1.0);
  EXPECT_NEAR(r.overall.sr2, 1.0, 1e-12);
  EXPECT_EQ(r.overall.frames, 7u);
}

TEST(Evaluate, LostTrackerScoresZero) {
  const auto seq = fixture_sequence(5);
  const std::vector<BoundingBox> far(5, BoundingBox{100, 0, 100, 100});  // centre error 100
  const auto r = evaluate({{seq.id, far}}, {seq});
  EXPECT_EQ(r.overall.pr, 0.0);
  EXPECT_EQ(r.overall.npr, 0.0);
  EXPECT_EQ(r.overall.sr1, 0.0);
  EXPECT_EQ(r.overall.sr2, 0.0);
}

TEST(Evaluate, HandBuiltFixture) {
  const auto seq = fixture_sequence(10);
  const auto pred = fixture_predictions();
  ASSERT_DOUBLE_EQ(iou(pred[0], seq.frames[0].gt), 0.8);
  ASSERT_DOUBLE_EQ(center_error(pred[0], seq.frames[0].gt), 5.0);
  ASSERT_DOUBLE_EQ(iou(pred[9], seq.frames[0].gt), 0.2);
  ASSERT_DOUBLE_EQ(center_error(pred[9], seq.frames[0].gt), 40.0);
  const auto r = evaluate({{seq.id, pred}}, {seq});
  EXPECT_EQ(r.overall.pr, 0.6);
  EXPECT_EQ(r.overall.sr1, 0.6);
  EXPECT_NEAR(r.overall.sr2, kFixtureSr2, 1e-6);
  EXPECT_NEAR(kFixtureSr2, 0.57, 1e-12);
}

TEST(Evaluate, CurvesAreMonotone) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 15.0);
  auto seq = fixture_sequence(200);
  std::vector<BoundingBox> pred;
  for (std::size_t i = 0; i < 200; ++i) pred.push_back({n(rng), n(rng), 100 + n(rng), 100 + n(rng)});
  const auto r = evaluate({{seq.id, pred}}, {seq});
  for (std::size_t i = 1; i < r.curves.precision.size(); ++i)
    EXPECT_GE(r.curves.precision[i], r.curves.precision[i - 1]);
  for (std::size_t i = 1; i < r.curves.norm_precision.size(); ++i)
    EXPECT_GE(r.curves.norm_precision[i], r.curves.norm_precision[i - 1]);
  for (std::size_t i = 1; i < r.curves.success.size(); ++i)
    EXPECT_LE(r.curves.success[i], r.curves.success[i - 1]);
  for (double v : {r.overall.pr, r.overall.npr, r.overall.sr1, r.overall.sr2}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Evaluate, PooledEqualsFrameWeightedCombination) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 20.0);
  std::vector<Sequence> data;
  std::map<std::string, std::vector<BoundingBox>> res;
  for (std::size_t k = 0; k < 4; ++k) {
    data.push_back(fixture_sequence(10 + 7 * k, "s" + std::to_string(k)));
    auto& p = res[data.back().id];
    for (std::size_t i = 0; i < data.back().size(); ++i) p.push_back({n(rng), n(rng), 100, 100});
  }
  const auto pooled = evaluate(res, data);
  double pr = 0, sr1 = 0, sr2 = 0, total = 0;
  for (const auto& s : data) {
    const auto r = evaluate({{s.id, res.at(s.id)}}, {s});
    const double w = static_cast<double>(s.size());
    pr += w * r.overall.pr;
    sr1 += w * r.overall.sr1;
    sr2 += w * r.overall.sr2;
    total += w;
  }
  EXPECT_NEAR(pooled.overall.pr, pr / total, 1e-12);
  EXPECT_NEAR(pooled.overall.sr1, sr1 / total, 1e-12);
  EXPECT_NEAR(pooled.overall.sr2, sr2 / total, 1e-12);
}

TEST(Evaluate, AttributeAndSwitchBins) {
  auto a = fixture_sequence(10, "a");
  a.attributes = {AttributeTag::MA};
  a.frames[5].modality = Modality::NIR;  // two switches
  auto b = fixture_sequence(4, "b");
  const auto r = evaluate({{"a", fixture_predictions()}, {"b", b.ground_truth()}}, {a, b});
  ASSERT_EQ(r.per_attribute.count("MA"), 1u);
  EXPECT_EQ(r.per_attribute.at("MA").frames, 10u);
  EXPECT_EQ(r.per_attribute.at("MA").sr1, 0.6);
  EXPECT_EQ(r.per_switch_bin.at("twice").frames, 10u);
  EXPECT_EQ(r.per_switch_bin.at("none").sr1, 1.0);
}

TEST(Evaluate, Errors) {
  const auto seq = fixture_sequence(3);
  try {
    evaluate({}, {seq});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("fx"), std::string::npos);
  }
  EXPECT_THROW(evaluate({{"fx", std::vector<BoundingBox>(2, {0, 0, 1, 1})}}, {seq}), ValidationError);
  EvalConfig bad;
  bad.sr_threshold = 0.51;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Report, JsonRoundTrip) {
  auto seq = fixture_sequence(10);
  seq.attributes = {AttributeTag::SV, AttributeTag::FM};
  const auto r = evaluate({{seq.id, fixture_predictions()}}, {seq}, {}, "mine");
  const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  EXPECT_EQ(back, r);
  auto j = report_to_json(r);
  j["version"] = 2;
  EXPECT_THROW(report_from_json(j), ParseError);
}

TEST(Report, FilesAreWrittenAndDeterministic) {
  const auto seq = fixture_sequence(10);
  const auto r1 = evaluate({{seq.id, fixture_predictions()}}, {seq}, {}, "alpha");
  const auto r2 = evaluate({{seq.id, seq.ground_truth()}}, {seq}, {}, "beta");
  const auto base = std::filesystem::temp_directory_path() / "cmot_test_report";
  std::filesystem::remove_all(base);
  write_report(base / "a", {r1, r2});
  write_report(base / "b", {r1, r2});
  for (const char* f : {"report.json", "precision.png", "norm_precision.png", "success.png", "attributes.csv",
                        "comparison.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(base / "a" / f)) << f;
    EXPECT_GT(std::filesystem::file_size(base / "a" / f), 0u) << f;
    EXPECT_EQ(read_text(base / "a" / f), read_text(base / "b" / f)) << f;
  }
  const auto cmp = read_text(base / "a" / "comparison.csv");
  EXPECT_LT(cmp.find("beta"), cmp.find("alpha"));
  const auto img = cv::imread((base / "a" / "success.png").string());
  EXPECT_EQ(img.cols, 640);
  std::filesystem::remove_all(base);
}

TEST(Report, SuccessLegendShowsBothScores) {
  const auto seq = fixture_sequence(10);
  const auto r = evaluate({{seq.id, fixture_predictions()}}, {seq}, {}, "alpha");
  EXPECT_EQ(legend_label(r, PlotKind::Success), "alpha [0.600/0.570]");
  EXPECT_EQ(legend_label(r, PlotKind::Precision), "alpha [0.600]");
}

TEST(Report, UnwritablePathIsIoError) {
  const auto seq = fixture_sequence(3);
  const auto r = evaluate({{seq.id, seq.ground_truth()}}, {seq});
  EXPECT_THROW(write_report("/proc/cmot_no_such_dir/x", {r}), IoError);
}
