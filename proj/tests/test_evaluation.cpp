#include <doctest.h>

#include <limits>

#include "ubd/error.hpp"
#include "ubd/evaluation.hpp"

using namespace ubd;

namespace {

Detection det(std::int64_t frame, Rect box, double score) {
  Detection d;
  d.frame_id = frame;
  d.bbox = box;
  d.score = score;
  d.band = Band::Reliable;
  return d;
}

LabeledDetection lab(double score, Outcome o) { return {0, score, o}; }

}  // namespace

TEST_CASE("greedy matching takes detections in score order") {
  GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, false}, {Rect{100, 0, 10, 10}, false}}}};
  // Two detections on the first box: the higher score wins, the other becomes a false positive.
  const std::vector<Detection> dets{det(0, {1, 0, 10, 10}, 0.4), det(0, {0, 0, 10, 10}, 0.9),
                                    det(0, {50, 50, 10, 10}, 0.6)};
  const auto l = match_detections(dets, gt, 0.5);
  REQUIRE(l.size() == 3);
  CHECK(l[0].score == 0.9);
  CHECK(l[0].outcome == Outcome::TruePositive);
  CHECK(l[1].score == 0.6);
  CHECK(l[1].outcome == Outcome::FalsePositive);
  CHECK(l[2].score == 0.4);
  CHECK(l[2].outcome == Outcome::FalsePositive);
}

TEST_CASE("a detection picks the best overlapping ground-truth box") {
  GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, false}, {Rect{3, 0, 10, 10}, false}}}};
  const std::vector<Detection> dets{det(0, {3, 0, 10, 10}, 0.9), det(0, {0, 0, 10, 10}, 0.8)};
  const auto l = match_detections(dets, gt, 0.5);
  CHECK(l[0].outcome == Outcome::TruePositive);
  CHECK(l[1].outcome == Outcome::TruePositive);
}

TEST_CASE("ignore boxes neither reward nor penalize") {
  GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, true}, {Rect{40, 0, 10, 10}, false}}}};
  const std::vector<Detection> dets{det(0, {0, 0, 10, 10}, 0.9), det(0, {40, 0, 10, 10}, 0.5)};
  const auto l = match_detections(dets, gt, 0.5);
  CHECK(l[0].outcome == Outcome::Ignored);
  CHECK(l[1].outcome == Outcome::TruePositive);
  CHECK(count_ground_truth(gt) == 1);
  const auto curve = compute_curve(l, count_ground_truth(gt), 1);
  REQUIRE(curve.points.size() == 1);
  CHECK(curve.points[0] == CurvePoint{0.0, 1.0, 0.5});
}

TEST_CASE("verifier-rejected detections are skipped") {
  GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, false}}}};
  Detection d = det(0, {0, 0, 10, 10}, 0.9);
  d.band = Band::Unreliable;
  d.accepted = false;
  CHECK(match_detections(std::vector<Detection>{d}, gt, 0.5).empty());
}

TEST_CASE("matching and curve errors") {
  GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, false}}}};
  try {
    (void)match_detections(std::vector<Detection>{det(5, {0, 0, 1, 1}, 0.5)}, gt, 0.5);
    FAIL("expected FrameMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }
  try {
    (void)compute_curve({}, 0, 1);
    FAIL("expected NoGroundTruth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoGroundTruth);
  }
  CHECK_THROWS_AS(compute_curve({}, 1, 0), Error);
  const auto empty = compute_curve({}, 3, 2);
  REQUIRE(empty.points.size() == 1);
  CHECK(empty.points[0].recall == 0.0);
  CHECK(empty.points[0].threshold == std::numeric_limits<double>::infinity());
}

TEST_CASE("curve points by hand") {
  // 4 GT boxes over 2 frames.
  const std::vector<LabeledDetection> l{lab(0.9, Outcome::TruePositive), lab(0.8, Outcome::FalsePositive),
                                        lab(0.8, Outcome::TruePositive), lab(0.7, Outcome::Ignored),
                                        lab(0.5, Outcome::TruePositive), lab(0.3, Outcome::FalsePositive)};
  const EvalCurve c = compute_curve(l, 4, 2);
  // The tied 0.8 pair forms one point; the ignored detection is dropped.
  const std::vector<CurvePoint> want{{0.0, 0.25, 0.9}, {0.5, 0.5, 0.8}, {0.5, 0.75, 0.5}, {1.0, 0.75, 0.3}};
  CHECK(c.points == want);
  CHECK(fppi_at_recall(c, 0.75) == 0.5);
  CHECK_FALSE(fppi_at_recall(c, 1.0).has_value());
  CHECK(fppi_at_recall(c, 0.2) == 0.0);
  CHECK(recall_at_fppi(c, 0.0) == 0.25);
  CHECK(recall_at_fppi(c, 0.49) == 0.25);
  CHECK(recall_at_fppi(c, 0.5) == 0.75);
  // Step curve: 0.25 on [0, 0.5), 0.75 on [0.5, 1].
  CHECK(curve_area(c, 1.0) == doctest::Approx(0.5));
  CHECK(curve_area(c, 0.25) == doctest::Approx(0.0625));
  const EvalCurve never = compute_curve(std::vector<LabeledDetection>{lab(0.9, Outcome::FalsePositive)}, 1, 1);
  CHECK_FALSE(fppi_at_recall(never, 0.1).has_value());
  CHECK(recall_at_fppi(never, 5.0) == 0.0);
}

TEST_CASE("csv and svg output") {
  const EvalCurve c = compute_curve(std::vector<LabeledDetection>{lab(0.9, Outcome::TruePositive)}, 2, 1);
  const std::string csv = curve_to_csv(c);
  CHECK(csv.rfind("threshold,fppi,recall\n", 0) == 0);
  CHECK(csv.find("0.5") != std::string::npos);
  const std::string svg = curves_to_svg({{"a", c}, {"b", c}}, "t");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  const std::string s2 = series_to_svg({{2, 0.5}, {3, 0.7}}, "k", "k", "s");
  CHECK(s2.find("<path") != std::string::npos);
}

TEST_CASE("soft-threshold sweep edge cases") {
  DepthFrame f;
  f.depth = Grid<float>(60, 60, 2.0f);
  f.rgb = Grid<Rgb8>(60, 60, Rgb8{10, 10, 10});
  CachedFrame cf;
  cf.frame = &f;
  cf.detections = {det(0, {0, 0, 10, 10}, 0.9), det(0, {30, 30, 10, 10}, 0.5)};
  const GroundTruthSet gt{{0, {{Rect{0, 0, 10, 10}, false}}}};
  PipelineConfig cfg;
  cfg.match.th_hard = 0.3;
  const ConstantScorer reject(0.0);
  const std::vector<double> th{0.3, 0.6, 1.0};
  const auto curves = sweep_soft_threshold(std::span<const CachedFrame>(&cf, 1), gt, reject, cfg, th);
  REQUIRE(curves.size() == 3);
  // th_soft == th_hard: nothing is Unreliable, so the result is the depth-only curve.
  CHECK(curves[0].points.back().fppi == 1.0);
  // th_soft 0.6: the 0.5 false positive goes to the verifier and is rejected.
  CHECK(curves[1].points.size() == 1);
  CHECK(curves[1].points[0] == CurvePoint{0.0, 1.0, 0.9});
  // th_soft 1.0: everything below 1 is verified and rejected.
  CHECK(curves[2].points[0].recall == 0.0);
  const std::vector<double> bad{0.2};
  CHECK_THROWS_AS(sweep_soft_threshold(std::span<const CachedFrame>(&cf, 1), gt, reject, cfg, bad), Error);
}
