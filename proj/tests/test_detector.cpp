#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "ubd/detector.hpp"
#include "ubd/error.hpp"
#include "ubd/synthetic.hpp"

using namespace ubd;

namespace {

WeightedTemplate unit_template(const Annotation& like, double value) {
  WeightedTemplate t;
  t.tmpl.values = Grid<double>(like.patch.rows(), like.patch.cols(), value);
  t.tmpl.valid = Grid<std::uint8_t>(like.patch.rows(), like.patch.cols(), 1);
  t.tmpl.n_train = 2;
  t.weights = Grid<double>(like.patch.rows(), like.patch.cols(), 1.0);
  return t;
}

Annotation contour_patch(const std::vector<int>& tops, int rows) {
  Annotation a;
  const int cols = static_cast<int>(tops.size());
  a.patch = Grid<float>(rows, cols, 1.0f);  // background (+clip)
  a.valid_mask = Grid<std::uint8_t>(rows, cols, 1);
  for (int c = 0; c < cols; ++c) {
    if (tops[c] < 0) continue;
    for (int r = tops[c]; r < rows; ++r) a.patch(r, c) = 0.0f;
  }
  return a;
}

}  // namespace

TEST_CASE("score mapping and band boundaries") {
  CHECK(distance_to_score(0.0, 0.3) == 1.0);
  CHECK(distance_to_score(0.3, 0.3) == doctest::Approx(std::exp(-1.0)));
  MatchConfig cfg;
  cfg.th_hard = 0.3;
  cfg.th_soft = 0.8;
  CHECK(classify_score(0.29, cfg) == Band::Rejected);
  CHECK(classify_score(0.3, cfg) == Band::Unreliable);
  CHECK(classify_score(0.58, cfg) == Band::Unreliable);
  CHECK(classify_score(0.8, cfg) == Band::Reliable);
  CHECK(classify_score(1.0, cfg) == Band::Reliable);
  cfg.th_soft = cfg.th_hard;
  CHECK(classify_score(0.5, cfg) == Band::Reliable);
}

TEST_CASE("band names round trip") {
  for (Band b : {Band::Rejected, Band::Unreliable, Band::Reliable}) CHECK(band_from_name(band_name(b)) == b);
  CHECK_THROWS_AS(band_from_name("maybe"), Error);
}

TEST_CASE("match config validation") {
  MatchConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.th_hard = 0.9;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.score_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.stride = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("contour is the topmost foreground row per column") {
  const Annotation a = contour_patch({3, -1, 0, 5}, 8);
  const auto c = extract_contour(a, 1.0);
  CHECK(c == std::vector<int>{3, kNoContour, 0, 5});
  Annotation invalid = a;
  invalid.valid_mask(0, 2) = 0;
  CHECK(extract_contour(invalid, 1.0)[2] == 1);
  const Annotation empty = contour_patch({-1, -1}, 4);
  try {
    (void)extract_contour(empty, 1.0);
    FAIL("expected NoForeground");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoForeground);
  }
}

TEST_CASE("local maxima keep the leftmost column of a plateau") {
  const std::vector<int> head{9, 7, 5, 3, 3, 3, 5, 7, 9};
  CHECK(local_maxima(head, 2) == std::vector<int>{3});
  // The middle of the shoulder has nothing higher within the window, so it qualifies too.
  const std::vector<int> two{5, 2, 5, 5, 5, 5, 5, 2, 5};
  CHECK(local_maxima(two, 2) == std::vector<int>{1, 4, 7});
  const std::vector<int> gap{kNoContour, 4, kNoContour, 6};
  CHECK(local_maxima(gap, 1) == std::vector<int>{1, 3});
  const std::vector<int> none(4, kNoContour);
  CHECK(local_maxima(none, 2).empty());
}

TEST_CASE("anchor expansion clips and deduplicates") {
  const std::vector<int> a{0, 2, 9};
  CHECK(expand_anchors(a, 1, 10) == std::vector<int>{0, 1, 2, 3, 8, 9});
  CHECK(expand_anchors(a, 0, 10) == std::vector<int>{0, 2, 9});
}

TEST_CASE("template distance with unit weights is the mean squared difference") {
  std::mt19937_64 rng(13);
  Annotation w = test::random_annotation(rng, 6, 6, 0.0, 0.3, 0.2);
  WeightedTemplate t = unit_template(w, 0.1);
  t.tmpl.valid(2, 2) = 0;
  const std::vector<int> anchors{4, 1, 1};
  double sum = 0.0;
  int n = 0;
  for (int c : {1, 4}) {
    for (int r = 0; r < 6; ++r) {
      if (!w.valid_mask(r, c) || !t.tmpl.valid(r, c)) continue;
      const double d = 0.1 - static_cast<double>(w.patch(r, c));
      sum += d * d;
      ++n;
    }
  }
  CHECK(template_distance(w, t, anchors) == sum / n);
  t.weights.fill(2.0);
  CHECK(template_distance(w, t, anchors) == doctest::Approx(2.0 * sum / n));
  Annotation dead = w;
  dead.valid_mask.fill(0);
  CHECK_THROWS_AS(template_distance(dead, t, anchors), Error);
}

TEST_CASE("multi-template matching") {
  std::mt19937_64 rng(2);
  const Annotation w = test::random_annotation(rng, 4, 4, 0.5, 0.01);
  const std::vector<int> anchors{0, 1, 2, 3};
  TemplateSet orient;
  orient.kind = TemplateKind::Orientation;
  orient.members = {unit_template(w, 0.0), unit_template(w, 0.5), unit_template(w, 0.5)};
  const MatchResult m = match_multi(w, orient, 3.0, anchors);
  CHECK(m.template_id == 1);
  TemplateSet dist;
  dist.kind = TemplateKind::Distance;
  dist.members = {unit_template(w, 0.0), unit_template(w, 1.0)};
  dist.ranges = {{0.0, 4.0}, {4.0, std::numeric_limits<double>::infinity()}};
  CHECK(match_multi(w, dist, 3.99, anchors).template_id == 0);
  CHECK(match_multi(w, dist, 4.0, anchors).template_id == 1);
}

TEST_CASE("non-maximum suppression keeps the best box of each cluster") {
  std::vector<Detection> dets(4);
  dets[0].bbox = {0, 0, 10, 10};
  dets[0].score = 0.6;
  dets[1].bbox = {1, 1, 10, 10};
  dets[1].score = 0.9;
  dets[2].bbox = {50, 50, 10, 10};
  dets[2].score = 0.5;
  dets[3].bbox = {5, 0, 10, 10};  // IoU with [1] is 54 / 146
  dets[3].score = 0.4;
  const auto kept = non_max_suppression(dets, 0.5);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].score == 0.5);
  CHECK(kept[2].score == 0.4);
}

TEST_CASE("detection order breaks score ties by box") {
  Detection a, b;
  a.score = b.score = 0.7;
  a.bbox = {1, 0, 5, 5};
  b.bbox = {2, 0, 5, 5};
  CHECK(detection_before(a, b));
  CHECK_FALSE(detection_before(b, a));
}

TEST_CASE("detections json lines round trip") {
  std::vector<Detection> dets(2);
  dets[0].bbox = {1, 2, 3, 4};
  dets[0].score = 0.123456789012345;
  dets[0].band = Band::Unreliable;
  dets[0].distance_m = 4.5;
  dets[0].frame_id = 3;
  dets[0].verified = 0.25;
  dets[0].accepted = false;
  dets[1].band = Band::Reliable;
  dets[1].template_id = 2;
  const auto text = detections_to_jsonl(dets);
  const auto back = detections_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].bbox == dets[0].bbox);
  CHECK(back[0].score == dets[0].score);
  CHECK(back[0].band == Band::Unreliable);
  CHECK(back[0].verified == dets[0].verified);
  CHECK(back[0].accepted == dets[0].accepted);
  CHECK_FALSE(back[1].verified.has_value());
  CHECK(back[1].template_id == 2);
  CHECK(detections_to_jsonl(back) == text);
  CHECK_THROWS_AS(detections_from_jsonl("{not json}\n"), Error);
}

TEST_CASE("roi windows are squares sized by distance") {
  CameraIntrinsics k;
  MatchConfig cfg;
  Roi roi;
  roi.bbox = {300, 100, 60, 200};
  roi.distance_m = 5.0;
  const auto windows = roi_windows(roi, k, cfg);
  REQUIRE_FALSE(windows.empty());
  const int side = static_cast<int>(std::lround(k.fy * 0.9 / 5.0));
  for (const auto& w : windows) {
    CHECK(w.w == side);
    CHECK(w.h == side);
  }
  roi.distance_m = 0.0;
  CHECK(roi_windows(roi, k, cfg).empty());
}

TEST_CASE("prepare_roi_window normalizes around the central median") {
  DepthFrame f;
  f.depth = Grid<float>(100, 100, 0.0f);
  for (int v = 20; v < 100; ++v) {
    for (int u = 30; u < 70; ++u) f.depth(v, u) = 3.0f;
  }
  const Annotation a = prepare_roi_window(f, Rect{20, 10, 60, 60}, kTemplateSize);
  CHECK(a.distance_m == 3.0);
  CHECK(a.patch.rows() == kTemplateSize);
  CHECK(a.patch.cols() == kTemplateSize);
  CHECK(a.patch(140, 75) == 0.0f);
  CHECK_FALSE(a.valid_mask(0, 0));
  CHECK_THROWS_AS(prepare_roi_window(f, Rect{0, 0, 10, 10}, kTemplateSize), Error);
  const Annotation raw = sample_window(f, Rect{20, 10, 60, 60}, kTemplateSize);
  CHECK(raw.patch(140, 75) == 3.0f);
}

TEST_CASE("a rendered person is detected near its ground-truth box") {
  SceneSpec spec;
  spec.with_rgb = false;
  PersonSpec p;
  p.z = 4.0;
  spec.persons.push_back(p);
  const SyntheticFrame f = generate_synthetic_scene(spec, 3);
  std::vector<Annotation> train;
  for (double yaw : {0.0, 30.0, -30.0, 180.0}) {
    SceneSpec s2 = spec;
    s2.persons[0].yaw_deg = yaw;
    const SyntheticFrame g = generate_synthetic_scene(s2, 9);
    train.push_back(prepare_roi_window(g.frame, g.gt.boxes[0].box, kTemplateSize));
  }
  const TemplateSet set = make_single_set(train_weighted(train));
  const auto d = score_window(f.frame, f.gt.boxes[0].box, 4.0, set, MatchConfig{});
  REQUIRE(d.has_value());
  CHECK(d->score > 0.8);
  CHECK_FALSE(score_window(f.frame, Rect{0, 0, 40, 40}, 4.0, set, MatchConfig{}).has_value());
}
