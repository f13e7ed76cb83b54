#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "ubd/error.hpp"
#include "ubd/template_training.hpp"

using namespace ubd;
using ubd::test::random_annotation;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ubd::Error");
  return ErrorCode::InvalidArgument;
}

Annotation constant_annotation(int rows, int cols, float v, double distance = 0.0) {
  Annotation a;
  a.patch = Grid<float>(rows, cols, v);
  a.valid_mask = Grid<std::uint8_t>(rows, cols, 1);
  a.distance_m = distance;
  return a;
}

}  // namespace

TEST_CASE("reference median is the lower median of the central block") {
  Grid<float> v(5, 5, 100.0f);
  Grid<std::uint8_t> m(5, 5, 1);
  // Central 3x3 block holds 1..9 with two of them invalid.
  float x = 1.0f;
  for (int r = 1; r < 4; ++r) {
    for (int c = 1; c < 4; ++c) v(r, c) = x++;
  }
  m(1, 1) = 0;  // drops 1
  m(3, 3) = 0;  // drops 9
  // Remaining 2..8 -> median 5.
  CHECK(*reference_median(v, m, 3, 0.5) == 5.0);
  m(3, 2) = 0;  // drops 8 -> 2..7, lower median 4
  CHECK(*reference_median(v, m, 3, 0.5) == 4.0);
  CHECK_FALSE(reference_median(v, m, 3, 0.9).has_value());
}

TEST_CASE("normalization subtracts the median, clips and marks background") {
  DepthNormalization norm;
  norm.background_band_m = 1.0;
  norm.clip_m = 0.5;
  Grid<float> v(1, 5);
  Grid<std::uint8_t> m(1, 5, 1);
  v(0, 0) = 3.0f;   // 0
  v(0, 1) = 3.3f;   // 0.3
  v(0, 2) = 2.2f;   // -0.8 -> clipped -0.5
  v(0, 3) = 5.0f;   // 2.0 -> background -> +clip
  v(0, 4) = 1.0f;   // -2.0 -> background -> +clip
  apply_normalization(v, m, 3.0, norm);
  CHECK(v(0, 0) == doctest::Approx(0.0));
  CHECK(v(0, 1) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(v(0, 2) == doctest::Approx(-0.5));
  CHECK(v(0, 3) == doctest::Approx(0.5));
  CHECK(v(0, 4) == doctest::Approx(0.5));
}

TEST_CASE("normalize_annotation resizes and rejects sparse centers") {
  Grid<float> raw(300, 300, 4.0f);
  Grid<std::uint8_t> mask(300, 300, 1);
  const Annotation a = normalize_annotation(raw, mask);
  CHECK(a.patch.rows() == kTemplateSize);
  CHECK(a.patch.cols() == kTemplateSize);
  CHECK(a.distance_m == 4.0);
  CHECK(a.patch(75, 75) == 0.0f);
  Grid<std::uint8_t> none(300, 300, 0);
  CHECK(code_of([&] { (void)normalize_annotation(raw, none); }) == ErrorCode::TooSparse);
}

TEST_CASE("resize_nearest samples pixel centers") {
  Grid<int> g(2, 2);
  g(0, 0) = 1;
  g(0, 1) = 2;
  g(1, 0) = 3;
  g(1, 1) = 4;
  const Grid<int> up = resize_nearest(g, 4, 4);
  CHECK(up(0, 0) == 1);
  CHECK(up(1, 1) == 1);
  CHECK(up(0, 2) == 2);
  CHECK(up(3, 3) == 4);
  CHECK(up(2, 1) == 3);
}

TEST_CASE("single template is the per-pixel mean over valid samples") {
  std::mt19937_64 rng(1);
  std::vector<Annotation> s;
  for (int i = 0; i < 7; ++i) s.push_back(random_annotation(rng, 6, 5, 0.0, 0.3, 0.2));
  const DepthTemplate t = train_single(s);
  CHECK(t.n_train == 7);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 5; ++c) {
      double sum = 0.0;
      int n = 0;
      for (const auto& a : s) {
        if (!a.valid_mask(r, c)) continue;
        sum += a.patch(r, c);
        ++n;
      }
      CHECK(t.valid(r, c) == (n > 0 ? 1 : 0));
      if (n > 0) CHECK(t.values(r, c) == doctest::Approx(sum / n).epsilon(1e-12));
    }
  }
  CHECK(code_of([] { (void)train_single(std::vector<Annotation>{}); }) == ErrorCode::EmptyTrainingSet);
}

TEST_CASE("weights are the inverse population standard deviation with a floor") {
  std::vector<Annotation> s{constant_annotation(1, 3, 0.0f), constant_annotation(1, 3, 0.0f)};
  s[0].patch(0, 0) = 1.0f;
  s[1].patch(0, 0) = 3.0f;   // sigma 1
  s[0].patch(0, 1) = 0.5f;
  s[1].patch(0, 1) = 0.5f;   // sigma 0 -> floor
  s[1].valid_mask(0, 2) = 0; // single sample -> 1 / floor
  const WeightedTemplate w = train_weighted(s, 0.01);
  CHECK(w.tmpl.values(0, 0) == doctest::Approx(2.0));
  CHECK(w.weights(0, 0) == doctest::Approx(1.0));
  CHECK(w.weights(0, 1) == doctest::Approx(100.0));
  CHECK(w.weights(0, 2) == doctest::Approx(100.0));
  CHECK(code_of([&] { (void)train_weighted(std::span(s).first(1)); }) == ErrorCode::SingleSample);
  CHECK(code_of([&] { (void)train_weighted(s, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("closed-form weighted template minimizes the energy") {
  std::mt19937_64 rng(9);
  std::vector<Annotation> s;
  for (int i = 0; i < 12; ++i) s.push_back(random_annotation(rng, 4, 4));
  const WeightedTemplate w = train_weighted(s, 1e-6);
  const double e0 = weighted_energy(s, w.tmpl.values, w.weights);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int trial = 0; trial < 30; ++trial) {
    Grid<double> t = w.tmpl.values;
    Grid<double> wt = w.weights;
    for (auto& v : t.data()) v += g(rng);
    for (auto& v : wt.data()) v *= std::exp(g(rng));
    CHECK(weighted_energy(s, t, wt) > e0);
  }
}

TEST_CASE("masked distance scales by the jointly valid share") {
  Annotation a = constant_annotation(2, 2, 0.0f);
  Annotation b = constant_annotation(2, 2, 1.0f);
  CHECK(masked_distance(a, b) == doctest::Approx(2.0));
  b.valid_mask(0, 0) = 0;
  // 3 joint pixels each contributing 1, scaled by 4/3 -> sqrt(4)
  CHECK(masked_distance(a, b) == doctest::Approx(2.0));
  b.valid_mask.fill(0);
  CHECK(std::isinf(masked_distance(a, b)));
  CHECK(masked_distance(a, a) == 0.0);
}

TEST_CASE("k-means separates well separated groups deterministically") {
  std::mt19937_64 rng(4);
  std::vector<Annotation> s;
  for (int i = 0; i < 10; ++i) s.push_back(random_annotation(rng, 5, 5, 0.0, 0.05));
  for (int i = 0; i < 10; ++i) s.push_back(random_annotation(rng, 5, 5, 1.0, 0.05));
  const Clusters c = kmeans_cluster(s, 2, 123);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(c[1] == std::vector<std::size_t>{10, 11, 12, 13, 14, 15, 16, 17, 18, 19});
  CHECK(kmeans_cluster(s, 3, 5) == kmeans_cluster(s, 3, 5));
  CHECK(code_of([&] { (void)kmeans_cluster(std::span(s).first(2), 3, 1); }) == ErrorCode::TooFewSamples);
  CHECK(code_of([&] { (void)kmeans_cluster(s, 1, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("k-means returns a partition with no empty cluster") {
  std::mt19937_64 rng(8);
  std::vector<Annotation> s;
  for (int i = 0; i < 6; ++i) s.push_back(constant_annotation(3, 3, 0.0f));  // identical points
  s.push_back(random_annotation(rng, 3, 3));
  for (int k = 2; k <= 4; ++k) {
    const Clusters c = kmeans_cluster(s, k, 11);
    CHECK(c.size() == static_cast<std::size_t>(k));
    std::vector<int> seen(s.size(), 0);
    for (const auto& cl : c) {
      CHECK_FALSE(cl.empty());
      for (auto i : cl) ++seen[i];
    }
    for (int v : seen) CHECK(v == 1);
  }
}

TEST_CASE("silhouette on a hand-computed example") {
  // 1-pixel annotations at 0, 1 and 10, 12: clusters {0,1}, {2,3}.
  std::vector<Annotation> s;
  for (float v : {0.0f, 1.0f, 10.0f, 12.0f}) s.push_back(constant_annotation(1, 1, v));
  const Clusters c{{0, 1}, {2, 3}};
  const double s0 = (11.0 - 1.0) / 11.0;
  const double s1 = (10.0 - 1.0) / 10.0;
  const double s2 = (9.5 - 2.0) / 9.5;
  const double s3 = (11.5 - 2.0) / 11.5;
  CHECK(silhouette_score(s, c) == doctest::Approx((s0 + s1 + s2 + s3) / 4.0).epsilon(1e-12));
  // Singleton clusters contribute 0.
  const Clusters single{{0}, {1, 2, 3}};
  const double t1 = (1.0 - 10.0) / 10.0;  // a = mean(9, 11), b = 1
  const double a2 = (9.0 + 2.0) / 2.0, b2 = 10.0;
  const double a3 = (11.0 + 2.0) / 2.0, b3 = 12.0;
  const double want = (0.0 + t1 + (b2 - a2) / std::max(a2, b2) + (b3 - a3) / std::max(a3, b3)) / 4.0;
  CHECK(silhouette_score(s, single) == doctest::Approx(want).epsilon(1e-12));
  CHECK(code_of([&] { (void)silhouette_score(s, Clusters{{0, 1, 2, 3}}); }) == ErrorCode::DegenerateClustering);
  CHECK(code_of([&] { (void)silhouette_score(s, Clusters{{0, 1}, {1, 2, 3}}); }) == ErrorCode::DegenerateClustering);
}

TEST_CASE("select_k reports every k and picks the best") {
  std::mt19937_64 rng(21);
  std::vector<Annotation> s;
  for (double m : {0.0, 1.0, 2.0}) {
    for (int i = 0; i < 8; ++i) s.push_back(random_annotation(rng, 4, 4, m, 0.05));
  }
  const std::vector<int> ks{2, 3, 4};
  const KSelection sel = select_k(s, ks, 3);
  REQUIRE(sel.scores.size() == 3);
  CHECK(sel.best_k == 3);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    CHECK(sel.scores[i].first == ks[i]);
    CHECK(sel.scores[i].second == doctest::Approx(silhouette_score(s, kmeans_cluster(s, ks[i], 3))));
  }
}

TEST_CASE("distance ranges and dispatch") {
  const std::vector<double> b{0.0, 4.0, 7.0};
  const auto r = ranges_from_boundaries(b);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == DistanceRange{0.0, 4.0});
  CHECK(r[1] == DistanceRange{4.0, 7.0});
  CHECK(std::isinf(r[2].hi));
  CHECK(dispatch_range(r, 0.0) == 0);
  CHECK(dispatch_range(r, 3.999) == 0);
  CHECK(dispatch_range(r, 4.0) == 1);
  CHECK(dispatch_range(r, 7.0) == 2);
  CHECK(dispatch_range(r, 1e9) == 2);
  CHECK(code_of([&] { (void)dispatch_range(r, -1.0); }) == ErrorCode::InvalidArgument);
  const std::vector<double> bad{1.0, 2.0};
  CHECK(code_of([&] { (void)ranges_from_boundaries(bad); }) == ErrorCode::InvalidArgument);
  const std::vector<double> unordered{0.0, 5.0, 5.0};
  CHECK(code_of([&] { (void)ranges_from_boundaries(unordered); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("distance set trains one member per range and names empty ranges") {
  std::vector<Annotation> s;
  for (double d : {1.0, 2.0, 5.0, 6.0, 8.0, 9.0}) s.push_back(constant_annotation(3, 3, static_cast<float>(d), d));
  const std::vector<double> b{0.0, 4.0, 7.0};
  const TemplateSet set = train_distance_set(s, ranges_from_boundaries(b));
  CHECK(set.kind == TemplateKind::Distance);
  REQUIRE(set.members.size() == 3);
  CHECK(set.members[0].tmpl.values(1, 1) == doctest::Approx(1.5));
  CHECK(set.members[1].tmpl.values(1, 1) == doctest::Approx(5.5));
  CHECK(set.members[2].tmpl.values(1, 1) == doctest::Approx(8.5));
  CHECK_NOTHROW(set.validate());
  const std::vector<double> b2{0.0, 4.0, 7.0, 8.5};
  try {
    (void)train_distance_set(s, ranges_from_boundaries(b2));
    FAIL("expected EmptyRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRange);
    CHECK(std::string(e.what()).find("7.0") != std::string::npos);
  }
}

TEST_CASE("orientation set averages each cluster over its own members") {
  std::mt19937_64 rng(6);
  std::vector<Annotation> s;
  for (int i = 0; i < 5; ++i) s.push_back(random_annotation(rng, 3, 3, 0.0, 0.05));
  for (int i = 0; i < 3; ++i) s.push_back(random_annotation(rng, 3, 3, 2.0, 0.05));
  const TemplateSet set = train_orientation_set(s, 2, 1);
  CHECK(set.kind == TemplateKind::Orientation);
  REQUIRE(set.members.size() == 2);
  const Clusters c = kmeans_cluster(s, 2, 1);
  for (std::size_t m = 0; m < 2; ++m) {
    double sum = 0.0;
    for (auto i : c[m]) sum += s[i].patch(1, 1);
    CHECK(set.members[m].tmpl.values(1, 1) == doctest::Approx(sum / c[m].size()));
    CHECK(set.members[m].tmpl.n_train == static_cast<int>(c[m].size()));
  }
  CHECK(train_orientation_set(s, 1, 1).kind == TemplateKind::Single);
}

TEST_CASE("template set validation") {
  TemplateSet set;
  CHECK_THROWS_AS(set.validate(), Error);
  std::vector<Annotation> s{constant_annotation(2, 2, 0.0f), constant_annotation(2, 2, 1.0f)};
  set = make_single_set(train_weighted(s));
  CHECK_NOTHROW(set.validate());
  set.members[0].weights(0, 0) = 0.0;
  CHECK_THROWS_AS(set.validate(), Error);
  TemplateSet d;
  d.kind = TemplateKind::Distance;
  d.members = {train_weighted(s), train_weighted(s)};
  d.ranges = {{0.0, 4.0}, {5.0, std::numeric_limits<double>::infinity()}};
  CHECK_THROWS_AS(d.validate(), Error);
  d.ranges[1].lo = 4.0;
  CHECK_NOTHROW(d.validate());
}
