#include <doctest.h>

#include "ubd/error.hpp"
#include "ubd/synthetic.hpp"

using namespace ubd;

TEST_CASE("rendering is deterministic per seed") {
  SceneSpec s;
  s.persons.push_back(PersonSpec{});
  const auto a = generate_synthetic_scene(s, 5, 2);
  const auto b = generate_synthetic_scene(s, 5, 2);
  const auto c = generate_synthetic_scene(s, 6, 2);
  CHECK(a.frame.depth == b.frame.depth);
  CHECK(*a.frame.rgb == *b.frame.rgb);
  CHECK(a.gt == b.gt);
  CHECK(a.frame.depth != c.frame.depth);
  CHECK(a.gt.frame_id == 2);
}

TEST_CASE("person pixels carry depth near the person distance") {
  SceneSpec s;
  PersonSpec p;
  p.z = 5.0;
  s.persons.push_back(p);
  const auto f = generate_synthetic_scene(s, 1);
  int n = 0;
  double sum = 0.0;
  for (int v = 0; v < f.object_ids.rows(); ++v) {
    for (int u = 0; u < f.object_ids.cols(); ++u) {
      if (f.object_ids(v, u) != 0 || f.frame.depth(v, u) <= 0.0f) continue;
      sum += f.frame.depth(v, u);
      ++n;
    }
  }
  REQUIRE(n > 500);
  CHECK(sum / n == doctest::Approx(5.0).epsilon(0.05));
  REQUIRE(f.gt.boxes.size() == 1);
  CHECK_FALSE(f.gt.boxes[0].ignore);
  const Rect box = f.gt.boxes[0].box;
  CHECK(box.w == box.h);
}

TEST_CASE("occluded and out-of-view persons are flagged ignore") {
  SceneSpec s;
  PersonSpec front;
  front.z = 3.0;
  PersonSpec hidden;
  hidden.z = 6.0;
  PersonSpec outside;
  outside.x = 30.0;
  outside.z = 5.0;
  s.persons = {front, hidden, outside};
  const auto f = generate_synthetic_scene(s, 2);
  REQUIRE(f.gt.boxes.size() == 3);
  CHECK_FALSE(f.gt.boxes[0].ignore);
  CHECK(f.gt.boxes[1].ignore);
  CHECK(f.gt.boxes[2].ignore);
}

TEST_CASE("scene ground plane matches the camera pose") {
  SceneSpec s;
  const GroundPlane p = scene_ground_plane(s);
  CHECK(height_above_plane(Eigen::Vector3d::Zero(), p) == doctest::Approx(1.4));
  CHECK(normal_angle_deg(p.normal, Eigen::Vector3d(0, -1, 0)) == doctest::Approx(5.0));
}

TEST_CASE("benchmark frames are reproducible and respect the object counts") {
  BenchmarkSpec b;
  const auto x = generate_benchmark(b, 4, 7, 100);
  const auto y = generate_benchmark(b, 4, 7, 100);
  REQUIRE(x.size() == 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].frame.frame_id == 100 + static_cast<std::int64_t>(i));
    CHECK(x[i].frame.depth == y[i].frame.depth);
    CHECK(x[i].gt.boxes.size() >= 1);
    CHECK(x[i].gt.boxes.size() <= 3);
  }
  CHECK(mix_seed(7, 0) != mix_seed(7, 1));
  CHECK(mix_seed(7, 0) == mix_seed(7, 0));
}

TEST_CASE("spec validation") {
  SceneSpec s;
  s.noise_a = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  BenchmarkSpec b;
  b.max_persons = 0;
  CHECK_THROWS_AS(b.validate(), Error);
  b = {};
  b.low_light_probability = 2.0;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("orientation annotations are normalized windows") {
  const auto a = orientation_annotations({0.0, 90.0}, 3, 4);
  REQUIRE(a.size() == 6);
  for (const auto& x : a) {
    CHECK(x.patch.rows() == kTemplateSize);
    CHECK(x.distance_m >= 3.0);
    CHECK(x.distance_m <= 6.5);
  }
}
