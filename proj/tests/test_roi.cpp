#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "ubd/error.hpp"
#include "ubd/roi.hpp"

using namespace ubd;

namespace {

// Grid whose cell i holds counts[i] consecutive point indices.
OccupancyGrid grid_from_counts(int rows, int cols, const std::vector<std::uint32_t>& counts) {
  OccupancyGrid g;
  g.rows = rows;
  g.cols = cols;
  g.counts = counts;
  g.cell_start.push_back(0);
  std::uint32_t next = 0;
  for (auto c : counts) {
    for (std::uint32_t k = 0; k < c; ++k) g.indices.push_back(next++);
    g.cell_start.push_back(static_cast<std::uint32_t>(g.indices.size()));
  }
  return g;
}

// Brute-force 8-connected flood fill oracle returning sorted components (unsorted order).
std::vector<CellSet> oracle_components(const OccupancyGrid& g, std::uint32_t min_points) {
  std::vector<int> label(g.cell_count(), -1);
  std::vector<CellSet> out;
  for (int s = 0; s < g.cell_count(); ++s) {
    if (g.counts[s] == 0 || label[s] >= 0) continue;
    CellSet comp;
    std::vector<int> stack{s};
    label[s] = 1;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      comp.push_back(c);
      for (int o = 0; o < g.cell_count(); ++o) {
        if (label[o] >= 0 || g.counts[o] == 0) continue;
        if (std::abs(o / g.cols - c / g.cols) <= 1 && std::abs(o % g.cols - c % g.cols) <= 1) {
          label[o] = 1;
          stack.push_back(o);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    std::uint64_t pts = 0;
    for (int c : comp) pts += g.counts[c];
    if (pts >= min_points) out.push_back(comp);
  }
  return out;
}

}  // namespace

TEST_CASE("diagonal cells join one component") {
  // 1 0 0
  // 0 1 0
  // 0 0 1
  const auto g = grid_from_counts(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto comps = connected_components(g, 1);
  REQUIRE(comps.size() == 1);
  CHECK(comps[0] == CellSet{0, 4, 8});
}

TEST_CASE("components are filtered by point count and ordered by size then first cell") {
  // 2 0 3
  // 2 0 0
  // 0 0 3
  const auto g = grid_from_counts(3, 3, {2, 0, 3, 2, 0, 0, 0, 0, 3});
  const auto all = connected_components(g, 1);
  REQUIRE(all.size() == 3);
  CHECK(all[0] == CellSet{0, 3});
  CHECK(all[1] == CellSet{2});
  CHECK(all[2] == CellSet{8});
  const auto big = connected_components(g, 4);
  REQUIRE(big.size() == 1);
  CHECK(big[0] == CellSet{0, 3});
  CHECK(connected_components(g, 100).empty());
}

TEST_CASE("connected components match a flood-fill oracle on random grids") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> cnt(0, 4);
  std::bernoulli_distribution empty(0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint32_t> counts(12 * 9);
    for (auto& c : counts) c = empty(rng) ? 0 : cnt(rng);
    const auto g = grid_from_counts(12, 9, counts);
    auto got = connected_components(g, 3);
    auto want = oracle_components(g, 3);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
  }
}

TEST_CASE("back projection gives the pixel hull and the lower median depth") {
  const auto g = grid_from_counts(1, 2, {2, 2});
  PointCloud cloud;
  cloud.points = {{0, 0, 4.0}, {0, 0, 2.0}, {0, 0, 3.0}, {0, 0, 5.0}};
  cloud.pixels = {{10, 20}, {15, 22}, {12, 30}, {11, 21}};
  const Roi roi = back_project_bbox({0, 1}, g, cloud);
  CHECK(roi.bbox == Rect{10, 20, 6, 11});
  CHECK(roi.distance_m == 3.0);
  CHECK(roi.point_indices.size() == 4);
  CHECK_THROWS_AS(back_project_bbox({}, g, cloud), Error);
}

TEST_CASE("roi histogram only counts object points") {
  LabeledCloud lc;
  lc.cloud.points = {{0, 0.4, 3}, {0, 1.3, 3}, {1, 0.4, 3}};
  lc.cloud.pixels.resize(3);
  lc.labels = {StructureLabel::Object, StructureLabel::GroundPlane, StructureLabel::Object};
  const auto g = roi_histogram(lc, GroundPlane::oriented({0, -1, 0}, -1.4), 0.2);
  CHECK(g.total() == 2);
}

TEST_CASE("roi json lines") {
  Roi r;
  r.bbox = {1, 2, 3, 4};
  r.distance_m = 2.5;
  r.point_indices = {0, 1};
  std::istringstream lines(rois_to_jsonl(7, {r, r}));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["frame_id"] == 7);
    CHECK(j["bbox"] == nlohmann::json::array({1, 2, 3, 4}));
    CHECK(j["n_points"] == 2);
    ++n;
  }
  CHECK(n == 2);
}
