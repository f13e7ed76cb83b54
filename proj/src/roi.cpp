#include "ubd/roi.hpp"

#include <algorithm>
#include <limits>
#include <nlohmann/json.hpp>

#include "ubd/error.hpp"

namespace ubd {

OccupancyGrid roi_histogram(const LabeledCloud& labeled, const GroundPlane& plane, double cell_size) {
  std::vector<std::uint32_t> objects;
  for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
    if (labeled.labels[i] == StructureLabel::Object) objects.push_back(static_cast<std::uint32_t>(i));
  }
  return build_occupancy(labeled.cloud, objects, plane, cell_size);
}

std::vector<CellSet> connected_components(const OccupancyGrid& grid, std::uint32_t min_points) {
  struct Component {
    CellSet cells;
    std::uint64_t points = 0;
  };
  std::vector<Component> found;
  std::vector<std::uint8_t> seen(grid.counts.size(), 0);
  std::vector<int> stack;
  for (int start = 0; start < grid.cell_count(); ++start) {
    if (seen[start] || grid.counts[start] == 0) continue;
    Component comp;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const int cell = stack.back();
      stack.pop_back();
      comp.cells.push_back(cell);
      comp.points += grid.counts[cell];
      const int r = cell / grid.cols;
      const int c = cell % grid.cols;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr;
          const int nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= grid.rows || nc >= grid.cols) continue;
          const int nb = nr * grid.cols + nc;
          if (seen[nb] || grid.counts[nb] == 0) continue;
          seen[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
    if (comp.points < min_points) continue;
    std::sort(comp.cells.begin(), comp.cells.end());
    found.push_back(std::move(comp));
  }
  std::stable_sort(found.begin(), found.end(), [](const Component& a, const Component& b) {
    if (a.points != b.points) return a.points > b.points;
    return a.cells.front() < b.cells.front();
  });
  std::vector<CellSet> out;
  out.reserve(found.size());
  for (auto& comp : found) out.push_back(std::move(comp.cells));
  return out;
}

Roi back_project_bbox(const CellSet& component, const OccupancyGrid& grid, const PointCloud& cloud) {
  Roi roi;
  int u0 = std::numeric_limits<int>::max(), v0 = u0;
  int u1 = std::numeric_limits<int>::min(), v1 = u1;
  std::vector<double> zs;
  for (int cell : component) {
    for (auto i : grid.bin(cell)) {
      roi.point_indices.push_back(i);
      const auto& px = cloud.pixels[i];
      u0 = std::min(u0, px.u);
      v0 = std::min(v0, px.v);
      u1 = std::max(u1, px.u);
      v1 = std::max(v1, px.v);
      zs.push_back(cloud.points[i].z());
    }
  }
  if (zs.empty()) throw Error(ErrorCode::InvalidArgument, "component holds no points");
  roi.bbox = {u0, v0, u1 - u0 + 1, v1 - v0 + 1};
  // Lower median, so the distance is always an observed depth.
  const auto mid = zs.begin() + static_cast<std::ptrdiff_t>((zs.size() - 1) / 2);
  std::nth_element(zs.begin(), mid, zs.end());
  roi.distance_m = *mid;
  return roi;
}

std::string rois_to_jsonl(std::int64_t frame_id, const std::vector<Roi>& rois) {
  std::string out;
  for (const auto& roi : rois) {
    nlohmann::ordered_json j;
    j["frame_id"] = frame_id;
    j["bbox"] = {roi.bbox.x, roi.bbox.y, roi.bbox.w, roi.bbox.h};
    j["distance_m"] = roi.distance_m;
    j["n_points"] = roi.point_indices.size();
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ubd
