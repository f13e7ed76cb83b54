#include "ubd/scene_labeling.hpp"

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "ubd/error.hpp"

namespace ubd {

PlaneAxes plane_axes(const GroundPlane& plane) noexcept {
  const Eigen::Vector3d& n = plane.normal;
  Eigen::Vector3d seed = Eigen::Vector3d::UnitX();
  if (std::abs(n.dot(seed)) > 0.9) seed = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d u = (seed - n.dot(seed) * n).normalized();
  return {u, n.cross(u)};
}

namespace {

template <typename IndexFn>
OccupancyGrid bin_points(const PointCloud& cloud, std::size_t n, IndexFn point_index, const GroundPlane& plane,
                         double cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
  const PlaneAxes axes = plane_axes(plane);
  OccupancyGrid grid;
  grid.cell_size = cell_size;
  if (n == 0) {
    grid.cell_start.assign(1, 0);
    return grid;
  }
  std::vector<long long> cu(n), cv(n);
  long long min_u = std::numeric_limits<long long>::max(), min_v = min_u;
  long long max_u = std::numeric_limits<long long>::min(), max_v = max_u;
  const double inv = 1.0 / cell_size;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& p = cloud.points[point_index(i)];
    cu[i] = static_cast<long long>(std::floor(axes.u.dot(p) * inv));
    cv[i] = static_cast<long long>(std::floor(axes.v.dot(p) * inv));
    min_u = std::min(min_u, cu[i]);
    max_u = std::max(max_u, cu[i]);
    min_v = std::min(min_v, cv[i]);
    max_v = std::max(max_v, cv[i]);
  }
  const long long cols = max_u - min_u + 1;
  const long long rows = max_v - min_v + 1;
  if (cols * rows > 64LL * 1024 * 1024) throw Error(ErrorCode::InvalidArgument, "occupancy grid extent too large");
  grid.cols = static_cast<int>(cols);
  grid.rows = static_cast<int>(rows);
  grid.origin = {static_cast<double>(min_u) * cell_size, static_cast<double>(min_v) * cell_size};
  grid.counts.assign(static_cast<std::size_t>(rows * cols), 0);
  std::vector<std::uint32_t> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    cell_of[i] = static_cast<std::uint32_t>((cv[i] - min_v) * cols + (cu[i] - min_u));
    ++grid.counts[cell_of[i]];
  }
  grid.cell_start.assign(grid.counts.size() + 1, 0);
  for (std::size_t c = 0; c < grid.counts.size(); ++c) grid.cell_start[c + 1] = grid.cell_start[c] + grid.counts[c];
  grid.indices.resize(n);
  std::vector<std::uint32_t> cursor(grid.cell_start.begin(), grid.cell_start.end() - 1);
  for (std::size_t i = 0; i < n; ++i) grid.indices[cursor[cell_of[i]]++] = static_cast<std::uint32_t>(point_index(i));
  return grid;
}

}  // namespace

OccupancyGrid build_occupancy(const PointCloud& cloud, const GroundPlane& plane, double cell_size) {
  return bin_points(cloud, cloud.size(), [](std::size_t i) { return i; }, plane, cell_size);
}

OccupancyGrid build_occupancy(const PointCloud& cloud, std::span<const std::uint32_t> subset, const GroundPlane& plane,
                              double cell_size) {
  return bin_points(cloud, subset.size(), [&](std::size_t i) { return static_cast<std::size_t>(subset[i]); }, plane,
                    cell_size);
}

std::vector<std::uint32_t> select_low_density(const OccupancyGrid& grid, std::uint32_t density_threshold) {
  std::vector<std::uint32_t> out;
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (grid.counts[c] == 0 || grid.counts[c] > density_threshold) continue;
    const auto b = grid.bin(c);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

const char* label_name(StructureLabel label) noexcept {
  switch (label) {
    case StructureLabel::GroundPlane: return "ground";
    case StructureLabel::Object: return "object";
    case StructureLabel::FreeSpace: return "free_space";
    case StructureLabel::ElevatedStructure: return "elevated";
  }
  return "unknown";
}

void HeightBands::validate() const {
  if (!(ground_bottom < ground_top && ground_top < object_top && object_top < free_top)) {
    throw Error(ErrorCode::ConfigError, "height bands must be strictly increasing");
  }
  if (!(free_space_max_fraction >= 0.0 && free_space_max_fraction <= 1.0 && object_sparse_fraction >= 0.0 &&
        object_sparse_fraction <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "free-space rule fractions must lie in [0, 1]");
  }
}

LabeledCloud label_structure(PointCloud cloud, const GroundPlane& plane, double grid_cell, const HeightBands& bands) {
  bands.validate();
  enum Band { kGround = 0, kObject, kFree, kElevated };
  const std::size_t n = cloud.size();
  std::vector<std::uint8_t> band(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = height_above_plane(cloud.points[i], plane);
    band[i] = h < bands.ground_top ? kGround : h < bands.object_top ? kObject : h < bands.free_top ? kFree : kElevated;
  }

  const OccupancyGrid grid = build_occupancy(cloud, plane, grid_cell);
  LabeledCloud out;
  out.labels.resize(n);
  for (int c = 0; c < grid.cell_count(); ++c) {
    const auto members = grid.bin(c);
    if (members.empty()) continue;
    std::array<std::size_t, 4> hist{};
    for (auto i : members) ++hist[band[i]];
    const double total = static_cast<double>(members.size());
    const bool elevated_cell = static_cast<double>(hist[kFree]) < bands.free_space_max_fraction * total &&
                               hist[kElevated] > 0 &&
                               static_cast<double>(hist[kObject]) < bands.object_sparse_fraction * total;
    for (auto i : members) {
      StructureLabel label = StructureLabel::GroundPlane;
      switch (band[i]) {
        case kGround: label = StructureLabel::GroundPlane; break;
        case kObject: label = elevated_cell ? StructureLabel::ElevatedStructure : StructureLabel::Object; break;
        case kFree: label = StructureLabel::FreeSpace; break;
        default: label = StructureLabel::ElevatedStructure; break;
      }
      out.labels[i] = label;
    }
  }
  out.cloud = std::move(cloud);
  return out;
}

std::string labeled_cloud_csv(const LabeledCloud& labeled) {
  std::ostringstream ss;
  ss << "x,y,z,label\n";
  ss.precision(6);
  ss << std::fixed;
  for (std::size_t i = 0; i < labeled.cloud.size(); ++i) {
    const auto& p = labeled.cloud.points[i];
    ss << p.x() << ',' << p.y() << ',' << p.z() << ',' << label_name(labeled.labels[i]) << '\n';
  }
  return ss.str();
}

}  // namespace ubd
