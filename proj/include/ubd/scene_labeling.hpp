#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ubd/geometry.hpp"

namespace ubd {

/// Orthonormal in-plane axes used to map 3D points onto 2D ground coordinates.
struct PlaneAxes {
  Eigen::Vector3d u;
  Eigen::Vector3d v;
};

/// Axes derived from the plane normal alone: u is the camera x axis projected onto the plane
/// (camera z when x is nearly parallel to the normal), v = normal × u.
[[nodiscard]] PlaneAxes plane_axes(const GroundPlane& plane) noexcept;

/// 2D histogram of points projected onto a plane. Cells are indexed row-major (row along v, column along u);
/// cell (r, c) covers plane coordinates [origin + (c, r) * cell_size, origin + (c + 1, r + 1) * cell_size).
/// Point indices are stored in compressed form: the points of cell i are indices[cell_start[i] .. cell_start[i+1]).
struct OccupancyGrid {
  double cell_size = 0.2;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  int rows = 0;
  int cols = 0;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint32_t> cell_start;
  std::vector<std::uint32_t> indices;

  [[nodiscard]] int cell_count() const noexcept { return rows * cols; }
  [[nodiscard]] std::span<const std::uint32_t> bin(int cell) const noexcept {
    return {indices.data() + cell_start[cell], indices.data() + cell_start[cell + 1]};
  }
  [[nodiscard]] std::uint64_t total() const noexcept { return indices.size(); }
};

/// Bins every point of the cloud. Cell boundaries lie on integer multiples of cell_size in plane coordinates.
[[nodiscard]] OccupancyGrid build_occupancy(const PointCloud& cloud, const GroundPlane& plane, double cell_size);
/// Bins only the listed points (indices into the cloud).
[[nodiscard]] OccupancyGrid build_occupancy(const PointCloud& cloud, std::span<const std::uint32_t> subset,
                                            const GroundPlane& plane, double cell_size);

/// Indices of all points in cells holding at most density_threshold points, in ascending cell order.
[[nodiscard]] std::vector<std::uint32_t> select_low_density(const OccupancyGrid& grid, std::uint32_t density_threshold);

enum class StructureLabel : std::uint8_t { GroundPlane, Object, FreeSpace, ElevatedStructure };

[[nodiscard]] const char* label_name(StructureLabel label) noexcept;

/// Height bands (meters above the plane) and the free-space rule thresholds.
struct HeightBands {
  double ground_top = 0.2;   ///< ground band is [-0.2, 0.2); anything lower also counts as ground
  double ground_bottom = -0.2;
  double object_top = 2.0;   ///< object band [ground_top, object_top)
  double free_top = 2.8;     ///< free-space band [object_top, free_top); elevated band at and above
  double free_space_max_fraction = 0.05;
  double object_sparse_fraction = 0.10;

  void validate() const;
  bool operator==(const HeightBands&) const = default;
};

struct LabeledCloud {
  PointCloud cloud;
  std::vector<StructureLabel> labels;
};

/// Per-cell height histogram over four bands. A cell is an elevated-structure cell when its free-space band
/// holds < free_space_max_fraction of its points, its elevated band is nonempty and its object band holds
/// < object_sparse_fraction. Points are labeled by band, except that object-band points of elevated cells
/// become ElevatedStructure.
[[nodiscard]] LabeledCloud label_structure(PointCloud cloud, const GroundPlane& plane, double grid_cell,
                                           const HeightBands& bands);

/// Debug export: one "x,y,z,label" line per point with a header row.
[[nodiscard]] std::string labeled_cloud_csv(const LabeledCloud& labeled);

}  // namespace ubd
