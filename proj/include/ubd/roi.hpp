#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ubd/scene_labeling.hpp"

namespace ubd {

/// Object hypothesis: image bounding box of a ground-plane component plus its representative distance.
struct Roi {
  Rect bbox;
  std::vector<std::uint32_t> point_indices;  ///< into the labeled cloud
  double distance_m = 0.0;                   ///< median camera z of the member points
};

/// Occupancy histogram over the Object-labeled points only.
[[nodiscard]] OccupancyGrid roi_histogram(const LabeledCloud& labeled, const GroundPlane& plane, double cell_size);

/// Sorted cell indices of one component.
using CellSet = std::vector<int>;

/// Maximal 8-connected sets of nonempty cells holding at least min_points points, ordered by descending point
/// count and then by smallest member cell index.
[[nodiscard]] std::vector<CellSet> connected_components(const OccupancyGrid& grid, std::uint32_t min_points);

/// Pixel hull and median depth of the component's points. Throws InvalidArgument for an empty component.
[[nodiscard]] Roi back_project_bbox(const CellSet& component, const OccupancyGrid& grid, const PointCloud& cloud);

/// One JSON object per line: {"frame_id", "bbox":[x,y,w,h], "distance_m", "n_points"}.
[[nodiscard]] std::string rois_to_jsonl(std::int64_t frame_id, const std::vector<Roi>& rois);

}  // namespace ubd
