#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ubd/grid.hpp"

namespace ubd {

struct CameraIntrinsics {
  double fx = 525.0;  ///< focal length, pixels
  double fy = 525.0;
  double cx = 319.5;  ///< principal point, pixels
  double cy = 239.5;
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Registered depth (+ optional RGB) frame. Depth is stored in meters with 0 marking invalid pixels.
struct DepthFrame {
  Grid<float> depth;
  std::optional<Grid<Rgb8>> rgb;
  CameraIntrinsics intrinsics;
  std::int64_t frame_id = 0;

  [[nodiscard]] std::optional<float> depth_at(int u, int v) const noexcept {
    if (!depth.contains(v, u)) return std::nullopt;
    const float d = depth(v, u);
    if (!(d > 0.0f)) return std::nullopt;
    return d;
  }

  void validate() const;
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// Points in camera coordinates (x right, y down, z forward), meters.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<PixelCoord> pixels;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  [[nodiscard]] bool empty() const noexcept { return points.empty(); }
};

/// Plane normal·p = offset. The normal points to the side the camera is on, so heights above ground are positive.
struct GroundPlane {
  Eigen::Vector3d normal{0.0, -1.0, 0.0};
  double offset = -1.0;

  /// Normalizes (normal, offset) and orients the normal so the camera origin has non-negative height.
  static GroundPlane oriented(const Eigen::Vector3d& normal, double offset);
};

[[nodiscard]] PointCloud backproject(const DepthFrame& frame);

/// Perspective projection of a camera-frame point to continuous pixel coordinates.
[[nodiscard]] Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& k) noexcept;

[[nodiscard]] inline double height_above_plane(const Eigen::Vector3d& point, const GroundPlane& plane) noexcept {
  return plane.normal.dot(point) - plane.offset;
}

struct RansacParams {
  int iterations = 200;
  double inlier_threshold = 0.05;  ///< meters
  std::uint64_t seed = 0;
  /// Hypotheses are scored on a fixed random subset of at most this many points; 0 scores on all points.
  std::size_t max_eval_points = 4000;
};

struct PlaneFit {
  GroundPlane plane;
  /// Indices (into the input) of the points within the threshold of the winning hypothesis.
  std::vector<std::uint32_t> inliers;
};

/// RANSAC over random 3-point hypotheses followed by a least-squares refit over the inliers.
/// Throws InsufficientPoints for fewer than 3 points, DegenerateGeometry when every hypothesis is collinear.
[[nodiscard]] PlaneFit fit_plane_ransac(std::span<const Eigen::Vector3d> points, const RansacParams& params);
[[nodiscard]] PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacParams& params);

/// Total least-squares plane through the given points (centroid + smallest principal axis).
[[nodiscard]] GroundPlane fit_plane_least_squares(std::span<const Eigen::Vector3d> points,
                                                  std::span<const std::uint32_t> indices);

/// Angle between two plane normals in degrees, ignoring orientation.
[[nodiscard]] double normal_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) noexcept;

}  // namespace ubd
