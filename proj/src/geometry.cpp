#include "ubd/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include "ubd/error.hpp"

namespace ubd {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside the image");
  }
}

void DepthFrame::validate() const {
  intrinsics.validate();
  if (depth.rows() != intrinsics.height || depth.cols() != intrinsics.width) {
    throw Error(ErrorCode::InvalidArgument, "depth dimensions do not match intrinsics");
  }
  for (float d : depth.data()) {
    if (d < 0.0f || std::isnan(d)) throw Error(ErrorCode::InvalidArgument, "negative or NaN depth value");
  }
  if (rgb && (rgb->rows() != depth.rows() || rgb->cols() != depth.cols())) {
    throw Error(ErrorCode::InvalidArgument, "rgb dimensions do not match depth");
  }
}

GroundPlane GroundPlane::oriented(const Eigen::Vector3d& normal, double offset) {
  const double n = normal.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "plane normal must be nonzero");
  GroundPlane p{normal / n, offset / n};
  // Camera origin height is -offset; flip so it is non-negative. A plane through the origin keeps the
  // normal pointing up in the image (-y).
  if (p.offset > 0.0 || (p.offset == 0.0 && p.normal.y() > 0.0)) {
    p.normal = -p.normal;
    p.offset = -p.offset;
  }
  return p;
}

PointCloud backproject(const DepthFrame& frame) {
  const auto& k = frame.intrinsics;
  PointCloud cloud;
  const int rows = frame.depth.rows();
  const int cols = frame.depth.cols();
  std::size_t valid = 0;
  for (float d : frame.depth.data()) valid += d > 0.0f ? 1 : 0;
  cloud.points.reserve(valid);
  cloud.pixels.reserve(valid);
  const double inv_fx = 1.0 / k.fx;
  const double inv_fy = 1.0 / k.fy;
  for (int v = 0; v < rows; ++v) {
    const auto row = frame.depth.row(v);
    const double ry = (v - k.cy) * inv_fy;
    for (int u = 0; u < cols; ++u) {
      const double z = row[u];
      if (!(z > 0.0)) continue;
      cloud.points.emplace_back((u - k.cx) * inv_fx * z, ry * z, z);
      cloud.pixels.push_back({u, v});
    }
  }
  return cloud;
}

Eigen::Vector2d project(const Eigen::Vector3d& p, const CameraIntrinsics& k) noexcept {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

double normal_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) noexcept {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

GroundPlane fit_plane_least_squares(std::span<const Eigen::Vector3d> points, std::span<const std::uint32_t> indices) {
  if (indices.size() < 3) throw Error(ErrorCode::InsufficientPoints, "least-squares plane needs at least 3 points");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (auto i : indices) centroid += points[i];
  centroid /= static_cast<double>(indices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (auto i : indices) {
    const Eigen::Vector3d d = points[i] - centroid;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d normal = solver.eigenvectors().col(0);
  return GroundPlane::oriented(normal, normal.dot(centroid));
}

namespace {

// Collinearity is judged relative to the triangle's edge lengths so the test is scale and rigid-motion invariant.
bool hypothesis_from(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                     Eigen::Vector3d& normal, double& offset) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d n = ab.cross(ac);
  const double scale = ab.norm() * ac.norm();
  const double len = n.norm();
  if (!(scale > 0.0) || len <= 1e-9 * scale) return false;
  normal = n / len;
  offset = normal.dot(a);
  return true;
}

}  // namespace

PlaneFit fit_plane_ransac(std::span<const Eigen::Vector3d> points, const RansacParams& params) {
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorCode::InsufficientPoints, "RANSAC needs at least 3 points, got " + std::to_string(n));
  if (params.iterations < 1) throw Error(ErrorCode::InvalidArgument, "RANSAC needs at least one iteration");
  if (!(params.inlier_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier threshold must be positive");

  std::mt19937_64 rng(params.seed);

  // Fixed scoring subset, chosen by index only.
  std::vector<std::uint32_t> eval(n);
  std::iota(eval.begin(), eval.end(), 0u);
  if (params.max_eval_points > 0 && n > params.max_eval_points) {
    for (std::size_t i = 0; i < params.max_eval_points; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(eval[i], eval[pick(rng)]);
    }
    eval.resize(params.max_eval_points);
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const double thr = params.inlier_threshold;
  std::size_t best_count = 0;
  bool found = false;
  Eigen::Vector3d best_normal;
  double best_offset = 0.0;
  for (int it = 0; it < params.iterations; ++it) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    std::size_t i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    Eigen::Vector3d normal;
    double offset = 0.0;
    if (!hypothesis_from(points[i0], points[i1], points[i2], normal, offset)) continue;
    std::size_t count = 0;
    for (auto idx : eval) count += std::abs(normal.dot(points[idx]) - offset) <= thr ? 1 : 0;
    if (!found || count > best_count) {
      found = true;
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }
  if (!found) throw Error(ErrorCode::DegenerateGeometry, "every RANSAC hypothesis was degenerate");

  PlaneFit fit;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(points[i]) - best_offset) <= thr) fit.inliers.push_back(static_cast<std::uint32_t>(i));
  }
  fit.plane = fit.inliers.size() >= 3 ? fit_plane_least_squares(points, fit.inliers)
                                      : GroundPlane::oriented(best_normal, best_offset);
  return fit;
}

PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacParams& params) {
  return fit_plane_ransac(std::span<const Eigen::Vector3d>(cloud.points), params);
}

}  // namespace ubd
