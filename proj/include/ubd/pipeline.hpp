#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ubd/detector.hpp"
#include "ubd/geometry.hpp"
#include "ubd/ground_truth.hpp"
#include "ubd/roi.hpp"
#include "ubd/scene_labeling.hpp"
#include "ubd/verifier.hpp"

namespace ubd {

struct GeometryConfig {
  RansacParams ransac;
  double occupancy_cell_m = 0.2;
  std::uint32_t density_threshold = 1000;  ///< occupancy cells with at most this many points feed RANSAC
  std::uint32_t min_plane_points = 50;     ///< below this the whole cloud is used instead of the selection
  double camera_height_m = 1.4;            ///< rough prior plane
  double camera_pitch_deg = 5.0;
  double max_tilt_deg = 30.0;              ///< fits tilted further from the prior fall back to the prior
  std::optional<GroundPlane> fixed_plane;  ///< skips estimation when set

  bool operator==(const GeometryConfig& o) const;
};

struct LabelingConfig {
  double cell_m = 0.2;
  HeightBands bands;
  bool operator==(const LabelingConfig&) const = default;
};

struct RoiConfig {
  double cell_m = 0.2;
  std::uint32_t min_points = 50;
  bool operator==(const RoiConfig&) const = default;
};

struct EvaluationConfig {
  double overlap = 0.5;
  bool operator==(const EvaluationConfig&) const = default;
};

struct PipelineConfig {
  GeometryConfig geometry;
  LabelingConfig labeling;
  RoiConfig roi;
  MatchConfig match;
  VerifierConfig verifier;
  EvaluationConfig evaluation;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

/// JSON document with one object per parameter group. Unknown keys are rejected; missing keys keep defaults.
[[nodiscard]] std::string config_to_json(const PipelineConfig& cfg);
[[nodiscard]] PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base = {});
/// Applies one "group.key=value" override (value parsed as JSON, bare strings allowed).
void apply_config_override(PipelineConfig& cfg, const std::string& assignment);

/// Prior plane for a camera at the given height above flat ground, pitched down by pitch_deg.
[[nodiscard]] GroundPlane prior_ground_plane(double camera_height_m, double camera_pitch_deg);

struct PlaneEstimate {
  GroundPlane plane;
  std::size_t selected = 0;  ///< points handed to RANSAC
  std::size_t inliers = 0;
  bool used_prior = false;   ///< fixed plane, too few points or an implausible fit
};

/// Occupancy on the prior plane, low-density selection, RANSAC and least-squares refit.
[[nodiscard]] PlaneEstimate estimate_ground_plane(const PointCloud& cloud, const GeometryConfig& cfg);

/// Structure labeling, Object histogram, connected components and bounding boxes.
[[nodiscard]] std::vector<Roi> extract_rois(const PointCloud& cloud, const GroundPlane& plane,
                                            const PipelineConfig& cfg, LabeledCloud* labeled_out = nullptr);

struct StageTimes {
  double plane_ms = 0.0;  ///< back-projection and ground plane
  double roi_ms = 0.0;
  double detector_ms = 0.0;
  double verifier_ms = 0.0;
};

struct FrameResult {
  PlaneEstimate plane;
  std::vector<Roi> rois;
  std::vector<Detection> detections;  ///< after verification when a scorer was given
};

/// Depth-only stages and, when scorer is non-null, verification of the Unreliable detections. Detections the
/// verifier rejects stay in the list with accepted = false.
[[nodiscard]] FrameResult run_pipeline(const DepthFrame& frame, const TemplateSet& templates,
                                       const AppearanceScorer* scorer, const PipelineConfig& cfg,
                                       StageTimes* times = nullptr, std::vector<std::string>* warnings = nullptr);

struct ScorerExamples {
  std::vector<ChannelStack> positives;
  std::vector<ChannelStack> negatives;
};

/// Positives: 3:1 candidates around the non-ignored GT boxes. Negatives: candidates around detector windows of
/// ROIs away from every GT box, plus random 3:1 boxes away from every GT box.
[[nodiscard]] ScorerExamples collect_scorer_examples(std::span<const DepthFrame> frames,
                                                     std::span<const GroundTruthFrame> gt,
                                                     const PipelineConfig& cfg, std::uint64_t seed,
                                                     int random_negatives_per_frame = 4);

}  // namespace ubd
