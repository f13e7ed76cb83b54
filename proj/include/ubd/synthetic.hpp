#pragma once

#include <cstdint>
#include <vector>

#include "ubd/geometry.hpp"
#include "ubd/ground_truth.hpp"
#include "ubd/template_training.hpp"

namespace ubd {

/// A standing person on the ground. x is lateral and z forward distance of the body axis, in meters.
struct PersonSpec {
  double x = 0.0;
  double z = 3.0;
  double yaw_deg = 0.0;   ///< 0 faces the camera
  double height_m = 1.75;
  bool camouflaged = false;  ///< clothing and head colored like the street furniture
  std::uint32_t appearance_seed = 0;
  bool operator==(const PersonSpec&) const = default;
};

enum class DistractorKind : std::uint8_t { Box, Can };

/// Box: yaw-rotated cuboid. Can: vertical cylinder of the given height with a dome on top.
struct DistractorSpec {
  DistractorKind kind = DistractorKind::Box;
  double x = 0.0;
  double z = 4.0;
  double width = 0.6;   ///< box width or can diameter
  double depth = 0.6;
  double height = 1.0;  ///< box height or can body height (the dome adds 0.25 * width)
  double yaw_deg = 0.0;
  std::uint32_t appearance_seed = 0;
  bool operator==(const DistractorSpec&) const = default;
};

struct SceneSpec {
  CameraIntrinsics intrinsics;
  double camera_height_m = 1.4;
  double camera_pitch_deg = 5.0;  ///< downward
  double noise_a = 0.005;         ///< depth noise sigma = noise_a + noise_b * z^2
  double noise_b = 0.002;
  double max_range_m = 20.0;      ///< farther returns are invalid
  bool with_rgb = true;
  double illumination = 1.0;  ///< gain applied to the rendered colors
  double rgb_noise = 4.0;     ///< half range of the uniform per-pixel color noise, in 8-bit levels
  std::vector<PersonSpec> persons;
  std::vector<DistractorSpec> distractors;

  /// Throws SpecError for invalid camera, noise or object parameters.
  void validate() const;
};

/// Ground plane of a scene in camera coordinates.
[[nodiscard]] GroundPlane scene_ground_plane(const SceneSpec& spec);

inline constexpr int kGroundId = -1;
inline constexpr int kSkyId = -2;
inline constexpr int kDistractorIdBase = 1000;

struct SyntheticFrame {
  DepthFrame frame;
  GroundTruthFrame gt;
  Grid<int> object_ids;  ///< person index, kDistractorIdBase + distractor index, kGroundId or kSkyId
  std::vector<int> gt_person;  ///< person index of each GT box
};

/// Upper-body ground-truth square of a person: 0.9 m side at the person's chest depth minus 0.1 m, top edge
/// 0.1 m above the head.
[[nodiscard]] Rect person_gt_box(const SceneSpec& spec, const PersonSpec& person);

/// Renders depth (+ RGB) with depth-dependent Gaussian noise and emits one GT box per person. A box is flagged
/// ignore when less than half of it lies in the image or less than half of the person's pixels inside it are
/// visible.
[[nodiscard]] SyntheticFrame generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed,
                                                      std::int64_t frame_id = 0);

/// Random scene parameters for the benchmark.
struct BenchmarkSpec {
  int min_persons = 1;
  int max_persons = 3;
  double min_distance_m = 2.0;
  double max_distance_m = 10.0;
  int min_distractors = 0;
  int max_distractors = 2;
  double can_fraction = 0.5;         ///< share of distractors that are dome-topped cans
  double camouflage_probability = 0.0;
  double low_light_probability = 0.05;  ///< share of frames rendered dim and noisy
  double low_light_min_gain = 0.15;
  double low_light_max_gain = 0.35;
  double low_light_noise = 12.0;
  double min_separation_m = 0.9;     ///< between object axes on the ground
  double lateral_fill = 0.8;         ///< objects stay within this share of the horizontal field of view
  SceneSpec base;                    ///< camera and noise settings; its object lists are ignored

  void validate() const;
};

[[nodiscard]] SceneSpec sample_scene(const BenchmarkSpec& spec, std::uint64_t seed);

/// Frame i uses seed mix(seed, i) and frame id first_id + i.
[[nodiscard]] std::vector<SyntheticFrame> generate_benchmark(const BenchmarkSpec& spec, int n_frames,
                                                             std::uint64_t seed, std::int64_t first_id = 0);

/// SplitMix64 step, used to derive independent per-item seeds.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Normalized training windows cut at the non-ignored GT boxes. Windows whose reference patch is too sparse are
/// skipped.
[[nodiscard]] std::vector<Annotation> annotations_from_frames(const std::vector<SyntheticFrame>& frames,
                                                              const DepthNormalization& norm = {});

/// Single-person annotations whose yaw is drawn around the given modes (Gaussian jitter, degrees).
/// Distances are uniform in [min_distance_m, max_distance_m].
[[nodiscard]] std::vector<Annotation> orientation_annotations(const std::vector<double>& yaw_modes_deg,
                                                              int per_mode, std::uint64_t seed,
                                                              double yaw_jitter_deg = 5.0,
                                                              double min_distance_m = 3.0,
                                                              double max_distance_m = 6.0,
                                                              const DepthNormalization& norm = {});

}  // namespace ubd
