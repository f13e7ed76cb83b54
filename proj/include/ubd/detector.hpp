#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ubd/geometry.hpp"
#include "ubd/roi.hpp"
#include "ubd/template_training.hpp"

namespace ubd {

struct MatchConfig {
  double th_hard = 0.3;
  double th_soft = 0.8;
  double score_scale = 0.3;  ///< tau in s = exp(-d / tau)
  int stride = 4;             ///< sliding step in template pixels
  double nms_overlap = 0.5;
  int maxima_window = 5;      ///< local-maxima half window in template columns
  int anchor_radius = 0;      ///< extra columns evaluated on each side of an anchor
  double window_height_m = 0.9;     ///< physical side of the square upper-body window
  double window_top_margin_m = 0.1; ///< window top sits this far above the ROI top
  int vertical_steps = 1;           ///< vertical offsets tried on each side, in strides
  DepthNormalization norm;

  void validate() const;
  bool operator==(const MatchConfig&) const = default;
};

enum class Band : std::uint8_t { Rejected, Unreliable, Reliable };

[[nodiscard]] const char* band_name(Band band) noexcept;
[[nodiscard]] Band band_from_name(const std::string& name);

struct Detection {
  Rect bbox;
  double score = 0.0;
  Band band = Band::Rejected;
  double distance_m = 0.0;
  int template_id = 0;
  std::optional<double> verified;  ///< verifier score, when the verifier ran
  std::optional<bool> accepted;
  std::int64_t frame_id = 0;
};

/// Raw depth of the window resampled (nearest neighbor) to template_height rows; the width keeps the window's
/// aspect. Pixels outside the image or without depth are invalid. distance_m is left at 0.
[[nodiscard]] Annotation sample_window(const DepthFrame& frame, const Rect& window, int template_height);
/// Crops the window from the depth map (pixels outside the image are invalid), rescales it by
/// template_height / window height with nearest-neighbor sampling and normalizes it by the median of the central
/// reference patch. The result's distance_m is that median.
/// Throws EmptyRoi when the window holds no valid depth and TooSparse when the reference patch is too sparse.
[[nodiscard]] Annotation prepare_roi_window(const DepthFrame& frame, const Rect& window, int template_height,
                                            const DepthNormalization& norm = {});
[[nodiscard]] Annotation prepare_roi_window(const DepthFrame& frame, const Roi& roi, int template_height,
                                            const DepthNormalization& norm = {});

inline constexpr int kNoContour = -1;

/// Topmost foreground row per column (foreground = valid and nearer than the background value clip_m),
/// kNoContour for columns without foreground. Throws NoForeground when no column has any.
[[nodiscard]] std::vector<int> extract_contour(const Annotation& patch, double clip_m = 1.0);

/// Columns whose contour is at least as high (row at most as large) as every present contour within ±window
/// columns. Of a run of adjacent qualifying columns at equal height only the leftmost is kept.
[[nodiscard]] std::vector<int> local_maxima(std::span<const int> contour, int window);

/// Mean of w * (t - x)^2 over the jointly valid pixels of the anchor columns (columns sorted, rows inner).
/// Throws NoOverlap when no pixel is evaluated.
[[nodiscard]] double template_distance(const Annotation& window, const WeightedTemplate& tmpl,
                                       std::span<const int> anchors);

/// Anchor columns widened by radius on each side, clipped to [0, cols), sorted and unique.
[[nodiscard]] std::vector<int> expand_anchors(std::span<const int> anchors, int radius, int cols);

[[nodiscard]] double distance_to_score(double d, double tau);

struct MatchResult {
  double distance = 0.0;
  int template_id = 0;
};

/// Single: the only member. Orientation: minimum distance (ties to the lowest id). Distance: the member whose
/// range contains roi_distance.
[[nodiscard]] MatchResult match_multi(const Annotation& window, const TemplateSet& set, double roi_distance,
                                      std::span<const int> anchors);

[[nodiscard]] Band classify_score(double s, const MatchConfig& cfg) noexcept;

/// Deterministic order: descending score, then ascending bbox.
[[nodiscard]] bool detection_before(const Detection& a, const Detection& b) noexcept;

/// Greedy suppression in detection_before order; a box is dropped when its IoU with a kept box exceeds overlap.
[[nodiscard]] std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double overlap);

/// Candidate upper-body windows for one ROI, in a fixed scan order.
[[nodiscard]] std::vector<Rect> roi_windows(const Roi& roi, const CameraIntrinsics& k, const MatchConfig& cfg);

/// Scores one window; nullopt when the window cannot be evaluated (no depth, sparse center, no contour).
[[nodiscard]] std::optional<Detection> score_window(const DepthFrame& frame, const Rect& window, double roi_distance,
                                                    const TemplateSet& set, const MatchConfig& cfg);

/// Slides windows over every ROI, drops Rejected scores, applies NMS across the frame and sorts the result.
/// Windows that cannot be evaluated are skipped; the reasons are appended to warnings when given.
[[nodiscard]] std::vector<Detection> detect(const DepthFrame& frame, std::span<const Roi> rois,
                                            const TemplateSet& set, const MatchConfig& cfg,
                                            std::vector<std::string>* warnings = nullptr);

/// One JSON object per detection and line.
[[nodiscard]] std::string detections_to_jsonl(std::span<const Detection> dets);
[[nodiscard]] std::vector<Detection> detections_from_jsonl(const std::string& text);

}  // namespace ubd
