#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ubd/detector.hpp"
#include "ubd/ground_truth.hpp"
#include "ubd/pipeline.hpp"

namespace ubd {

enum class Outcome : std::uint8_t { TruePositive, FalsePositive, Ignored };

struct LabeledDetection {
  std::int64_t frame_id = 0;
  double score = 0.0;
  Outcome outcome = Outcome::FalsePositive;
};

/// Greedy matching in descending score order per frame. A detection is a TP when its IoU with an unmatched,
/// non-ignored GT box reaches overlap_min (best IoU wins, ties to the lower box index); otherwise it is Ignored
/// when it reaches overlap_min with an ignore-flagged box, else FP. Detections the verifier rejected are skipped.
/// Throws FrameMismatch when a detection's frame id has no GT entry.
[[nodiscard]] std::vector<LabeledDetection> match_detections(std::span<const Detection> dets,
                                                             const GroundTruthSet& gt, double overlap_min);

/// Number of non-ignored GT boxes.
[[nodiscard]] std::size_t count_ground_truth(const GroundTruthSet& gt) noexcept;

struct CurvePoint {
  double fppi = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct EvalCurve {
  std::vector<CurvePoint> points;  ///< by threshold descending
  std::size_t frames = 0;
  std::size_t n_gt = 0;
  bool operator==(const EvalCurve&) const = default;
};

/// One point per distinct score (threshold = that score, detections with score >= threshold counted). Without
/// detections the curve is the single point (0, 0) at threshold +inf. Throws NoGroundTruth when n_gt == 0 and
/// InvalidArgument when n_frames == 0.
[[nodiscard]] EvalCurve compute_curve(std::span<const LabeledDetection> labeled, std::size_t n_gt,
                                      std::size_t n_frames);

/// Lowest FPPI among points with recall >= target; nullopt when the target is never reached.
[[nodiscard]] std::optional<double> fppi_at_recall(const EvalCurve& curve, double target);
/// Highest recall among points with FPPI <= max_fppi (0 when none).
[[nodiscard]] double recall_at_fppi(const EvalCurve& curve, double max_fppi);
/// Area under the recall-vs-FPPI step curve over [0, max_fppi]; recall at f is recall_at_fppi(f).
[[nodiscard]] double curve_area(const EvalCurve& curve, double max_fppi = 1.0);

/// "threshold,fppi,recall" rows.
[[nodiscard]] std::string curve_to_csv(const EvalCurve& curve);
/// Self-contained SVG line plot of one or more named curves (recall over FPPI).
[[nodiscard]] std::string curves_to_svg(const std::vector<std::pair<std::string, EvalCurve>>& curves,
                                        const std::string& title, double max_fppi = 2.0);
/// Generic SVG line plot of (x, y) series, used for the cluster-count analysis.
[[nodiscard]] std::string series_to_svg(const std::vector<std::pair<double, double>>& series, const std::string& title,
                                        const std::string& x_label, const std::string& y_label);

/// Detections of one frame plus the frame they came from; the input to the soft-threshold sweep.
struct CachedFrame {
  const DepthFrame* frame = nullptr;
  std::vector<Detection> detections;  ///< every non-rejected depth detection, before verification
};

/// Re-bands the cached detections with each th_soft, verifies the Unreliable ones (verifier scores are memoized
/// per frame and box) and evaluates the survivors. Throws InvalidArgument for th_soft outside [th_hard, 1].
[[nodiscard]] std::vector<EvalCurve> sweep_soft_threshold(std::span<const CachedFrame> frames,
                                                          const GroundTruthSet& gt, const AppearanceScorer& scorer,
                                                          const PipelineConfig& cfg,
                                                          std::span<const double> th_values);

struct TimingTable {
  std::vector<std::pair<std::string, double>> stages;  ///< stage name, mean milliseconds per frame
  double total_ms = 0.0;  ///< mean wall time of the whole frame
  std::size_t frames = 0;
};

/// Runs the pipeline on every frame (after one untimed warm-up run) and averages per-stage wall time.
/// Throws InvalidArgument for fewer than 10 frames.
[[nodiscard]] TimingTable time_pipeline(std::span<const DepthFrame> frames, const TemplateSet& templates,
                                        const AppearanceScorer* scorer, const PipelineConfig& cfg);

[[nodiscard]] std::string timing_to_text(const TimingTable& table);

}  // namespace ubd
