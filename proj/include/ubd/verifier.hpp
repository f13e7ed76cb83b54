#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ubd/detector.hpp"
#include "ubd/geometry.hpp"
#include "ubd/grid.hpp"

namespace ubd {

inline constexpr int kChannelRows = 84;
inline constexpr int kChannelCols = 28;

/// Three 84x28 appearance channels with values in [0, 1].
/// ch2 tiles the half-resolution Y, V (top row) and U (bottom left) planes with an empty bottom-right quadrant.
/// ch3 tiles the gradient magnitudes of the same planes in the same layout and puts their elementwise maximum in
/// the bottom-right quadrant.
struct ChannelStack {
  Grid<float> ch1;
  Grid<float> ch2;
  Grid<float> ch3;
};

struct VerifierConfig {
  double accept_threshold = 0.5;

  void validate() const;
  bool operator==(const VerifierConfig&) const = default;
};

struct VerifierVerdict {
  double original_score = 0.0;
  double verified_score = 0.0;
  bool accepted = false;
  int candidate_count = 0;
};

/// 3:1 (height:width) candidates around a box: the box re-aspected about its center (width kept), shifted by
/// {-0.1, 0, 0.1} of its width / height and scaled by {0.9, 1, 1.1}. A candidate reaching outside the image is
/// clipped and shrunk to the largest centered 3:1 box inside the clipped area; candidates narrower than
/// min_width are dropped and duplicates removed. Order: scale, then vertical, then horizontal offset.
[[nodiscard]] std::vector<Rect> expand_candidates(const Rect& bbox, int image_width, int image_height,
                                                  int min_width = 4);

/// Bilinear resample of an RGB image with pixel-center alignment.
[[nodiscard]] Grid<Rgb8> resize_bilinear(const Grid<Rgb8>& src, int rows, int cols);

/// BT.601 conversion; U and V are shifted and scaled into [0, 1].
struct Yuv {
  float y, u, v;
};
[[nodiscard]] Yuv rgb_to_yuv(Rgb8 p) noexcept;

/// Centered-difference gradient magnitude scaled by 1/sqrt(2) so the result stays in [0, 1]; borders use
/// one-sided differences.
[[nodiscard]] Grid<float> gradient_magnitude(const Grid<float>& plane);

/// Resizes the crop to 84x28 and builds the three channels. Throws InvalidArgument for an empty crop.
[[nodiscard]] ChannelStack build_channels(const Grid<Rgb8>& crop);

/// Copies the part of the image inside the rectangle (clipped to the image).
[[nodiscard]] Grid<Rgb8> crop_image(const Grid<Rgb8>& image, const Rect& r);

class AppearanceScorer {
 public:
  virtual ~AppearanceScorer() = default;
  /// Deterministic score in [0, 1]; must be safe for concurrent calls.
  [[nodiscard]] virtual double score(const ChannelStack& stack) const = 0;
};

class ConstantScorer final : public AppearanceScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  [[nodiscard]] double score(const ChannelStack&) const override { return value_; }

 private:
  double value_;
};

inline constexpr int kPoolCell = 7;
inline constexpr int kFeatureCount = 3 * 2 * (kChannelRows / kPoolCell) * (kChannelCols / kPoolCell);

/// Mean and variance of each 7x7 cell of each channel (channel-major, then cell row-major, mean before variance).
[[nodiscard]] std::vector<double> pooled_features(const ChannelStack& stack);

struct LogisticTraining {
  double l2 = 1e-3;
  int iterations = 400;
  double learning_rate = 0.5;
};

/// Logistic regression over standardized pooled features.
class LogisticScorer final : public AppearanceScorer {
 public:
  LogisticScorer();  ///< zero weights, zero bias, identity standardization

  [[nodiscard]] double score(const ChannelStack& stack) const override;
  [[nodiscard]] double score_features(std::span<const double> features) const;

  /// Full-batch gradient descent on the L2-regularized log loss. Throws EmptyTrainingSet without both classes.
  static LogisticScorer train(std::span<const ChannelStack> positives, std::span<const ChannelStack> negatives,
                              const LogisticTraining& opts = {});

  [[nodiscard]] std::vector<std::uint8_t> encode() const;
  static LogisticScorer decode(std::vector<std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static LogisticScorer load(const std::filesystem::path& path);

  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;  ///< features are (x - mean) * scale
};

/// Max scorer output over the candidates around the detection. Throws MissingRgb when the frame has no color.
[[nodiscard]] VerifierVerdict verify(const Detection& det, const DepthFrame& frame, const AppearanceScorer& scorer,
                                     const VerifierConfig& cfg);

/// Runs verify on every Unreliable detection and records verified / accepted; other detections are untouched.
void apply_verifier(std::span<Detection> dets, const DepthFrame& frame, const AppearanceScorer& scorer,
                    const VerifierConfig& cfg);

/// False only for detections the verifier rejected.
[[nodiscard]] inline bool survives_verification(const Detection& d) noexcept { return d.accepted.value_or(true); }

}  // namespace ubd
