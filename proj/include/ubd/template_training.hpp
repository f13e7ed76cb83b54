#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ubd/grid.hpp"

namespace ubd {

inline constexpr int kTemplateSize = 150;
inline constexpr int kReferencePatch = 30;

/// How raw depth is turned into a normalized patch. Pixels farther than background_band_m from the reference
/// median (either direction) are background and take the value +clip_m; the remaining values are clamped to
/// [-clip_m, clip_m].
struct DepthNormalization {
  double background_band_m = 1.0;
  double clip_m = 1.0;
  double min_reference_fraction = 0.25;  ///< valid share of the reference patch required to normalize

  void validate() const;
  bool operator==(const DepthNormalization&) const = default;
};

/// A normalized training window. Values are meters relative to the reference median.
struct Annotation {
  Grid<float> patch;
  Grid<std::uint8_t> valid_mask;
  double distance_m = 0.0;  ///< median raw depth of the reference patch
  std::string source_id;
};

/// Lower median of the valid values in the central reference x reference block (clipped to the grid).
/// Empty when the block's valid share is below min_fraction.
[[nodiscard]] std::optional<double> reference_median(const Grid<float>& values, const Grid<std::uint8_t>& valid,
                                                     int reference, double min_fraction);

/// Nearest-neighbor resample; target pixel (r, c) reads source (floor((r+0.5)*H/rows), floor((c+0.5)*W/cols)).
template <typename T>
[[nodiscard]] Grid<T> resize_nearest(const Grid<T>& src, int rows, int cols);

/// Median subtraction + background/clip rule applied in place to valid pixels.
void apply_normalization(Grid<float>& values, const Grid<std::uint8_t>& valid, double median,
                         const DepthNormalization& norm);

/// Resizes a raw depth crop (meters) to size x size and subtracts the reference median.
/// Throws TooSparse when the reference patch is under-populated.
[[nodiscard]] Annotation normalize_annotation(const Grid<float>& raw_patch, const Grid<std::uint8_t>& raw_mask,
                                              const DepthNormalization& norm = {}, int size = kTemplateSize,
                                              int reference = kReferencePatch);

struct DepthTemplate {
  Grid<double> values;
  Grid<std::uint8_t> valid;  ///< pixel had at least one valid training sample
  int n_train = 0;
};

struct WeightedTemplate {
  DepthTemplate tmpl;
  Grid<double> weights;
};

enum class TemplateKind : std::uint32_t { Single = 0, Orientation = 1, Distance = 2 };

[[nodiscard]] const char* template_kind_name(TemplateKind kind) noexcept;

/// Half-open interval [lo, hi) in meters; hi may be +infinity.
struct DistanceRange {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool contains(double d) const noexcept { return d >= lo && d < hi; }
  bool operator==(const DistanceRange&) const = default;
};

struct TemplateSet {
  TemplateKind kind = TemplateKind::Single;
  std::vector<WeightedTemplate> members;
  std::vector<DistanceRange> ranges;  ///< Distance kind only, one per member

  void validate() const;
};

/// Builds [b0,b1), [b1,b2), ..., [bn, inf) from ascending boundaries starting at 0.
[[nodiscard]] std::vector<DistanceRange> ranges_from_boundaries(std::span<const double> boundaries);
/// Index of the range containing distance; throws InvalidArgument when none does.
[[nodiscard]] std::size_t dispatch_range(std::span<const DistanceRange> ranges, double distance);

/// Per-pixel mean over the samples valid at that pixel.
[[nodiscard]] DepthTemplate train_single(std::span<const Annotation> samples);

/// Mean template plus weights 1 / max(sigma, sigma_floor) with population standard deviation sigma.
/// Pixels valid in fewer than two samples get 1 / sigma_floor.
[[nodiscard]] WeightedTemplate train_weighted(std::span<const Annotation> samples, double sigma_floor = 0.01);

/// Training energy sum_px [ (1/N_px) sum_i w (t - x_i)^2 + 1/w ] over pixels with at least one valid sample.
/// Its unique minimizer is (t = mean, w = 1/sigma).
[[nodiscard]] double weighted_energy(std::span<const Annotation> samples, const Grid<double>& tmpl,
                                     const Grid<double>& weights);

/// Euclidean distance over jointly valid pixels, with the squared sum scaled by pixels / jointly-valid pixels.
/// +infinity when no pixel is jointly valid.
[[nodiscard]] double masked_distance(const Annotation& a, const Annotation& b);

using Clusters = std::vector<std::vector<std::size_t>>;

/// Lloyd's k-means under masked_distance with seeded random-sample initialization. Empty clusters are re-seeded
/// with the point farthest from its centroid. Clusters are returned sorted by their smallest member.
[[nodiscard]] Clusters kmeans_cluster(std::span<const Annotation> samples, int k, std::uint64_t seed,
                                      int max_iters = 100);

/// Mean silhouette (b - a) / max(a, b) over all samples; members of singleton clusters score 0.
[[nodiscard]] double silhouette_score(std::span<const Annotation> samples, const Clusters& clusters);

/// Same as silhouette_score over a precomputed row-major n x n distance matrix.
[[nodiscard]] double silhouette_from_distances(std::span<const double> distances, std::size_t n,
                                               const Clusters& clusters);

[[nodiscard]] std::vector<double> distance_matrix(std::span<const Annotation> samples);

struct KSelection {
  int best_k = 0;
  std::vector<std::pair<int, double>> scores;  ///< (k, silhouette) in k_range order
};

/// Clusters for every k in k_range and picks the highest silhouette score (ties go to the smaller k).
[[nodiscard]] KSelection select_k(std::span<const Annotation> samples, std::span<const int> k_range,
                                  std::uint64_t seed, int max_iters = 100);

/// k-means clusters, one weighted template per cluster averaged over its own members. k = 1 yields a Single set.
[[nodiscard]] TemplateSet train_orientation_set(std::span<const Annotation> samples, int k, std::uint64_t seed,
                                                double sigma_floor = 0.01);

/// One weighted template per distance range; samples are assigned by distance_m. Throws EmptyRange naming any
/// range with fewer than two samples.
[[nodiscard]] TemplateSet train_distance_set(std::span<const Annotation> samples,
                                             std::span<const DistanceRange> ranges, double sigma_floor = 0.01);

/// Single-kind set wrapping one weighted template.
[[nodiscard]] TemplateSet make_single_set(WeightedTemplate member);

// ---------------------------------------------------------------------------------------------------------------

template <typename T>
Grid<T> resize_nearest(const Grid<T>& src, int rows, int cols) {
  Grid<T> out(rows, cols);
  if (src.empty()) return out;
  std::vector<int> src_col(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) {
    src_col[c] = std::min(src.cols() - 1, static_cast<int>((c + 0.5) * src.cols() / cols));
  }
  for (int r = 0; r < rows; ++r) {
    const int sr = std::min(src.rows() - 1, static_cast<int>((r + 0.5) * src.rows() / rows));
    const auto in = src.row(sr);
    auto dst = out.row(r);
    for (int c = 0; c < cols; ++c) dst[c] = in[src_col[c]];
  }
  return out;
}

}  // namespace ubd
