#include "ubd/template_training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ubd/error.hpp"

namespace ubd {

void DepthNormalization::validate() const {
  if (!(background_band_m > 0.0) || !(clip_m > 0.0)) {
    throw Error(ErrorCode::ConfigError, "normalization band and clip must be positive");
  }
  if (!(min_reference_fraction >= 0.0 && min_reference_fraction <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "min_reference_fraction must lie in [0, 1]");
  }
}

const char* template_kind_name(TemplateKind kind) noexcept {
  switch (kind) {
    case TemplateKind::Single: return "single";
    case TemplateKind::Orientation: return "orientation";
    case TemplateKind::Distance: return "distance";
  }
  return "unknown";
}

std::optional<double> reference_median(const Grid<float>& values, const Grid<std::uint8_t>& valid, int reference,
                                       double min_fraction) {
  const int rr = std::min(reference, values.rows());
  const int rc = std::min(reference, values.cols());
  const int r0 = (values.rows() - rr) / 2;
  const int c0 = (values.cols() - rc) / 2;
  std::vector<float> buf;
  buf.reserve(static_cast<std::size_t>(rr) * rc);
  for (int r = r0; r < r0 + rr; ++r) {
    for (int c = c0; c < c0 + rc; ++c) {
      if (valid(r, c)) buf.push_back(values(r, c));
    }
  }
  const double total = static_cast<double>(rr) * rc;
  if (buf.empty() || static_cast<double>(buf.size()) < min_fraction * total) return std::nullopt;
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>((buf.size() - 1) / 2);
  std::nth_element(buf.begin(), mid, buf.end());
  return static_cast<double>(*mid);
}

void apply_normalization(Grid<float>& values, const Grid<std::uint8_t>& valid, double median,
                         const DepthNormalization& norm) {
  const auto clip = static_cast<float>(norm.clip_m);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid.data()[i]) continue;
    const double rel = static_cast<double>(values.data()[i]) - median;
    values.data()[i] = std::abs(rel) > norm.background_band_m ? clip : std::clamp(static_cast<float>(rel), -clip, clip);
  }
}

Annotation normalize_annotation(const Grid<float>& raw_patch, const Grid<std::uint8_t>& raw_mask,
                                const DepthNormalization& norm, int size, int reference) {
  if (raw_patch.empty()) throw Error(ErrorCode::InvalidArgument, "empty annotation patch");
  if (raw_mask.rows() != raw_patch.rows() || raw_mask.cols() != raw_patch.cols()) {
    throw Error(ErrorCode::InvalidArgument, "annotation mask dimensions differ from patch");
  }
  Annotation a;
  a.patch = resize_nearest(raw_patch, size, size);
  a.valid_mask = resize_nearest(raw_mask, size, size);
  const auto median = reference_median(a.patch, a.valid_mask, reference, norm.min_reference_fraction);
  if (!median) throw Error(ErrorCode::TooSparse, "reference patch has too few valid pixels");
  a.distance_m = *median;
  apply_normalization(a.patch, a.valid_mask, *median, norm);
  return a;
}

namespace {

void check_same_shape(std::span<const Annotation> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
  const int rows = samples[0].patch.rows();
  const int cols = samples[0].patch.cols();
  for (const auto& s : samples) {
    if (s.patch.rows() != rows || s.patch.cols() != cols || s.valid_mask.rows() != rows ||
        s.valid_mask.cols() != cols) {
      throw Error(ErrorCode::InvalidArgument, "training samples differ in size");
    }
  }
}

struct PixelMoments {
  Grid<double> mean;
  Grid<double> sum_sq_dev;
  Grid<int> count;
};

// Two-pass masked mean and squared deviation, summed in sample order.
PixelMoments moments(std::span<const Annotation> samples) {
  const int rows = samples[0].patch.rows();
  const int cols = samples[0].patch.cols();
  PixelMoments m{Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0), Grid<int>(rows, cols, 0)};
  const std::size_t n = m.mean.size();
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.valid_mask.data()[i]) continue;
      m.mean.data()[i] += s.patch.data()[i];
      ++m.count.data()[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (m.count.data()[i] > 0) m.mean.data()[i] /= m.count.data()[i];
  }
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.valid_mask.data()[i]) continue;
      const double d = m.mean.data()[i] - s.patch.data()[i];
      m.sum_sq_dev.data()[i] += d * d;
    }
  }
  return m;
}

DepthTemplate template_from(const PixelMoments& m, int n_train) {
  DepthTemplate t;
  t.values = m.mean;
  t.valid = Grid<std::uint8_t>(m.count.rows(), m.count.cols(), 0);
  for (std::size_t i = 0; i < m.count.size(); ++i) t.valid.data()[i] = m.count.data()[i] > 0 ? 1 : 0;
  t.n_train = n_train;
  return t;
}

}  // namespace

DepthTemplate train_single(std::span<const Annotation> samples) {
  check_same_shape(samples);
  return template_from(moments(samples), static_cast<int>(samples.size()));
}

WeightedTemplate train_weighted(std::span<const Annotation> samples, double sigma_floor) {
  check_same_shape(samples);
  if (samples.size() < 2) throw Error(ErrorCode::SingleSample, "weights need at least two samples");
  if (!(sigma_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_floor must be positive");
  const PixelMoments m = moments(samples);
  WeightedTemplate wt;
  wt.tmpl = template_from(m, static_cast<int>(samples.size()));
  wt.weights = Grid<double>(m.mean.rows(), m.mean.cols(), 1.0 / sigma_floor);
  for (std::size_t i = 0; i < m.mean.size(); ++i) {
    const int n = m.count.data()[i];
    if (n < 2) continue;
    const double sigma = std::sqrt(m.sum_sq_dev.data()[i] / n);
    wt.weights.data()[i] = 1.0 / std::max(sigma, sigma_floor);
  }
  return wt;
}

double weighted_energy(std::span<const Annotation> samples, const Grid<double>& tmpl, const Grid<double>& weights) {
  check_same_shape(samples);
  const std::size_t n = tmpl.size();
  std::vector<double> data_term(n, 0.0);
  std::vector<int> count(n, 0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.valid_mask.data()[i]) continue;
      const double d = tmpl.data()[i] - s.patch.data()[i];
      data_term[i] += d * d;
      ++count[i];
    }
  }
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) continue;
    const double w = weights.data()[i];
    e += w * data_term[i] / count[i] + 1.0 / w;
  }
  return e;
}

// ---------------------------------------------------------------------------------------------------------------
// Clustering

namespace {

// Flattened masked vector; also used for centroids.
struct MaskedVec {
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
};

double masked_distance_raw(const float* a, const std::uint8_t* am, const double* b, const std::uint8_t* bm,
                           std::size_t n) {
  double sum = 0.0;
  std::size_t joint = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(am[i] && bm[i])) continue;
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
    ++joint;
  }
  if (joint == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(sum * static_cast<double>(n) / static_cast<double>(joint));
}

double masked_distance_ff(const Annotation& a, const Annotation& b) {
  const std::size_t n = a.patch.size();
  const float* av = a.patch.data().data();
  const float* bv = b.patch.data().data();
  const auto* am = a.valid_mask.data().data();
  const auto* bm = b.valid_mask.data().data();
  double sum = 0.0;
  std::size_t joint = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(am[i] && bm[i])) continue;
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    sum += d * d;
    ++joint;
  }
  if (joint == 0) return std::numeric_limits<double>::infinity();
  return std::sqrt(sum * static_cast<double>(n) / static_cast<double>(joint));
}

MaskedVec centroid_of(std::span<const Annotation> samples, const std::vector<std::size_t>& members) {
  const std::size_t n = samples[0].patch.size();
  MaskedVec c{std::vector<double>(n, 0.0), std::vector<std::uint8_t>(n, 0)};
  std::vector<int> count(n, 0);
  for (auto m : members) {
    const auto& s = samples[m];
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.valid_mask.data()[i]) continue;
      c.values[i] += s.patch.data()[i];
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) continue;
    c.values[i] /= count[i];
    c.valid[i] = 1;
  }
  return c;
}

MaskedVec as_centroid(const Annotation& s) {
  MaskedVec c;
  c.values.assign(s.patch.data().begin(), s.patch.data().end());
  c.valid = s.valid_mask.data();
  return c;
}

double distance_to(const Annotation& s, const MaskedVec& c) {
  return masked_distance_raw(s.patch.data().data(), s.valid_mask.data().data(), c.values.data(), c.valid.data(),
                             c.values.size());
}

Clusters canonical(std::vector<std::vector<std::size_t>> clusters) {
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.empty() || b.empty()) return !a.empty() && b.empty();
    return a.front() < b.front();
  });
  return clusters;
}

}  // namespace

double masked_distance(const Annotation& a, const Annotation& b) {
  if (a.patch.rows() != b.patch.rows() || a.patch.cols() != b.patch.cols()) {
    throw Error(ErrorCode::InvalidArgument, "masked_distance: size mismatch");
  }
  return masked_distance_ff(a, b);
}

Clusters kmeans_cluster(std::span<const Annotation> samples, int k, std::uint64_t seed, int max_iters) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "k-means needs k >= 2");
  if (samples.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewSamples,
                "k-means needs at least k samples (k=" + std::to_string(k) + ", n=" + std::to_string(samples.size()) + ")");
  }
  check_same_shape(samples);
  const std::size_t n = samples.size();

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<MaskedVec> centroids;
  for (int i = 0; i < k; ++i) centroids.push_back(as_centroid(samples[order[i]]));

  std::vector<int> assign(n, -1);
  std::vector<double> dist_to_own(n, 0.0);
  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = distance_to(samples[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      dist_to_own[i] = best_d;
    }

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) members[assign[i]].push_back(i);
    // Re-seed empty clusters from the point farthest from its centroid (never emptying another cluster).
    for (int c = 0; c < k; ++c) {
      if (!members[c].empty()) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (members[assign[i]].size() < 2) continue;
        if (dist_to_own[i] > far_d) {
          far_d = dist_to_own[i];
          far = i;
        }
      }
      if (far == n) break;
      auto& from = members[assign[far]];
      from.erase(std::find(from.begin(), from.end(), far));
      assign[far] = c;
      dist_to_own[far] = 0.0;
      members[c].push_back(far);
      changed = true;
    }
    if (!changed && iter > 0) break;
    for (int c = 0; c < k; ++c) centroids[c] = centroid_of(samples, members[c]);
    if (!changed) break;
  }

  std::vector<std::vector<std::size_t>> clusters(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) clusters[assign[i]].push_back(i);
  return canonical(std::move(clusters));
}

std::vector<double> distance_matrix(std::span<const Annotation> samples) {
  check_same_shape(samples);
  const std::size_t n = samples.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = masked_distance_ff(samples[i], samples[j]);
    }
  }
  return d;
}

double silhouette_from_distances(std::span<const double> distances, std::size_t n, const Clusters& clusters) {
  if (clusters.size() < 2) throw Error(ErrorCode::DegenerateClustering, "silhouette needs at least two clusters");
  std::vector<int> label(n, -1);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].empty()) throw Error(ErrorCode::DegenerateClustering, "silhouette with an empty cluster");
    for (auto i : clusters[c]) {
      if (i >= n || label[i] != -1) throw Error(ErrorCode::DegenerateClustering, "clusters are not a partition");
      label[i] = static_cast<int>(c);
    }
  }
  double total = 0.0;
  std::size_t objects = 0;
  std::vector<double> sum_to(clusters.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < 0) continue;
    ++objects;
    const auto& own = clusters[label[i]];
    if (own.size() == 1) continue;
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      for (auto j : clusters[c]) sum_to[c] += distances[i * n + j];
    }
    const double a = sum_to[label[i]] / static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (static_cast<int>(c) == label[i]) continue;
      b = std::min(b, sum_to[c] / static_cast<double>(clusters[c].size()));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return objects == 0 ? 0.0 : total / static_cast<double>(objects);
}

double silhouette_score(std::span<const Annotation> samples, const Clusters& clusters) {
  if (clusters.size() < 2) throw Error(ErrorCode::DegenerateClustering, "silhouette needs at least two clusters");
  const auto d = distance_matrix(samples);
  return silhouette_from_distances(d, samples.size(), clusters);
}

KSelection select_k(std::span<const Annotation> samples, std::span<const int> k_range, std::uint64_t seed,
                    int max_iters) {
  if (k_range.empty()) throw Error(ErrorCode::InvalidArgument, "k range is empty");
  const auto d = distance_matrix(samples);
  KSelection sel;
  double best = -std::numeric_limits<double>::infinity();
  for (int k : k_range) {
    const Clusters clusters = kmeans_cluster(samples, k, seed, max_iters);
    const double s = silhouette_from_distances(d, samples.size(), clusters);
    sel.scores.emplace_back(k, s);
    if (s > best || (s == best && k < sel.best_k)) {
      best = s;
      sel.best_k = k;
    }
  }
  return sel;
}

// ---------------------------------------------------------------------------------------------------------------
// Template sets

std::vector<DistanceRange> ranges_from_boundaries(std::span<const double> boundaries) {
  if (boundaries.empty() || boundaries.front() != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "distance boundaries must start at 0");
  }
  std::vector<DistanceRange> out;
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const double hi = i + 1 < boundaries.size() ? boundaries[i + 1] : std::numeric_limits<double>::infinity();
    if (!(hi > boundaries[i])) throw Error(ErrorCode::InvalidArgument, "distance boundaries must be increasing");
    out.push_back({boundaries[i], hi});
  }
  return out;
}

std::size_t dispatch_range(std::span<const DistanceRange> ranges, double distance) {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].contains(distance)) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "distance " + std::to_string(distance) + " m is outside every range");
}

void TemplateSet::validate() const {
  if (members.empty()) throw Error(ErrorCode::InvalidArgument, "template set has no members");
  switch (kind) {
    case TemplateKind::Single:
      if (members.size() != 1) throw Error(ErrorCode::InvalidArgument, "single template set needs exactly one member");
      break;
    case TemplateKind::Orientation:
      if (members.size() < 2) throw Error(ErrorCode::InvalidArgument, "orientation set needs at least two members");
      break;
    case TemplateKind::Distance: {
      if (ranges.size() != members.size()) {
        throw Error(ErrorCode::InvalidArgument, "distance set needs one range per member");
      }
      if (ranges.front().lo != 0.0 || !std::isinf(ranges.back().hi)) {
        throw Error(ErrorCode::InvalidArgument, "distance ranges must cover [0, inf)");
      }
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (!(ranges[i].hi > ranges[i].lo)) throw Error(ErrorCode::InvalidArgument, "empty distance range");
        if (i > 0 && ranges[i].lo != ranges[i - 1].hi) {
          throw Error(ErrorCode::InvalidArgument, "distance ranges must be contiguous");
        }
      }
      break;
    }
  }
  const int rows = members[0].tmpl.values.rows();
  const int cols = members[0].tmpl.values.cols();
  for (const auto& m : members) {
    if (m.tmpl.values.rows() != rows || m.tmpl.values.cols() != cols || m.weights.rows() != rows ||
        m.weights.cols() != cols || m.tmpl.valid.rows() != rows || m.tmpl.valid.cols() != cols) {
      throw Error(ErrorCode::InvalidArgument, "template members differ in size");
    }
    if (m.tmpl.n_train < 1) throw Error(ErrorCode::InvalidArgument, "template trained on no samples");
    for (double w : m.weights.data()) {
      if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "template weights must be positive");
    }
  }
}

TemplateSet make_single_set(WeightedTemplate member) {
  TemplateSet set;
  set.kind = TemplateKind::Single;
  set.members.push_back(std::move(member));
  return set;
}

namespace {

std::vector<Annotation> gather(std::span<const Annotation> samples, const std::vector<std::size_t>& idx) {
  std::vector<Annotation> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

}  // namespace

TemplateSet train_orientation_set(std::span<const Annotation> samples, int k, std::uint64_t seed, double sigma_floor) {
  if (k == 1) return make_single_set(train_weighted(samples, sigma_floor));
  const Clusters clusters = kmeans_cluster(samples, k, seed);
  TemplateSet set;
  set.kind = TemplateKind::Orientation;
  for (const auto& members : clusters) set.members.push_back(train_weighted(gather(samples, members), sigma_floor));
  return set;
}

TemplateSet train_distance_set(std::span<const Annotation> samples, std::span<const DistanceRange> ranges,
                               double sigma_floor) {
  TemplateSet set;
  set.kind = TemplateKind::Distance;
  set.ranges.assign(ranges.begin(), ranges.end());
  std::vector<std::vector<std::size_t>> buckets(ranges.size());
  for (std::size_t i = 0; i < samples.size(); ++i) buckets[dispatch_range(ranges, samples[i].distance_m)].push_back(i);
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    if (buckets[r].size() < 2) {
      throw Error(ErrorCode::EmptyRange, "distance range [" + std::to_string(ranges[r].lo) + ", " +
                                             std::to_string(ranges[r].hi) + ") has " +
                                             std::to_string(buckets[r].size()) + " samples (need 2)");
    }
    set.members.push_back(train_weighted(gather(samples, buckets[r]), sigma_floor));
  }
  set.validate();
  return set;
}

}  // namespace ubd
