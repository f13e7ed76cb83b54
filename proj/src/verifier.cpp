#include "ubd/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ubd/error.hpp"
#include "ubd/io.hpp"
#include "ubd/model_io.hpp"

namespace ubd {

void VerifierConfig::validate() const {
  if (!(accept_threshold >= 0.0 && accept_threshold <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "accept_threshold must lie in [0, 1]");
  }
}

std::vector<Rect> expand_candidates(const Rect& bbox, int image_width, int image_height, int min_width) {
  static constexpr double kOffsets[] = {-0.1, 0.0, 0.1};
  static constexpr double kScales[] = {0.9, 1.0, 1.1};
  std::vector<Rect> out;
  if (bbox.empty()) return out;
  const double cx = bbox.x + bbox.w / 2.0;
  const double cy = bbox.y + bbox.h / 2.0;
  for (double s : kScales) {
    const int w = std::max(1, static_cast<int>(std::lround(s * bbox.w)));
    const int h = 3 * w;
    for (double oy : kOffsets) {
      for (double ox : kOffsets) {
        const double ccx = cx + ox * bbox.w;
        const double ccy = cy + oy * bbox.h;
        const Rect full{static_cast<int>(std::lround(ccx - w / 2.0)), static_cast<int>(std::lround(ccy - h / 2.0)),
                        w, h};
        const Rect vis = intersect(full, {0, 0, image_width, image_height});
        if (vis.empty()) continue;
        Rect c = vis;
        if (vis.h > 3 * vis.w) {
          c.h = 3 * vis.w;
          c.y = vis.y + (vis.h - c.h) / 2;
        } else if (vis.h < 3 * vis.w) {
          c.w = vis.h / 3;
          c.x = vis.x + (vis.w - c.w) / 2;
          c.h = 3 * c.w;
          c.y = vis.y + (vis.h - c.h) / 2;
        }
        if (c.w < min_width) continue;
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
      }
    }
  }
  return out;
}

Grid<Rgb8> resize_bilinear(const Grid<Rgb8>& src, int rows, int cols) {
  Grid<Rgb8> out(rows, cols);
  if (src.empty()) return out;
  auto axis = [](int n_out, int n_in, std::vector<int>& i0, std::vector<float>& f) {
    i0.resize(n_out);
    f.resize(n_out);
    for (int i = 0; i < n_out; ++i) {
      double s = (i + 0.5) * n_in / n_out - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(n_in - 1));
      i0[i] = std::min(static_cast<int>(s), n_in - 1);
      f[i] = static_cast<float>(s - i0[i]);
    }
  };
  std::vector<int> r0, c0;
  std::vector<float> fr, fc;
  axis(rows, src.rows(), r0, fr);
  axis(cols, src.cols(), c0, fc);
  for (int r = 0; r < rows; ++r) {
    const int ra = r0[r];
    const int rb = std::min(ra + 1, src.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      const int ca = c0[c];
      const int cb = std::min(ca + 1, src.cols() - 1);
      auto mix = [&](auto get) {
        const float top = get(src(ra, ca)) * (1 - fc[c]) + get(src(ra, cb)) * fc[c];
        const float bot = get(src(rb, ca)) * (1 - fc[c]) + get(src(rb, cb)) * fc[c];
        const float v = top * (1 - fr[r]) + bot * fr[r];
        return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      };
      out(r, c) = {mix([](Rgb8 p) { return static_cast<float>(p.r); }),
                   mix([](Rgb8 p) { return static_cast<float>(p.g); }),
                   mix([](Rgb8 p) { return static_cast<float>(p.b); })};
    }
  }
  return out;
}

Yuv rgb_to_yuv(Rgb8 p) noexcept {
  const float r = p.r / 255.0f;
  const float g = p.g / 255.0f;
  const float b = p.b / 255.0f;
  const float y = 0.299f * r + 0.587f * g + 0.114f * b;
  const float u = 0.492f * (b - y);
  const float v = 0.877f * (r - y);
  return {std::clamp(y, 0.0f, 1.0f), std::clamp(u / 0.872f + 0.5f, 0.0f, 1.0f), std::clamp(v / 1.23f + 0.5f, 0.0f, 1.0f)};
}

Grid<float> gradient_magnitude(const Grid<float>& plane) {
  const int rows = plane.rows();
  const int cols = plane.cols();
  Grid<float> out(rows, cols, 0.0f);
  auto diff = [](float lo, float hi, int span) { return span == 0 ? 0.0f : (hi - lo) / static_cast<float>(span); };
  for (int r = 0; r < rows; ++r) {
    const int ra = std::max(0, r - 1);
    const int rb = std::min(rows - 1, r + 1);
    for (int c = 0; c < cols; ++c) {
      const int ca = std::max(0, c - 1);
      const int cb = std::min(cols - 1, c + 1);
      const float gx = diff(plane(r, ca), plane(r, cb), cb - ca);
      const float gy = diff(plane(ra, c), plane(rb, c), rb - ra);
      out(r, c) = std::min(1.0f, std::sqrt(gx * gx + gy * gy) / std::sqrt(2.0f));
    }
  }
  return out;
}

namespace {

Grid<float> half_resolution(const Grid<float>& p) {
  Grid<float> out(p.rows() / 2, p.cols() / 2);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      out(r, c) = 0.25f * (p(2 * r, 2 * c) + p(2 * r, 2 * c + 1) + p(2 * r + 1, 2 * c) + p(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

void paste(Grid<float>& canvas, const Grid<float>& tile, int r0, int c0) {
  for (int r = 0; r < tile.rows(); ++r) {
    for (int c = 0; c < tile.cols(); ++c) canvas(r0 + r, c0 + c) = tile(r, c);
  }
}

}  // namespace

ChannelStack build_channels(const Grid<Rgb8>& crop) {
  if (crop.empty()) throw Error(ErrorCode::InvalidArgument, "empty verifier crop");
  const Grid<Rgb8> img =
      crop.rows() == kChannelRows && crop.cols() == kChannelCols ? crop : resize_bilinear(crop, kChannelRows, kChannelCols);
  Grid<float> y(kChannelRows, kChannelCols), u(kChannelRows, kChannelCols), v(kChannelRows, kChannelCols);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Yuv p = rgb_to_yuv(img.data()[i]);
    y.data()[i] = p.y;
    u.data()[i] = p.u;
    v.data()[i] = p.v;
  }
  const Grid<float> hy = half_resolution(y);
  const Grid<float> hu = half_resolution(u);
  const Grid<float> hv = half_resolution(v);
  const Grid<float> gy = gradient_magnitude(hy);
  const Grid<float> gu = gradient_magnitude(hu);
  const Grid<float> gv = gradient_magnitude(hv);
  Grid<float> gmax(gy.rows(), gy.cols());
  for (std::size_t i = 0; i < gmax.size(); ++i) {
    gmax.data()[i] = std::max({gy.data()[i], gu.data()[i], gv.data()[i]});
  }
  const int hr = kChannelRows / 2;
  const int hc = kChannelCols / 2;
  ChannelStack s;
  s.ch1 = std::move(y);
  s.ch2 = Grid<float>(kChannelRows, kChannelCols, 0.0f);
  paste(s.ch2, hy, 0, 0);
  paste(s.ch2, hv, 0, hc);
  paste(s.ch2, hu, hr, 0);
  s.ch3 = Grid<float>(kChannelRows, kChannelCols, 0.0f);
  paste(s.ch3, gy, 0, 0);
  paste(s.ch3, gv, 0, hc);
  paste(s.ch3, gu, hr, 0);
  paste(s.ch3, gmax, hr, hc);
  return s;
}

Grid<Rgb8> crop_image(const Grid<Rgb8>& image, const Rect& r) {
  const Rect c = intersect(r, {0, 0, image.cols(), image.rows()});
  Grid<Rgb8> out(c.h, c.w);
  for (int y = 0; y < c.h; ++y) {
    const auto in = image.row(c.y + y);
    std::copy(in.begin() + c.x, in.begin() + c.x + c.w, out.row(y).begin());
  }
  return out;
}

std::vector<double> pooled_features(const ChannelStack& stack) {
  std::vector<double> f;
  f.reserve(kFeatureCount);
  for (const Grid<float>* ch : {&stack.ch1, &stack.ch2, &stack.ch3}) {
    for (int r0 = 0; r0 + kPoolCell <= kChannelRows; r0 += kPoolCell) {
      for (int c0 = 0; c0 + kPoolCell <= kChannelCols; c0 += kPoolCell) {
        double sum = 0.0, sq = 0.0;
        for (int r = r0; r < r0 + kPoolCell; ++r) {
          for (int c = c0; c < c0 + kPoolCell; ++c) {
            const double v = (*ch)(r, c);
            sum += v;
            sq += v * v;
          }
        }
        constexpr double n = kPoolCell * kPoolCell;
        const double mean = sum / n;
        f.push_back(mean);
        f.push_back(std::max(0.0, sq / n - mean * mean));
      }
    }
  }
  return f;
}

LogisticScorer::LogisticScorer()
    : weights(kFeatureCount, 0.0), feature_mean(kFeatureCount, 0.0), feature_scale(kFeatureCount, 1.0) {}

double LogisticScorer::score_features(std::span<const double> features) const {
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * (features[i] - feature_mean[i]) * feature_scale[i];
  return 1.0 / (1.0 + std::exp(-z));
}

double LogisticScorer::score(const ChannelStack& stack) const { return score_features(pooled_features(stack)); }

LogisticScorer LogisticScorer::train(std::span<const ChannelStack> positives, std::span<const ChannelStack> negatives,
                                     const LogisticTraining& opts) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCode::EmptyTrainingSet, "scorer training needs positive and negative examples");
  }
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& s : positives) {
    x.push_back(pooled_features(s));
    y.push_back(1.0);
  }
  for (const auto& s : negatives) {
    x.push_back(pooled_features(s));
    y.push_back(0.0);
  }
  const std::size_t n = x.size();
  const std::size_t d = kFeatureCount;
  LogisticScorer m;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& row : x) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& row : x) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    m.feature_mean[j] = mean;
    m.feature_scale[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  for (auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - m.feature_mean[j]) * m.feature_scale[j];
  }
  std::vector<double> grad(d);
  for (int it = 0; it < opts.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = m.bias;
      for (std::size_t j = 0; j < d; ++j) z += m.weights[j] * x[i][j];
      const double err = 1.0 / (1.0 + std::exp(-z)) - y[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[i][j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) {
      m.weights[j] -= opts.learning_rate * (grad[j] / static_cast<double>(n) + opts.l2 * m.weights[j]);
    }
    m.bias -= opts.learning_rate * grad_b / static_cast<double>(n);
  }
  return m;
}

namespace {
constexpr std::string_view kScorerMagic = "UBDSCR";
}

std::vector<std::uint8_t> LogisticScorer::encode() const {
  ByteWriter w;
  w.magic(kScorerMagic);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  w.f64(bias);
  for (double v : weights) w.f64(v);
  for (double v : feature_mean) w.f64(v);
  for (double v : feature_scale) w.f64(v);
  return w.bytes();
}

LogisticScorer LogisticScorer::decode(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic(kScorerMagic);
  if (const auto v = r.u32(); v != kContainerVersion) {
    throw Error(ErrorCode::FormatError, "unsupported scorer container version " + std::to_string(v));
  }
  if (r.u32() != static_cast<std::uint32_t>(kFeatureCount)) {
    throw Error(ErrorCode::FormatError, "scorer feature count mismatch");
  }
  LogisticScorer m;
  m.bias = r.f64();
  for (auto& v : m.weights) v = r.f64();
  for (auto& v : m.feature_mean) v = r.f64();
  for (auto& v : m.feature_scale) v = r.f64();
  r.expect_end();
  return m;
}

void LogisticScorer::save(const std::filesystem::path& path) const {
  io::write_bytes(path, encode());
  nlohmann::ordered_json j;
  j["format"] = "ubd-scorer";
  j["version"] = kContainerVersion;
  j["model"] = "logistic";
  j["features"] = kFeatureCount;
  j["pool_cell"] = kPoolCell;
  io::write_text(path.string() + ".json", j.dump(2) + "\n");
}

LogisticScorer LogisticScorer::load(const std::filesystem::path& path) { return decode(io::read_bytes(path)); }

VerifierVerdict verify(const Detection& det, const DepthFrame& frame, const AppearanceScorer& scorer,
                       const VerifierConfig& cfg) {
  if (!frame.rgb) throw Error(ErrorCode::MissingRgb, "frame " + std::to_string(frame.frame_id) + " has no RGB image");
  VerifierVerdict v;
  v.original_score = det.score;
  const auto candidates = expand_candidates(det.bbox, frame.rgb->cols(), frame.rgb->rows());
  v.candidate_count = static_cast<int>(candidates.size());
  for (const Rect& c : candidates) {
    const double s = std::clamp(scorer.score(build_channels(crop_image(*frame.rgb, c))), 0.0, 1.0);
    v.verified_score = std::max(v.verified_score, s);
  }
  v.accepted = v.verified_score >= cfg.accept_threshold;
  return v;
}

void apply_verifier(std::span<Detection> dets, const DepthFrame& frame, const AppearanceScorer& scorer,
                    const VerifierConfig& cfg) {
  for (auto& d : dets) {
    if (d.band != Band::Unreliable) continue;
    const VerifierVerdict v = verify(d, frame, scorer, cfg);
    d.verified = v.verified_score;
    d.accepted = v.accepted;
  }
}

}  // namespace ubd
