#include "ubd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "ubd/error.hpp"

namespace ubd {

void MatchConfig::validate() const {
  if (!(th_hard >= 0.0 && th_hard <= th_soft && th_soft <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "thresholds must satisfy 0 <= th_hard <= th_soft <= 1");
  }
  if (!(score_scale > 0.0)) throw Error(ErrorCode::ConfigError, "score_scale must be positive");
  if (stride < 1) throw Error(ErrorCode::ConfigError, "stride must be at least 1");
  if (!(nms_overlap > 0.0 && nms_overlap <= 1.0)) throw Error(ErrorCode::ConfigError, "nms_overlap must lie in (0, 1]");
  if (maxima_window < 0 || anchor_radius < 0 || vertical_steps < 0) {
    throw Error(ErrorCode::ConfigError, "maxima_window, anchor_radius and vertical_steps must be non-negative");
  }
  if (!(window_height_m > 0.0) || !(window_top_margin_m >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "window geometry must be positive");
  }
  norm.validate();
}

const char* band_name(Band band) noexcept {
  switch (band) {
    case Band::Rejected: return "rejected";
    case Band::Unreliable: return "unreliable";
    case Band::Reliable: return "reliable";
  }
  return "unknown";
}

Band band_from_name(const std::string& name) {
  if (name == "rejected") return Band::Rejected;
  if (name == "unreliable") return Band::Unreliable;
  if (name == "reliable") return Band::Reliable;
  throw Error(ErrorCode::FormatError, "unknown band '" + name + "'");
}

Annotation sample_window(const DepthFrame& frame, const Rect& window, int template_height) {
  if (window.empty() || template_height < 1) throw Error(ErrorCode::InvalidArgument, "window must have positive area");
  const int rows = template_height;
  const int cols = std::max(1, static_cast<int>(std::lround(window.w * static_cast<double>(rows) / window.h)));
  Annotation a;
  a.patch = Grid<float>(rows, cols, 0.0f);
  a.valid_mask = Grid<std::uint8_t>(rows, cols, 0);

  std::vector<int> src_col(static_cast<std::size_t>(cols));
  for (int c = 0; c < cols; ++c) src_col[c] = window.x + static_cast<int>((c + 0.5) * window.w / cols);
  for (int r = 0; r < rows; ++r) {
    const int v = window.y + static_cast<int>((r + 0.5) * window.h / rows);
    if (v < 0 || v >= frame.depth.rows()) continue;
    const auto in = frame.depth.row(v);
    auto out = a.patch.row(r);
    auto mask = a.valid_mask.row(r);
    for (int c = 0; c < cols; ++c) {
      const int u = src_col[c];
      if (u < 0 || u >= frame.depth.cols()) continue;
      const float d = in[u];
      if (!(d > 0.0f)) continue;
      out[c] = d;
      mask[c] = 1;
    }
  }
  return a;
}

Annotation prepare_roi_window(const DepthFrame& frame, const Rect& window, int template_height,
                              const DepthNormalization& norm) {
  Annotation a = sample_window(frame, window, template_height);
  if (std::none_of(a.valid_mask.data().begin(), a.valid_mask.data().end(), [](std::uint8_t m) { return m != 0; })) {
    throw Error(ErrorCode::EmptyRoi, "window holds no valid depth");
  }
  const auto median = reference_median(a.patch, a.valid_mask, kReferencePatch, norm.min_reference_fraction);
  if (!median) throw Error(ErrorCode::TooSparse, "window reference patch has too few valid pixels");
  a.distance_m = *median;
  apply_normalization(a.patch, a.valid_mask, *median, norm);
  return a;
}

Annotation prepare_roi_window(const DepthFrame& frame, const Roi& roi, int template_height,
                              const DepthNormalization& norm) {
  return prepare_roi_window(frame, roi.bbox, template_height, norm);
}

std::vector<int> extract_contour(const Annotation& patch, double clip_m) {
  const int rows = patch.patch.rows();
  const int cols = patch.patch.cols();
  std::vector<int> contour(static_cast<std::size_t>(cols), kNoContour);
  const auto fg_limit = static_cast<float>(clip_m);
  int remaining = cols;
  for (int r = 0; r < rows && remaining > 0; ++r) {
    const auto vals = patch.patch.row(r);
    const auto mask = patch.valid_mask.row(r);
    for (int c = 0; c < cols; ++c) {
      if (contour[c] != kNoContour || !mask[c] || !(vals[c] < fg_limit)) continue;
      contour[c] = r;
      --remaining;
    }
  }
  if (remaining == cols) throw Error(ErrorCode::NoForeground, "window has no foreground pixels");
  return contour;
}

std::vector<int> local_maxima(std::span<const int> contour, int window) {
  const int n = static_cast<int>(contour.size());
  std::vector<int> out;
  bool prev_qualified = false;
  for (int c = 0; c < n; ++c) {
    bool q = contour[c] != kNoContour;
    for (int j = std::max(0, c - window); q && j <= std::min(n - 1, c + window); ++j) {
      if (contour[j] != kNoContour && contour[j] < contour[c]) q = false;
    }
    if (q && !(prev_qualified && contour[c - 1] == contour[c])) out.push_back(c);
    prev_qualified = q;
  }
  return out;
}

std::vector<int> expand_anchors(std::span<const int> anchors, int radius, int cols) {
  std::vector<int> out;
  for (int a : anchors) {
    for (int c = std::max(0, a - radius); c <= std::min(cols - 1, a + radius); ++c) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double template_distance(const Annotation& window, const WeightedTemplate& tmpl, std::span<const int> anchors) {
  const int rows = window.patch.rows();
  const int cols = window.patch.cols();
  if (tmpl.tmpl.values.rows() != rows || tmpl.tmpl.values.cols() != cols) {
    throw Error(ErrorCode::InvalidArgument, "window and template sizes differ");
  }
  std::vector<int> sorted(anchors.begin(), anchors.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  double sum = 0.0;
  std::size_t n = 0;
  for (int c : sorted) {
    if (c < 0 || c >= cols) continue;
    for (int r = 0; r < rows; ++r) {
      if (!window.valid_mask(r, c) || !tmpl.tmpl.valid(r, c)) continue;
      const double d = tmpl.tmpl.values(r, c) - static_cast<double>(window.patch(r, c));
      sum += tmpl.weights(r, c) * (d * d);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::NoOverlap, "no jointly valid pixels in the anchor columns");
  return sum / static_cast<double>(n);
}

double distance_to_score(double d, double tau) { return std::exp(-d / tau); }

MatchResult match_multi(const Annotation& window, const TemplateSet& set, double roi_distance,
                        std::span<const int> anchors) {
  switch (set.kind) {
    case TemplateKind::Single:
      return {template_distance(window, set.members.at(0), anchors), 0};
    case TemplateKind::Distance: {
      const auto id = dispatch_range(set.ranges, roi_distance);
      return {template_distance(window, set.members.at(id), anchors), static_cast<int>(id)};
    }
    case TemplateKind::Orientation: {
      MatchResult best{std::numeric_limits<double>::infinity(), 0};
      for (std::size_t i = 0; i < set.members.size(); ++i) {
        const double d = template_distance(window, set.members[i], anchors);
        if (d < best.distance) best = {d, static_cast<int>(i)};
      }
      return best;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown template kind");
}

Band classify_score(double s, const MatchConfig& cfg) noexcept {
  if (s < cfg.th_hard) return Band::Rejected;
  if (s < cfg.th_soft) return Band::Unreliable;
  return Band::Reliable;
}

bool detection_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.bbox < b.bbox;
}

std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double overlap) {
  std::sort(dets.begin(), dets.end(), detection_before);
  std::vector<Detection> kept;
  for (auto& d : dets) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) { return iou(k.bbox, d.bbox) > overlap; });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<Rect> roi_windows(const Roi& roi, const CameraIntrinsics& k, const MatchConfig& cfg) {
  std::vector<Rect> out;
  if (!(roi.distance_m > 0.0) || roi.bbox.empty()) return out;
  const int side = std::max(8, static_cast<int>(std::lround(k.fy * cfg.window_height_m / roi.distance_m)));
  const int margin = static_cast<int>(std::lround(k.fy * cfg.window_top_margin_m / roi.distance_m));
  const int step = std::max(1, static_cast<int>(std::lround(cfg.stride * side / static_cast<double>(kTemplateSize))));
  const double mid = roi.bbox.x + roi.bbox.w / 2.0;
  const double half = std::max(0.0, (roi.bbox.w - side / 2.0) / 2.0);
  const int j_max = std::max(1, static_cast<int>(half / step));
  const int top0 = roi.bbox.y - margin;
  for (int i = -cfg.vertical_steps; i <= cfg.vertical_steps; ++i) {
    for (int j = -j_max; j <= j_max; ++j) {
      const int x = static_cast<int>(std::lround(mid + j * step - side / 2.0));
      out.push_back({x, top0 + i * step, side, side});
    }
  }
  return out;
}

namespace {

std::optional<Detection> score_window_impl(const DepthFrame& frame, const Rect& window, double roi_distance,
                                           const TemplateSet& set, const MatchConfig& cfg, std::string* why) {
  try {
    const Annotation patch = prepare_roi_window(frame, window, kTemplateSize, cfg.norm);
    const auto contour = extract_contour(patch, cfg.norm.clip_m);
    const auto maxima = local_maxima(contour, cfg.maxima_window);
    const auto anchors = expand_anchors(maxima, cfg.anchor_radius, patch.patch.cols());
    const MatchResult m = match_multi(patch, set, roi_distance, anchors);
    Detection d;
    d.bbox = window;
    d.score = distance_to_score(m.distance, cfg.score_scale);
    d.band = classify_score(d.score, cfg);
    d.distance_m = roi_distance;
    d.template_id = m.template_id;
    d.frame_id = frame.frame_id;
    return d;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptyRoi:
      case ErrorCode::TooSparse:
      case ErrorCode::NoForeground:
      case ErrorCode::NoOverlap:
        if (why != nullptr) *why = std::string(error_code_name(e.code())) + ": " + e.what();
        return std::nullopt;
      default:
        throw;
    }
  }
}

}  // namespace

std::optional<Detection> score_window(const DepthFrame& frame, const Rect& window, double roi_distance,
                                      const TemplateSet& set, const MatchConfig& cfg) {
  return score_window_impl(frame, window, roi_distance, set, cfg, nullptr);
}

std::vector<Detection> detect(const DepthFrame& frame, std::span<const Roi> rois, const TemplateSet& set,
                              const MatchConfig& cfg, std::vector<std::string>* warnings) {
  std::vector<Detection> all;
  std::string why;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    for (const Rect& w : roi_windows(rois[r], frame.intrinsics, cfg)) {
      auto d = score_window_impl(frame, w, rois[r].distance_m, set, cfg, warnings ? &why : nullptr);
      if (!d) {
        if (warnings != nullptr) {
          warnings->push_back("frame " + std::to_string(frame.frame_id) + " roi " + std::to_string(r) + ": " + why);
        }
        continue;
      }
      if (d->band != Band::Rejected) all.push_back(*d);
    }
  }
  return non_max_suppression(std::move(all), cfg.nms_overlap);
}

std::string detections_to_jsonl(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    nlohmann::ordered_json j;
    j["frame_id"] = d.frame_id;
    j["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
    j["score"] = d.score;
    j["band"] = band_name(d.band);
    j["distance_m"] = d.distance_m;
    j["template_id"] = d.template_id;
    if (d.verified) j["verified"] = *d.verified;
    if (d.accepted) j["accepted"] = *d.accepted;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Detection> detections_from_jsonl(const std::string& text) {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Detection d;
      d.frame_id = j.at("frame_id").get<std::int64_t>();
      const auto& b = j.at("bbox");
      if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::FormatError, "bbox must have 4 entries");
      d.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
      d.score = j.at("score").get<double>();
      d.band = band_from_name(j.at("band").get<std::string>());
      d.distance_m = j.at("distance_m").get<double>();
      d.template_id = j.at("template_id").get<int>();
      if (j.contains("verified")) d.verified = j["verified"].get<double>();
      if (j.contains("accepted")) d.accepted = j["accepted"].get<bool>();
      out.push_back(d);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, "detections line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ubd
