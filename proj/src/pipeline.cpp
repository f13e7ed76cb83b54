#include "ubd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <nlohmann/json.hpp>
#include <random>

#include "ubd/error.hpp"

namespace ubd {

using json = nlohmann::ordered_json;

bool GeometryConfig::operator==(const GeometryConfig& o) const {
  auto same_plane = [](const std::optional<GroundPlane>& a, const std::optional<GroundPlane>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->normal == b->normal && a->offset == b->offset);
  };
  return ransac.iterations == o.ransac.iterations && ransac.inlier_threshold == o.ransac.inlier_threshold &&
         ransac.seed == o.ransac.seed && ransac.max_eval_points == o.ransac.max_eval_points &&
         occupancy_cell_m == o.occupancy_cell_m && density_threshold == o.density_threshold &&
         min_plane_points == o.min_plane_points && camera_height_m == o.camera_height_m &&
         camera_pitch_deg == o.camera_pitch_deg && max_tilt_deg == o.max_tilt_deg &&
         same_plane(fixed_plane, o.fixed_plane);
}

namespace {

struct Field {
  const char* group;
  const char* key;
  std::function<json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const json&)> set;
};

template <typename T, typename Acc>
Field field(const char* group, const char* key, Acc acc) {
  return {group, key, [acc](const PipelineConfig& c) { return json(acc(const_cast<PipelineConfig&>(c))); },
          [acc](PipelineConfig& c, const json& v) { acc(c) = v.get<T>(); }};
}

#define UBD_FIELD(T, group, key, member) \
  field<T>(group, key, [](PipelineConfig& c) -> T& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      UBD_FIELD(int, "geometry", "ransac_iterations", geometry.ransac.iterations),
      UBD_FIELD(double, "geometry", "ransac_inlier_threshold_m", geometry.ransac.inlier_threshold),
      UBD_FIELD(std::size_t, "geometry", "ransac_max_eval_points", geometry.ransac.max_eval_points),
      UBD_FIELD(std::uint64_t, "geometry", "seed", geometry.ransac.seed),
      UBD_FIELD(double, "geometry", "occupancy_cell_m", geometry.occupancy_cell_m),
      UBD_FIELD(std::uint32_t, "geometry", "density_threshold", geometry.density_threshold),
      UBD_FIELD(std::uint32_t, "geometry", "min_plane_points", geometry.min_plane_points),
      UBD_FIELD(double, "geometry", "camera_height_m", geometry.camera_height_m),
      UBD_FIELD(double, "geometry", "camera_pitch_deg", geometry.camera_pitch_deg),
      UBD_FIELD(double, "geometry", "max_tilt_deg", geometry.max_tilt_deg),
      Field{"geometry", "fixed_plane",
            [](const PipelineConfig& c) {
              if (!c.geometry.fixed_plane) return json(nullptr);
              const auto& p = *c.geometry.fixed_plane;
              json j;
              j["normal"] = {p.normal.x(), p.normal.y(), p.normal.z()};
              j["offset"] = p.offset;
              return j;
            },
            [](PipelineConfig& c, const json& v) {
              if (v.is_null()) {
                c.geometry.fixed_plane.reset();
                return;
              }
              for (const auto& [k, _] : v.items()) {
                if (k != "normal" && k != "offset") throw Error(ErrorCode::ConfigError, "unknown key geometry.fixed_plane." + k);
              }
              const auto n = v.at("normal").get<std::vector<double>>();
              if (n.size() != 3) throw Error(ErrorCode::ConfigError, "geometry.fixed_plane.normal needs 3 entries");
              const Eigen::Vector3d normal(n[0], n[1], n[2]);
              if (!(normal.norm() > 0.0)) throw Error(ErrorCode::ConfigError, "geometry.fixed_plane.normal is zero");
              c.geometry.fixed_plane = GroundPlane::oriented(normal, v.at("offset").get<double>());
            }},
      UBD_FIELD(double, "labeling", "cell_m", labeling.cell_m),
      UBD_FIELD(double, "labeling", "ground_bottom_m", labeling.bands.ground_bottom),
      UBD_FIELD(double, "labeling", "ground_top_m", labeling.bands.ground_top),
      UBD_FIELD(double, "labeling", "object_top_m", labeling.bands.object_top),
      UBD_FIELD(double, "labeling", "free_top_m", labeling.bands.free_top),
      UBD_FIELD(double, "labeling", "free_space_max_fraction", labeling.bands.free_space_max_fraction),
      UBD_FIELD(double, "labeling", "object_sparse_fraction", labeling.bands.object_sparse_fraction),
      UBD_FIELD(double, "roi", "cell_m", roi.cell_m),
      UBD_FIELD(std::uint32_t, "roi", "min_points", roi.min_points),
      UBD_FIELD(double, "match", "th_hard", match.th_hard),
      UBD_FIELD(double, "match", "th_soft", match.th_soft),
      UBD_FIELD(double, "match", "score_scale", match.score_scale),
      UBD_FIELD(int, "match", "stride", match.stride),
      UBD_FIELD(double, "match", "nms_overlap", match.nms_overlap),
      UBD_FIELD(int, "match", "maxima_window", match.maxima_window),
      UBD_FIELD(int, "match", "anchor_radius", match.anchor_radius),
      UBD_FIELD(double, "match", "window_height_m", match.window_height_m),
      UBD_FIELD(double, "match", "window_top_margin_m", match.window_top_margin_m),
      UBD_FIELD(int, "match", "vertical_steps", match.vertical_steps),
      UBD_FIELD(double, "match", "background_band_m", match.norm.background_band_m),
      UBD_FIELD(double, "match", "clip_m", match.norm.clip_m),
      UBD_FIELD(double, "match", "min_reference_fraction", match.norm.min_reference_fraction),
      UBD_FIELD(double, "verifier", "accept_threshold", verifier.accept_threshold),
      UBD_FIELD(double, "evaluation", "overlap", evaluation.overlap),
  };
  return table;
}

#undef UBD_FIELD

const Field* find_field(const std::string& group, const std::string& key) {
  for (const auto& f : fields()) {
    if (group == f.group && key == f.key) return &f;
  }
  return nullptr;
}

void set_field(PipelineConfig& cfg, const Field& f, const json& value) {
  try {
    f.set(cfg, value);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(f.group) + "." + f.key + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, std::string(name) + " must be positive");
  };
  if (geometry.ransac.iterations < 1) throw Error(ErrorCode::ConfigError, "geometry.ransac_iterations must be >= 1");
  positive(geometry.ransac.inlier_threshold, "geometry.ransac_inlier_threshold_m");
  positive(geometry.occupancy_cell_m, "geometry.occupancy_cell_m");
  positive(geometry.camera_height_m, "geometry.camera_height_m");
  if (!(geometry.max_tilt_deg > 0.0 && geometry.max_tilt_deg <= 90.0)) {
    throw Error(ErrorCode::ConfigError, "geometry.max_tilt_deg must lie in (0, 90]");
  }
  positive(labeling.cell_m, "labeling.cell_m");
  labeling.bands.validate();
  positive(roi.cell_m, "roi.cell_m");
  match.validate();
  verifier.validate();
  if (!(evaluation.overlap > 0.0 && evaluation.overlap <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "evaluation.overlap must lie in (0, 1]");
  }
}

std::string config_to_json(const PipelineConfig& cfg) {
  json root = json::object();
  for (const auto& f : fields()) root[f.group][f.key] = f.get(cfg);
  return root.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::ConfigError, "config root must be an object");
  PipelineConfig cfg = base;
  for (const auto& [group, body] : root.items()) {
    if (!body.is_object()) throw Error(ErrorCode::ConfigError, "config group '" + group + "' must be an object");
    const bool known = std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return group == f.group; });
    if (!known) throw Error(ErrorCode::ConfigError, "unknown config group " + group);
    for (const auto& [key, value] : body.items()) {
      const Field* f = find_field(group, key);
      if (f == nullptr) throw Error(ErrorCode::ConfigError, "unknown config key " + group + "." + key);
      set_field(cfg, *f, value);
    }
  }
  cfg.validate();
  return cfg;
}

void apply_config_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw Error(ErrorCode::ConfigError, "override must look like group.key=value: " + assignment);
  }
  const std::string group = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string raw = assignment.substr(eq + 1);
  const Field* f = find_field(group, key);
  if (f == nullptr) throw Error(ErrorCode::ConfigError, "unknown config key " + group + "." + key);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  set_field(cfg, *f, value);
  cfg.validate();
}

GroundPlane prior_ground_plane(double camera_height_m, double camera_pitch_deg) {
  const double p = camera_pitch_deg * std::numbers::pi / 180.0;
  return GroundPlane::oriented(Eigen::Vector3d(0.0, -std::cos(p), -std::sin(p)), -camera_height_m);
}

PlaneEstimate estimate_ground_plane(const PointCloud& cloud, const GeometryConfig& cfg) {
  PlaneEstimate est;
  if (cfg.fixed_plane) {
    est.plane = *cfg.fixed_plane;
    est.used_prior = true;
    return est;
  }
  const GroundPlane prior = prior_ground_plane(cfg.camera_height_m, cfg.camera_pitch_deg);
  est.plane = prior;
  est.used_prior = true;
  const OccupancyGrid grid = build_occupancy(cloud, prior, cfg.occupancy_cell_m);
  const auto selection = select_low_density(grid, cfg.density_threshold);
  std::vector<Eigen::Vector3d> pts;
  if (selection.size() >= cfg.min_plane_points) {
    pts.reserve(selection.size());
    for (auto i : selection) pts.push_back(cloud.points[i]);
  } else {
    pts = cloud.points;
  }
  est.selected = pts.size();
  try {
    const PlaneFit fit = fit_plane_ransac(pts, cfg.ransac);
    if (normal_angle_deg(fit.plane.normal, prior.normal) <= cfg.max_tilt_deg) {
      est.plane = fit.plane;
      est.inliers = fit.inliers.size();
      est.used_prior = false;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientPoints && e.code() != ErrorCode::DegenerateGeometry) throw;
  }
  return est;
}

std::vector<Roi> extract_rois(const PointCloud& cloud, const GroundPlane& plane, const PipelineConfig& cfg,
                              LabeledCloud* labeled_out) {
  LabeledCloud labeled = label_structure(cloud, plane, cfg.labeling.cell_m, cfg.labeling.bands);
  const OccupancyGrid hist = roi_histogram(labeled, plane, cfg.roi.cell_m);
  std::vector<Roi> rois;
  for (const auto& comp : connected_components(hist, cfg.roi.min_points)) {
    rois.push_back(back_project_bbox(comp, hist, labeled.cloud));
  }
  if (labeled_out != nullptr) *labeled_out = std::move(labeled);
  return rois;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

FrameResult run_pipeline(const DepthFrame& frame, const TemplateSet& templates, const AppearanceScorer* scorer,
                         const PipelineConfig& cfg, StageTimes* times, std::vector<std::string>* warnings) {
  FrameResult out;
  auto t0 = Clock::now();
  const PointCloud cloud = backproject(frame);
  out.plane = estimate_ground_plane(cloud, cfg.geometry);
  const double plane_ms = ms_since(t0);

  t0 = Clock::now();
  out.rois = extract_rois(cloud, out.plane.plane, cfg);
  const double roi_ms = ms_since(t0);

  t0 = Clock::now();
  out.detections = detect(frame, out.rois, templates, cfg.match, warnings);
  const double det_ms = ms_since(t0);

  t0 = Clock::now();
  if (scorer != nullptr) apply_verifier(out.detections, frame, *scorer, cfg.verifier);
  const double ver_ms = ms_since(t0);

  if (times != nullptr) *times = {plane_ms, roi_ms, det_ms, ver_ms};
  return out;
}

ScorerExamples collect_scorer_examples(std::span<const DepthFrame> frames, std::span<const GroundTruthFrame> gt,
                                       const PipelineConfig& cfg, std::uint64_t seed, int random_negatives_per_frame) {
  if (frames.size() != gt.size()) throw Error(ErrorCode::FrameMismatch, "frames and ground truth differ in length");
  ScorerExamples ex;
  std::mt19937_64 rng(seed);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const DepthFrame& frame = frames[f];
    if (frame.frame_id != gt[f].frame_id) throw Error(ErrorCode::FrameMismatch, "frame ids of frames and ground truth differ");
    if (!frame.rgb) throw Error(ErrorCode::MissingRgb, "scorer training needs RGB frames");
    const int w = frame.rgb->cols(), h = frame.rgb->rows();
    auto near_gt = [&](const Rect& r) {
      for (const auto& b : gt[f].boxes) {
        if (iou(r, b.box) > 0.2) return true;
      }
      return false;
    };
    auto add_around = [&](const Rect& box, std::vector<ChannelStack>& dst) {
      for (const Rect& c : expand_candidates(box, w, h)) dst.push_back(build_channels(crop_image(*frame.rgb, c)));
    };
    for (const auto& b : gt[f].boxes) {
      if (!b.ignore) add_around(b.box, ex.positives);
    }
    const PointCloud cloud = backproject(frame);
    const auto plane = estimate_ground_plane(cloud, cfg.geometry);
    for (const Roi& roi : extract_rois(cloud, plane.plane, cfg)) {
      const auto windows = roi_windows(roi, frame.intrinsics, cfg.match);
      if (windows.empty()) continue;
      const Rect& center = windows[windows.size() / 2];
      if (!near_gt(center)) add_around(center, ex.negatives);
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0, attempts = 0; i < random_negatives_per_frame && attempts < 50; ++attempts) {
      const int side = 40 + static_cast<int>(u01(rng) * 200);
      const Rect r{static_cast<int>(u01(rng) * (w - side / 2)), static_cast<int>(u01(rng) * (h - side / 2)), side, side};
      if (near_gt(r)) continue;
      const auto cands = expand_candidates(r, w, h);
      if (cands.empty()) continue;
      ex.negatives.push_back(build_channels(crop_image(*frame.rgb, cands[cands.size() / 2])));
      ++i;
    }
  }
  return ex;
}

}  // namespace ubd
