#include "ubd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ubd/error.hpp"
#include "ubd/evaluation.hpp"
#include "ubd/io.hpp"
#include "ubd/model_io.hpp"
#include "ubd/pipeline.hpp"
#include "ubd/template_training.hpp"

namespace ubd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------------------------
// Benchmark spec document

namespace {

template <typename T>
void read_key(const json& obj, const char* key, T& target, std::vector<std::string>& seen) {
  seen.emplace_back(key);
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string(key) + ": " + e.what());
  }
}

void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::SpecError, "unknown key " + where + key);
    }
  }
}

}  // namespace

std::string benchmark_spec_to_json(const BenchmarkSpec& s) {
  const SceneSpec& b = s.base;
  json cam = {{"fx", b.intrinsics.fx},
              {"fy", b.intrinsics.fy},
              {"cx", b.intrinsics.cx},
              {"cy", b.intrinsics.cy},
              {"width", b.intrinsics.width},
              {"height", b.intrinsics.height},
              {"camera_height_m", b.camera_height_m},
              {"camera_pitch_deg", b.camera_pitch_deg},
              {"noise_a", b.noise_a},
              {"noise_b", b.noise_b},
              {"max_range_m", b.max_range_m},
              {"with_rgb", b.with_rgb},
              {"illumination", b.illumination},
              {"rgb_noise", b.rgb_noise}};
  json root = {{"min_persons", s.min_persons},
               {"max_persons", s.max_persons},
               {"min_distance_m", s.min_distance_m},
               {"max_distance_m", s.max_distance_m},
               {"min_distractors", s.min_distractors},
               {"max_distractors", s.max_distractors},
               {"can_fraction", s.can_fraction},
               {"camouflage_probability", s.camouflage_probability},
               {"low_light_probability", s.low_light_probability},
               {"low_light_min_gain", s.low_light_min_gain},
               {"low_light_max_gain", s.low_light_max_gain},
               {"low_light_noise", s.low_light_noise},
               {"min_separation_m", s.min_separation_m},
               {"lateral_fill", s.lateral_fill},
               {"camera", cam}};
  return root.dump(2) + "\n";
}

BenchmarkSpec benchmark_spec_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string("benchmark spec is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::SpecError, "benchmark spec root must be an object");
  BenchmarkSpec s;
  std::vector<std::string> seen;
  read_key(root, "min_persons", s.min_persons, seen);
  read_key(root, "max_persons", s.max_persons, seen);
  read_key(root, "min_distance_m", s.min_distance_m, seen);
  read_key(root, "max_distance_m", s.max_distance_m, seen);
  read_key(root, "min_distractors", s.min_distractors, seen);
  read_key(root, "max_distractors", s.max_distractors, seen);
  read_key(root, "can_fraction", s.can_fraction, seen);
  read_key(root, "camouflage_probability", s.camouflage_probability, seen);
  read_key(root, "low_light_probability", s.low_light_probability, seen);
  read_key(root, "low_light_min_gain", s.low_light_min_gain, seen);
  read_key(root, "low_light_max_gain", s.low_light_max_gain, seen);
  read_key(root, "low_light_noise", s.low_light_noise, seen);
  read_key(root, "min_separation_m", s.min_separation_m, seen);
  read_key(root, "lateral_fill", s.lateral_fill, seen);
  seen.emplace_back("camera");
  reject_unknown(root, seen, "");
  if (root.contains("camera")) {
    const json& cam = root.at("camera");
    if (!cam.is_object()) throw Error(ErrorCode::SpecError, "camera must be an object");
    SceneSpec& b = s.base;
    std::vector<std::string> cam_seen;
    read_key(cam, "fx", b.intrinsics.fx, cam_seen);
    read_key(cam, "fy", b.intrinsics.fy, cam_seen);
    read_key(cam, "cx", b.intrinsics.cx, cam_seen);
    read_key(cam, "cy", b.intrinsics.cy, cam_seen);
    read_key(cam, "width", b.intrinsics.width, cam_seen);
    read_key(cam, "height", b.intrinsics.height, cam_seen);
    read_key(cam, "camera_height_m", b.camera_height_m, cam_seen);
    read_key(cam, "camera_pitch_deg", b.camera_pitch_deg, cam_seen);
    read_key(cam, "noise_a", b.noise_a, cam_seen);
    read_key(cam, "noise_b", b.noise_b, cam_seen);
    read_key(cam, "max_range_m", b.max_range_m, cam_seen);
    read_key(cam, "with_rgb", b.with_rgb, cam_seen);
    read_key(cam, "illumination", b.illumination, cam_seen);
    read_key(cam, "rgb_noise", b.rgb_noise, cam_seen);
    reject_unknown(cam, cam_seen, "camera.");
  }
  s.validate();
  s.base.validate();
  return s;
}

// ---------------------------------------------------------------------------------------------------------------
// Helpers

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  if (!path.empty()) cfg = config_from_json(io::read_text(path), cfg);
  for (const auto& o : overrides) apply_config_override(cfg, o);
  cfg.validate();
  return cfg;
}

CameraIntrinsics find_intrinsics(const fs::path& frames_dir, const std::string& explicit_path) {
  if (!explicit_path.empty()) return io::read_intrinsics(explicit_path);
  for (const fs::path& p : {frames_dir / "intrinsics.txt", frames_dir.parent_path() / "intrinsics.txt"}) {
    if (fs::exists(p)) return io::read_intrinsics(p);
  }
  throw Error(ErrorCode::IoError, "no intrinsics.txt next to " + frames_dir.string() + "; pass --intrinsics");
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_text(path, text);
  }
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::map<std::int64_t, io::FrameFile> frames_by_id(const fs::path& dir) {
  std::map<std::int64_t, io::FrameFile> out;
  for (auto& f : io::list_frames(dir)) out.emplace(f.frame_id, f);
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Annotations on disk: <name>.pgm raw depth crop plus <name>.json {"distance_m", "source_id"}

struct LoadedAnnotations {
  std::vector<Annotation> samples;
  std::size_t skipped = 0;
};

LoadedAnnotations load_annotations(const fs::path& dir, const DepthNormalization& norm) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  LoadedAnnotations out;
  for (const auto& path : files) {
    const Grid<float> raw = io::read_depth_pgm(path);
    Grid<std::uint8_t> mask(raw.rows(), raw.cols(), 0);
    for (int r = 0; r < raw.rows(); ++r) {
      for (int c = 0; c < raw.cols(); ++c) mask(r, c) = raw(r, c) > 0.0f ? 1 : 0;
    }
    try {
      Annotation a = normalize_annotation(raw, mask, norm);
      a.source_id = path.stem().string();
      fs::path sidecar = path;
      sidecar.replace_extension(".json");
      if (fs::exists(sidecar)) {
        const json meta = json::parse(io::read_text(sidecar), nullptr, false);
        if (meta.is_object() && meta.contains("source_id") && meta["source_id"].is_string()) {
          a.source_id = meta["source_id"].get<std::string>();
        }
      }
      out.samples.push_back(std::move(a));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooSparse) throw;
      ++out.skipped;
    }
  }
  if (out.samples.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no usable annotations in " + dir.string());
  return out;
}

std::vector<double> parse_boundaries(const std::string& text) {
  std::vector<double> out{0.0};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--ranges expects comma separated meters, got '" + text + "'");
    }
  }
  if (out.size() < 2) throw UsageError("--ranges needs at least one boundary");
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Subcommands

struct SynthOpts {
  std::string spec, out;
  int n_frames = 200;
  std::uint64_t seed = 7;
};

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  const BenchmarkSpec spec = o.spec.empty() ? BenchmarkSpec{} : benchmark_spec_from_json(io::read_text(o.spec));
  if (o.n_frames < 1) throw UsageError("--n-frames must be >= 1");
  const fs::path root(o.out);
  fs::create_directories(root / "frames");
  fs::create_directories(root / "annotations");
  io::write_intrinsics(root / "intrinsics.txt", spec.base.intrinsics);
  io::write_text(root / "spec.json", benchmark_spec_to_json(spec));
  GroundTruthSet gt;
  std::size_t n_ann = 0;
  for (int i = 0; i < o.n_frames; ++i) {
    const std::uint64_t s = mix_seed(o.seed, static_cast<std::uint64_t>(i));
    const SyntheticFrame f = generate_synthetic_scene(sample_scene(spec, s), mix_seed(s, 1), i);
    io::save_frame(root / "frames", f.frame);
    gt.push_back(f.gt);
    for (std::size_t b = 0; b < f.gt.boxes.size(); ++b) {
      if (f.gt.boxes[b].ignore) continue;
      const Annotation raw = sample_window(f.frame, f.gt.boxes[b].box, kTemplateSize);
      const auto median = reference_median(raw.patch, raw.valid_mask, kReferencePatch, 0.0);
      const std::string name = io::frame_stem(f.frame.frame_id) + "_p" + std::to_string(f.gt_person[b]);
      io::write_depth_pgm(root / "annotations" / (name + ".pgm"), raw.patch);
      json meta = {{"distance_m", median ? json(*median) : json(nullptr)},
                   {"source_id", "frame" + io::frame_stem(f.frame.frame_id) + "_person" +
                                     std::to_string(f.gt_person[b])}};
      io::write_text(root / "annotations" / (name + ".json"), meta.dump() + "\n");
      ++n_ann;
    }
  }
  io::write_text(root / "gt.jsonl", ground_truth_to_jsonl(gt));
  out << "wrote " << o.n_frames << " frames and " << n_ann << " annotations to " << root.string() << "\n";
  return kExitOk;
}

struct TrainOpts {
  std::string annotations, out, mode = "weighted", ranges = "4,7", config;
  std::vector<std::string> sets;
  int k = 0;
  std::uint64_t seed = 1;
  double sigma_floor = 0.01;
};

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_config(o.config, o.sets);
  const LoadedAnnotations ann = load_annotations(o.annotations, cfg.match.norm);
  if (ann.skipped > 0) err << "warning: skipped " << ann.skipped << " annotations with a sparse reference patch\n";
  if (!(o.sigma_floor > 0.0)) throw UsageError("--sigma-floor must be positive");
  TemplateSet set;
  if (o.mode == "single") {
    WeightedTemplate wt;
    wt.tmpl = train_single(ann.samples);
    wt.weights = Grid<double>(wt.tmpl.values.rows(), wt.tmpl.values.cols(), 1.0);
    set = make_single_set(std::move(wt));
  } else if (o.mode == "weighted") {
    set = make_single_set(train_weighted(ann.samples, o.sigma_floor));
  } else if (o.mode == "orientation") {
    int k = o.k;
    if (k == 0) {
      const std::vector<int> k_range{2, 3, 4, 5, 6};
      const KSelection sel = select_k(ann.samples, k_range, o.seed);
      k = sel.best_k;
      out << "selected k = " << k << "\n";
    }
    if (k < 1) throw UsageError("--k must be >= 1");
    set = train_orientation_set(ann.samples, k, o.seed, o.sigma_floor);
  } else if (o.mode == "distance") {
    const auto bounds = parse_boundaries(o.ranges);
    set = train_distance_set(ann.samples, ranges_from_boundaries(bounds), o.sigma_floor);
  } else {
    throw UsageError("--mode must be single, weighted, orientation or distance");
  }
  save_template_set(o.out, set);
  out << "trained " << template_kind_name(set.kind) << " set with " << set.members.size() << " template(s) from "
      << ann.samples.size() << " annotations\n";
  return kExitOk;
}

struct DetectOpts {
  std::string templates, frames, intrinsics, config, scorer, out;
  std::vector<std::string> sets;
  int workers = 0;
};

int cmd_detect(const DetectOpts& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_config(o.config, o.sets);
  const TemplateSet set = load_template_set(o.templates);
  std::optional<LogisticScorer> scorer;
  if (!o.scorer.empty()) scorer = LogisticScorer::load(o.scorer);
  const CameraIntrinsics k = find_intrinsics(o.frames, o.intrinsics);
  const auto files = io::list_frames(o.frames);
  std::vector<std::vector<Detection>> per_frame(files.size());
  std::vector<std::size_t> skipped(files.size(), 0);
  parallel_for(files.size(), o.workers > 0 ? o.workers : default_workers(), [&](std::size_t i) {
    const DepthFrame frame = io::load_frame(files[i], k);
    std::vector<std::string> warnings;
    per_frame[i] = run_pipeline(frame, set, scorer ? &*scorer : nullptr, cfg, nullptr, &warnings).detections;
    skipped[i] = warnings.size();
  });
  std::vector<Detection> all;
  for (auto& d : per_frame) all.insert(all.end(), d.begin(), d.end());
  write_or_print(o.out, detections_to_jsonl(all), out);
  std::size_t n_skipped = 0;
  for (auto s : skipped) n_skipped += s;
  if (!o.out.empty() && o.out != "-") {
    out << files.size() << " frames, " << all.size() << " detections\n";
  }
  if (n_skipped > 0) err << "warning: " << n_skipped << " windows could not be evaluated\n";
  return kExitOk;
}

struct VerifyOpts {
  std::string detections, frames, intrinsics, scorer, out, config;
  std::vector<std::string> sets;
  std::optional<double> accept_threshold, th_soft;
  int workers = 0;
};

int cmd_verify(const VerifyOpts& o, std::ostream& out) {
  PipelineConfig cfg = load_config(o.config, o.sets);
  if (o.accept_threshold) cfg.verifier.accept_threshold = *o.accept_threshold;
  if (o.th_soft) cfg.match.th_soft = *o.th_soft;
  cfg.validate();
  const LogisticScorer scorer = LogisticScorer::load(o.scorer);
  std::vector<Detection> dets = detections_from_jsonl(io::read_text(o.detections));
  const CameraIntrinsics k = find_intrinsics(o.frames, o.intrinsics);
  const auto files = frames_by_id(o.frames);

  std::map<std::int64_t, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (o.th_soft) {
      dets[i].band = classify_score(dets[i].score, cfg.match);
      dets[i].verified.reset();
      dets[i].accepted.reset();
    }
    by_frame[dets[i].frame_id].push_back(i);
  }
  std::vector<std::pair<std::int64_t, std::vector<std::size_t>>> jobs(by_frame.begin(), by_frame.end());
  for (const auto& [id, idx] : jobs) {
    if (!files.contains(id)) throw Error(ErrorCode::FrameMismatch, "no frame file for frame id " + std::to_string(id));
  }
  parallel_for(jobs.size(), o.workers > 0 ? o.workers : default_workers(), [&](std::size_t j) {
    const auto& [id, idx] = jobs[j];
    const DepthFrame frame = io::load_frame(files.at(id), k);
    std::vector<Detection> local;
    for (auto i : idx) local.push_back(dets[i]);
    apply_verifier(local, frame, scorer, cfg.verifier);
    for (std::size_t n = 0; n < idx.size(); ++n) dets[idx[n]] = local[n];
  });
  write_or_print(o.out, detections_to_jsonl(dets), out);
  return kExitOk;
}

struct EvaluateOpts {
  std::string detections, gt, out_csv, out_svg, label = "detector", config;
  std::vector<std::string> sets;
  std::optional<double> overlap;
};

int cmd_evaluate(const EvaluateOpts& o, std::ostream& out) {
  PipelineConfig cfg = load_config(o.config, o.sets);
  if (o.overlap) cfg.evaluation.overlap = *o.overlap;
  cfg.validate();
  const auto dets = detections_from_jsonl(io::read_text(o.detections));
  const GroundTruthSet gt = ground_truth_from_jsonl(io::read_text(o.gt));
  const auto labeled = match_detections(dets, gt, cfg.evaluation.overlap);
  const EvalCurve curve = compute_curve(labeled, count_ground_truth(gt), gt.size());
  if (!o.out_csv.empty()) io::write_text(o.out_csv, curve_to_csv(curve));
  if (!o.out_svg.empty()) io::write_text(o.out_svg, curves_to_svg({{o.label, curve}}, "recall vs FPPI"));
  const auto f90 = fppi_at_recall(curve, 0.9);
  out << "frames " << curve.frames << ", ground truth " << curve.n_gt << ", detections " << labeled.size() << "\n"
      << "max recall " << fmt_double("%.4f", recall_at_fppi(curve, 1e300)) << "\n"
      << "recall at 1 FPPI " << fmt_double("%.4f", recall_at_fppi(curve, 1.0)) << "\n"
      << "FPPI at recall 0.9 " << (f90 ? fmt_double("%.4f", *f90) : std::string("unreached")) << "\n"
      << "area on [0,1] FPPI " << fmt_double("%.4f", curve_area(curve)) << "\n";
  return kExitOk;
}

struct TrainScorerOpts {
  std::string frames, gt, intrinsics, out, config;
  std::vector<std::string> sets;
  std::uint64_t seed = 5;
  int random_negatives = 4;
};

int cmd_train_scorer(const TrainScorerOpts& o, std::ostream& out) {
  const PipelineConfig cfg = load_config(o.config, o.sets);
  const GroundTruthSet all_gt = ground_truth_from_jsonl(io::read_text(o.gt));
  const CameraIntrinsics k = find_intrinsics(o.frames, o.intrinsics);
  const auto files = frames_by_id(o.frames);
  std::vector<DepthFrame> frames;
  GroundTruthSet gt;
  for (const auto& g : all_gt) {
    auto it = files.find(g.frame_id);
    if (it == files.end()) throw Error(ErrorCode::FrameMismatch, "no frame file for frame id " + std::to_string(g.frame_id));
    frames.push_back(io::load_frame(it->second, k));
    gt.push_back(g);
  }
  const ScorerExamples ex = collect_scorer_examples(frames, gt, cfg, o.seed, o.random_negatives);
  const LogisticScorer scorer = LogisticScorer::train(ex.positives, ex.negatives);
  scorer.save(o.out);
  out << "trained scorer on " << ex.positives.size() << " positive and " << ex.negatives.size()
      << " negative crops\n";
  return kExitOk;
}

struct BenchOpts {
  std::string templates, frames, intrinsics, scorer, config, out;
  std::vector<std::string> sets;
  int max_frames = 0;
};

int cmd_bench(const BenchOpts& o, std::ostream& out) {
  const PipelineConfig cfg = load_config(o.config, o.sets);
  const TemplateSet set = load_template_set(o.templates);
  std::optional<LogisticScorer> scorer;
  if (!o.scorer.empty()) scorer = LogisticScorer::load(o.scorer);
  const CameraIntrinsics k = find_intrinsics(o.frames, o.intrinsics);
  auto files = io::list_frames(o.frames);
  if (o.max_frames > 0 && files.size() > static_cast<std::size_t>(o.max_frames)) files.resize(o.max_frames);
  std::vector<DepthFrame> frames;
  for (const auto& f : files) frames.push_back(io::load_frame(f, k));
  const TimingTable table = time_pipeline(frames, set, scorer ? &*scorer : nullptr, cfg);
  write_or_print(o.out, timing_to_text(table), out);
  return kExitOk;
}

struct ClusterOpts {
  std::string annotations, out_csv, out_svg, config;
  std::vector<std::string> sets;
  int k_min = 2, k_max = 6;
  std::uint64_t seed = 1;
};

int cmd_cluster_analyze(const ClusterOpts& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_config(o.config, o.sets);
  if (o.k_min < 2 || o.k_max < o.k_min) throw UsageError("need 2 <= --k-min <= --k-max");
  const LoadedAnnotations ann = load_annotations(o.annotations, cfg.match.norm);
  if (ann.skipped > 0) err << "warning: skipped " << ann.skipped << " annotations with a sparse reference patch\n";
  std::vector<int> k_range;
  for (int k = o.k_min; k <= o.k_max; ++k) k_range.push_back(k);
  const KSelection sel = select_k(ann.samples, k_range, o.seed);
  std::string csv = "k,silhouette\n";
  std::vector<std::pair<double, double>> series;
  for (const auto& [k, s] : sel.scores) {
    csv += std::to_string(k) + "," + fmt_double("%.17g", s) + "\n";
    series.emplace_back(k, s);
  }
  write_or_print(o.out_csv, csv, out);
  if (!o.out_svg.empty()) {
    io::write_text(o.out_svg, series_to_svg(series, "silhouette score by cluster count", "k", "silhouette"));
  }
  if (!o.out_csv.empty() && o.out_csv != "-") out << "best k = " << sel.best_k << "\n";
  return kExitOk;
}

struct ImportEthOpts {
  std::string idl, out;
  std::int64_t first_id = 0;
  int min_height = 0;
};

int cmd_import_eth(const ImportEthOpts& o, std::ostream& out) {
  const GroundTruthSet gt = import_eth_idl(io::read_text(o.idl), o.first_id, o.min_height);
  write_or_print(o.out, ground_truth_to_jsonl(gt), out);
  return kExitOk;
}

void add_config_flags(CLI::App* sub, std::string& config, std::vector<std::string>& sets) {
  sub->add_option("--config", config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--set", sets, "override one config value: group.key=value (repeatable)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-based upper-body detector with appearance verification", args.empty() ? "ubd" : args[0]};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic RGB-D benchmark");
  s_synth->add_option("--spec", synth.spec, "benchmark spec (JSON)")->check(CLI::ExistingFile);
  s_synth->add_option("--n-frames", synth.n_frames, "number of frames")->capture_default_str();
  s_synth->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  s_synth->add_option("--out", synth.out, "output directory")->required();

  TrainOpts train;
  auto* s_train = app.add_subcommand("train", "train a template set from annotation crops");
  s_train->add_option("--annotations", train.annotations, "annotation directory")->required();
  s_train->add_option("--out", train.out, "template container path")->required();
  s_train->add_option("--mode", train.mode, "single | weighted | orientation | distance")
      ->check(CLI::IsMember({"single", "weighted", "orientation", "distance"}))
      ->capture_default_str();
  s_train->add_option("--k", train.k, "orientation clusters (0 selects k in 2..6 by silhouette)")
      ->capture_default_str();
  s_train->add_option("--ranges", train.ranges, "distance range boundaries in meters, comma separated")
      ->capture_default_str();
  s_train->add_option("--seed", train.seed, "clustering seed")->capture_default_str();
  s_train->add_option("--sigma-floor", train.sigma_floor, "lower bound on sigma for the weights")
      ->capture_default_str();
  add_config_flags(s_train, train.config, train.sets);

  DetectOpts detect;
  auto* s_detect = app.add_subcommand("detect", "run the depth pipeline on a frame directory");
  s_detect->add_option("--templates", detect.templates, "template container")->required()->check(CLI::ExistingFile);
  s_detect->add_option("--frames", detect.frames, "frame directory")->required()->check(CLI::ExistingDirectory);
  s_detect->add_option("--intrinsics", detect.intrinsics, "camera intrinsics file");
  s_detect->add_option("--scorer", detect.scorer, "verify Unreliable detections with this scorer");
  s_detect->add_option("--out", detect.out, "detections JSON lines (default: stdout)");
  s_detect->add_option("--workers", detect.workers, "worker threads (default: all cores)");
  add_config_flags(s_detect, detect.config, detect.sets);

  VerifyOpts verify_o;
  auto* s_verify = app.add_subcommand("verify", "verify Unreliable detections with the appearance scorer");
  s_verify->add_option("--detections", verify_o.detections, "detections JSON lines")->required();
  s_verify->add_option("--frames", verify_o.frames, "frame directory")->required()->check(CLI::ExistingDirectory);
  s_verify->add_option("--intrinsics", verify_o.intrinsics, "camera intrinsics file");
  s_verify->add_option("--scorer", verify_o.scorer, "scorer container")->required();
  s_verify->add_option("--accept-threshold", verify_o.accept_threshold, "verifier acceptance threshold");
  s_verify->add_option("--th-soft", verify_o.th_soft, "re-band detections with this soft threshold first");
  s_verify->add_option("--out", verify_o.out, "output JSON lines (default: stdout)");
  s_verify->add_option("--workers", verify_o.workers, "worker threads (default: all cores)");
  add_config_flags(s_verify, verify_o.config, verify_o.sets);

  EvaluateOpts eval;
  auto* s_eval = app.add_subcommand("evaluate", "recall vs FPPI against ground truth");
  s_eval->add_option("--detections", eval.detections, "detections JSON lines")->required();
  s_eval->add_option("--gt", eval.gt, "ground truth JSON lines")->required();
  s_eval->add_option("--overlap", eval.overlap, "minimum IoU for a match");
  s_eval->add_option("--out-csv", eval.out_csv, "curve CSV");
  s_eval->add_option("--out-svg", eval.out_svg, "curve plot");
  s_eval->add_option("--label", eval.label, "curve name in the plot")->capture_default_str();
  add_config_flags(s_eval, eval.config, eval.sets);

  TrainScorerOpts ts;
  auto* s_ts = app.add_subcommand("train-scorer", "train the logistic appearance scorer");
  s_ts->add_option("--frames", ts.frames, "frame directory")->required()->check(CLI::ExistingDirectory);
  s_ts->add_option("--gt", ts.gt, "ground truth JSON lines")->required();
  s_ts->add_option("--intrinsics", ts.intrinsics, "camera intrinsics file");
  s_ts->add_option("--out", ts.out, "scorer container path")->required();
  s_ts->add_option("--seed", ts.seed, "negative sampling seed")->capture_default_str();
  s_ts->add_option("--random-negatives", ts.random_negatives, "random negative boxes per frame")
      ->capture_default_str();
  add_config_flags(s_ts, ts.config, ts.sets);

  BenchOpts bench;
  auto* s_bench = app.add_subcommand("bench", "per-stage timing, single threaded");
  s_bench->add_option("--templates", bench.templates, "template container")->required()->check(CLI::ExistingFile);
  s_bench->add_option("--frames", bench.frames, "frame directory")->required()->check(CLI::ExistingDirectory);
  s_bench->add_option("--intrinsics", bench.intrinsics, "camera intrinsics file");
  s_bench->add_option("--scorer", bench.scorer, "include verification");
  s_bench->add_option("--max-frames", bench.max_frames, "use at most this many frames");
  s_bench->add_option("--out", bench.out, "timing CSV (default: stdout)");
  add_config_flags(s_bench, bench.config, bench.sets);

  ClusterOpts cluster;
  auto* s_cluster = app.add_subcommand("cluster-analyze", "silhouette score for each cluster count");
  s_cluster->add_option("--annotations", cluster.annotations, "annotation directory")->required();
  s_cluster->add_option("--k-min", cluster.k_min, "smallest k")->capture_default_str();
  s_cluster->add_option("--k-max", cluster.k_max, "largest k")->capture_default_str();
  s_cluster->add_option("--seed", cluster.seed, "clustering seed")->capture_default_str();
  s_cluster->add_option("--out-csv", cluster.out_csv, "score table (default: stdout)");
  s_cluster->add_option("--out-svg", cluster.out_svg, "score plot");
  add_config_flags(s_cluster, cluster.config, cluster.sets);

  ImportEthOpts eth;
  auto* s_eth = app.add_subcommand("import-eth", "convert an ETH .idl annotation file to ground-truth JSON lines");
  s_eth->add_option("--idl", eth.idl, ".idl file")->required()->check(CLI::ExistingFile);
  s_eth->add_option("--out", eth.out, "output JSON lines (default: stdout)");
  s_eth->add_option("--first-id", eth.first_id, "frame id of the first line")->capture_default_str();
  s_eth->add_option("--min-height", eth.min_height, "boxes lower than this are flagged ignore")
      ->capture_default_str();

  std::vector<char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"ubd"} : args;
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "E_USAGE: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (s_synth->parsed()) return cmd_synth(synth, out);
    if (s_train->parsed()) return cmd_train(train, out, err);
    if (s_detect->parsed()) return cmd_detect(detect, out, err);
    if (s_verify->parsed()) return cmd_verify(verify_o, out);
    if (s_eval->parsed()) return cmd_evaluate(eval, out);
    if (s_ts->parsed()) return cmd_train_scorer(ts, out);
    if (s_bench->parsed()) return cmd_bench(bench, out);
    if (s_cluster->parsed()) return cmd_cluster_analyze(cluster, out, err);
    if (s_eth->parsed()) return cmd_import_eth(eth, out);
  } catch (const UsageError& e) {
    err << "E_USAGE: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << error_code_name(e.code()) << ": " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "E_IO: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "E_INTERNAL: " << e.what() << "\n";
    return kExitData;
  }
  err << "E_USAGE: no subcommand\n";
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace ubd::cli
