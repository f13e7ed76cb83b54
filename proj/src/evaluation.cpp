#include "ubd/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>
#include <unordered_map>

#include "ubd/error.hpp"

namespace ubd {

std::size_t count_ground_truth(const GroundTruthSet& gt) noexcept {
  std::size_t n = 0;
  for (const auto& f : gt) {
    for (const auto& b : f.boxes) n += b.ignore ? 0 : 1;
  }
  return n;
}

std::vector<LabeledDetection> match_detections(std::span<const Detection> dets, const GroundTruthSet& gt,
                                               double overlap_min) {
  std::map<std::int64_t, std::size_t> frame_index;
  for (std::size_t i = 0; i < gt.size(); ++i) frame_index[gt[i].frame_id] = i;
  std::map<std::int64_t, std::vector<const Detection*>> by_frame;
  for (const auto& d : dets) {
    if (!frame_index.contains(d.frame_id)) {
      throw Error(ErrorCode::FrameMismatch, "detection for frame " + std::to_string(d.frame_id) + " has no ground truth");
    }
    if (survives_verification(d)) by_frame[d.frame_id].push_back(&d);
  }
  std::vector<LabeledDetection> out;
  for (auto& [fid, list] : by_frame) {
    std::stable_sort(list.begin(), list.end(), [](const Detection* a, const Detection* b) { return detection_before(*a, *b); });
    const auto& boxes = gt[frame_index[fid]].boxes;
    std::vector<std::uint8_t> used(boxes.size(), 0);
    for (const Detection* d : list) {
      LabeledDetection ld{fid, d->score, Outcome::FalsePositive};
      int best = -1;
      double best_iou = overlap_min;
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (boxes[j].ignore || used[j]) continue;
        const double o = iou(d->bbox, boxes[j].box);
        if (o >= best_iou && (best < 0 || o > best_iou)) {
          best = static_cast<int>(j);
          best_iou = o;
        }
      }
      if (best >= 0) {
        used[best] = 1;
        ld.outcome = Outcome::TruePositive;
      } else {
        for (const auto& b : boxes) {
          if (b.ignore && iou(d->bbox, b.box) >= overlap_min) {
            ld.outcome = Outcome::Ignored;
            break;
          }
        }
      }
      out.push_back(ld);
    }
  }
  return out;
}

EvalCurve compute_curve(std::span<const LabeledDetection> labeled, std::size_t n_gt, std::size_t n_frames) {
  if (n_gt == 0) throw Error(ErrorCode::NoGroundTruth, "evaluation needs at least one ground-truth box");
  if (n_frames == 0) throw Error(ErrorCode::InvalidArgument, "evaluation needs at least one frame");
  EvalCurve curve;
  curve.frames = n_frames;
  curve.n_gt = n_gt;
  std::vector<LabeledDetection> counted;
  for (const auto& l : labeled) {
    if (l.outcome != Outcome::Ignored) counted.push_back(l);
  }
  if (counted.empty()) {
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    return curve;
  }
  std::stable_sort(counted.begin(), counted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < counted.size(); ++i) {
    (counted[i].outcome == Outcome::TruePositive ? tp : fp) += 1;
    if (i + 1 < counted.size() && counted[i + 1].score == counted[i].score) continue;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_frames),
                            static_cast<double>(tp) / static_cast<double>(n_gt), counted[i].score});
  }
  return curve;
}

std::optional<double> fppi_at_recall(const EvalCurve& curve, double target) {
  std::optional<double> best;
  for (const auto& p : curve.points) {
    if (p.recall >= target && (!best || p.fppi < *best)) best = p.fppi;
  }
  return best;
}

double recall_at_fppi(const EvalCurve& curve, double max_fppi) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fppi <= max_fppi) best = std::max(best, p.recall);
  }
  return best;
}

double curve_area(const EvalCurve& curve, double max_fppi) {
  std::vector<double> xs{0.0, max_fppi};
  for (const auto& p : curve.points) {
    if (p.fppi > 0.0 && p.fppi < max_fppi) xs.push_back(p.fppi);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) area += recall_at_fppi(curve, xs[i]) * (xs[i + 1] - xs[i]);
  return area;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

struct Plot {
  double x0 = 60, y0 = 30, w = 480, h = 320;
  double xmax = 1, ymin = 0, ymax = 1;
  double px(double x) const { return x0 + w * std::clamp(x / xmax, 0.0, 1.0); }
  double py(double y) const { return y0 + h * (1.0 - std::clamp((y - ymin) / (ymax - ymin), 0.0, 1.0)); }
};

std::string svg_frame(const Plot& p, const std::string& title, const std::string& xl, const std::string& yl,
                      double xmin_label) {
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) + "</text>\n";
  s += "<rect x=\"" + fmt("%.1f", p.x0) + "\" y=\"" + fmt("%.1f", p.y0) + "\" width=\"" + fmt("%.1f", p.w) +
       "\" height=\"" + fmt("%.1f", p.h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin_label + (p.xmax - xmin_label) * i / 5.0;
    const double x = p.x0 + p.w * i / 5.0;
    const double yv = p.ymin + (p.ymax - p.ymin) * i / 5.0;
    s += "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", p.y0 + p.h + 16) + "\" text-anchor=\"middle\">" +
         fmt("%.2f", xv) + "</text>\n";
    s += "<text x=\"" + fmt("%.1f", p.x0 - 6) + "\" y=\"" + fmt("%.1f", p.py(yv) + 4) + "\" text-anchor=\"end\">" +
         fmt("%.2f", yv) + "</text>\n";
  }
  s += "<text x=\"" + fmt("%.1f", p.x0 + p.w / 2) + "\" y=\"" + fmt("%.1f", p.y0 + p.h + 36) +
       "\" text-anchor=\"middle\">" + xml_escape(xl) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt("%.1f", p.y0 + p.h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt("%.1f", p.y0 + p.h / 2) + ")\">" + xml_escape(yl) + "</text>\n";
  return s;
}

}  // namespace

std::string curve_to_csv(const EvalCurve& curve) {
  std::string out = "threshold,fppi,recall\n";
  for (const auto& p : curve.points) {
    out += (std::isinf(p.threshold) ? std::string("inf") : fmt("%.17g", p.threshold)) + "," + fmt("%.17g", p.fppi) +
           "," + fmt("%.17g", p.recall) + "\n";
  }
  return out;
}

std::string curves_to_svg(const std::vector<std::pair<std::string, EvalCurve>>& curves, const std::string& title,
                          double max_fppi) {
  Plot p;
  p.xmax = max_fppi;
  std::string s = svg_frame(p, title, "false positives per image", "recall", 0.0);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    std::string path;
    double last_recall = 0.0;
    path += "M" + fmt("%.2f", p.px(0)) + "," + fmt("%.2f", p.py(0));
    for (const auto& pt : curves[i].second.points) {
      if (pt.fppi > max_fppi) break;
      path += " L" + fmt("%.2f", p.px(pt.fppi)) + "," + fmt("%.2f", p.py(last_recall));
      path += " L" + fmt("%.2f", p.px(pt.fppi)) + "," + fmt("%.2f", p.py(pt.recall));
      last_recall = std::max(last_recall, pt.recall);
    }
    path += " L" + fmt("%.2f", p.px(max_fppi)) + "," + fmt("%.2f", p.py(last_recall));
    s += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    const double ly = p.y0 + p.h - 12.0 - 16.0 * static_cast<double>(curves.size() - 1 - i);
    s += "<text x=\"" + fmt("%.1f", p.x0 + p.w - 8) + "\" y=\"" + fmt("%.1f", ly) + "\" text-anchor=\"end\" fill=\"" +
         color + "\">" + xml_escape(curves[i].first) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string series_to_svg(const std::vector<std::pair<double, double>>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label) {
  Plot p;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (!series.empty()) {
    xmin = xmax = series[0].first;
    ymin = ymax = series[0].second;
    for (const auto& [x, y] : series) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  ymin = std::min(ymin, 0.0);
  if (ymax <= ymin) ymax = ymin + 1.0;
  p.xmax = xmax - xmin;
  p.ymin = ymin;
  p.ymax = ymax;
  std::string s = svg_frame(p, title, x_label, y_label, xmin);
  std::string path;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double x = p.px(series[i].first - xmin), y = p.py(series[i].second);
    path += (i == 0 ? "M" : " L") + fmt("%.2f", x) + "," + fmt("%.2f", y);
    s += "<circle cx=\"" + fmt("%.2f", x) + "\" cy=\"" + fmt("%.2f", y) + "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  if (!path.empty()) s += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  return s + "</svg>\n";
}

std::vector<EvalCurve> sweep_soft_threshold(std::span<const CachedFrame> frames, const GroundTruthSet& gt,
                                            const AppearanceScorer& scorer, const PipelineConfig& cfg,
                                            std::span<const double> th_values) {
  const std::size_t n_gt = count_ground_truth(gt);
  std::vector<std::map<Rect, VerifierVerdict>> memo(frames.size());
  std::vector<EvalCurve> curves;
  for (double th : th_values) {
    if (!(th >= cfg.match.th_hard && th <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "th_soft " + std::to_string(th) + " lies outside [th_hard, 1]");
    }
    MatchConfig mc = cfg.match;
    mc.th_soft = th;
    std::vector<Detection> all;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      for (Detection d : frames[f].detections) {
        d.band = classify_score(d.score, mc);
        d.verified.reset();
        d.accepted.reset();
        if (d.band == Band::Unreliable) {
          auto it = memo[f].find(d.bbox);
          if (it == memo[f].end()) it = memo[f].emplace(d.bbox, verify(d, *frames[f].frame, scorer, cfg.verifier)).first;
          d.verified = it->second.verified_score;
          d.accepted = it->second.verified_score >= cfg.verifier.accept_threshold;
        }
        all.push_back(d);
      }
    }
    const auto labeled = match_detections(all, gt, cfg.evaluation.overlap);
    curves.push_back(compute_curve(labeled, n_gt, gt.size()));
  }
  return curves;
}

TimingTable time_pipeline(std::span<const DepthFrame> frames, const TemplateSet& templates,
                          const AppearanceScorer* scorer, const PipelineConfig& cfg) {
  if (frames.size() < 10) throw Error(ErrorCode::InvalidArgument, "timing needs at least 10 frames");
  (void)run_pipeline(frames[0], templates, scorer, cfg);
  StageTimes sum;
  double total = 0.0;
  for (const auto& f : frames) {
    StageTimes t;
    const auto t0 = std::chrono::steady_clock::now();
    (void)run_pipeline(f, templates, scorer, cfg, &t);
    total += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    sum.plane_ms += t.plane_ms;
    sum.roi_ms += t.roi_ms;
    sum.detector_ms += t.detector_ms;
    sum.verifier_ms += t.verifier_ms;
  }
  const double n = static_cast<double>(frames.size());
  TimingTable table;
  table.frames = frames.size();
  table.stages = {{"plane", sum.plane_ms / n},
                  {"roi", sum.roi_ms / n},
                  {"detector", sum.detector_ms / n},
                  {"verifier", sum.verifier_ms / n}};
  table.total_ms = total / n;
  return table;
}

std::string timing_to_text(const TimingTable& table) {
  std::string out = "stage,ms_per_frame\n";
  for (const auto& [name, ms] : table.stages) out += name + "," + fmt("%.3f", ms) + "\n";
  out += "total," + fmt("%.3f", table.total_ms) + "\n";
  return out;
}

}  // namespace ubd
