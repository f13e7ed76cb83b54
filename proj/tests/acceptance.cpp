// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero when any fails.

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ubd/cli.hpp"
#include "ubd/detector.hpp"
#include "ubd/error.hpp"
#include "ubd/evaluation.hpp"
#include "ubd/geometry.hpp"
#include "ubd/io.hpp"
#include "ubd/pipeline.hpp"
#include "ubd/synthetic.hpp"
#include "ubd/template_training.hpp"
#include "ubd/verifier.hpp"

using namespace ubd;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Annotation random_annotation(std::mt19937_64& rng, int rows, int cols, double invalid_p) {
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Annotation a;
  a.patch = Grid<float>(rows, cols, 0.0f);
  a.valid_mask = Grid<std::uint8_t>(rows, cols, 1);
  for (std::size_t i = 0; i < a.patch.size(); ++i) {
    if (u(rng) < invalid_p) {
      a.valid_mask.data()[i] = 0;
    } else {
      a.patch.data()[i] = static_cast<float>(g(rng));
    }
  }
  return a;
}

// ------------------------------------------------------------------------------------------------------------
// 1. The closed-form weighted template minimizes the training energy.

// Damped Newton on one pixel's (t, w) using only energy evaluations (central finite differences).
std::pair<double, double> minimize_pixel(const std::vector<Annotation>& px, double t, double w) {
  Grid<double> tg(1, 1), wg(1, 1);
  auto energy = [&](double tt, double ww) {
    tg(0, 0) = tt;
    wg(0, 0) = ww;
    return weighted_energy(px, tg, wg);
  };
  const double h = 1e-4;
  for (int it = 0; it < 200; ++it) {
    const double e0 = energy(t, w);
    const double gt = (energy(t + h, w) - energy(t - h, w)) / (2 * h);
    const double gw = (energy(t, w + h) - energy(t, w - h)) / (2 * h);
    const double htt = (energy(t + h, w) - 2 * e0 + energy(t - h, w)) / (h * h);
    const double hww = (energy(t, w + h) - 2 * e0 + energy(t, w - h)) / (h * h);
    const double htw = (energy(t + h, w + h) - energy(t + h, w - h) - energy(t - h, w + h) + energy(t - h, w - h)) /
                       (4 * h * h);
    const double det = htt * hww - htw * htw;
    double dt, dw;
    if (htt > 0 && det > 0) {
      dt = -(hww * gt - htw * gw) / det;
      dw = -(htt * gw - htw * gt) / det;
    } else {
      dt = -gt;
      dw = -gw;
    }
    double step = 1.0;
    while (step > 1e-12 && (w + step * dw <= 0.0 || energy(t + step * dt, w + step * dw) > e0)) step *= 0.5;
    if (step <= 1e-12) break;
    t += step * dt;
    w += step * dw;
    if (std::abs(step * dt) < 1e-12 && std::abs(step * dw) < 1e-12) break;
  }
  return {t, w};
}

Verdict criterion_energy() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_dist(2, 50);
  double worst_grad = 0.0, worst_t = 0.0, worst_w = 0.0;
  for (int set = 0; set < 25; ++set) {
    const int n = n_dist(rng);
    std::vector<Annotation> samples;
    for (int i = 0; i < n; ++i) samples.push_back(random_annotation(rng, 12, 12, 0.05));
    const WeightedTemplate wt = train_weighted(samples, 1e-9);
    Grid<double> t = wt.tmpl.values, w = wt.weights;
    const double h = 1e-5;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (Grid<double>* g : {&t, &w}) {
        const double keep = g->data()[i];
        g->data()[i] = keep + h;
        const double ep = weighted_energy(samples, t, w);
        g->data()[i] = keep - h;
        const double em = weighted_energy(samples, t, w);
        g->data()[i] = keep;
        worst_grad = std::max(worst_grad, std::abs((ep - em) / (2 * h)));
      }
    }
    // Independent per-pixel numerical minimization. Pixels with fewer than two valid samples have no finite
    // minimizer (the energy decreases without bound in w), so they are skipped.
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) {
        std::vector<Annotation> px;
        for (const auto& s : samples) {
          Annotation a;
          a.patch = Grid<float>(1, 1, s.patch(r, c));
          a.valid_mask = Grid<std::uint8_t>(1, 1, s.valid_mask(r, c));
          px.push_back(a);
        }
        int valid = 0;
        for (const auto& a : px) valid += a.valid_mask(0, 0);
        if (valid < 2) continue;
        const auto [tn, wn] = minimize_pixel(px, 0.0, 1.0);
        worst_t = std::max(worst_t, std::abs(tn - wt.tmpl.values(r, c)));
        worst_w = std::max(worst_w, std::abs(wn - wt.weights(r, c)) / std::max(1.0, wt.weights(r, c)));
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = worst_grad <= 1e-5 && worst_t <= 1e-4 && worst_w <= 1e-4 && secs < 30.0;
  return {pass, "max |grad| " + fmt("%.3g", worst_grad) + ", max |dt| " + fmt("%.3g", worst_t) + ", max rel |dw| " +
                    fmt("%.3g", worst_w) + ", " + fmt("%.1f", secs) + " s"};
}

// ------------------------------------------------------------------------------------------------------------
// 2. With unit weights the template distance is the plain mean squared difference.

Verdict criterion_unit_weights() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> anchor(0, 39);
  std::uniform_int_distribution<int> n_anchor(1, 8);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Annotation win = random_annotation(rng, 40, 40, 0.1);
    const Annotation tpl = random_annotation(rng, 40, 40, 0.1);
    WeightedTemplate wt;
    wt.tmpl.values = Grid<double>(40, 40);
    for (std::size_t i = 0; i < tpl.patch.size(); ++i) wt.tmpl.values.data()[i] = tpl.patch.data()[i];
    wt.tmpl.valid = tpl.valid_mask;
    wt.tmpl.n_train = 2;
    wt.weights = Grid<double>(40, 40, 1.0);
    std::vector<int> anchors(static_cast<std::size_t>(n_anchor(rng)));
    for (auto& a : anchors) a = anchor(rng);
    std::vector<int> cols = anchors;
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    double sum = 0.0;
    int n = 0;
    for (int c : cols) {
      for (int r = 0; r < 40; ++r) {
        if (!win.valid_mask(r, c) || !wt.tmpl.valid(r, c)) continue;
        const double d = wt.tmpl.values(r, c) - static_cast<double>(win.patch(r, c));
        sum += d * d;
        ++n;
      }
    }
    if (n == 0) continue;
    if (template_distance(win, wt, anchors) != sum / n) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 100 cases differ from the mean squared difference"};
}

// ------------------------------------------------------------------------------------------------------------
// 3. Silhouette against brute force over every two-cluster partition.

double brute_silhouette(const std::vector<Annotation>& pts, const std::vector<int>& label) {
  const std::size_t n = pts.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[label[j]] += masked_distance(pts[i], pts[j]);
      ++cnt[label[j]];
    }
    const int own = label[i];
    if (cnt[own] == 0) continue;  // singleton
    const double a = sum[own] / cnt[own];
    const double b = sum[1 - own] / cnt[1 - own];
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

Verdict criterion_silhouette() {
  std::mt19937_64 rng(31);
  std::vector<Annotation> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(random_annotation(rng, 10, 10, 0.1));
  double worst = 0.0;
  int partitions = 0;
  for (int m = 2; m < 256; m += 2) {  // point 0 stays in cluster 0, so each partition appears once
    std::vector<int> label(8);
    Clusters cl(2);
    for (int i = 0; i < 8; ++i) {
      label[i] = (m >> i) & 1;
      cl[label[i]].push_back(static_cast<std::size_t>(i));
    }
    worst = std::max(worst, std::abs(silhouette_score(pts, cl) - brute_silhouette(pts, label)));
    ++partitions;
  }
  return {worst <= 1e-12 && partitions == 127,
          std::to_string(partitions) + " partitions, max deviation " + fmt("%.3g", worst)};
}

// ------------------------------------------------------------------------------------------------------------
// 4. Cluster-count selection on planted orientation modes.

Verdict criterion_select_k() {
  const std::vector<int> k_range{2, 3, 4, 5, 6};
  int good = 0;
  std::string ks;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto samples = orientation_annotations({0.0, 90.0, 180.0}, 50, seed);
    const KSelection sel = select_k(samples, k_range, seed);
    if (sel.best_k == 2 || sel.best_k == 3) ++good;
    ks += (ks.empty() ? "" : " ") + std::to_string(sel.best_k);
  }
  return {good >= 9, "k in {2,3} for " + std::to_string(good) + " of 10 seeds (k = " + ks + ")"};
}

// ------------------------------------------------------------------------------------------------------------
// 5. Distance range dispatch.

Verdict criterion_dispatch() {
  const std::vector<double> b{0.0, 4.0, 7.0};
  const auto ranges = ranges_from_boundaries(b);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 15.0);
  std::vector<double> ds{4.0, 7.0};
  for (int i = 0; i < 1000; ++i) ds.push_back(u(rng));
  int wrong = 0;
  for (double d : ds) {
    const std::size_t want = d < 4.0 ? 0 : (d < 7.0 ? 1 : 2);
    if (dispatch_range(ranges, d) != want) ++wrong;
  }
  return {wrong == 0, std::to_string(wrong) + " of " + std::to_string(ds.size()) + " distances misassigned"};
}

// ------------------------------------------------------------------------------------------------------------
// 6. RANSAC plane recovery under noise and outliers.

Verdict criterion_ransac() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int good = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector3d n(u(rng), u(rng) - 4.0, u(rng));
    n.normalize();
    const Eigen::Vector3d a = n.unitOrthogonal();
    const Eigen::Vector3d b = n.cross(a);
    const double offset = u(rng);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 2000; ++i) {
      if (i < 400) {
        pts.emplace_back(u(rng) * 2.0, u(rng) * 2.0, u(rng) * 2.0);
      } else {
        pts.push_back(offset * n + u(rng) * a + u(rng) * b + noise(rng) * n);
      }
    }
    RansacParams p;
    p.seed = static_cast<std::uint64_t>(trial);
    const PlaneFit fit = fit_plane_ransac(pts, p);
    const double ang = normal_angle_deg(fit.plane.normal, n);
    worst = std::max(worst, ang);
    if (ang <= 1.0) ++good;
  }
  return {good >= 95, std::to_string(good) + " of 100 trials within 1 degree (worst " + fmt("%.3f", worst) + ")"};
}

// ------------------------------------------------------------------------------------------------------------
// 7-9. Detection benchmark.

struct Benchmark {
  std::vector<SyntheticFrame> test;
  TemplateSet templates;
  LogisticScorer scorer;
  PipelineConfig cfg;
  std::vector<CachedFrame> cached;
  GroundTruthSet gt;
};

Benchmark build_benchmark() {
  Benchmark b;
  BenchmarkSpec spec;
  BenchmarkSpec clean = spec;
  clean.camouflage_probability = 0.0;
  clean.low_light_probability = 0.0;
  const auto train = generate_benchmark(clean, 60, 1000);
  b.templates = make_single_set(train_weighted(annotations_from_frames(train)));
  std::vector<DepthFrame> frames;
  GroundTruthSet train_gt;
  for (const auto& f : train) {
    frames.push_back(f.frame);
    train_gt.push_back(f.gt);
  }
  const ScorerExamples ex = collect_scorer_examples(frames, train_gt, b.cfg, 5);
  b.scorer = LogisticScorer::train(ex.positives, ex.negatives);
  b.test = generate_benchmark(spec, 200, 7);
  for (const auto& f : b.test) {
    CachedFrame cf;
    cf.frame = &f.frame;
    cf.detections = run_pipeline(f.frame, b.templates, nullptr, b.cfg).detections;
    b.cached.push_back(std::move(cf));
    b.gt.push_back(f.gt);
  }
  return b;
}

std::string fppi_text(const std::optional<double>& f) { return f ? fmt("%.4f", *f) : std::string("unreached"); }

Verdict criterion_verifier_gain(const Benchmark& b) {
  const std::vector<double> th{b.cfg.match.th_hard, 0.8};
  const auto curves = sweep_soft_threshold(b.cached, b.gt, b.scorer, b.cfg, th);
  const double recall_1 = recall_at_fppi(curves[0], 1.0);
  const auto depth = fppi_at_recall(curves[0], 0.9);
  const auto verified = fppi_at_recall(curves[1], 0.9);
  const bool pass = recall_1 >= 0.9 && depth && verified && *verified < *depth;
  return {pass, "depth-only recall@1FPPI " + fmt("%.4f", recall_1) + ", FPPI@recall0.9 depth-only " +
                    fppi_text(depth) + " vs verified " + fppi_text(verified)};
}

Verdict criterion_soft_sweep(const Benchmark& b) {
  const std::vector<double> th{0.5, 0.6, 0.7, 0.8, 0.9};
  const auto curves = sweep_soft_threshold(b.cached, b.gt, b.scorer, b.cfg, th);
  std::size_t best = 0;
  std::string areas;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double a = curve_area(curves[i]);
    if (a > curve_area(curves[best])) best = i;
    areas += (areas.empty() ? "" : ", ") + fmt("%.1f", th[i]) + ": " + fmt("%.4f", a);
  }
  const bool interior = best > 0 && best + 1 < curves.size();
  return {interior, "best th_soft " + fmt("%.1f", th[best]) + " (areas " + areas + ")"};
}

Verdict criterion_timing(const Benchmark& b) {
  std::vector<DepthFrame> frames;
  for (std::size_t i = 0; i < 50 && i < b.test.size(); ++i) frames.push_back(b.test[i].frame);
  const TimingTable t = time_pipeline(frames, b.templates, nullptr, b.cfg);  // depth-only stages
  double detector = 0.0;
  std::string stages;
  for (const auto& [name, ms] : t.stages) {
    if (name == "detector") detector = ms;
    stages += name + " " + fmt("%.2f", ms) + " ms, ";
  }
  return {t.total_ms <= 35.0 && detector <= 15.0, stages + "total " + fmt("%.2f", t.total_ms) + " ms"};
}

// ------------------------------------------------------------------------------------------------------------
// 10. End-to-end command line chain is byte-reproducible.

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ubd");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "ubd %s failed: %s\n", args[1].c_str(), err.str().c_str());
  return code;
}

Verdict criterion_reproducible() {
  const auto root = std::filesystem::temp_directory_path() / "ubd_acceptance_cli";
  std::vector<std::vector<std::uint8_t>> det, csv;
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / std::to_string(run);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto p = [&](const char* s) { return (dir / s).string(); };
    int rc = 0;
    rc |= cli({"synth", "--n-frames", "20", "--seed", "1000", "--out", p("train")});
    rc |= cli({"synth", "--n-frames", "10", "--seed", "7", "--out", p("test")});
    rc |= cli({"train", "--annotations", p("train/annotations"), "--out", p("t.tpl")});
    rc |= cli({"train-scorer", "--frames", p("train/frames"), "--gt", p("train/gt.jsonl"), "--out", p("s.scr")});
    rc |= cli({"detect", "--templates", p("t.tpl"), "--frames", p("test/frames"), "--scorer", p("s.scr"), "--out",
               p("det.jsonl")});
    rc |= cli({"evaluate", "--detections", p("det.jsonl"), "--gt", p("test/gt.jsonl"), "--out-csv", p("curve.csv")});
    if (rc != 0) return {false, "command chain failed in run " + std::to_string(run)};
    det.push_back(io::read_bytes(dir / "det.jsonl"));
    csv.push_back(io::read_bytes(dir / "curve.csv"));
  }
  const bool same = det[0] == det[1] && csv[0] == csv[1];
  return {same && !det[0].empty(), std::string(same ? "identical" : "different") + " outputs (" +
                                       std::to_string(det[0].size()) + " detection bytes, " +
                                       std::to_string(csv[0].size()) + " curve bytes)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
    Verdict o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %s: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "closed-form template minimizes the energy", criterion_energy);
  report(2, "unit weights reduce to mean squared difference", criterion_unit_weights);
  report(3, "silhouette matches brute force", criterion_silhouette);
  report(4, "cluster count on planted orientation modes", criterion_select_k);
  report(5, "distance range dispatch", criterion_dispatch);
  report(6, "RANSAC plane under noise and outliers", criterion_ransac);
  std::optional<Benchmark> bench;
  std::string bench_error;
  try {
    bench = build_benchmark();
  } catch (const std::exception& e) {
    bench_error = e.what();
  }
  auto with_bench = [&](Verdict (*fn)(const Benchmark&)) {
    return [&, fn]() -> Verdict {
      if (!bench) return {false, "benchmark setup failed: " + bench_error};
      return fn(*bench);
    };
  };
  report(7, "verification lowers FPPI at recall 0.9", with_bench(criterion_verifier_gain));
  report(8, "soft-threshold sweep peaks inside the range", with_bench(criterion_soft_sweep));
  report(9, "depth-only per-frame time budget", with_bench(criterion_timing));
  report(10, "command line chain is reproducible", criterion_reproducible);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
