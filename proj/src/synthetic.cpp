#include "ubd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "ubd/detector.hpp"
#include "ubd/error.hpp"

namespace ubd {

namespace {

using Eigen::Vector3d;

constexpr double kDeg = std::numbers::pi / 180.0;

enum class Shape : std::uint8_t { Ellipsoid, Cylinder, Box };
enum class Pattern : std::uint8_t { Plain, Stripes, Cap };

struct Material {
  Vector3d base{128, 128, 128};
  Vector3d alt{128, 128, 128};
  Pattern pattern = Pattern::Plain;
  double param = 0.1;  ///< stripe period, or the world height above which a cap uses alt
};

/// Primitive in world coordinates (X right, Y up, Z forward). half holds ellipsoid radii, cylinder
/// (radius, half height, radius) or box half extents; yaw rotates about the vertical axis.
struct Prim {
  Shape shape = Shape::Ellipsoid;
  Vector3d center = Vector3d::Zero();
  Vector3d half = Vector3d::Ones();
  double yaw = 0.0;
  int object = 0;
  Material material;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vector3d normal = Vector3d::UnitY();
};

Vector3d to_local(const Vector3d& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {v.x() * c - v.z() * s, v.y(), v.x() * s + v.z() * c};
}

Vector3d to_world(const Vector3d& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {v.x() * c + v.z() * s, v.y(), -v.x() * s + v.z() * c};
}

std::optional<Hit> intersect(const Prim& p, const Vector3d& origin, const Vector3d& dir) {
  const Vector3d o = to_local(origin - p.center, p.yaw);
  const Vector3d d = to_local(dir, p.yaw);
  switch (p.shape) {
    case Shape::Ellipsoid: {
      const Vector3d os = o.cwiseQuotient(p.half);
      const Vector3d ds = d.cwiseQuotient(p.half);
      const double a = ds.squaredNorm();
      const double b = os.dot(ds);
      const double c = os.squaredNorm() - 1.0;
      const double disc = b * b - a * c;
      if (disc < 0.0) return std::nullopt;
      const double t = (-b - std::sqrt(disc)) / a;
      if (t <= 1e-6) return std::nullopt;
      const Vector3d local = o + t * d;
      const Vector3d n = local.cwiseQuotient(p.half.cwiseProduct(p.half)).normalized();
      return Hit{t, to_world(n, p.yaw)};
    }
    case Shape::Cylinder: {
      const double r = p.half.x();
      const double hy = p.half.y();
      Hit best;
      const double a = d.x() * d.x() + d.z() * d.z();
      if (a > 1e-12) {
        const double b = o.x() * d.x() + o.z() * d.z();
        const double c = o.x() * o.x() + o.z() * o.z() - r * r;
        const double disc = b * b - a * c;
        if (disc >= 0.0) {
          const double t = (-b - std::sqrt(disc)) / a;
          const double y = o.y() + t * d.y();
          if (t > 1e-6 && std::abs(y) <= hy) best = {t, Vector3d(o.x() + t * d.x(), 0.0, o.z() + t * d.z()).normalized()};
        }
      }
      if (std::abs(d.y()) > 1e-12) {
        const double t = (hy - o.y()) / d.y();
        const Vector3d q = o + t * d;
        if (t > 1e-6 && t < best.t && q.x() * q.x() + q.z() * q.z() <= r * r) best = {t, Vector3d::UnitY()};
      }
      if (!std::isfinite(best.t)) return std::nullopt;
      return Hit{best.t, to_world(best.normal, p.yaw)};
    }
    case Shape::Box: {
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      int axis = 0;
      double sign = 1.0;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-12) {
          if (std::abs(o[i]) > p.half[i]) return std::nullopt;
          continue;
        }
        double ta = (-p.half[i] - o[i]) / d[i];
        double tb = (p.half[i] - o[i]) / d[i];
        double s = -1.0;
        if (ta > tb) {
          std::swap(ta, tb);
          s = 1.0;
        }
        if (ta > t0) {
          t0 = ta;
          axis = i;
          sign = s;
        }
        t1 = std::min(t1, tb);
      }
      if (t0 > t1 || t0 <= 1e-6) return std::nullopt;
      Vector3d n = Vector3d::Zero();
      n[axis] = sign;
      return Hit{t0, to_world(n, p.yaw)};
    }
  }
  return std::nullopt;
}

double hash01(std::uint64_t a, std::uint64_t b) {
  return static_cast<double>(mix_seed(a, b) >> 11) * (1.0 / 9007199254740992.0);
}

struct Camera {
  Vector3d origin, right, down, forward;
  CameraIntrinsics k;

  Vector3d ray(double u, double v) const {
    return right * ((u - k.cx) / k.fx) + down * ((v - k.cy) / k.fy) + forward;
  }
  Vector3d to_camera(const Vector3d& p) const {
    const Vector3d q = p - origin;
    return {q.dot(right), q.dot(down), q.dot(forward)};
  }
};

Camera make_camera(const SceneSpec& spec) {
  const double p = spec.camera_pitch_deg * kDeg;
  return {Vector3d(0.0, spec.camera_height_m, 0.0), Vector3d(1, 0, 0), Vector3d(0, -std::cos(p), -std::sin(p)),
          Vector3d(0, -std::sin(p), std::cos(p)), spec.intrinsics};
}

Vector3d hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Vector3d rgb;
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  return (rgb + Vector3d::Constant(v - c)) * 255.0;
}

Vector3d street_furniture_color(std::mt19937_64& rng) {
  static const std::array<Vector3d, 4> palette = {Vector3d(84, 98, 80), Vector3d(96, 96, 94), Vector3d(72, 86, 74),
                                                  Vector3d(104, 102, 88)};
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> jitter(-8.0, 8.0);
  return palette[pick(rng)] + Vector3d(jitter(rng), jitter(rng), jitter(rng));
}

void add_person(std::vector<Prim>& prims, const PersonSpec& ps, int object) {
  std::mt19937_64 rng(ps.appearance_seed);
  static const std::array<Vector3d, 4> skins = {Vector3d(230, 190, 160), Vector3d(200, 150, 120),
                                                Vector3d(150, 100, 70), Vector3d(110, 75, 50)};
  std::uniform_int_distribution<int> pick_skin(0, 3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double h = ps.height_m;
  const double s = h / 1.75;

  Material skin{skins[pick_skin(rng)], Vector3d(35, 28, 22) + Vector3d::Constant(40.0 * u01(rng)), Pattern::Cap,
                h - 0.115 * s + 0.03 * s};
  Material shirt;
  shirt.base = hsv(360.0 * u01(rng), 0.55 + 0.4 * u01(rng), 0.5 + 0.45 * u01(rng));
  shirt.alt = shirt.base * 0.45;
  shirt.pattern = u01(rng) < 0.5 ? Pattern::Stripes : Pattern::Plain;
  shirt.param = 0.06 + 0.06 * u01(rng);
  Material pants{Vector3d(30, 35, 55) + Vector3d::Constant(40.0 * u01(rng)), {}, Pattern::Plain, 0.0};
  if (ps.camouflaged) {
    const Vector3d c = street_furniture_color(rng);
    skin = {c, c, Pattern::Plain, 0.0};
    shirt = skin;
    pants = skin;
  }

  const double yaw = ps.yaw_deg * kDeg;
  const Vector3d base(ps.x, 0.0, ps.z);
  auto part = [&](double lx, double y, double lz, double rx, double ry, double rz, const Material& m) {
    Prim p;
    p.shape = Shape::Ellipsoid;
    p.center = base + to_world(Vector3d(lx * s, y * s, lz * s), yaw);
    p.half = Vector3d(rx, ry, rz) * s;
    p.yaw = yaw;
    p.object = object;
    p.material = m;
    prims.push_back(p);
  };
  part(0.0, 1.75 - 0.115, 0.0, 0.085, 0.115, 0.10, skin);       // head
  part(0.0, 1.52, 0.0, 0.055, 0.07, 0.055, skin);               // neck
  part(0.0, 1.41, 0.0, 0.22, 0.085, 0.12, shirt);               // shoulders
  part(0.0, 1.18, 0.0, 0.185, 0.29, 0.115, shirt);              // torso
  part(-0.225, 1.13, 0.0, 0.055, 0.29, 0.06, shirt);            // arms
  part(0.225, 1.13, 0.0, 0.055, 0.29, 0.06, shirt);
  part(0.0, 0.88, 0.0, 0.17, 0.12, 0.11, pants);                // hips
  part(-0.09, 0.44, 0.0, 0.075, 0.45, 0.08, pants);             // legs
  part(0.09, 0.44, 0.0, 0.075, 0.45, 0.08, pants);
}

void add_distractor(std::vector<Prim>& prims, const DistractorSpec& ds, int object) {
  std::mt19937_64 rng(ds.appearance_seed);
  Prim p;
  p.object = object;
  p.yaw = ds.yaw_deg * kDeg;
  if (ds.kind == DistractorKind::Box) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Vector3d cardboard(150 + 25 * u01(rng), 112 + 18 * u01(rng), 70 + 20 * u01(rng));
    p.material.base = u01(rng) < 0.5 ? cardboard : street_furniture_color(rng);
    p.shape = Shape::Box;
    p.center = Vector3d(ds.x, ds.height / 2.0, ds.z);
    p.half = Vector3d(ds.width / 2.0, ds.height / 2.0, ds.depth / 2.0);
    prims.push_back(p);
    return;
  }
  p.material.base = street_furniture_color(rng);
  const double r = ds.width / 2.0;
  p.shape = Shape::Cylinder;
  p.center = Vector3d(ds.x, ds.height / 2.0, ds.z);
  p.half = Vector3d(r, ds.height / 2.0, r);
  prims.push_back(p);
  Prim dome = p;
  dome.shape = Shape::Ellipsoid;
  dome.center = Vector3d(ds.x, ds.height, ds.z);
  dome.half = Vector3d(r, 0.25 * ds.width, r);
  prims.push_back(dome);
}

std::vector<Prim> build_prims(const SceneSpec& spec) {
  std::vector<Prim> prims;
  for (std::size_t i = 0; i < spec.persons.size(); ++i) add_person(prims, spec.persons[i], static_cast<int>(i));
  for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
    add_distractor(prims, spec.distractors[i], kDistractorIdBase + static_cast<int>(i));
  }
  return prims;
}

/// Pixel rectangle covering the primitive's projection (whole image if any corner is behind the camera).
Rect screen_bounds(const Prim& p, const Camera& cam) {
  const double rh = std::max(p.half.x(), p.half.z()) * (p.shape == Shape::Box ? std::sqrt(2.0) : 1.0);
  double u0 = 1e18, v0 = 1e18, u1 = -1e18, v1 = -1e18;
  for (int i = 0; i < 8; ++i) {
    const Vector3d corner = p.center + Vector3d((i & 1 ? rh : -rh), (i & 2 ? p.half.y() : -p.half.y()),
                                                (i & 4 ? rh : -rh));
    const Vector3d c = cam.to_camera(corner);
    if (c.z() < 0.05) return {0, 0, cam.k.width, cam.k.height};
    const double u = cam.k.fx * c.x() / c.z() + cam.k.cx;
    const double v = cam.k.fy * c.y() / c.z() + cam.k.cy;
    u0 = std::min(u0, u);
    u1 = std::max(u1, u);
    v0 = std::min(v0, v);
    v1 = std::max(v1, v);
  }
  const Rect r{static_cast<int>(std::floor(u0)) - 1, static_cast<int>(std::floor(v0)) - 1,
               static_cast<int>(std::ceil(u1 - u0)) + 3, static_cast<int>(std::ceil(v1 - v0)) + 3};
  return intersect(r, {0, 0, cam.k.width, cam.k.height});
}

struct Render {
  Grid<double> t;
  Grid<int> prim;  ///< winning primitive, -1 ground, -2 nothing
};

/// Ray casts the primitives (and optionally the ground) inside region.
Render cast(const Camera& cam, const std::vector<Prim>& prims, const std::vector<std::size_t>& which, bool ground,
            const Rect& region) {
  const int w = cam.k.width, h = cam.k.height;
  Render out{Grid<double>(h, w, std::numeric_limits<double>::infinity()), Grid<int>(h, w, -2)};
  if (ground) {
    for (int v = region.y; v < region.bottom(); ++v) {
      for (int u = region.x; u < region.right(); ++u) {
        const Vector3d d = cam.ray(u, v);
        if (d.y() < -1e-9) {
          out.t(v, u) = -cam.origin.y() / d.y();
          out.prim(v, u) = -1;
        }
      }
    }
  }
  for (std::size_t i : which) {
    const Rect b = intersect(screen_bounds(prims[i], cam), region);
    for (int v = b.y; v < b.bottom(); ++v) {
      for (int u = b.x; u < b.right(); ++u) {
        const auto hit = intersect(prims[i], cam.origin, cam.ray(u, v));
        if (hit && hit->t < out.t(v, u)) {
          out.t(v, u) = hit->t;
          out.prim(v, u) = static_cast<int>(i);
        }
      }
    }
  }
  return out;
}

Vector3d surface_color(const Material& m, const Vector3d& p) {
  switch (m.pattern) {
    case Pattern::Plain: return m.base;
    case Pattern::Stripes: return std::fmod(p.y() + 100.0, m.param) < m.param / 2 ? m.base : m.alt;
    case Pattern::Cap: return p.y() > m.param ? m.alt : m.base;
  }
  return m.base;
}

Rgb8 to_rgb8(const Vector3d& c) {
  auto q = [](double x) { return static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L)); };
  return {q(c.x()), q(c.y()), q(c.z())};
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SceneSpec::validate() const {
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::SpecError, e.what());
  }
  if (!(camera_height_m > 0.0)) throw Error(ErrorCode::SpecError, "camera_height_m must be positive");
  if (!(std::abs(camera_pitch_deg) < 80.0)) throw Error(ErrorCode::SpecError, "camera_pitch_deg must be in (-80, 80)");
  if (!(noise_a >= 0.0 && noise_b >= 0.0)) throw Error(ErrorCode::SpecError, "noise coefficients must be >= 0");
  if (!(max_range_m > 0.0)) throw Error(ErrorCode::SpecError, "max_range_m must be positive");
  if (!(illumination >= 0.0) || !(rgb_noise >= 0.0)) {
    throw Error(ErrorCode::SpecError, "illumination and rgb_noise must be non-negative");
  }
  for (const auto& p : persons) {
    if (!(p.z > 0.5) || !(p.height_m > 0.5 && p.height_m < 2.5) || !std::isfinite(p.x) || !std::isfinite(p.yaw_deg)) {
      throw Error(ErrorCode::SpecError, "person needs z > 0.5 m and height in (0.5, 2.5) m");
    }
  }
  for (const auto& d : distractors) {
    if (!(d.z > 0.5) || !(d.width > 0.0) || !(d.depth > 0.0) || !(d.height > 0.0) || !std::isfinite(d.x)) {
      throw Error(ErrorCode::SpecError, "distractor needs z > 0.5 m and positive size");
    }
  }
}

GroundPlane scene_ground_plane(const SceneSpec& spec) {
  const double p = spec.camera_pitch_deg * kDeg;
  return GroundPlane::oriented(Vector3d(0.0, -std::cos(p), -std::sin(p)), -spec.camera_height_m);
}

Rect person_gt_box(const SceneSpec& spec, const PersonSpec& person) {
  const Camera cam = make_camera(spec);
  const Vector3d top = cam.to_camera(Vector3d(person.x, person.height_m, person.z));
  const Vector3d chest = cam.to_camera(Vector3d(person.x, person.height_m - 0.5, person.z));
  const double depth = chest.z() - 0.1;
  const double side = spec.intrinsics.fy * 0.9 / depth;
  const double u = spec.intrinsics.fx * top.x() / top.z() + spec.intrinsics.cx;
  const double v = spec.intrinsics.fy * top.y() / top.z() + spec.intrinsics.cy - spec.intrinsics.fy * 0.1 / depth;
  const int s = static_cast<int>(std::lround(side));
  return {static_cast<int>(std::lround(u - side / 2.0)), static_cast<int>(std::lround(v)), s, s};
}

SyntheticFrame generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed, std::int64_t frame_id) {
  spec.validate();
  const Camera cam = make_camera(spec);
  const auto prims = build_prims(spec);
  const int w = spec.intrinsics.width, h = spec.intrinsics.height;
  const Rect image{0, 0, w, h};
  std::vector<std::size_t> all(prims.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Render r = cast(cam, prims, all, true, image);

  SyntheticFrame out;
  out.frame.intrinsics = spec.intrinsics;
  out.frame.frame_id = frame_id;
  out.frame.depth = Grid<float>(h, w, 0.0f);
  out.object_ids = Grid<int>(h, w, kSkyId);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int p = r.prim(v, u);
      if (p == -2) continue;
      out.object_ids(v, u) = p == -1 ? kGroundId : prims[p].object;
      const double z = r.t(v, u);
      const double noisy = z + (spec.noise_a + spec.noise_b * z * z) * gauss(rng);
      if (z <= spec.max_range_m && noisy > 0.0) out.frame.depth(v, u) = static_cast<float>(noisy);
    }
  }

  if (spec.with_rgb) {
    const Vector3d light = Vector3d(-0.4, 0.8, -0.45).normalized();
    Grid<Rgb8> rgb(h, w);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int p = r.prim(v, u);
        const double grain = hash01(seed ^ 0x5eedull, static_cast<std::uint64_t>(v) * w + u) - 0.5;
        Vector3d c;
        if (p == -2) {
          c = Vector3d(175, 205, 235);
        } else if (p == -1) {
          const Vector3d q = cam.origin + r.t(v, u) * cam.ray(u, v);
          const auto cell = static_cast<std::uint64_t>(std::floor(q.x() * 4.0) * 7919 + std::floor(q.z() * 4.0));
          c = Vector3d::Constant(102.0 + 18.0 * (hash01(0xa5a5ull, cell) - 0.5));
        } else {
          const Vector3d dir = cam.ray(u, v);
          const Vector3d q = cam.origin + r.t(v, u) * dir;
          const auto hit = intersect(prims[p], cam.origin, dir);
          const double lambert = hit ? std::max(0.0, hit->normal.dot(light)) : 0.5;
          c = surface_color(prims[p].material, q) * (0.35 + 0.65 * lambert);
        }
        rgb(v, u) = to_rgb8(c * spec.illumination + Vector3d::Constant(2.0 * spec.rgb_noise * grain));
      }
    }
    out.frame.rgb = std::move(rgb);
  }

  out.gt.frame_id = frame_id;
  for (std::size_t i = 0; i < spec.persons.size(); ++i) {
    GtBox g;
    g.box = person_gt_box(spec, spec.persons[i]);
    const Rect vis = intersect(g.box, image);
    bool ignore = vis.area() * 2 < g.box.area();
    if (!ignore) {
      std::vector<std::size_t> mine;
      for (std::size_t j = 0; j < prims.size(); ++j) {
        if (prims[j].object == static_cast<int>(i)) mine.push_back(j);
      }
      const Render alone = cast(cam, prims, mine, false, vis);
      long long own = 0, seen = 0;
      for (int v = vis.y; v < vis.bottom(); ++v) {
        for (int u = vis.x; u < vis.right(); ++u) {
          if (alone.prim(v, u) < 0) continue;
          ++own;
          if (out.object_ids(v, u) == static_cast<int>(i)) ++seen;
        }
      }
      ignore = own == 0 || seen * 2 < own;
    }
    g.ignore = ignore;
    out.gt.boxes.push_back(g);
    out.gt_person.push_back(static_cast<int>(i));
  }
  return out;
}

void BenchmarkSpec::validate() const {
  if (min_persons < 0 || max_persons < min_persons || min_distractors < 0 || max_distractors < min_distractors) {
    throw Error(ErrorCode::SpecError, "object count ranges are invalid");
  }
  if (!(min_distance_m > 0.5 && max_distance_m >= min_distance_m)) {
    throw Error(ErrorCode::SpecError, "distance range is invalid");
  }
  if (!(can_fraction >= 0.0 && can_fraction <= 1.0) ||
      !(camouflage_probability >= 0.0 && camouflage_probability <= 1.0) ||
      !(low_light_probability >= 0.0 && low_light_probability <= 1.0)) {
    throw Error(ErrorCode::SpecError, "probabilities must lie in [0, 1]");
  }
  if (!(lateral_fill > 0.0 && lateral_fill <= 1.0) || !(min_separation_m >= 0.0)) {
    throw Error(ErrorCode::SpecError, "placement parameters are invalid");
  }
  if (!(low_light_min_gain >= 0.0 && low_light_max_gain >= low_light_min_gain) || !(low_light_noise >= 0.0)) {
    throw Error(ErrorCode::SpecError, "low-light parameters are invalid");
  }
  base.validate();
}

SceneSpec sample_scene(const BenchmarkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  auto count = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SceneSpec scene = spec.base;
  scene.persons.clear();
  scene.distractors.clear();
  const double tan_half = (spec.base.intrinsics.width / 2.0) / spec.base.intrinsics.fx;
  std::vector<Eigen::Vector2d> placed;
  auto place = [&](double margin) -> std::optional<Eigen::Vector2d> {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double z = uniform(spec.min_distance_m, spec.max_distance_m);
      const double half = std::max(0.0, spec.lateral_fill * z * tan_half - margin);
      const Eigen::Vector2d p(uniform(-half, half), z);
      const bool clear = std::all_of(placed.begin(), placed.end(),
                                     [&](const Eigen::Vector2d& q) { return (p - q).norm() >= spec.min_separation_m; });
      if (clear) {
        placed.push_back(p);
        return p;
      }
    }
    return std::nullopt;
  };
  if (u01(rng) < spec.low_light_probability) {
    scene.illumination = uniform(spec.low_light_min_gain, spec.low_light_max_gain);
    scene.rgb_noise = spec.low_light_noise;
  }
  const int n_persons = count(spec.min_persons, spec.max_persons);
  const int n_distractors = count(spec.min_distractors, spec.max_distractors);
  for (int i = 0; i < n_persons; ++i) {
    PersonSpec p;
    p.yaw_deg = uniform(0.0, 360.0);
    p.height_m = uniform(1.6, 1.9);
    p.camouflaged = u01(rng) < spec.camouflage_probability;
    p.appearance_seed = static_cast<std::uint32_t>(rng());
    const auto pos = place(0.3);
    if (!pos) continue;
    p.x = pos->x();
    p.z = pos->y();
    scene.persons.push_back(p);
  }
  for (int i = 0; i < n_distractors; ++i) {
    DistractorSpec d;
    d.kind = u01(rng) < spec.can_fraction ? DistractorKind::Can : DistractorKind::Box;
    if (d.kind == DistractorKind::Can) {
      d.width = uniform(0.5, 0.7);
      d.depth = d.width;
      d.height = uniform(0.85, 1.05);
    } else {
      d.width = uniform(0.4, 1.2);
      d.depth = uniform(0.4, 0.8);
      d.height = uniform(0.5, 1.4);
    }
    d.yaw_deg = uniform(0.0, 90.0);
    d.appearance_seed = static_cast<std::uint32_t>(rng());
    const auto pos = place(0.6);
    if (!pos) continue;
    d.x = pos->x();
    d.z = pos->y();
    scene.distractors.push_back(d);
  }
  return scene;
}

std::vector<SyntheticFrame> generate_benchmark(const BenchmarkSpec& spec, int n_frames, std::uint64_t seed,
                                               std::int64_t first_id) {
  std::vector<SyntheticFrame> out;
  out.reserve(static_cast<std::size_t>(std::max(0, n_frames)));
  for (int i = 0; i < n_frames; ++i) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
    out.push_back(generate_synthetic_scene(sample_scene(spec, s), mix_seed(s, 1), first_id + i));
  }
  return out;
}

std::vector<Annotation> annotations_from_frames(const std::vector<SyntheticFrame>& frames,
                                                const DepthNormalization& norm) {
  std::vector<Annotation> out;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.gt.boxes.size(); ++i) {
      if (f.gt.boxes[i].ignore) continue;
      try {
        Annotation a = prepare_roi_window(f.frame, f.gt.boxes[i].box, kTemplateSize, norm);
        a.source_id = "frame" + std::to_string(f.frame.frame_id) + "_person" + std::to_string(f.gt_person[i]);
        out.push_back(std::move(a));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooSparse && e.code() != ErrorCode::EmptyRoi) throw;
      }
    }
  }
  return out;
}

std::vector<Annotation> orientation_annotations(const std::vector<double>& yaw_modes_deg, int per_mode,
                                                std::uint64_t seed, double yaw_jitter_deg, double min_distance_m,
                                                double max_distance_m, const DepthNormalization& norm) {
  std::vector<Annotation> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, yaw_jitter_deg);
  for (std::size_t m = 0; m < yaw_modes_deg.size(); ++m) {
    for (int i = 0; i < per_mode;) {
      SceneSpec scene;
      scene.with_rgb = false;
      PersonSpec p;
      p.z = min_distance_m + (max_distance_m - min_distance_m) * u01(rng);
      p.x = -0.5 + u01(rng);
      p.yaw_deg = yaw_modes_deg[m] + jitter(rng);
      p.height_m = 1.65 + 0.2 * u01(rng);
      scene.persons.push_back(p);
      const SyntheticFrame f = generate_synthetic_scene(scene, rng(), i);
      try {
        Annotation a = prepare_roi_window(f.frame, f.gt.boxes[0].box, kTemplateSize, norm);
        a.source_id = "mode" + std::to_string(m) + "_" + std::to_string(i);
        out.push_back(std::move(a));
        ++i;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooSparse && e.code() != ErrorCode::EmptyRoi) throw;
      }
    }
  }
  return out;
}

}  // namespace ubd
