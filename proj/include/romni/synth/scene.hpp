#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "romni/core/error.hpp"
#include "romni/core/rng.hpp"
#include "romni/core/vec3.hpp"
#include "romni/sweep/sweep.hpp"

namespace romni {

struct TextureSpec {
  enum Kind { Solid, Checker, Sinusoid };
  Kind kind = Solid;
  double scale = 1.0;  // feature size in meters
  Vec3 c1{0.8, 0.8, 0.8}, c2{0.2, 0.2, 0.2};

  Vec3 color_at(const Vec3& p) const {
    switch (kind) {
      case Solid:
        return c1;
      case Checker: {
        auto cell = [&](double x) { return static_cast<int64_t>(std::floor(x / scale)); };
        bool odd = ((cell(p.x) + cell(p.y) + cell(p.z)) & 1) != 0;
        return odd ? c2 : c1;
      }
      case Sinusoid: {
        double t = 0.5 + 0.5 * std::sin(2.0 * M_PI * (p.x + 0.7 * p.y + 1.3 * p.z) / scale);
        return c1 * (1.0 - t) + c2 * t;
      }
    }
    return c1;
  }
};

struct Primitive {
  enum Kind { Sphere, Box, Plane };
  Kind kind = Sphere;
  Vec3 center;      // sphere/box center, or a point on the plane
  Vec3 size;        // sphere: radius in x; box: half extents; plane: unit normal
  bool hollow = false;  // sphere seen from inside (the background shell)
  TextureSpec tex;
};

struct Hit {
  double t = -1.0;  // ray parameter; < 0 means miss
  Vec3 normal;
  int prim = -1;
  bool valid() const { return t > 0; }
};

namespace detail {

inline Hit hit_sphere(const Primitive& pr, const Vec3& o, const Vec3& d) {
  Vec3 oc = o - pr.center;
  double r = pr.size.x;
  double b = oc.dot(d);
  double c = oc.dot(oc) - r * r;
  double disc = b * b - c;
  if (disc < 0) return {};
  double s = std::sqrt(disc);
  double t = pr.hollow ? -b + s : -b - s;
  if (t <= 1e-9 && !pr.hollow) t = -b + s;  // origin inside a solid sphere
  if (t <= 1e-9) return {};
  Hit h;
  h.t = t;
  Vec3 n = (o + d * t - pr.center) / r;
  h.normal = pr.hollow ? -n : n;
  return h;
}

inline Hit hit_box(const Primitive& pr, const Vec3& o, const Vec3& d) {
  // slab intersection against the axis-aligned box center +- size
  double tmin = -1e30, tmax = 1e30;
  int axis = -1;
  double sign = 0;
  const double od[3] = {o.x - pr.center.x, o.y - pr.center.y, o.z - pr.center.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double hs[3] = {pr.size.x, pr.size.y, pr.size.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dd[a]) < 1e-12) {
      if (std::abs(od[a]) > hs[a]) return {};
      continue;
    }
    double t1 = (-hs[a] - od[a]) / dd[a];
    double t2 = (hs[a] - od[a]) / dd[a];
    double lo = std::min(t1, t2), hi = std::max(t1, t2);
    if (lo > tmin) {
      tmin = lo;
      axis = a;
      sign = dd[a] > 0 ? -1.0 : 1.0;
    }
    tmax = std::min(tmax, hi);
    if (tmin > tmax) return {};
  }
  if (tmin <= 1e-9 || axis < 0) return {};
  Hit h;
  h.t = tmin;
  h.normal = Vec3{axis == 0 ? sign : 0.0, axis == 1 ? sign : 0.0, axis == 2 ? sign : 0.0};
  return h;
}

inline Hit hit_plane(const Primitive& pr, const Vec3& o, const Vec3& d) {
  double denom = d.dot(pr.size);
  if (std::abs(denom) < 1e-12) return {};
  double t = (pr.center - o).dot(pr.size) / denom;
  if (t <= 1e-9) return {};
  Hit h;
  h.t = t;
  h.normal = denom < 0 ? pr.size : -pr.size;
  return h;
}

}  // namespace detail

struct SceneSpec {
  uint64_t seed = 0;
  double ambient = 0.4;
  Vec3 light_dir{0.3, 0.8, 0.5};  // direction toward the light
  std::vector<Primitive> primitives;

  /// Nearest intersection along o + t*d (d unit), or a miss.
  Hit cast(const Vec3& o, const Vec3& d) const {
    Hit best;
    for (size_t i = 0; i < primitives.size(); ++i) {
      const auto& pr = primitives[i];
      Hit h;
      switch (pr.kind) {
        case Primitive::Sphere: h = detail::hit_sphere(pr, o, d); break;
        case Primitive::Box: h = detail::hit_box(pr, o, d); break;
        case Primitive::Plane: h = detail::hit_plane(pr, o, d); break;
      }
      if (h.valid() && (!best.valid() || h.t < best.t)) {
        best = h;
        best.prim = static_cast<int>(i);
      }
    }
    return best;
  }

  /// Lambertian shade at a hit point.
  Vec3 shade(const Hit& h, const Vec3& o, const Vec3& d) const {
    const auto& pr = primitives[static_cast<size_t>(h.prim)];
    Vec3 p = o + d * h.t;
    Vec3 base = pr.tex.color_at(p);
    double diff = std::max(0.0, h.normal.dot(light_dir.normalized()));
    double s = ambient + (1.0 - ambient) * diff;
    return {std::min(1.0, base.x * s), std::min(1.0, base.y * s), std::min(1.0, base.z * s)};
  }
};

// ---- serialization ----------------------------------------------------------

inline nlohmann::json scene_to_json(const SceneSpec& s) {
  static const char* tex_names[] = {"solid", "checker", "sinusoid"};
  static const char* prim_names[] = {"sphere", "box", "plane"};
  nlohmann::json j;
  j["seed"] = s.seed;
  j["ambient"] = s.ambient;
  j["light_dir"] = {s.light_dir.x, s.light_dir.y, s.light_dir.z};
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    nlohmann::json pj;
    pj["kind"] = prim_names[p.kind];
    pj["center"] = {p.center.x, p.center.y, p.center.z};
    pj["size"] = {p.size.x, p.size.y, p.size.z};
    pj["hollow"] = p.hollow;
    pj["texture"] = {{"kind", tex_names[p.tex.kind]},
                     {"scale", p.tex.scale},
                     {"c1", {p.tex.c1.x, p.tex.c1.y, p.tex.c1.z}},
                     {"c2", {p.tex.c2.x, p.tex.c2.y, p.tex.c2.z}}};
    j["primitives"].push_back(pj);
  }
  return j;
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.ambient = j.at("ambient").get<double>();
  auto ld = j.at("light_dir");
  s.light_dir = {ld[0], ld[1], ld[2]};
  for (const auto& pj : j.at("primitives")) {
    Primitive p;
    std::string kind = pj.at("kind");
    if (kind == "sphere")
      p.kind = Primitive::Sphere;
    else if (kind == "box")
      p.kind = Primitive::Box;
    else if (kind == "plane")
      p.kind = Primitive::Plane;
    else
      throw InputError("scene_from_json: unknown primitive kind '" + kind + "'");
    auto c = pj.at("center");
    p.center = {c[0], c[1], c[2]};
    auto sz = pj.at("size");
    p.size = {sz[0], sz[1], sz[2]};
    p.hollow = pj.at("hollow").get<bool>();
    auto tj = pj.at("texture");
    std::string tk = tj.at("kind");
    if (tk == "solid")
      p.tex.kind = TextureSpec::Solid;
    else if (tk == "checker")
      p.tex.kind = TextureSpec::Checker;
    else if (tk == "sinusoid")
      p.tex.kind = TextureSpec::Sinusoid;
    else
      throw InputError("scene_from_json: unknown texture kind '" + tk + "'");
    p.tex.scale = tj.at("scale").get<double>();
    auto c1 = tj.at("c1"), c2 = tj.at("c2");
    p.tex.c1 = {c1[0], c1[1], c1[2]};
    p.tex.c2 = {c2[0], c2[1], c2[2]};
    s.primitives.push_back(p);
  }
  return s;
}

// ---- procedural generation --------------------------------------------------

struct ScenePreset {
  int min_prims = 4, max_prims = 8;
  double near_frac = 1.5;   // nearest allowed surface, in units of min_depth
  double far_frac = 0.8;    // farthest placement, in units of max render depth
  bool allow_planes = false;
};

inline ScenePreset scene_preset(const std::string& name) {
  if (name == "easy") return {4, 8, 1.5, 0.5, false};
  if (name == "medium") return {8, 14, 1.5, 0.65, true};
  if (name == "hard") return {14, 20, 1.5, 0.8, true};
  throw ConfigError("unknown scene preset '" + name + "'");
}

namespace detail {

inline Vec3 random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline TextureSpec random_texture(Rng& rng, double feature_size) {
  TextureSpec t;
  double pick = rng.uniform();
  t.kind = pick < 0.45 ? TextureSpec::Checker : pick < 0.9 ? TextureSpec::Sinusoid
                                                           : TextureSpec::Solid;
  t.scale = feature_size * rng.uniform(0.5, 1.5);
  for (int tries = 0; tries < 16; ++tries) {
    t.c1 = random_color(rng, 0.25, 1.0);
    t.c2 = random_color(rng, 0.0, 0.75);
    if ((t.c1 - t.c2).norm() > 0.5) break;  // keep the texture contrasty
  }
  return t;
}

}  // namespace detail

/// Maximum render distance: beyond 1/d_1 a surface would round below index
/// 1 and the ground truth treats it as empty.
inline double max_render_depth(const SweepConfig& cfg) {
  return 1.0 / inverse_depth_schedule(cfg)[1];
}

/// Deterministic procedural scene: a shell of textured primitives around
/// the rig plus a far background sphere so every ray has defined depth.
inline SceneSpec generate_scene(uint64_t seed, const ScenePreset& preset, const SweepConfig& cfg,
                                double baseline_m = 0.4) {
  Rng rng(seed ^ 0x5ce11e5ULL);
  SceneSpec s;
  s.seed = seed;
  s.ambient = rng.uniform(0.35, 0.55);
  s.light_dir = Vec3{rng.uniform(-1, 1), rng.uniform(0.3, 1.0), rng.uniform(-1, 1)}.normalized();

  const double far = max_render_depth(cfg);
  const double near_surface = cfg.min_depth * preset.near_frac + baseline_m / 2;
  int count = preset.min_prims + rng.randint(preset.max_prims - preset.min_prims + 1);

  for (int i = 0; i < count; ++i) {
    Primitive p;
    double pick = rng.uniform();
    bool plane = preset.allow_planes && pick > 0.92 && i > 0;
    double elev = rng.uniform(-0.9, 0.9);  // keep mass near the phi crop
    double az = rng.uniform(-M_PI, M_PI);
    Vec3 dir = unit_ray(az, elev);
    if (plane) {
      p.kind = Primitive::Plane;
      double dist = rng.uniform(0.35 * far, 0.7 * far) * preset.far_frac;
      p.center = dir * dist;
      p.size = -dir;  // faces the rig
      p.tex = detail::random_texture(rng, rng.uniform(0.5, 2.0));
    } else {
      bool box = pick < 0.35;
      double dist = rng.log_uniform(near_surface * 2.0, far * preset.far_frac);
      double max_r = dist - near_surface;
      double r = std::min(dist * rng.uniform(0.12, 0.4), max_r);
      p.kind = box ? Primitive::Box : Primitive::Sphere;
      p.center = dir * dist;
      p.size = box ? Vec3{r * rng.uniform(0.5, 1.0), r * rng.uniform(0.5, 1.0),
                          r * rng.uniform(0.5, 1.0)}
                   : Vec3{r, 0, 0};
      p.tex = detail::random_texture(rng, std::max(0.08, r * rng.uniform(0.35, 0.9)));
    }
    s.primitives.push_back(p);
  }

  // background shell: defined depth near index 0 everywhere
  Primitive bg;
  bg.kind = Primitive::Sphere;
  bg.center = {0, 0, 0};
  bg.size = {0.9 * far, 0, 0};
  bg.hollow = true;
  bg.tex.kind = TextureSpec::Sinusoid;
  bg.tex.scale = 0.35 * far;
  bg.tex.c1 = detail::random_color(rng, 0.4, 0.9);
  bg.tex.c2 = detail::random_color(rng, 0.05, 0.5);
  s.primitives.push_back(bg);
  return s;
}

/// Distance from a point to the nearest surface of a primitive (signed
/// distances clamped at 0 for points outside).
inline double distance_to_surface(const Primitive& p, const Vec3& q) {
  switch (p.kind) {
    case Primitive::Sphere: {
      double d = (q - p.center).norm();
      return p.hollow ? p.size.x - d : std::abs(d - p.size.x);
    }
    case Primitive::Box: {
      Vec3 rel = q - p.center;
      double dx = std::max(std::abs(rel.x) - p.size.x, 0.0);
      double dy = std::max(std::abs(rel.y) - p.size.y, 0.0);
      double dz = std::max(std::abs(rel.z) - p.size.z, 0.0);
      return Vec3{dx, dy, dz}.norm();
    }
    case Primitive::Plane:
      return std::abs((q - p.center).dot(p.size));
  }
  return 0;
}

/// Check the scene invariants: clearance from every camera center and
/// matchability (fraction of panorama rays that hit within max depth).
inline void validate_scene(const SceneSpec& s, const RigCalibration& rig, const SweepConfig& cfg,
                           double margin = 0.05) {
  for (size_t i = 0; i < s.primitives.size(); ++i)
    for (const auto& cam : rig.cameras)
      if (distance_to_surface(s.primitives[i], cam.center()) < cfg.min_depth + margin)
        throw InputError("scene primitive " + std::to_string(i) +
                         " is closer than min_depth to a camera");
  const double far = max_render_depth(cfg);
  int hits = 0, total = 0;
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 32; ++j) {
      double theta = -M_PI + (j + 0.5) * M_PI / 16;
      double phi = cfg.phi_max - (k + 0.5) * (cfg.phi_max - cfg.phi_min) / 16;
      Hit h = s.cast({0, 0, 0}, unit_ray(theta, phi));
      ++total;
      hits += h.valid() && h.t <= far;
    }
  if (hits < total * 8 / 10)
    throw InputError("scene is not matchable: only " + std::to_string(hits * 100 / total) +
                     "% of rays hit within max depth");
}

}  // namespace romni
