#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "romni/camera/fisheye.hpp"
#include "romni/io/pfm.hpp"
#include "romni/io/png.hpp"
#include "romni/synth/scene.hpp"

namespace romni {

struct RenderedView {
  Tensor<uint8_t> rgb;   // (h, w, 3)
  Tensor<float> depth;   // (h, w) meters, +inf where nothing is hit
};

/// Ray-cast one fisheye view. Out-of-FoV pixels are black with infinite
/// depth; depth is Euclidean distance from the camera center.
inline RenderedView render_fisheye(const SceneSpec& scene, const FisheyeCamera& cam) {
  RenderedView out;
  out.rgb = Tensor<uint8_t>({cam.height, cam.width, 3}, uint8_t(0));
  out.depth = Tensor<float>({cam.height, cam.width},
                            std::numeric_limits<float>::infinity());
  const Vec3 origin = cam.center();
  const Mat3 rt = cam.R.transposed();
  const double rho_max = cam.focal * cam.half_fov_rad();
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      double dx = u - cam.u0, dy = v - cam.v0;
      if (dx * dx + dy * dy > rho_max * rho_max) continue;  // outside the FoV circle
      Vec3 dir = rt * cam.unproject(u, v);
      Hit h = scene.cast(origin, dir);
      if (!h.valid()) continue;
      Vec3 c = scene.shade(h, origin, dir);
      int64_t i = (static_cast<int64_t>(v) * cam.width + u) * 3;
      out.rgb[i] = static_cast<uint8_t>(std::lround(std::clamp(c.x, 0.0, 1.0) * 255));
      out.rgb[i + 1] = static_cast<uint8_t>(std::lround(std::clamp(c.y, 0.0, 1.0) * 255));
      out.rgb[i + 2] = static_cast<uint8_t>(std::lround(std::clamp(c.z, 0.0, 1.0) * 255));
      out.depth.at(v, u) = static_cast<float>(h.t);
    }
  }
  return out;
}

struct GtMap {
  Tensor<float> index;   // (H, W) full-index units
  Tensor<uint8_t> mask;  // 1 where a surface exists within max render depth
};

/// Ground-truth inverse-depth index panorama seen from the rig reference
/// point: index = (1/rho) / d_max * (N-1), clamped to the schedule range.
inline GtMap gt_inverse_index(const SceneSpec& scene, const SweepConfig& cfg) {
  GtMap gt;
  gt.index = Tensor<float>({cfg.out_height, cfg.out_width}, 0.f);
  gt.mask = Tensor<uint8_t>({cfg.out_height, cfg.out_width}, uint8_t(0));
  const double dmax = cfg.d_max();
  const double far = max_render_depth(cfg);
  for (int k = 0; k < cfg.out_height; ++k) {
    double phi = cfg.phi_max - (k + 0.5) * (cfg.phi_max - cfg.phi_min) / cfg.out_height;
    for (int j = 0; j < cfg.out_width; ++j) {
      double theta = -M_PI + (j + 0.5) * 2.0 * M_PI / cfg.out_width;
      Hit h = scene.cast({0, 0, 0}, unit_ray(theta, phi));
      if (!h.valid() || h.t > far) continue;
      double idx = (1.0 / h.t) / dmax * (cfg.n_spheres - 1);
      gt.index.at(k, j) = static_cast<float>(std::clamp(idx, 0.0, double(cfg.n_spheres - 1)));
      gt.mask.at(k, j) = 1;
    }
  }
  return gt;
}

// ---- dataset ----------------------------------------------------------------

struct DatasetConfig {
  int train_scenes = 200;
  int test_scenes = 20;
  uint64_t base_seed = 1;
  std::string preset = "easy";
};

struct SceneFiles {
  std::string id, split;
  uint64_t seed = 0;
  std::string images[4];  // front, right, back, left
  std::string gt, mask, spec;
};

/// Render a full dataset: per scene four fisheye PNGs, a GT index PFM, a
/// validity-mask PNG and the scene spec, plus one manifest.json.
inline std::vector<SceneFiles> make_dataset(const DatasetConfig& dc, const RigCalibration& rig,
                                            const SweepConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create output directory: " + ec.message());

  static const char* cam_names[4] = {"front", "right", "back", "left"};
  ScenePreset preset = scene_preset(dc.preset);
  std::vector<SceneFiles> all;
  int total = dc.train_scenes + dc.test_scenes;
  for (int s = 0; s < total; ++s) {
    uint64_t seed = dc.base_seed + static_cast<uint64_t>(s);
    SceneSpec scene;
    // placement can violate the camera-clearance margin; re-roll the seed
    for (uint64_t attempt = 0;; ++attempt) {
      scene = generate_scene(seed + (attempt << 32), preset, cfg, rig.baseline_m);
      try {
        validate_scene(scene, rig, cfg);
        break;
      } catch (const InputError&) {
        if (attempt >= 32) throw;
      }
    }

    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04d", s);
    SceneFiles files;
    files.id = id;
    files.split = s < dc.train_scenes ? "train" : "test";
    files.seed = seed;
    for (int c = 0; c < 4; ++c) {
      RenderedView view = render_fisheye(scene, rig.cameras[static_cast<size_t>(c)]);
      files.images[c] = std::string(id) + "_" + cam_names[c] + ".png";
      save_png(view.rgb, out_dir + "/" + files.images[c]);
    }
    GtMap gt = gt_inverse_index(scene, cfg);
    files.gt = std::string(id) + "_gt.pfm";
    files.mask = std::string(id) + "_mask.png";
    files.spec = std::string(id) + "_spec.json";
    save_pfm(gt.index, out_dir + "/" + files.gt);
    Tensor<uint8_t> mask_img({cfg.out_height, cfg.out_width});
    for (int64_t i = 0; i < mask_img.numel(); ++i) mask_img[i] = gt.mask[i] ? 255 : 0;
    save_png(mask_img, out_dir + "/" + files.mask);
    std::ofstream sf(out_dir + "/" + files.spec);
    sf << scene_to_json(scene).dump(2) << "\n";
    all.push_back(files);
  }

  save_rig(rig, out_dir + "/rig.json");

  nlohmann::json manifest;
  manifest["sweep"] = {{"n_spheres", cfg.n_spheres},   {"min_depth", cfg.min_depth},
                       {"out_width", cfg.out_width},   {"out_height", cfg.out_height},
                       {"phi_min", cfg.phi_min},       {"phi_max", cfg.phi_max}};
  manifest["preset"] = dc.preset;
  manifest["base_seed"] = dc.base_seed;
  manifest["scenes"] = nlohmann::json::array();
  for (const auto& f : all) {
    nlohmann::json sj;
    sj["id"] = f.id;
    sj["split"] = f.split;
    sj["seed"] = f.seed;
    sj["files"] = {{"front", f.images[0]}, {"right", f.images[1]}, {"back", f.images[2]},
                   {"left", f.images[3]},  {"gt", f.gt},           {"mask", f.mask},
                   {"spec", f.spec}};
    manifest["scenes"].push_back(sj);
  }
  std::ofstream mf(out_dir + "/manifest.json");
  if (!mf) throw IoError(out_dir + "/manifest.json", "cannot open for writing");
  mf << manifest.dump(2) << "\n";
  return all;
}

/// Parse manifest.json back into the scene list + sweep config.
inline std::vector<SceneFiles> load_manifest(const std::string& dir, SweepConfig* cfg_out) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw IoError(dir + "/manifest.json", "cannot open");
  nlohmann::json j;
  f >> j;
  if (cfg_out) {
    const auto& sj = j.at("sweep");
    cfg_out->n_spheres = sj.at("n_spheres").get<int>();
    cfg_out->min_depth = sj.at("min_depth").get<double>();
    cfg_out->out_width = sj.at("out_width").get<int>();
    cfg_out->out_height = sj.at("out_height").get<int>();
    cfg_out->phi_min = sj.at("phi_min").get<double>();
    cfg_out->phi_max = sj.at("phi_max").get<double>();
  }
  std::vector<SceneFiles> all;
  for (const auto& sj : j.at("scenes")) {
    SceneFiles files;
    files.id = sj.at("id").get<std::string>();
    files.split = sj.at("split").get<std::string>();
    files.seed = sj.at("seed").get<uint64_t>();
    const auto& fj = sj.at("files");
    files.images[0] = fj.at("front").get<std::string>();
    files.images[1] = fj.at("right").get<std::string>();
    files.images[2] = fj.at("back").get<std::string>();
    files.images[3] = fj.at("left").get<std::string>();
    files.gt = fj.at("gt").get<std::string>();
    files.mask = fj.at("mask").get<std::string>();
    files.spec = fj.at("spec").get<std::string>();
    all.push_back(files);
  }
  return all;
}

}  // namespace romni
