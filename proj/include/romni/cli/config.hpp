#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "romni/camera/fisheye.hpp"
#include "romni/net/model.hpp"
#include "romni/sweep/sweep.hpp"
#include "romni/synth/render.hpp"

namespace romni {

/// Everything one run needs, with defaults good for the toy scale. Loaded
/// from JSON (sections sweep/model/train/data) and overridable per key with
/// `--set section.key=value`; unknown keys are fatal.
struct RunConfig {
  // sweep
  int n_spheres = 32;
  double min_depth = 0.6;
  int out_width = 128;
  int out_height = 32;
  double phi_min_deg = -45.0;
  double phi_max_deg = 45.0;

  // model
  int channels = 4;
  int blocks = 6;
  bool norm = true;
  std::string fusion = "adaptive";
  bool grid_embedding = true;
  bool adaptive_context = true;
  int iters = 8;
  int lookup_radius = 4;

  // train
  double gamma = 0.9;
  double max_lr = 5e-4;
  double weight_decay = 1e-5;
  double clip_norm = 1.0;
  int steps = 2000;
  int checkpoint_every = 500;
  int log_every = 25;
  uint64_t seed = 1;

  // data
  std::string dataset = "data/toy";
  std::string rig_path;  // empty: synthesize the default rig below
  int image_size = 96;
  double baseline_m = 0.4;
  double fov_deg = 220.0;
  int train_scenes = 200;
  int test_scenes = 20;
  std::string preset = "easy";
  uint64_t data_seed = 1;

  SweepConfig sweep() const {
    SweepConfig s;
    s.n_spheres = n_spheres;
    s.min_depth = min_depth;
    s.out_width = out_width;
    s.out_height = out_height;
    s.phi_min = phi_min_deg * M_PI / 180.0;
    s.phi_max = phi_max_deg * M_PI / 180.0;
    return s;
  }

  ModelConfig model() const {
    ModelConfig m;
    m.channels = channels;
    m.blocks = blocks;
    m.norm = norm;
    m.fusion = fusion_mode_from_name(fusion);
    m.grid_embedding = grid_embedding;
    m.adaptive_context = adaptive_context;
    m.iters = iters;
    m.lookup_radius = lookup_radius;
    return m;
  }

  DatasetConfig dataset_cfg() const { return {train_scenes, test_scenes, data_seed, preset}; }

  RigCalibration rig() const {
    if (!rig_path.empty()) return load_rig(rig_path);
    return make_default_rig(image_size, baseline_m, fov_deg);
  }

  void validate() const {
    sweep().validate();
    model().validate();
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must be in (0,1]");
    if (!(max_lr > 0)) throw ConfigError("train.max_lr must be positive");
    if (steps < 1) throw ConfigError("train.steps must be >= 1");
    if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
    if (image_size < 8 || image_size % 2 != 0)
      throw ConfigError("data.image_size must be even and >= 8");
    if (train_scenes < 1 || test_scenes < 1)
      throw ConfigError("data.train_scenes/test_scenes must be >= 1");
  }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["sweep"] = {{"n_spheres", c.n_spheres},     {"min_depth", c.min_depth},
                {"out_width", c.out_width},     {"out_height", c.out_height},
                {"phi_min_deg", c.phi_min_deg}, {"phi_max_deg", c.phi_max_deg}};
  j["model"] = {{"channels", c.channels},
                {"blocks", c.blocks},
                {"norm", c.norm},
                {"fusion", c.fusion},
                {"grid_embedding", c.grid_embedding},
                {"adaptive_context", c.adaptive_context},
                {"iters", c.iters},
                {"lookup_radius", c.lookup_radius}};
  j["train"] = {{"gamma", c.gamma},
                {"max_lr", c.max_lr},
                {"weight_decay", c.weight_decay},
                {"clip_norm", c.clip_norm},
                {"steps", c.steps},
                {"checkpoint_every", c.checkpoint_every},
                {"log_every", c.log_every},
                {"seed", c.seed}};
  j["data"] = {{"dataset", c.dataset},
               {"rig", c.rig_path},
               {"image_size", c.image_size},
               {"baseline_m", c.baseline_m},
               {"fov_deg", c.fov_deg},
               {"train_scenes", c.train_scenes},
               {"test_scenes", c.test_scenes},
               {"preset", c.preset},
               {"data_seed", c.data_seed}};
  return j;
}

namespace detail {

template <typename T>
void take(const nlohmann::json& sec, const char* key, T& out) {
  if (sec.contains(key)) out = sec.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& sec, const char* name,
                           std::initializer_list<const char*> known) {
  for (auto it = sec.begin(); it != sec.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(std::string("unknown config key '") + name + "." + it.key() + "'");
  }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "sweep" && it.key() != "model" && it.key() != "train" && it.key() != "data")
      throw ConfigError("unknown config section '" + it.key() + "'");

  RunConfig c;
  using detail::reject_unknown;
  using detail::take;
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    reject_unknown(s, "sweep",
                   {"n_spheres", "min_depth", "out_width", "out_height", "phi_min_deg",
                    "phi_max_deg"});
    take(s, "n_spheres", c.n_spheres);
    take(s, "min_depth", c.min_depth);
    take(s, "out_width", c.out_width);
    take(s, "out_height", c.out_height);
    take(s, "phi_min_deg", c.phi_min_deg);
    take(s, "phi_max_deg", c.phi_max_deg);
  }
  if (j.contains("model")) {
    const auto& s = j.at("model");
    reject_unknown(s, "model",
                   {"channels", "blocks", "norm", "fusion", "grid_embedding", "adaptive_context",
                    "iters", "lookup_radius"});
    take(s, "channels", c.channels);
    take(s, "blocks", c.blocks);
    take(s, "norm", c.norm);
    take(s, "fusion", c.fusion);
    take(s, "grid_embedding", c.grid_embedding);
    take(s, "adaptive_context", c.adaptive_context);
    take(s, "iters", c.iters);
    take(s, "lookup_radius", c.lookup_radius);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    reject_unknown(s, "train",
                   {"gamma", "max_lr", "weight_decay", "clip_norm", "steps", "checkpoint_every",
                    "log_every", "seed"});
    take(s, "gamma", c.gamma);
    take(s, "max_lr", c.max_lr);
    take(s, "weight_decay", c.weight_decay);
    take(s, "clip_norm", c.clip_norm);
    take(s, "steps", c.steps);
    take(s, "checkpoint_every", c.checkpoint_every);
    take(s, "log_every", c.log_every);
    take(s, "seed", c.seed);
  }
  if (j.contains("data")) {
    const auto& s = j.at("data");
    reject_unknown(s, "data",
                   {"dataset", "rig", "image_size", "baseline_m", "fov_deg", "train_scenes",
                    "test_scenes", "preset", "data_seed"});
    take(s, "dataset", c.dataset);
    take(s, "rig", c.rig_path);
    take(s, "image_size", c.image_size);
    take(s, "baseline_m", c.baseline_m);
    take(s, "fov_deg", c.fov_deg);
    take(s, "train_scenes", c.train_scenes);
    take(s, "test_scenes", c.test_scenes);
    take(s, "preset", c.preset);
    take(s, "data_seed", c.data_seed);
  }
  // fail fast on typos in enum-like fields
  fusion_mode_from_name(c.fusion);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open config");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError(path, "cannot open for writing");
  f << config_to_json(c).dump(2) << "\n";
}

/// Apply one `section.key=value` override. The value is parsed against the
/// type the key already has, so "--set train.steps=500" and
/// "--set model.fusion=all" both work; booleans accept on/off too.
inline void apply_override(RunConfig& c, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + spec + "'");
  std::string key = spec.substr(0, eq);
  std::string value = spec.substr(eq + 1);
  auto dot = key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("--set key must be section.key, got '" + key + "'");
  std::string section = key.substr(0, dot);
  std::string field = key.substr(dot + 1);

  nlohmann::json j = config_to_json(c);
  if (!j.contains(section) || !j.at(section).contains(field))
    throw ConfigError("unknown config key '" + key + "'");
  nlohmann::json& slot = j[section][field];
  if (slot.is_string()) {
    slot = value;
  } else if (slot.is_boolean()) {
    if (value == "true" || value == "on" || value == "1")
      slot = true;
    else if (value == "false" || value == "off" || value == "0")
      slot = false;
    else
      throw ConfigError("boolean key '" + key + "' cannot take value '" + value + "'");
  } else {
    try {
      nlohmann::json parsed = nlohmann::json::parse(value);
      if (!parsed.is_number()) throw ConfigError("");
      slot = parsed;
    } catch (...) {
      throw ConfigError("numeric key '" + key + "' cannot take value '" + value + "'");
    }
  }
  c = config_from_json(j);
}

}  // namespace romni
