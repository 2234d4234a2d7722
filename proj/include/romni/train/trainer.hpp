#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "romni/cli/config.hpp"
#include "romni/io/colormap.hpp"
#include "romni/io/container.hpp"
#include "romni/io/pfm.hpp"
#include "romni/io/png.hpp"
#include "romni/net/model.hpp"
#include "romni/synth/render.hpp"
#include "romni/train/loss.hpp"
#include "romni/train/optim.hpp"

namespace romni {

// ---- dataset loading --------------------------------------------------------

struct SceneSample {
  std::string id;
  std::array<Tensor<float>, 4> images;  // fisheye RGB in [0,1]
  Tensor<float> gt;                     // full-index inverse-depth map
  Tensor<uint8_t> mask;                 // nonzero where the GT is valid
};

inline Tensor<float> image_to_float(const Tensor<uint8_t>& rgb) {
  Tensor<float> f(rgb.shape());
  for (int64_t i = 0; i < rgb.numel(); ++i) f[i] = static_cast<float>(rgb[i]) / 255.f;
  return f;
}

inline SceneSample load_scene(const std::string& dir, const SceneFiles& files) {
  SceneSample s;
  s.id = files.id;
  for (int c = 0; c < 4; ++c)
    s.images[static_cast<size_t>(c)] = image_to_float(load_png(dir + "/" + files.images[c]));
  s.gt = load_pfm(dir + "/" + files.gt);
  Tensor<uint8_t> m = load_png(dir + "/" + files.mask);  // loads as (h, w, 3)
  s.mask = Tensor<uint8_t>({m.dim(0), m.dim(1)});
  for (int64_t i = 0; i < s.mask.numel(); ++i) s.mask[i] = m[i * 3] ? 1 : 0;
  return s;
}

/// Load one split ("train"/"test") of a generated dataset. The companion
/// rig.json and the manifest's sweep section describe the geometry the
/// scenes were rendered with.
inline std::vector<SceneSample> load_split(const std::string& dir, const std::string& split) {
  SweepConfig sc;
  auto files = load_manifest(dir, &sc);
  std::vector<SceneSample> out;
  for (const auto& f : files)
    if (f.split == split) out.push_back(load_scene(dir, f));
  if (out.empty()) throw IoError(dir, "no scenes in split '" + split + "'");
  return out;
}

/// The dataset is authoritative for geometry: the run config must agree
/// with what the scenes were rendered against, or index units shift.
inline void check_dataset_geometry(const RunConfig& cfg, const std::string& dir) {
  SweepConfig sc;
  load_manifest(dir, &sc);
  SweepConfig want = cfg.sweep();
  auto close = [](double a, double b) { return std::abs(a - b) < 1e-12; };
  if (sc.n_spheres != want.n_spheres || sc.out_width != want.out_width ||
      sc.out_height != want.out_height || !close(sc.min_depth, want.min_depth) ||
      !close(sc.phi_min, want.phi_min) || !close(sc.phi_max, want.phi_max))
    throw ConfigError("dataset '" + dir + "' was generated with a different sweep configuration");
}

inline RigCalibration dataset_rig(const RunConfig& cfg) {
  std::string path = cfg.dataset + "/rig.json";
  if (std::filesystem::exists(path)) return load_rig(path);
  return cfg.rig();
}

// ---- grid cache ---------------------------------------------------------------

inline std::string grid_cache_key(const RigCalibration& rig, const SweepConfig& cfg) {
  nlohmann::json j = rig_to_json(rig);
  j["sweep"] = {{"n", cfg.n_spheres},     {"min_depth", cfg.min_depth},
                {"w", cfg.out_width},     {"h", cfg.out_height},
                {"phi_min", cfg.phi_min}, {"phi_max", cfg.phi_max}};
  std::string text = j.dump();
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void save_grids(const SweepGrids& g, const std::string& key, const std::string& path) {
  ArrayStore s;
  for (int c = 0; c < 4; ++c) {
    auto n = std::to_string(c);
    s.f32["coords/" + n] = g.coords[static_cast<size_t>(c)];
    s.f32["embed/" + n] = g.grid_embed[static_cast<size_t>(c)];
    s.u8["valid/" + n] = g.valid[static_cast<size_t>(c)];
  }
  Tensor<double> sched({static_cast<int64_t>(g.schedule.size())});
  for (size_t i = 0; i < g.schedule.size(); ++i) sched[static_cast<int64_t>(i)] = g.schedule[i];
  s.f64["schedule"] = std::move(sched);
  s.put_text("key", key);
  s.save(path);
}

inline SweepGrids load_grids(const std::string& path, const std::string& key) {
  ArrayStore s = ArrayStore::load(path);
  if (s.text("key") != key) throw IoError(path, "grid cache key mismatch");
  SweepGrids g;
  for (int c = 0; c < 4; ++c) {
    auto n = std::to_string(c);
    g.coords.push_back(s.f32.at("coords/" + n));
    g.grid_embed.push_back(s.f32.at("embed/" + n));
    g.valid.push_back(s.u8.at("valid/" + n));
  }
  const auto& sched = s.f64.at("schedule");
  for (int64_t i = 0; i < sched.numel(); ++i) g.schedule.push_back(sched[i]);
  g.h2 = static_cast<int>(g.coords[0].dim(0));
  g.w2 = static_cast<int>(g.coords[0].dim(1));
  g.n2 = static_cast<int>(g.coords[0].dim(2));
  return g;
}

/// Build the sweeping grids, going through the on-disk cache when the
/// ROMNISWEEP_CACHE environment variable names a directory.
inline SweepGrids prepare_grids(const RigCalibration& rig, const SweepConfig& cfg) {
  const char* dir = std::getenv("ROMNISWEEP_CACHE");
  if (!dir || !*dir) return build_grids(rig, cfg);
  std::string key = grid_cache_key(rig, cfg);
  std::string path = std::string(dir) + "/grids_" + key + ".rsg";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (std::filesystem::exists(path)) {
    try {
      return load_grids(path, key);
    } catch (const Error&) {
      // stale or foreign file: fall through and rebuild
    }
  }
  SweepGrids g = build_grids(rig, cfg);
  save_grids(g, key, path);
  return g;
}

// ---- checkpoints --------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const Model<float>& model,
                            const AdamW<float>* opt, int64_t step, const RunConfig& cfg) {
  ArrayStore s;
  for (const auto& e : model.params.entries()) s.f32["param/" + e.name] = e.value;
  if (opt) {
    auto* mut = const_cast<AdamW<float>*>(opt);
    const auto& entries = model.params.entries();
    for (size_t k = 0; k < entries.size(); ++k) {
      s.f32["adam/m/" + entries[k].name] = mut->moments1()[k];
      s.f32["adam/v/" + entries[k].name] = mut->moments2()[k];
    }
  }
  s.put_text("config", config_to_json(cfg).dump(2));
  s.put_text("step", std::to_string(step));
  s.save(path);
}

struct Checkpoint {
  RunConfig cfg;
  int64_t step = 0;
  ArrayStore store;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  Checkpoint c;
  c.store = ArrayStore::load(path);
  c.cfg = config_from_json(nlohmann::json::parse(c.store.text("config")));
  c.step = std::stoll(c.store.text("step"));
  return c;
}

/// Copy weights (and optimizer moments, if present and requested) into a
/// freshly initialized model. Architecture mismatches surface as missing or
/// misshapen entries.
inline void restore_model(Model<float>& model, const Checkpoint& ckpt, AdamW<float>* opt = nullptr) {
  for (auto& e : model.params.entries()) {
    auto it = ckpt.store.f32.find("param/" + e.name);
    if (it == ckpt.store.f32.end())
      throw ConfigError("checkpoint is missing parameter '" + e.name + "'");
    if (!it->second.same_shape(e.value))
      throw ConfigError("checkpoint parameter '" + e.name + "' has shape " +
                        it->second.shape_str() + ", expected " + e.value.shape_str());
    e.value = it->second;
  }
  if (opt) {
    const auto& entries = model.params.entries();
    for (size_t k = 0; k < entries.size(); ++k) {
      opt->moments1()[k] = ckpt.store.f32.at("adam/m/" + entries[k].name);
      opt->moments2()[k] = ckpt.store.f32.at("adam/v/" + entries[k].name);
    }
    opt->set_step_count(ckpt.step);
  }
}

/// The checkpoint pins the architecture; evaluating or resuming under a
/// different one is an error, not a silent reinterpretation.
inline void check_architecture(const RunConfig& active, const RunConfig& ckpt) {
  if (active.channels != ckpt.channels)
    throw ConfigError("checkpoint was trained with model.channels=" +
                      std::to_string(ckpt.channels) + " but the active config says " +
                      std::to_string(active.channels));
  if (active.blocks != ckpt.blocks || active.norm != ckpt.norm)
    throw ConfigError("checkpoint feature extractor differs from the active config");
  if (active.fusion != ckpt.fusion || active.grid_embedding != ckpt.grid_embedding)
    throw ConfigError("checkpoint fusion setup differs from the active config");
  if (active.lookup_radius != ckpt.lookup_radius)
    throw ConfigError("checkpoint lookup radius differs from the active config");
}

// ---- training -----------------------------------------------------------------

struct TrainStats {
  int64_t step = 0;
  double loss = 0, lr = 0, grad_norm = 0;
};

struct TrainResult {
  std::string checkpoint_path;
  std::vector<TrainStats> log;
  double final_loss = 0;
};

inline TrainResult train(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create output directory: " + ec.message());

  check_dataset_geometry(cfg, cfg.dataset);
  RigCalibration rig = dataset_rig(cfg);
  SweepConfig sweep = cfg.sweep();
  SweepGrids grids = prepare_grids(rig, sweep);
  auto scenes = load_split(cfg.dataset, "train");

  Rng rng(cfg.seed);
  Model<float> model;
  model.cfg = cfg.model();
  {
    Rng init_rng = rng.fork(1);
    model.init(init_rng);
  }
  AdamW<float> opt(model.params, {0.9, 0.999, 1e-8, cfg.weight_decay, cfg.clip_norm});

  Rng order_rng = rng.fork(2);
  std::vector<size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), size_t(0));
  order_rng.shuffle(order);
  size_t cursor = 0;

  TrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor == order.size()) {
      order_rng.shuffle(order);
      cursor = 0;
    }
    const SceneSample& scene = scenes[order[cursor++]];

    Tape<float> tape;
    auto v = model.params.leaves(tape, true);
    auto res = model.forward(tape, scene.images, grids, v);
    Var loss = sequence_loss(tape, res.history, scene.gt, scene.mask, cfg.gamma);
    double loss_val = static_cast<double>(tape.val(loss)[0]);
    if (!std::isfinite(loss_val)) {
      save_checkpoint(out_dir + "/diagnostic.rsg", model, &opt, step, cfg);
      throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                         " on scene " + scene.id + " (diagnostic checkpoint written)");
    }
    tape.backward(loss);

    std::vector<Tensor<float>> grads;
    grads.reserve(model.params.size());
    for (const auto& e : model.params.entries()) grads.push_back(tape.grad(v.at(e.name)));

    double lr = one_cycle_lr(step, cfg.steps, cfg.max_lr);
    double gn = opt.step(std::move(grads), lr);

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
      result.log.push_back({step, loss_val, lr, gn});
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
        step + 1 != cfg.steps) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.rsg", step + 1);
      save_checkpoint(out_dir + "/" + name, model, &opt, step + 1, cfg);
    }
    result.final_loss = loss_val;
  }

  result.checkpoint_path = out_dir + "/checkpoint_final.rsg";
  save_checkpoint(result.checkpoint_path, model, &opt, cfg.steps, cfg);

  nlohmann::json lj;
  lj["config"] = config_to_json(cfg);
  lj["entries"] = nlohmann::json::array();
  for (const auto& s : result.log)
    lj["entries"].push_back(
        {{"step", s.step}, {"loss", s.loss}, {"lr", s.lr}, {"grad_norm", s.grad_norm}});
  std::ofstream lf(out_dir + "/train_log.json");
  lf << lj.dump(2) << "\n";
  return result;
}

// ---- evaluation ---------------------------------------------------------------

struct EvalResult {
  MetricsRecord aggregate;
  std::vector<std::pair<std::string, MetricsRecord>> scenes;
  std::vector<double> iter_mae;  // pixel-weighted MAE per iteration
  double zero_mae = 0;           // MAE of the all-zero prediction
};

/// Run held-out inference and aggregate index-error metrics. Deterministic:
/// no RNG is consumed anywhere on this path.
inline EvalResult evaluate(const std::string& checkpoint_path, const RunConfig& active,
                           const std::string& split = "test") {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  check_architecture(active, ckpt.cfg);
  RunConfig cfg = active;
  cfg.validate();

  check_dataset_geometry(cfg, cfg.dataset);
  RigCalibration rig = dataset_rig(cfg);
  SweepConfig sweep = cfg.sweep();
  SweepGrids grids = prepare_grids(rig, sweep);
  auto scenes = load_split(cfg.dataset, split);

  Model<float> model;
  model.cfg = cfg.model();
  {
    Rng tmp(1);
    model.init(tmp);
  }
  restore_model(model, ckpt);

  EvalResult out;
  std::vector<double> iter_ae;  // summed absolute error per iteration
  int64_t iter_count = 0;
  double zero_ae = 0;
  for (const auto& scene : scenes) {
    Tape<float> tape;
    auto v = model.params.leaves(tape, false);
    auto res = model.forward(tape, scene.images, grids, v, cfg.iters);
    if (iter_ae.empty()) iter_ae.assign(res.history.size(), 0.0);

    Tensor<float> pred = clamp_index(tape.val(res.history.back()), sweep.n_spheres);
    MetricsRecord rec = metrics(pred, scene.gt, scene.mask);
    out.scenes.emplace_back(scene.id, rec);

    for (size_t i = 0; i < res.history.size(); ++i) {
      Tensor<float> p = clamp_index(tape.val(res.history[i]), sweep.n_spheres);
      for (int64_t k = 0; k < p.numel(); ++k)
        if (scene.mask[k]) iter_ae[i] += std::abs(static_cast<double>(p[k]) - scene.gt[k]);
    }
    for (int64_t k = 0; k < scene.gt.numel(); ++k)
      if (scene.mask[k]) zero_ae += static_cast<double>(scene.gt[k]);
    iter_count += rec.count;
  }

  std::vector<MetricsRecord> rows;
  for (const auto& [id, r] : out.scenes) rows.push_back(r);
  out.aggregate = aggregate(rows);
  for (double ae : iter_ae) out.iter_mae.push_back(ae / static_cast<double>(iter_count));
  out.zero_mae = zero_ae / static_cast<double>(iter_count);
  return out;
}

inline nlohmann::json eval_to_json(const EvalResult& r) {
  auto rec = [](const MetricsRecord& m) {
    return nlohmann::json{{"gt1", m.gt1}, {"gt3", m.gt3},     {"gt5", m.gt5},
                          {"mae", m.mae}, {"rms", m.rms},     {"count", m.count}};
  };
  nlohmann::json j;
  j["aggregate"] = rec(r.aggregate);
  j["scenes"] = nlohmann::json::array();
  for (const auto& [id, m] : r.scenes) {
    nlohmann::json row = rec(m);
    row["scene"] = id;
    j["scenes"].push_back(row);
  }
  j["iter_mae"] = r.iter_mae;
  j["zero_mae"] = r.zero_mae;
  return j;
}

// ---- single-scene inference -----------------------------------------------------

/// Write depth.pfm (predicted index map), depth.png (color-mapped), and one
/// error map per iteration for a single scene.
inline void infer_scene(const std::string& checkpoint_path, const RunConfig& active,
                        const std::string& scene_id, const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  check_architecture(active, ckpt.cfg);
  RunConfig cfg = active;
  cfg.validate();
  check_dataset_geometry(cfg, cfg.dataset);

  SweepConfig sweep = cfg.sweep();
  SweepGrids grids = prepare_grids(dataset_rig(cfg), sweep);

  SweepConfig manifest_sweep;
  auto files = load_manifest(cfg.dataset, &manifest_sweep);
  const SceneFiles* found = nullptr;
  for (const auto& f : files)
    if (f.id == scene_id) found = &f;
  if (!found) throw IoError(cfg.dataset, "scene '" + scene_id + "' not in manifest");
  SceneSample scene = load_scene(cfg.dataset, *found);

  Model<float> model;
  model.cfg = cfg.model();
  {
    Rng tmp(1);
    model.init(tmp);
  }
  restore_model(model, ckpt);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create output directory: " + ec.message());

  Tape<float> tape;
  auto v = model.params.leaves(tape, false);
  auto res = model.forward(tape, scene.images, grids, v, cfg.iters);

  Tensor<float> final_pred = clamp_index(tape.val(res.history.back()), sweep.n_spheres);
  save_pfm(final_pred, out_dir + "/depth.pfm");
  Tensor<uint8_t> ones(scene.mask.shape(), uint8_t(1));
  save_png(render_index_map(final_pred, ones, static_cast<float>(sweep.n_spheres - 1)),
           out_dir + "/depth.png");
  for (size_t i = 0; i < res.history.size(); ++i) {
    Tensor<float> p = clamp_index(tape.val(res.history[i]), sweep.n_spheres);
    save_png(render_error_map(p, scene.gt, scene.mask),
             out_dir + "/err_iter" + std::to_string(i + 1) + ".png");
  }
}

}  // namespace romni
