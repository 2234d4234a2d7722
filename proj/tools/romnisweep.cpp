// romnisweep: four fisheye cameras in, 360-degree inverse-depth panoramas out.
// Subcommands: gen-data, train, eval, infer, export-cloud, self-test.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "romni/cli/config.hpp"
#include "romni/cli/selftest.hpp"
#include "romni/io/ply.hpp"
#include "romni/train/trainer.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  long long seed = -1;
  int iters = 0;
  std::string fusion, grid_embedding, adaptive_context;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (defaults apply when omitted)");
  cmd->add_option("--set", f.sets, "override one config key, e.g. --set train.steps=500")
      ->take_all();
  cmd->add_option("--seed", f.seed, "seed for both training and data generation");
  cmd->add_option("--iters", f.iters, "refinement iterations M");
  cmd->add_option("--fusion", f.fusion, "volume fusion: adaptive | interleave | all")
      ->check(CLI::IsMember({"adaptive", "interleave", "all"}));
  cmd->add_option("--grid-embedding", f.grid_embedding, "grid embedding: on | off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--adaptive-context", f.adaptive_context, "adaptive context: on | off")
      ->check(CLI::IsMember({"on", "off"}));
}

romni::RunConfig resolve_config(const CommonFlags& f) {
  romni::RunConfig cfg;
  if (!f.config_path.empty()) cfg = romni::load_config(f.config_path);
  for (const auto& s : f.sets) romni::apply_override(cfg, s);
  if (f.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(f.seed);
    cfg.data_seed = static_cast<uint64_t>(f.seed);
  }
  if (f.iters > 0) cfg.iters = f.iters;
  if (!f.fusion.empty()) cfg.fusion = f.fusion;
  if (!f.grid_embedding.empty()) cfg.grid_embedding = f.grid_embedding == "on";
  if (!f.adaptive_context.empty()) cfg.adaptive_context = f.adaptive_context == "on";
  return cfg;
}

int cmd_gen_data(const CommonFlags& f, const std::string& out) {
  romni::RunConfig cfg = resolve_config(f);
  cfg.validate();
  std::string dir = out.empty() ? cfg.dataset : out;
  auto files = romni::make_dataset(cfg.dataset_cfg(), cfg.rig(), cfg.sweep(), dir);
  std::printf("wrote %zu scenes to %s\n", files.size(), dir.c_str());
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& out) {
  romni::RunConfig cfg = resolve_config(f);
  auto result = romni::train(cfg, out);
  std::printf("trained %d steps, final loss %.6f, checkpoint %s\n", cfg.steps,
              result.final_loss, result.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, const std::string& out,
             const std::string& split) {
  romni::RunConfig cfg = resolve_config(f);
  auto result = romni::evaluate(checkpoint, cfg, split);
  auto j = romni::eval_to_json(result);
  std::string text = j.dump(2) + "\n";
  if (!out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    std::ofstream of(out + "/metrics.json");
    if (!of) throw romni::IoError(out + "/metrics.json", "cannot open for writing");
    of << text;
  }
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_infer(const CommonFlags& f, const std::string& checkpoint, const std::string& scene,
              const std::string& out) {
  romni::RunConfig cfg = resolve_config(f);
  romni::infer_scene(checkpoint, cfg, scene, out);
  std::printf("wrote depth.pfm, depth.png and per-iteration error maps to %s\n", out.c_str());
  return 0;
}

int cmd_export_cloud(const CommonFlags& f, const std::string& depth_path,
                     const std::string& rgb_path, const std::string& out, bool ascii,
                     double floor) {
  romni::RunConfig cfg = resolve_config(f);
  romni::SweepConfig sweep = cfg.sweep();
  romni::Tensor<float> depth = romni::load_pfm(depth_path);
  if (depth.dim(0) != sweep.out_height || depth.dim(1) != sweep.out_width)
    throw romni::ConfigError("depth map is " + depth.shape_str() +
                             " but the sweep config expects (" +
                             std::to_string(sweep.out_height) + "," +
                             std::to_string(sweep.out_width) + ")");
  romni::Tensor<uint8_t> mask({depth.dim(0), depth.dim(1)}, uint8_t(1));
  romni::Tensor<uint8_t> rgb;
  const romni::Tensor<uint8_t>* rgb_ptr = nullptr;
  if (!rgb_path.empty()) {
    rgb = romni::load_png(rgb_path);
    rgb_ptr = &rgb;
  }
  int64_t n = romni::export_pointcloud(depth, mask, sweep, rgb_ptr, out, ascii, floor);
  std::printf("wrote %lld points to %s\n", static_cast<long long>(n), out.c_str());
  return 0;
}

int cmd_self_test() {
  auto results = romni::run_self_tests();
  bool all = true;
  for (const auto& [name, ok] : results) {
    std::printf("%-32s %s\n", name.c_str(), ok ? "pass" : "FAIL");
    all = all && ok;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omnidirectional stereo via spherical sweeping and recurrent refinement"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string out, checkpoint, scene, split = "test";
  std::string depth_path, rgb_path, cloud_out = "cloud.ply";
  bool ascii = false;
  double floor = 0.5;

  auto* gen = app.add_subcommand("gen-data", "render a procedural dataset");
  add_common(gen, f);
  gen->add_option("--out", out, "output directory (default: data.dataset from the config)");

  auto* train = app.add_subcommand("train", "train a model on a generated dataset");
  add_common(train, f);
  train->add_option("--out", out, "run directory for checkpoints and logs")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  add_common(eval, f);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--out", out, "directory for metrics.json (also printed to stdout)");
  eval->add_option("--split", split, "dataset split: train | test")
      ->check(CLI::IsMember({"train", "test"}));

  auto* infer = app.add_subcommand("infer", "run one scene and write depth + error maps");
  add_common(infer, f);
  infer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer->add_option("--scene", scene, "scene id, e.g. scene_0003")->required();
  infer->add_option("--out", out, "output directory")->required();

  auto* cloud = app.add_subcommand("export-cloud", "turn a depth panorama into a PLY point cloud");
  add_common(cloud, f);
  cloud->add_option("--depth", depth_path, "index-map PFM (from infer)")->required();
  cloud->add_option("--rgb", rgb_path, "optional color panorama PNG");
  cloud->add_option("--out", cloud_out, "output PLY path");
  cloud->add_flag("--ascii", ascii, "write ASCII PLY instead of binary");
  cloud->add_option("--floor", floor, "skip pixels with index below this value");

  auto* selftest = app.add_subcommand("self-test", "run the built-in oracle/invariant suite");
  (void)selftest;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f, out);
    if (train->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, checkpoint, out, split);
    if (infer->parsed()) return cmd_infer(f, checkpoint, scene, out);
    if (cloud->parsed()) return cmd_export_cloud(f, depth_path, rgb_path, cloud_out, ascii, floor);
    if (selftest->parsed()) return cmd_self_test();
  } catch (const romni::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
