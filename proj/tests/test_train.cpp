#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gradcheck.hpp"
#include "romni/cli/config.hpp"
#include "romni/train/trainer.hpp"

using namespace romni;
using Catch::Approx;
using test::gradcheck_rel;

namespace {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("romni_train_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

template <typename T>
Tensor<T> tens(std::vector<int64_t> shape, std::initializer_list<T> values) {
  Tensor<T> t(std::move(shape));
  REQUIRE(t.numel() == static_cast<int64_t>(values.size()));
  int64_t i = 0;
  for (T v : values) t[i++] = v;
  return t;
}

/// Independently computed metrics: collect masked errors first, then reduce
/// with stdlib algorithms. Deliberately a different code path from metrics().
MetricsRecord brute_metrics(const Tensor<float>& pred, const Tensor<float>& gt,
                            const Tensor<uint8_t>& mask) {
  std::vector<double> errs;
  for (int64_t i = 0; i < pred.numel(); ++i)
    if (mask[i]) errs.push_back(std::abs(double(pred[i]) - double(gt[i])));
  MetricsRecord r;
  r.count = static_cast<int64_t>(errs.size());
  double n = static_cast<double>(errs.size());
  r.mae = std::accumulate(errs.begin(), errs.end(), 0.0) / n;
  r.rms = std::sqrt(std::inner_product(errs.begin(), errs.end(), errs.begin(), 0.0) / n);
  auto pct = [&](double thr) {
    return 100.0 * std::count_if(errs.begin(), errs.end(), [&](double e) { return e > thr; }) / n;
  };
  r.gt1 = pct(1.0);
  r.gt3 = pct(3.0);
  r.gt5 = pct(5.0);
  return r;
}

RunConfig tiny_config(const std::string& dataset_dir) {
  RunConfig cfg;
  cfg.n_spheres = 16;
  cfg.out_width = 32;
  cfg.out_height = 16;
  cfg.image_size = 32;
  cfg.channels = 2;
  cfg.blocks = 1;
  cfg.iters = 2;
  cfg.steps = 6;
  cfg.checkpoint_every = 0;
  cfg.log_every = 2;
  cfg.train_scenes = 2;
  cfg.test_scenes = 1;
  cfg.dataset = dataset_dir;
  return cfg;
}

void write_tiny_dataset(const RunConfig& cfg) {
  make_dataset(cfg.dataset_cfg(), cfg.rig(), cfg.sweep(), cfg.dataset);
}

}  // namespace

// ------------------------------------------------------------- loss weights

TEST_CASE("loss weights follow the geometric schedule exactly", "[train]") {
  auto w = loss_weights(12, 0.9);
  REQUIRE(w.size() == 12);
  for (int i = 0; i < 12; ++i)
    REQUIRE(w[size_t(i)] == Approx(std::pow(0.9, 11 - i)).epsilon(0).margin(1e-12));
  REQUIRE(w.back() == 1.0);

  auto w3 = loss_weights(3, 0.9);
  REQUIRE(w3[0] + w3[1] + w3[2] == Approx(2.71).margin(1e-12));

  auto flat = loss_weights(4, 1.0);
  for (double v : flat) REQUIRE(v == 1.0);

  REQUIRE_THROWS_AS(loss_weights(0, 0.9), InputError);
  REQUIRE_THROWS_AS(loss_weights(3, 0.0), InputError);
  REQUIRE_THROWS_AS(loss_weights(3, 1.5), InputError);
}

TEST_CASE("sequence loss matches a hand-computed weighted masked L1", "[train]") {
  Tape<double> t;
  Tensor<double> gt = tens<double>({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor<uint8_t> mask = tens<uint8_t>({1, 2, 2}, {1, 1, 0, 1});
  Tensor<double> p1({1, 2, 2}, 0.0);
  Tensor<double> p2 = tens<double>({1, 2, 2}, {1.5, 1.0, 9.0, 4.5});
  std::vector<Var> hist{t.leaf(p1, true), t.leaf(p2, true)};

  Var loss = sequence_loss(t, hist, gt, mask, 0.9);
  // masked mean abs errors: iter1 = (1+2+4)/3, iter2 = (0.5+1+0.5)/3.
  double expect = 0.9 * (7.0 / 3.0) + 1.0 * (2.0 / 3.0);
  REQUIRE(t.val(loss)[0] == Approx(expect).margin(1e-12));

  // the masked-out pixel must not receive gradient
  t.backward(loss);
  REQUIRE(t.grad(hist[1])[2] == 0.0);
  // d|e|/dpred = sign(e), averaged over the 3 valid pixels, final weight 1.0
  REQUIRE(t.grad(hist[1])[0] == Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("sequence loss is differentiable", "[train]") {
  Rng rng(405);
  Tensor<double> gt({2, 3});
  Tensor<uint8_t> mask({2, 3}, 1);
  for (auto& v : gt) v = rng.uniform(0.0, 5.0);
  mask[4] = 0;
  Tensor<double> a({2, 3}), b({2, 3});
  // keep predictions away from gt so |x| has no kink in the FD window
  for (auto& v : a) v = rng.uniform(6.0, 9.0);
  for (auto& v : b) v = rng.uniform(-4.0, -1.0);

  auto fn = [&](Tape<double>& tt, const std::vector<Var>& leaves) {
    std::vector<Var> h{leaves[0], leaves[1]};
    return sequence_loss(tt, h, gt, mask, 0.9);
  };
  REQUIRE(gradcheck_rel(fn, {a, b}) < 1e-6);
}

// ------------------------------------------------------------------ metrics

TEST_CASE("metrics agree with an independent brute-force computation", "[train]") {
  Rng rng(406);
  const int64_t n = 1000;
  Tensor<float> pred({n}), gt({n});
  Tensor<uint8_t> mask({n});
  for (int64_t i = 0; i < n; ++i) {
    pred[i] = static_cast<float>(rng.uniform(0.0, 32.0));
    gt[i] = static_cast<float>(rng.uniform(0.0, 32.0));
    mask[i] = rng.uniform() < 0.8 ? 1 : 0;
  }
  MetricsRecord a = metrics(pred, gt, mask);
  MetricsRecord b = brute_metrics(pred, gt, mask);
  REQUIRE(a.count == b.count);
  REQUIRE(a.mae == Approx(b.mae).margin(1e-9));
  REQUIRE(a.rms == Approx(b.rms).margin(1e-9));
  REQUIRE(a.gt1 == Approx(b.gt1).margin(1e-9));
  REQUIRE(a.gt3 == Approx(b.gt3).margin(1e-9));
  REQUIRE(a.gt5 == Approx(b.gt5).margin(1e-9));

  // invariants
  REQUIRE(a.gt5 <= a.gt3);
  REQUIRE(a.gt3 <= a.gt1);
  REQUIRE(a.rms >= a.mae);

  // permutation invariance up to float-summation noise
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  Tensor<float> pp({n}), gg({n});
  Tensor<uint8_t> mm({n});
  for (int64_t i = 0; i < n; ++i) {
    pp[i] = pred[idx[size_t(i)]];
    gg[i] = gt[idx[size_t(i)]];
    mm[i] = mask[idx[size_t(i)]];
  }
  MetricsRecord c = metrics(pp, gg, mm);
  REQUIRE(c.mae == Approx(a.mae).margin(1e-9));
  REQUIRE(c.rms == Approx(a.rms).margin(1e-9));
  REQUIRE(c.gt1 == a.gt1);
}

TEST_CASE("metrics reject shape mismatches and empty masks", "[train]") {
  Tensor<float> a({4}, 1.f), b({5}, 1.f);
  Tensor<uint8_t> m4({4}, 1), m5({5}, 1), zero({4}, 0);
  REQUIRE_THROWS_AS(metrics(a, b, m5), InputError);
  REQUIRE_THROWS_AS(metrics(a, a, m5), InputError);
  REQUIRE_THROWS_AS(metrics(a, a, zero), InputError);
}

TEST_CASE("aggregate of chunks equals metrics of the concatenation", "[train]") {
  Rng rng(407);
  const int64_t n = 999;
  Tensor<float> pred({n}), gt({n});
  Tensor<uint8_t> mask({n});
  for (int64_t i = 0; i < n; ++i) {
    pred[i] = static_cast<float>(rng.uniform(0.0, 32.0));
    gt[i] = static_cast<float>(rng.uniform(0.0, 32.0));
    mask[i] = rng.uniform() < 0.9 ? 1 : 0;
  }
  MetricsRecord whole = metrics(pred, gt, mask);

  std::vector<MetricsRecord> rows;
  for (int64_t chunk = 0; chunk < 3; ++chunk) {
    Tensor<float> p({333}), g({333});
    Tensor<uint8_t> m({333});
    for (int64_t i = 0; i < 333; ++i) {
      p[i] = pred[chunk * 333 + i];
      g[i] = gt[chunk * 333 + i];
      m[i] = mask[chunk * 333 + i];
    }
    rows.push_back(metrics(p, g, m));
  }
  MetricsRecord agg = aggregate(rows);
  REQUIRE(agg.count == whole.count);
  REQUIRE(agg.mae == Approx(whole.mae).margin(1e-9));
  REQUIRE(agg.rms == Approx(whole.rms).margin(1e-9));
  REQUIRE(agg.gt1 == Approx(whole.gt1).margin(1e-9));
  REQUIRE(agg.gt3 == Approx(whole.gt3).margin(1e-9));
  REQUIRE(agg.gt5 == Approx(whole.gt5).margin(1e-9));
  REQUIRE_THROWS_AS(aggregate(std::vector<MetricsRecord>{}), InputError);
}

TEST_CASE("clamp_index clips to the valid sphere range", "[train]") {
  Tensor<float> m =
      clamp_index(tens<float>({5}, {-2.f, 0.f, 7.25f, 15.f, 22.f}), 16);
  REQUIRE(m[0] == 0.f);
  REQUIRE(m[1] == 0.f);
  REQUIRE(m[2] == 7.25f);
  REQUIRE(m[3] == 15.f);
  REQUIRE(m[4] == 15.f);
}

// ---------------------------------------------------------------- optimizer

TEST_CASE("one-cycle schedule warms up linearly then decays to zero", "[train]") {
  const int64_t total = 100;
  const double max_lr = 4e-4;
  // warmup is total/20 = 5 steps: 1/5, 2/5, ..., 5/5 of max_lr
  REQUIRE(one_cycle_lr(0, total, max_lr) == Approx(max_lr / 5));
  REQUIRE(one_cycle_lr(3, total, max_lr) == Approx(max_lr * 4 / 5));
  REQUIRE(one_cycle_lr(5, total, max_lr) == Approx(max_lr));  // cosine start
  for (int64_t s = 1; s < total; ++s) {
    double prev = one_cycle_lr(s - 1, total, max_lr);
    double cur = one_cycle_lr(s, total, max_lr);
    if (s < 5)
      REQUIRE(cur > prev);
    else if (s > 5)
      REQUIRE(cur < prev);
    REQUIRE(cur > 0);
    REQUIRE(cur <= max_lr * (1 + 1e-12));
  }
  REQUIRE(one_cycle_lr(total - 1, total, max_lr) < 0.01 * max_lr);
  REQUIRE_THROWS_AS(one_cycle_lr(-1, total, max_lr), InputError);
  REQUIRE_THROWS_AS(one_cycle_lr(total, total, max_lr), InputError);
  REQUIRE_THROWS_AS(one_cycle_lr(0, 0, max_lr), InputError);
  REQUIRE_THROWS_AS(one_cycle_lr(0, total, 0.0), InputError);
}

TEST_CASE("gradient clipping rescales to the target norm", "[train]") {
  std::vector<Tensor<float>> grads;
  grads.push_back(tens<float>({2}, {3.f, 0.f}));
  grads.push_back(tens<float>({1}, {4.f}));
  double pre = AdamW<float>::clip_gradients(grads, 1.0);
  REQUIRE(pre == Approx(5.0));
  REQUIRE(grads[0][0] == Approx(0.6f));
  REQUIRE(grads[1][0] == Approx(0.8f));

  // already below the limit: untouched
  std::vector<Tensor<float>> small;
  small.push_back(tens<float>({1}, {0.25f}));
  double pre2 = AdamW<float>::clip_gradients(small, 1.0);
  REQUIRE(pre2 == Approx(0.25));
  REQUIRE(small[0][0] == 0.25f);
}

TEST_CASE("weight decay is decoupled from the gradient moments", "[train]") {
  ParamStore<float> p;
  p.add("w", {1})[0] = 2.0f;
  AdamWConfig ac;
  ac.weight_decay = 0.1;
  AdamW<float> opt(p, ac);
  // zero gradient: the Adam update term vanishes, only decay acts
  std::vector<Tensor<float>> g;
  g.emplace_back(std::vector<int64_t>{1}, 0.f);
  opt.step(g, 0.5);
  REQUIRE(p.at("w")[0] == Approx(2.0f * (1.f - 0.5f * 0.1f)).margin(1e-7));
}

TEST_CASE("adamw minimises a toy quadratic", "[train]") {
  ParamStore<float> p;
  p.add("w", {1})[0] = 10.0f;
  AdamW<float> opt(p, {});
  for (int i = 0; i < 400; ++i) {
    float w = p.at("w")[0];
    std::vector<Tensor<float>> g;
    g.push_back(tens<float>({1}, {2.f * (w - 3.f)}));
    opt.step(g, 0.05);
  }
  REQUIRE(p.at("w")[0] == Approx(3.0f).margin(0.05));
  REQUIRE(opt.step_count() == 400);
}

TEST_CASE("adamw validates gradient count, shape and finiteness", "[train]") {
  ParamStore<float> p;
  p.add("w", {2});
  AdamW<float> opt(p, {});
  REQUIRE_THROWS_AS(opt.step({}, 1e-3), InputError);
  std::vector<Tensor<float>> bad_shape;
  bad_shape.emplace_back(std::vector<int64_t>{3}, 0.f);
  REQUIRE_THROWS_AS(opt.step(bad_shape, 1e-3), InputError);
  std::vector<Tensor<float>> bad_val;
  bad_val.emplace_back(std::vector<int64_t>{2}, std::numeric_limits<float>::quiet_NaN());
  REQUIRE_THROWS_AS(opt.step(bad_val, 1e-3), NumericError);
}

// ------------------------------------------------------------------- config

TEST_CASE("config survives a save/load round trip byte for byte", "[train]") {
  RunConfig c;
  c.n_spheres = 48;
  c.fusion = "interleave";
  c.max_lr = 3.5e-4;
  c.dataset = "some/dir";
  c.phi_min_deg = -30.0;
  std::string dir = temp_dir("cfg");
  save_config(c, dir + "/a.json");
  RunConfig d = load_config(dir + "/a.json");
  REQUIRE(config_to_json(c).dump(2) == config_to_json(d).dump(2));
  save_config(d, dir + "/b.json");
  std::ifstream fa(dir + "/a.json"), fb(dir + "/b.json");
  std::string sa((std::istreambuf_iterator<char>(fa)), {});
  std::string sb((std::istreambuf_iterator<char>(fb)), {});
  REQUIRE(sa == sb);
}

TEST_CASE("config rejects unknown keys, sections and bad values", "[train]") {
  nlohmann::json j = config_to_json(RunConfig{});
  j["model"]["channles"] = 8;  // typo must be fatal, not ignored
  REQUIRE_THROWS_AS(config_from_json(j), ConfigError);

  nlohmann::json j2 = config_to_json(RunConfig{});
  j2["extra_section"] = nlohmann::json::object();
  REQUIRE_THROWS_AS(config_from_json(j2), ConfigError);

  nlohmann::json j3 = config_to_json(RunConfig{});
  j3["model"]["fusion"] = "blend";
  REQUIRE_THROWS_AS(config_from_json(j3), ConfigError);

  RunConfig bad;
  bad.gamma = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.image_size = 9;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("--set overrides parse typed values", "[train]") {
  RunConfig c;
  apply_override(c, "model.channels=8");
  REQUIRE(c.channels == 8);
  apply_override(c, "train.max_lr=1e-3");
  REQUIRE(c.max_lr == Approx(1e-3));
  apply_override(c, "model.norm=off");
  REQUIRE(c.norm == false);
  apply_override(c, "model.norm=true");
  REQUIRE(c.norm == true);
  apply_override(c, "model.fusion=all");
  REQUIRE(c.fusion == "all");
  apply_override(c, "data.dataset=/tmp/x");
  REQUIRE(c.dataset == "/tmp/x");
  REQUIRE_THROWS_AS(apply_override(c, "nosuch.key=1"), ConfigError);
  REQUIRE_THROWS_AS(apply_override(c, "model.channels"), ConfigError);
  REQUIRE_THROWS_AS(apply_override(c, "model.channels=abc"), ConfigError);
}

// -------------------------------------------------------------- checkpoints

TEST_CASE("checkpoint round trip restores parameters, moments and step", "[train]") {
  RunConfig cfg;
  cfg.channels = 2;
  cfg.blocks = 1;
  cfg.n_spheres = 16;
  cfg.out_width = 16;
  cfg.out_height = 8;
  Rng rng(408);
  Model<float> model;
  model.cfg = cfg.model();
  model.init(rng);
  AdamW<float> opt(model.params, {});
  // one fake step so the moments are nonzero
  std::vector<Tensor<float>> g;
  for (const auto& e : model.params.entries()) {
    Tensor<float> t(e.value.shape());
    for (auto& v : t) v = static_cast<float>(rng.normal()) * 0.01f;
    g.push_back(std::move(t));
  }
  opt.step(g, 1e-4);

  std::string dir = temp_dir("ckpt");
  save_checkpoint(dir + "/c.rsg", model, &opt, 1, cfg);

  Model<float> other;
  other.cfg = cfg.model();
  Rng rng2(999);
  other.init(rng2);
  AdamW<float> opt2(other.params, {});
  Checkpoint ckpt = load_checkpoint(dir + "/c.rsg");
  REQUIRE(ckpt.step == 1);
  restore_model(other, ckpt, &opt2);
  REQUIRE(opt2.step_count() == 1);

  for (const auto& e : model.params.entries()) {
    const auto& a = e.value;
    const auto& b = other.params.at(e.name);
    REQUIRE(a.shape() == b.shape());
    for (int64_t i = 0; i < a.numel(); ++i) REQUIRE(a[i] == b[i]);
  }
  for (size_t k = 0; k < opt.moments1().size(); ++k)
    for (int64_t i = 0; i < opt.moments1()[k].numel(); ++i) {
      REQUIRE(opt.moments1()[k][i] == opt2.moments1()[k][i]);
      REQUIRE(opt.moments2()[k][i] == opt2.moments2()[k][i]);
    }

  // architecture mismatch must be loud and specific
  RunConfig wide = cfg;
  wide.channels = 4;
  REQUIRE_THROWS_WITH(check_architecture(wide, ckpt.cfg),
                      Catch::Matchers::ContainsSubstring("channel"));
  RunConfig fuse = cfg;
  fuse.fusion = "interleave";
  REQUIRE_THROWS_AS(check_architecture(fuse, ckpt.cfg), ConfigError);
  // iteration count is a runtime knob, not an architecture change
  RunConfig more = cfg;
  more.iters = 5;
  REQUIRE_NOTHROW(check_architecture(more, ckpt.cfg));
}

// ------------------------------------------------------------- grid caching

TEST_CASE("sweep grids round trip through the disk cache", "[train]") {
  RunConfig cfg;
  cfg.n_spheres = 16;
  cfg.out_width = 16;
  cfg.out_height = 8;
  cfg.image_size = 16;
  RigCalibration rig = cfg.rig();

  std::string dir = temp_dir("gridcache");
  setenv("ROMNISWEEP_CACHE", dir.c_str(), 1);
  SweepGrids a = prepare_grids(rig, cfg.sweep());
  REQUIRE_FALSE(fs::is_empty(dir));
  SweepGrids b = prepare_grids(rig, cfg.sweep());  // served from disk now
  unsetenv("ROMNISWEEP_CACHE");

  REQUIRE(a.h2 == b.h2);
  REQUIRE(a.w2 == b.w2);
  REQUIRE(a.n2 == b.n2);
  for (int cam = 0; cam < 4; ++cam) {
    for (int64_t i = 0; i < a.coords[cam].numel(); ++i)
      REQUIRE(a.coords[cam][i] == b.coords[cam][i]);
    for (int64_t i = 0; i < a.valid[cam].numel(); ++i)
      REQUIRE(a.valid[cam][i] == b.valid[cam][i]);
    for (int64_t i = 0; i < a.grid_embed[cam].numel(); ++i)
      REQUIRE(a.grid_embed[cam][i] == b.grid_embed[cam][i]);
  }
  for (size_t i = 0; i < a.schedule.size(); ++i) REQUIRE(a.schedule[i] == b.schedule[i]);

  // a different rig must produce a different cache key
  RigCalibration rig2 = make_default_rig(16, 0.5, 220.0);
  REQUIRE(grid_cache_key(rig, cfg.sweep()) != grid_cache_key(rig2, cfg.sweep()));
}

// ---------------------------------------------------------- train/eval loop

TEST_CASE("a short training run produces a loadable, evaluable checkpoint", "[train]") {
  std::string root = temp_dir("loop");
  RunConfig cfg = tiny_config(root + "/data");
  write_tiny_dataset(cfg);

  TrainResult tr = train(cfg, root + "/run");
  REQUIRE(fs::exists(tr.checkpoint_path));
  REQUIRE(std::isfinite(tr.final_loss));
  REQUIRE(!tr.log.empty());
  for (const auto& s : tr.log) {
    REQUIRE(std::isfinite(s.loss));
    REQUIRE(s.lr > 0);
    REQUIRE(s.grad_norm >= 0);
  }

  EvalResult ev = evaluate(tr.checkpoint_path, cfg);
  REQUIRE(ev.aggregate.count > 0);
  REQUIRE(std::isfinite(ev.aggregate.mae));
  REQUIRE(ev.aggregate.rms >= ev.aggregate.mae);
  REQUIRE(ev.iter_mae.size() == size_t(cfg.iters));
  REQUIRE(ev.zero_mae > 0);
  REQUIRE(ev.scenes.size() == 1);

  // determinism: the whole train+eval pipeline repeats bit for bit
  TrainResult tr2 = train(cfg, root + "/run2");
  REQUIRE(tr2.final_loss == tr.final_loss);
  EvalResult ev2 = evaluate(tr2.checkpoint_path, cfg);
  REQUIRE(ev2.aggregate.mae == ev.aggregate.mae);
  REQUIRE(eval_to_json(ev2).dump() == eval_to_json(ev).dump());
}

TEST_CASE("training rejects a config that disagrees with the dataset", "[train]") {
  std::string root = temp_dir("geom");
  RunConfig cfg = tiny_config(root + "/data");
  write_tiny_dataset(cfg);
  RunConfig off = cfg;
  off.n_spheres = 32;  // dataset GT was rendered for 16 spheres
  REQUIRE_THROWS_AS(train(off, root + "/run"), ConfigError);
  RunConfig off2 = cfg;
  off2.min_depth = 1.0;
  REQUIRE_THROWS_AS(train(off2, root + "/run"), ConfigError);
}
