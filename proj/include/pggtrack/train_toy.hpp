#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pggtrack/autodiff.hpp"
#include "pggtrack/config.hpp"
#include "pggtrack/metrics.hpp"
#include "pggtrack/pgg.hpp"
#include "pggtrack/pipeline.hpp"
#include "pggtrack/simulator.hpp"
#include "pggtrack/spatial_embed.hpp"

namespace pggtrack {

// Smallest model that can learn the embedding fields: one linear map per
// pixel from hand-crafted input channels to (KE, SVF.x, SVF.y).
struct ToyPredictor {
  static constexpr int kFeatureCount = 5;  // noisy ke, noisy svf x/y, coords
  static constexpr int kOutputCount = 3;

  std::vector<double> weights;  // kOutputCount x kFeatureCount, row-major
  std::vector<double> bias;     // kOutputCount

  static ToyPredictor init(std::uint64_t seed) {
    ToyPredictor p;
    Rng rng = Rng::derive(seed, 0xdadfeedULL);
    p.weights.resize(kOutputCount * kFeatureCount);
    p.bias.assign(kOutputCount, 0.0);
    for (double& w : p.weights) w = rng.gaussian(0.0, 0.05);
    return p;
  }

  std::vector<double> flat() const {
    std::vector<double> f = weights;
    f.insert(f.end(), bias.begin(), bias.end());
    return f;
  }
  void load_flat(const std::vector<double>& f) {
    std::copy(f.begin(), f.begin() + kOutputCount * kFeatureCount, weights.begin());
    std::copy(f.begin() + kOutputCount * kFeatureCount, f.end(), bias.begin());
  }
};

// Input channels per pixel, F x P row-major.
inline std::vector<double> toy_features(const FrameBundle& frame) {
  const GridShape shape = frame.shape();
  const std::size_t p_count = shape.pixels();
  std::vector<double> f(ToyPredictor::kFeatureCount * p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    const double x = static_cast<double>(p % shape.width);
    const double y = static_cast<double>(p / shape.width);
    f[0 * p_count + p] = frame.ke[p];
    f[1 * p_count + p] = frame.svf[p].x;
    f[2 * p_count + p] = frame.svf[p].y;
    f[3 * p_count + p] = x / shape.width - 0.5;
    f[4 * p_count + p] = y / shape.height - 0.5;
  }
  return f;
}

// Plain forward pass: predicted KE field and SVF field.
inline std::pair<ScalarField, VectorField2> toy_forward(const ToyPredictor& model,
                                                        const FrameBundle& frame) {
  const GridShape shape = frame.shape();
  const std::size_t p_count = shape.pixels();
  const std::vector<double> feats = toy_features(frame);
  ScalarField ke(shape);
  VectorField2 svf(shape);
  for (std::size_t p = 0; p < p_count; ++p) {
    double out[ToyPredictor::kOutputCount];
    for (int o = 0; o < ToyPredictor::kOutputCount; ++o) {
      double acc = model.bias[o];
      for (int c = 0; c < ToyPredictor::kFeatureCount; ++c)
        acc += model.weights[o * ToyPredictor::kFeatureCount + c] * feats[c * p_count + p];
      out[o] = acc;
    }
    ke[p] = out[0];
    svf[p] = {out[1], out[2]};
  }
  return {std::move(ke), std::move(svf)};
}

struct TrainConfig {
  double learning_rate = 1.0;
  int steps = 200;
  int scene_count = 3;
  int holdout_count = 4;
  bool with_pgg = false;
  std::uint64_t seed = 11;
  // Loss weights keep the published KE : SIE ratio; the grouping loss shares
  // the embedding weight.
  double w_ke = 1e-3;
  double w_sie = 1e-4;
  double w_pgg = 1e-3;
  int pgg_iterations = 1;

  void validate() const {
    if (learning_rate <= 0.0) throw InvalidInput("learning rate must be positive");
    if (steps < 0 || scene_count < 1) throw InvalidInput("bad training schedule");
  }
};

// The standard noisy fixture both ablation arms train on.
struct ToyFixture {
  SceneConfig scene;
  NoiseConfig noise;
};

inline ToyFixture toy_fixture() {
  ToyFixture f;
  f.scene.person_count = 2;
  f.scene.frame_count = 1;
  f.scene.shape = {48, 40};
  f.scene.margin = 5.0;
  f.scene.auto_scale = 0.8;
  f.scene.auto_articulation = 1.2;
  f.noise.ke_latent_spacing = 2.0;
  f.noise.ke_jitter = 0.35;
  f.noise.ke_background = 0.4;
  f.noise.svf_jitter = 0.8;
  f.noise.heatmap_noise = 0.01;
  f.noise.he_dim = 8;  // unused by the toy; kept small
  return f;
}

struct ToyScene {
  FrameBundle frame;
  std::vector<double> features;
  std::vector<Pose> poses;
  BinaryMask mask;
  MaskIndex mask_index;
  std::vector<int> labels;
};

inline ToyScene make_toy_scene(const ToyFixture& fixture, std::uint64_t seed) {
  SceneConfig scene = fixture.scene;
  scene.seed = seed;
  const auto gt = generate_scene(scene);
  ToyScene s;
  s.frame = synth_frame(nullptr, gt[0], 0, fixture.noise, scene.shape, scene.skeleton, seed);
  s.features = toy_features(s.frame);
  s.poses = gt[0];
  s.mask = pose_mask(s.frame.heatmaps, 0.2);
  MaskIndex index;
  for (std::size_t p = 0; p < s.mask.bits.size(); ++p)
    if (s.mask.bits[p]) index.push_back(static_cast<int>(p));
  s.mask_index = std::move(index);
  s.labels = grouping_labels(s.mask_index, scene.shape, s.poses,
                             fixture.noise.paint_radius_factor * fixture.noise.sigma);
  return s;
}

struct TrainResult {
  ToyPredictor predictor;
  std::vector<double> loss_curve;  // steps + 1 entries; entry 0 is the initial loss
};

namespace detail {

// One taped evaluation of the weighted toy loss on a scene.
inline ad::DualValue toy_loss(const ToyPredictor& model, const ToyScene& scene,
                              const TrainConfig& cfg, const RunConfig& run_cfg) {
  const GridShape shape = scene.frame.shape();
  const int p_count = static_cast<int>(shape.pixels());
  constexpr int f_count = ToyPredictor::kFeatureCount;
  constexpr int o_count = ToyPredictor::kOutputCount;

  auto tape = std::make_shared<ad::Tape>();
  ad::Tape& t = *tape;
  const std::vector<double> params = model.flat();
  ad::Var leaf = t.leaf(params, static_cast<int>(params.size()));

  std::vector<int> w_idx(o_count * f_count);
  for (std::size_t i = 0; i < w_idx.size(); ++i) w_idx[i] = static_cast<int>(i);
  std::vector<int> b_idx(o_count);
  for (int i = 0; i < o_count; ++i) b_idx[i] = o_count * f_count + i;
  ad::Var w = t.gather(leaf, w_idx, o_count, f_count);
  ad::Var b = t.gather(leaf, b_idx, o_count, 1);
  ad::Var feats = t.constant(scene.features, f_count, p_count);
  ad::Var fields = t.add(t.matmul(w, feats), t.matmul(b, t.ones(1, p_count)));

  std::vector<int> ke_idx(p_count), svf_idx(2 * p_count);
  for (int p = 0; p < p_count; ++p) {
    ke_idx[p] = p;
    svf_idx[2 * p] = p_count + p;
    svf_idx[2 * p + 1] = 2 * p_count + p;
  }
  ad::Var ke_flat = t.gather(fields, ke_idx);
  ad::Var svf_flat = t.gather(fields, svf_idx);

  ad::Var total = t.scale(t.add(pull_loss_on(t, ke_flat, shape, scene.poses),
                                push_loss_on(t, ke_flat, shape, scene.poses)),
                          cfg.w_ke);
  total = t.add(total, t.scale(svf_loss_on(t, svf_flat, shape, scene.poses), cfg.w_sie));

  if (cfg.with_pgg && !scene.mask_index.empty()) {
    const int n = static_cast<int>(scene.mask_index.size());
    std::vector<int> row0(n), row1(n), row2(n);
    std::vector<double> cx(n), cy(n);
    for (int i = 0; i < n; ++i) {
      const int p = scene.mask_index[i];
      row0[i] = p;
      row1[i] = p_count + p;
      row2[i] = 2 * p_count + p;
      cx[i] = static_cast<double>(p % shape.width);
      cy[i] = static_cast<double>(p / shape.width);
    }
    ad::Var ke_row = t.gather(fields, row0, 1, n);
    ad::Var sx_row = t.sub(t.constant(cx, 1, n), t.gather(fields, row1, 1, n));
    ad::Var sy_row = t.sub(t.constant(cy, 1, n), t.gather(fields, row2, 1, n));
    const double e0[] = {1, 0, 0}, e1[] = {0, 1, 0}, e2[] = {0, 0, 1};
    ad::Var x = t.add(t.add(t.matmul(t.constant(std::span<const double>(e0, 3), 3, 1), ke_row),
                            t.matmul(t.constant(std::span<const double>(e1, 3), 3, 1), sx_row)),
                      t.matmul(t.constant(std::span<const double>(e2, 3), 3, 1), sy_row));
    const auto person_cols = group_columns(scene.labels);
    ad::Var group = grouping_loss_per_iterate(t, x, 3, n, person_cols);
    const PggConfig pc = run_cfg.pgg_config();
    for (int r = 0; r < cfg.pgg_iterations; ++r) {
      x = gbms_iterate_on(t, x, 3, n, pc.delta, pc.kernel == PggKernel::kInverse,
                          pc.channel_scales);
      group = t.add(group, grouping_loss_per_iterate(t, x, 3, n, person_cols));
    }
    total = t.add(total, t.scale(group, cfg.w_pgg));
  }
  return ad::DualValue(tape, total, {leaf});
}

}  // namespace detail

// Plain gradient descent through the full loss, PGG iterations included when
// configured. Deterministic given the seed; aborts on divergence.
inline TrainResult train(const TrainConfig& cfg, const ToyFixture& fixture,
                         const RunConfig& run_cfg = {}) {
  cfg.validate();
  std::vector<ToyScene> scenes;
  for (int s = 0; s < cfg.scene_count; ++s)
    scenes.push_back(make_toy_scene(fixture, cfg.seed * 1000003ULL + s));

  TrainResult result;
  result.predictor = ToyPredictor::init(cfg.seed);
  std::vector<double> params = result.predictor.flat();

  auto total_loss = [&]() {
    double sum = 0.0;
    for (const ToyScene& s : scenes)
      sum += detail::toy_loss(result.predictor, s, cfg, run_cfg).value();
    return sum / scenes.size();
  };

  result.loss_curve.push_back(total_loss());
  for (int step = 0; step < cfg.steps; ++step) {
    const ToyScene& scene = scenes[step % scenes.size()];
    ad::DualValue loss = detail::toy_loss(result.predictor, scene, cfg, run_cfg);
    const double value = loss.value();
    if (!std::isfinite(value))
      throw std::runtime_error("toy training diverged (loss is not finite) at step " +
                               std::to_string(step));
    const std::vector<double> grad = loss.gradient(0);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
    result.predictor.load_flat(params);
    result.loss_curve.push_back(total_loss());
  }
  return result;
}

// Decodes held-out scenes with the predictor's fields. `refine` runs the
// mean-shift refinement before grouping, matching how a PGG-trained model is
// meant to be used at inference.
inline std::vector<MatchResult> toy_holdout_eval(const ToyPredictor& model,
                                                 const ToyFixture& fixture, std::uint64_t seed,
                                                 int scene_count, bool refine,
                                                 const RunConfig& run_cfg = {}) {
  std::vector<MatchResult> results;
  for (int s = 0; s < scene_count; ++s) {
    const ToyScene scene = make_toy_scene(fixture, seed * 7777777ULL + 31 + s);
    auto [ke, svf] = toy_forward(model, scene.frame);
    VectorField2 sie = decode_sie(svf);
    if (refine && !scene.mask_index.empty()) {
      auto [x0, index] = gather_masked({&ke, &sie}, scene.mask);
      const PggTrace trace = pgg_forward(x0, run_cfg.pgg_config());
      const EmbeddingMatrix& refined = trace.iterates.back();
      for (int i = 0; i < refined.cols; ++i) {
        ke[index[i]] = refined.at(0, i);
        sie[index[i]] = {refined.at(1, i), refined.at(2, i)};
      }
    }
    const auto peaks = extract_peaks(scene.frame.heatmaps, run_cfg.peak_config());
    const auto poses = greedy_decode(peaks, ke, sie, run_cfg.decode_config(fixture.scene.skeleton));
    results.push_back(match_pckh(poses, scene.poses, run_cfg.eval.pckh_factor,
                                 fixture.scene.skeleton));
  }
  return results;
}

struct AblationReport {
  MetricRow with_pgg;
  MetricRow without_pgg;
  std::vector<double> delta;  // with - without, per column
};

// Paired comparison on identical held-out scenes: each arm decodes the way it
// was trained (with or without the grouping module in the loop).
inline AblationReport evaluate_ablation(const ToyPredictor& with_pgg,
                                        const ToyPredictor& without_pgg, const ToyFixture& fixture,
                                        std::uint64_t seed, int scene_count,
                                        const RunConfig& run_cfg = {}) {
  const Skeleton& skeleton = fixture.scene.skeleton;
  const auto with_results = toy_holdout_eval(with_pgg, fixture, seed, scene_count, true, run_cfg);
  const auto without_results =
      toy_holdout_eval(without_pgg, fixture, seed, scene_count, false, run_cfg);
  AblationReport report;
  report.with_pgg = ap_row(with_results, skeleton);
  report.without_pgg = ap_row(without_results, skeleton);
  for (std::size_t i = 0; i < report.with_pgg.values.size(); ++i)
    report.delta.push_back(report.with_pgg.values[i] - report.without_pgg.values[i]);
  return report;
}

}  // namespace pggtrack
