#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pggtrack/frame.hpp"
#include "pggtrack/grid.hpp"
#include "pggtrack/heatmap.hpp"
#include "pggtrack/rng.hpp"
#include "pggtrack/skeleton.hpp"
#include "pggtrack/spatial_embed.hpp"

namespace pggtrack {

// Per-person motion model: a wandering center with bounce at the walls plus
// periodic limb articulation.
struct PersonMotion {
  Vec2 start;
  Vec2 velocity;              // px/frame
  double scale = 1.0;
  double articulation = 1.5;  // limb swing amplitude, px
  double phase = 0.0;
  int visible_from = 0;
  int visible_until = 1 << 30;  // exclusive
};

struct CameraModel {
  double zoom_rate = 1.0;  // multiplicative per frame
  Vec2 pan;                // px/frame
};

struct OcclusionWindow {
  int person = 0;
  int from = 0;
  int until = 0;  // exclusive
};

struct SceneConfig {
  int person_count = 2;
  Skeleton skeleton = default_skeleton();
  int frame_count = 30;
  GridShape shape{128, 96};
  std::vector<PersonMotion> motions;  // empty = placed deterministically from the seed
  CameraModel camera;
  std::vector<OcclusionWindow> occlusions;
  std::uint64_t seed = 0;
  bool snap_to_pixels = true;  // keeps field targets exact at keypoint pixels
  double margin = 6.0;         // joints stay this far inside the grid
  double auto_speed = 0.8;
  double auto_articulation = 1.5;
  double auto_scale = 1.0;
};

// Field corruption knobs. Zero everything and the synthetic fields satisfy
// their defining identities exactly.
struct NoiseConfig {
  double sigma = 2.0;                 // heatmap rendering width
  double paint_radius_factor = 2.0;   // embeddings painted within factor*sigma of joints
  double heatmap_noise = 0.0;         // clipped additive noise
  double ke_latent_spacing = 10.0;
  double ke_jitter = 0.0;
  double ke_background = 0.0;         // low-amplitude noise outside body regions
  double aux_jitter = 0.0;
  double svf_jitter = 0.0;            // px per component
  double tvf_jitter = 0.0;            // px per component
  double tvf_motion_error_factor = 0.0;  // extra jitter per px of center motion
  int he_dim = 3072;
  double he_scale = 10.0;             // latent norm
  double he_jitter = 0.0;             // per component
  double he_drift_rate = 0.0;         // per-component random walk step
  int he_scramble_from = 0;
  int he_scramble_until = 0;          // [from, until): appearance resampled every frame
  double confusion_probability = 0.0; // masked pixels carrying a wrong latent
};

namespace detail {

enum Stream : std::uint64_t {
  kMotionStream = 1,
  kHeatStream,
  kKeStream,
  kAuxStream,  // + relation index
  kSvfStream = kAuxStream + 8,
  kTvfFwdStream,
  kTvfBwdStream,
  kHeLatentStream,
  kHeJitterStream,
  kHeDriftStream,
  kHeScrambleStream,
  kConfusionStream,
};

// Canonical standing pose, pelvis at origin, y down. Falls back to a radial
// layout for non-standard skeletons.
inline std::vector<Vec2> canonical_offsets(const Skeleton& skeleton) {
  static const std::map<std::string, Vec2> table = {
      {"head_top", {0, -14}}, {"neck", {0, -10}},     {"l_shoulder", {-3, -9}},
      {"r_shoulder", {3, -9}}, {"l_elbow", {-5, -5}}, {"r_elbow", {5, -5}},
      {"l_wrist", {-6, -1}},   {"r_wrist", {6, -1}},  {"l_hip", {-2, 0}},
      {"r_hip", {2, 0}},       {"l_knee", {-2.5, 6}}, {"r_knee", {2.5, 6}},
      {"l_ankle", {-3, 12}},   {"r_ankle", {3, 12}},  {"pelvis", {0, 0}},
  };
  std::vector<Vec2> offsets(skeleton.joint_count());
  bool all_known = true;
  for (int j = 0; j < skeleton.joint_count(); ++j) {
    auto it = table.find(skeleton.joint_names[j]);
    if (it == table.end()) {
      all_known = false;
      break;
    }
    offsets[j] = it->second;
  }
  if (all_known) return offsets;
  for (int j = 0; j < skeleton.joint_count(); ++j) {
    if (j == skeleton.head_top_index) {
      offsets[j] = {0, -10};
    } else if (j == skeleton.neck_index) {
      offsets[j] = {0, -6};
    } else {
      const double a = 6.283185307179586 * j / skeleton.joint_count();
      offsets[j] = {8.0 * std::cos(a), 8.0 * std::sin(a) * 0.5 + 4.0};
    }
  }
  return offsets;
}

inline bool limb_joint(const Skeleton& skeleton, int j) {
  const std::string& n = skeleton.joint_names[j];
  return n.find("elbow") != std::string::npos || n.find("wrist") != std::string::npos ||
         n.find("knee") != std::string::npos || n.find("ankle") != std::string::npos;
}

// Triangle-wave reflection of p into [lo, hi].
inline double reflect(double p, double lo, double hi) {
  if (hi <= lo) return lo;
  const double period = 2.0 * (hi - lo);
  double q = std::fmod(p - lo, period);
  if (q < 0.0) q += period;
  return lo + (q > hi - lo ? period - q : q);
}

}  // namespace detail

// Deterministic ground-truth trajectories with persistent ids. Persons enter
// and leave through visibility plus occlusion windows; the camera model
// scales and pans everything about the image center.
inline std::vector<std::vector<Pose>> generate_scene(const SceneConfig& cfg) {
  cfg.skeleton.validate();
  check_shape(cfg.shape);
  if (cfg.frame_count < 1) throw InvalidInput("scene needs at least one frame");
  if (cfg.person_count < 1) throw InvalidInput("scene needs at least one person");

  std::vector<PersonMotion> motions = cfg.motions;
  if (motions.empty()) {
    const double lane = static_cast<double>(cfg.shape.width) / (cfg.person_count + 1);
    if (lane < 18.0 * cfg.auto_scale)
      throw InvalidInput("grid cannot fit the requested person count");
    for (int k = 0; k < cfg.person_count; ++k) {
      Rng rng = Rng::derive(cfg.seed, detail::kMotionStream, k);
      PersonMotion m;
      m.start = {lane * (k + 1), cfg.shape.height / 2.0 + (k % 2 ? 6.0 : -6.0)};
      const double angle = rng.uniform(0.0, 6.283185307179586);
      m.velocity = {cfg.auto_speed * std::cos(angle), cfg.auto_speed * std::sin(angle) * 0.5};
      m.scale = cfg.auto_scale;
      m.articulation = cfg.auto_articulation;
      m.phase = rng.uniform(0.0, 6.283185307179586);
      motions.push_back(m);
    }
  } else if (static_cast<int>(motions.size()) != cfg.person_count) {
    throw InvalidInput("motion list must cover every person");
  }

  const std::vector<Vec2> canon = detail::canonical_offsets(cfg.skeleton);
  const Vec2 img_center{(cfg.shape.width - 1) / 2.0, (cfg.shape.height - 1) / 2.0};

  std::vector<std::vector<Pose>> frames(cfg.frame_count);
  for (int t = 0; t < cfg.frame_count; ++t) {
    const double zoom = std::pow(cfg.camera.zoom_rate, t);
    for (int k = 0; k < cfg.person_count; ++k) {
      const PersonMotion& m = motions[k];
      if (t < m.visible_from || t >= m.visible_until) continue;
      bool occluded = false;
      for (const OcclusionWindow& w : cfg.occlusions)
        if (w.person == k && t >= w.from && t < w.until) occluded = true;
      if (occluded) continue;

      const double s = m.scale * zoom;
      std::vector<Vec2> offsets(canon.size());
      double ext_x = 0.0, ext_up = 0.0, ext_down = 0.0;
      for (std::size_t j = 0; j < canon.size(); ++j) {
        Vec2 o = canon[j] * s;
        if (detail::limb_joint(cfg.skeleton, static_cast<int>(j))) {
          const double a = 0.9 * t + m.phase + 1.3 * static_cast<double>(j);
          o = o + Vec2{m.articulation * std::sin(a), 0.5 * m.articulation * std::cos(a)} * zoom;
        }
        offsets[j] = o;
        ext_x = std::max(ext_x, std::abs(o.x));
        ext_up = std::max(ext_up, -o.y);
        ext_down = std::max(ext_down, o.y);
      }
      if (2.0 * ext_x + 2.0 * cfg.margin > cfg.shape.width ||
          ext_up + ext_down + 2.0 * cfg.margin > cfg.shape.height)
        throw InvalidInput("person does not fit inside the grid");

      // Camera applies to the wander path, then bounce keeps the body inside.
      Vec2 center = m.start + m.velocity * static_cast<double>(t);
      center = img_center + (center - img_center) * zoom + cfg.camera.pan * static_cast<double>(t);
      center.x = detail::reflect(center.x, cfg.margin + ext_x, cfg.shape.width - 1 - cfg.margin - ext_x);
      center.y = detail::reflect(center.y, cfg.margin + ext_up, cfg.shape.height - 1 - cfg.margin - ext_down);

      Pose pose(cfg.skeleton.joint_count());
      pose.person_id = k;
      for (std::size_t j = 0; j < offsets.size(); ++j) {
        Vec2 p = center + offsets[j];
        if (cfg.snap_to_pixels) p = {std::round(p.x), std::round(p.y)};
        pose.set(static_cast<int>(j), p);
      }
      frames[t].push_back(std::move(pose));
    }
  }
  return frames;
}

namespace detail {

struct OwnershipMap {
  std::vector<int> owner;  // index into the pose list, -1 = background
  std::vector<double> dist2;
};

inline OwnershipMap paint_ownership(const std::vector<Pose>& poses, GridShape shape,
                                    double radius) {
  OwnershipMap map;
  map.owner.assign(shape.pixels(), -1);
  map.dist2.assign(shape.pixels(), radius * radius);
  for (std::size_t k = 0; k < poses.size(); ++k) {
    for (const auto& kp : poses[k].joints) {
      if (!kp) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(kp->position.x - radius)));
      const int x1 = std::min(shape.width - 1, static_cast<int>(std::ceil(kp->position.x + radius)));
      const int y0 = std::max(0, static_cast<int>(std::floor(kp->position.y - radius)));
      const int y1 = std::min(shape.height - 1, static_cast<int>(std::ceil(kp->position.y + radius)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - kp->position.x, dy = y - kp->position.y;
          const double d2 = dx * dx + dy * dy;
          const std::size_t idx = static_cast<std::size_t>(y) * shape.width + x;
          if (d2 <= map.dist2[idx]) {
            map.dist2[idx] = d2;
            map.owner[idx] = static_cast<int>(k);
          }
        }
    }
  }
  return map;
}

inline double ke_latent(int person_id, double spacing) { return spacing * (person_id + 1); }

inline std::vector<double> he_base_latent(std::uint64_t seed, int person_id, int dim,
                                          double scale) {
  Rng rng = Rng::derive(seed, kHeLatentStream, static_cast<std::uint64_t>(person_id));
  std::vector<double> v(dim);
  double norm2 = 0.0;
  for (double& x : v) {
    x = rng.gaussian();
    norm2 += x * x;
  }
  const double inv = norm2 > 0.0 ? scale / std::sqrt(norm2) : 0.0;
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace detail

// Synthesizes the noised network outputs for one frame. `prev` enables the
// bidirectional temporal fields; pass nullptr at a sequence start.
inline FrameBundle synth_frame(const std::vector<Pose>* prev, const std::vector<Pose>& cur,
                               int time_index, const NoiseConfig& noise, GridShape shape,
                               const Skeleton& skeleton, std::uint64_t seed) {
  check_shape(shape);
  const int j_count = skeleton.joint_count();
  FrameBundle bundle;
  bundle.time_index = time_index;

  bundle.heatmaps = render_confidence(cur, noise.sigma, shape, j_count);
  if (noise.heatmap_noise > 0.0) {
    Rng rng = Rng::derive(seed, detail::kHeatStream, time_index);
    for (auto& ch : bundle.heatmaps.channels)
      for (double& v : ch.values())
        v = std::min(1.0, std::max(0.0, v + rng.gaussian(0.0, noise.heatmap_noise)));
  }

  const double radius = noise.paint_radius_factor * noise.sigma;
  const detail::OwnershipMap owners = detail::paint_ownership(cur, shape, radius);

  // Keypoint embedding: the owner's latent inside body regions (sometimes a
  // confused neighbor's), low-amplitude noise in the background.
  bundle.ke = ScalarField(shape);
  {
    Rng jitter = Rng::derive(seed, detail::kKeStream, time_index);
    Rng confuse = Rng::derive(seed, detail::kConfusionStream, time_index);
    for (std::size_t p = 0; p < shape.pixels(); ++p) {
      const int o = owners.owner[p];
      if (o < 0) {
        bundle.ke[p] = noise.ke_background > 0.0 ? jitter.gaussian(0.0, noise.ke_background) : 0.0;
        continue;
      }
      int id = cur[o].person_id.value_or(o);
      if (noise.confusion_probability > 0.0 && cur.size() > 1 &&
          confuse.uniform() < noise.confusion_probability) {
        std::size_t other = confuse.uniform_int(cur.size() - 1);
        if (other >= static_cast<std::size_t>(o)) ++other;
        id = cur[other].person_id.value_or(static_cast<int>(other));
      }
      double v = detail::ke_latent(id, noise.ke_latent_spacing);
      if (noise.ke_jitter > 0.0) v += jitter.gaussian(0.0, noise.ke_jitter);
      bundle.ke[p] = v;
    }
  }

  // Ordinal maps: each person's rank under the relation, painted like KE.
  for (std::size_t r = 0; r < kAllOrderRelations.size(); ++r) {
    ScalarField map(shape);
    std::vector<int> rank(cur.size(), 0);
    if (!cur.empty()) {
      const OrderMatrix ord = ground_truth_order(cur, kAllOrderRelations[r], skeleton);
      for (std::size_t a = 0; a < cur.size(); ++a)
        for (std::size_t b = 0; b < cur.size(); ++b)
          if (a != b && ord.at(static_cast<int>(b), static_cast<int>(a)) > 0) ++rank[a];
    }
    Rng jitter = Rng::derive(seed, detail::kAuxStream + r, time_index);
    for (std::size_t p = 0; p < shape.pixels(); ++p) {
      const int o = owners.owner[p];
      double v = o >= 0 ? static_cast<double>(rank[o]) : 0.0;
      if (noise.aux_jitter > 0.0) v += jitter.gaussian(0.0, noise.aux_jitter);
      map[p] = v;
    }
    bundle.aux_maps[r] = std::move(map);
  }

  // Spatial vector field: offset from the owner's center to the pixel.
  bundle.svf = VectorField2(shape);
  {
    std::vector<Vec2> centers(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) centers[k] = cur[k].centroid();
    Rng jitter = Rng::derive(seed, detail::kSvfStream, time_index);
    for (std::size_t p = 0; p < shape.pixels(); ++p) {
      const int o = owners.owner[p];
      if (o < 0) continue;
      const double px = static_cast<double>(p % shape.width);
      const double py = static_cast<double>(p / shape.width);
      Vec2 v{px - centers[o].x, py - centers[o].y};
      if (noise.svf_jitter > 0.0)
        v = v + Vec2{jitter.gaussian(0.0, noise.svf_jitter), jitter.gaussian(0.0, noise.svf_jitter)};
      bundle.svf[p] = v;
    }
  }

  // Bidirectional temporal fields for the (t-1, t) transition.
  if (prev) {
    auto find_center = [](const std::vector<Pose>& poses, int id) -> std::optional<Vec2> {
      for (const Pose& p : poses)
        if (p.person_id && *p.person_id == id) return p.centroid();
      return std::nullopt;
    };
    auto temporal = [&](const std::vector<Pose>& at, const std::vector<Pose>& other,
                        std::uint64_t stream) {
      VectorField2 field(shape);
      const detail::OwnershipMap own = detail::paint_ownership(at, shape, radius);
      std::vector<Vec2> target_center(at.size());
      std::vector<double> motion(at.size(), 0.0);
      for (std::size_t k = 0; k < at.size(); ++k) {
        const Vec2 own_center = at[k].centroid();
        std::optional<Vec2> oc =
            at[k].person_id ? find_center(other, *at[k].person_id) : std::nullopt;
        target_center[k] = oc.value_or(own_center);
        motion[k] = (target_center[k] - own_center).norm();
      }
      Rng jitter = Rng::derive(seed, stream, time_index);
      for (std::size_t p = 0; p < shape.pixels(); ++p) {
        const int o = own.owner[p];
        if (o < 0) continue;
        const double px = static_cast<double>(p % shape.width);
        const double py = static_cast<double>(p / shape.width);
        Vec2 v{px - target_center[o].x, py - target_center[o].y};
        const double amp = noise.tvf_jitter + noise.tvf_motion_error_factor * motion[o];
        if (amp > 0.0) v = v + Vec2{jitter.gaussian(0.0, amp), jitter.gaussian(0.0, amp)};
        field[p] = v;
      }
      return field;
    };
    bundle.tvf_forward = temporal(cur, *prev, detail::kTvfFwdStream);
    bundle.tvf_backward = temporal(*prev, cur, detail::kTvfBwdStream);
  }

  // Appearance vectors: fixed per-person latent + drift walk + jitter. Inside
  // the scramble window the latent is resampled every frame.
  for (const Pose& pose : cur) {
    if (!pose.person_id) continue;
    const int id = *pose.person_id;
    std::vector<double> h;
    if (time_index >= noise.he_scramble_from && time_index < noise.he_scramble_until) {
      Rng rng = Rng::derive(seed, detail::kHeScrambleStream,
                            static_cast<std::uint64_t>(id) * 1000003ULL + time_index);
      h.resize(noise.he_dim);
      double norm2 = 0.0;
      for (double& x : h) {
        x = rng.gaussian();
        norm2 += x * x;
      }
      const double inv = norm2 > 0.0 ? noise.he_scale / std::sqrt(norm2) : 0.0;
      for (double& x : h) x *= inv;
    } else {
      h = detail::he_base_latent(seed, id, noise.he_dim, noise.he_scale);
      if (noise.he_drift_rate > 0.0) {
        for (int s = 0; s <= time_index; ++s) {
          Rng rng = Rng::derive(seed, detail::kHeDriftStream,
                                static_cast<std::uint64_t>(id) * 1000003ULL + s);
          for (double& x : h) x += rng.gaussian(0.0, noise.he_drift_rate);
        }
      }
    }
    if (noise.he_jitter > 0.0) {
      Rng rng = Rng::derive(seed, detail::kHeJitterStream,
                            static_cast<std::uint64_t>(id) * 1000003ULL + time_index);
      for (double& x : h) x += rng.gaussian(0.0, noise.he_jitter);
    }
    bundle.he_vectors.push_back(HumanEmbedding{std::move(h), id});
  }

  bundle.ground_truth = cur;
  bundle.validate();
  return bundle;
}

// The (t-1, t) bundle pair; the earlier frame is treated as a sequence start.
inline std::pair<FrameBundle, FrameBundle> synth_fields(const std::vector<Pose>& poses_prev,
                                                        const std::vector<Pose>& poses_cur,
                                                        const NoiseConfig& noise, GridShape shape,
                                                        const Skeleton& skeleton,
                                                        std::uint64_t seed, int time_index = 1) {
  return {synth_frame(nullptr, poses_prev, time_index - 1, noise, shape, skeleton, seed),
          synth_frame(&poses_prev, poses_cur, time_index, noise, shape, skeleton, seed)};
}

inline std::vector<FrameBundle> synth_sequence(const std::vector<std::vector<Pose>>& gt,
                                               const NoiseConfig& noise, GridShape shape,
                                               const Skeleton& skeleton, std::uint64_t seed) {
  std::vector<FrameBundle> bundles;
  bundles.reserve(gt.size());
  for (std::size_t t = 0; t < gt.size(); ++t)
    bundles.push_back(synth_frame(t > 0 ? &gt[t - 1] : nullptr, gt[t], static_cast<int>(t), noise,
                                  shape, skeleton, seed));
  return bundles;
}

struct ScenarioPreset {
  SceneConfig scene;
  NoiseConfig noise;
};

// Named difficulty presets reproducing the qualitative failure modes:
// `zoom` degrades the temporal fields (motion-scaled error) while appearance
// stays clean; `pose_change` scrambles appearance mid-sequence while motion
// stays smooth; `occlusion` and `crossing` exercise track death and swaps.
inline ScenarioPreset scenario_preset(const std::string& name, std::uint64_t seed = 7) {
  ScenarioPreset p;
  p.scene.seed = seed;
  p.scene.frame_count = 30;
  p.noise.heatmap_noise = 0.01;
  p.noise.ke_jitter = 0.05;
  p.noise.ke_background = 0.02;
  p.noise.svf_jitter = 0.2;
  p.noise.tvf_jitter = 0.3;
  p.noise.he_jitter = 0.01;
  p.noise.he_dim = 256;
  p.noise.he_scale = 10.0;

  if (name == "zoom") {
    p.scene.person_count = 3;
    p.scene.shape = {160, 128};
    p.scene.camera.zoom_rate = 1.04;
    p.scene.camera.pan = {2.0, 0.0};
    p.scene.auto_scale = 0.8;
    p.scene.auto_speed = 1.2;
    p.noise.tvf_jitter = 2.0;
    p.noise.tvf_motion_error_factor = 2.5;
  } else if (name == "fast_motion") {
    p.scene.person_count = 3;
    p.scene.shape = {192, 128};
    p.scene.auto_speed = 7.0;
    p.noise.tvf_jitter = 1.5;
    p.noise.tvf_motion_error_factor = 1.5;
  } else if (name == "pose_change") {
    p.scene.person_count = 3;
    p.scene.shape = {192, 128};
    p.scene.auto_speed = 0.6;
    p.scene.auto_articulation = 4.0;
    p.noise.he_scramble_from = 8;
    p.noise.he_scramble_until = 24;
  } else if (name == "occlusion") {
    p.scene.person_count = 3;
    p.scene.shape = {160, 128};
    p.scene.occlusions.push_back({1, 12, 15});
  } else if (name == "crossing") {
    p.scene.person_count = 2;
    p.scene.shape = {160, 96};
    PersonMotion a, b;
    a.start = {40.0, 48.0};
    a.velocity = {2.5, 0.0};
    b.start = {120.0, 48.0};
    b.velocity = {-2.5, 0.0};
    b.phase = 2.1;
    p.scene.motions = {a, b};
  } else {
    throw InvalidInput("unknown scenario preset: " + name);
  }
  return p;
}

inline const std::vector<std::string>& scenario_preset_names() {
  static const std::vector<std::string> names = {"zoom", "fast_motion", "pose_change", "occlusion",
                                                 "crossing"};
  return names;
}

}  // namespace pggtrack
