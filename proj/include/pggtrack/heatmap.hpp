#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "pggtrack/autodiff.hpp"
#include "pggtrack/grid.hpp"
#include "pggtrack/skeleton.hpp"

namespace pggtrack {

// J per-joint confidence fields over one grid.
struct HeatmapStack {
  GridShape shape;
  std::vector<ScalarField> channels;

  HeatmapStack() = default;
  HeatmapStack(GridShape s, int joint_count) : shape(s), channels(joint_count, ScalarField(s)) {}

  int joint_count() const { return static_cast<int>(channels.size()); }
};

// Instance-agnostic pose mask: one bit per pixel plus its occupancy count.
struct BinaryMask {
  GridShape shape;
  std::vector<std::uint8_t> bits;
  std::size_t occupancy = 0;

  BinaryMask() = default;
  explicit BinaryMask(GridShape s) : shape(s), bits(s.pixels(), 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * shape.width + x] != 0; }

  void set(int x, int y, bool v) {
    auto& b = bits[static_cast<std::size_t>(y) * shape.width + x];
    if (v && !b) ++occupancy;
    if (!v && b) --occupancy;
    b = v ? 1 : 0;
  }
};

// Per-pixel max over joint channels.
inline ScalarField max_over_channels(const HeatmapStack& stack) {
  if (stack.joint_count() < 1) throw InvalidInput("heatmap stack has no channels");
  ScalarField out = stack.channels[0];
  for (int j = 1; j < stack.joint_count(); ++j)
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(out[i], stack.channels[j][i]);
  return out;
}

// Ground-truth confidence rendering: per joint, the per-person Gaussians
// exp(-|p - p_jk|^2 / sigma^2) combined by pixelwise max. Missing joints
// contribute nothing; an empty pose list renders an all-zero stack.
inline HeatmapStack render_confidence(const std::vector<Pose>& poses, double sigma,
                                      GridShape shape, int joint_count) {
  if (sigma <= 0.0) throw InvalidInput("sigma must be positive");
  check_shape(shape);
  HeatmapStack stack(shape, joint_count);
  const double inv = 1.0 / (sigma * sigma);
  for (const Pose& pose : poses) {
    for (int j = 0; j < joint_count && j < static_cast<int>(pose.joints.size()); ++j) {
      const auto& kp = pose.joints[j];
      if (!kp) continue;
      ScalarField& ch = stack.channels[j];
      for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x) {
          const double dx = x - kp->position.x;
          const double dy = y - kp->position.y;
          const double v = std::exp(-(dx * dx + dy * dy) * inv);
          double& cell = ch.at(x, y);
          cell = std::max(cell, v);
        }
    }
  }
  return stack;
}

namespace detail {
inline std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}
}  // namespace detail

// Squared-error detection loss, summed over joints and pixels. The optional
// per-pixel weight field covers the paper's "weighted" phrasing; the formula
// itself carries no weights, so the default is all-ones.
inline ad::Var detection_loss_on(ad::Tape& tape, ad::Var pred_flat, const HeatmapStack& gt,
                                 const ScalarField* weights = nullptr) {
  std::size_t total = gt.shape.pixels() * gt.joint_count();
  if (tape.value(pred_flat).size() != total)
    throw InvalidInput("detection loss: prediction size does not match ground truth");
  std::vector<double> gt_flat;
  gt_flat.reserve(total);
  for (const auto& ch : gt.channels) gt_flat.insert(gt_flat.end(), ch.values().begin(), ch.values().end());
  ad::Var diff = tape.sub(pred_flat, tape.constant(gt_flat, static_cast<int>(total)));
  ad::Var sq = tape.square(diff);
  if (weights) {
    if (weights->size() != gt.shape.pixels()) throw InvalidInput("weight field shape mismatch");
    std::vector<double> w_flat;
    w_flat.reserve(total);
    for (int j = 0; j < gt.joint_count(); ++j)
      w_flat.insert(w_flat.end(), weights->values().begin(), weights->values().end());
    sq = tape.mul(sq, tape.constant(w_flat, static_cast<int>(total)));
  }
  return tape.sum(sq);
}

inline ad::DualValue detection_loss(const HeatmapStack& pred, const HeatmapStack& gt,
                                    const ScalarField* weights = nullptr) {
  if (!(pred.shape == gt.shape) || pred.joint_count() != gt.joint_count())
    throw InvalidInput("detection loss: heatmap shapes disagree");
  auto tape = std::make_shared<ad::Tape>();
  std::vector<double> pred_flat;
  pred_flat.reserve(pred.shape.pixels() * pred.joint_count());
  for (const auto& ch : pred.channels)
    pred_flat.insert(pred_flat.end(), ch.values().begin(), ch.values().end());
  ad::Var leaf = tape->leaf(pred_flat, static_cast<int>(pred_flat.size()));
  ad::Var root = detection_loss_on(*tape, leaf, gt, weights);
  return ad::DualValue(tape, root, {leaf});
}

struct PeakConfig {
  double threshold = 0.1;
  int nms_radius = 2;
  bool subpixel = false;  // quarter-offset toward the stronger neighbor
};

// Strict 8-neighborhood local maxima above the threshold, then greedy radius
// suppression, strongest first. Equal-valued neighbors are broken toward the
// lower flat index so a half-pixel plateau still yields exactly one peak.
inline std::vector<Keypoint> extract_peaks_channel(const ScalarField& field, int joint,
                                                   const PeakConfig& cfg) {
  if (cfg.nms_radius < 1) throw InvalidInput("nms radius must be at least 1");
  if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0)
    throw InvalidInput("peak threshold must lie in (0, 1)");
  const GridShape shape = field.shape();
  std::vector<Keypoint> candidates;
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      const double v = field.at(x, y);
      if (v < cfg.threshold) continue;
      const int self = y * shape.width + x;
      bool is_peak = true;
      for (int dy = -1; dy <= 1 && is_peak; ++dy)
        for (int dx = -1; dx <= 1 && is_peak; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= shape.width || ny >= shape.height) continue;
          const double nv = field.at(nx, ny);
          if (nv > v || (nv == v && ny * shape.width + nx < self)) is_peak = false;
        }
      if (!is_peak) continue;
      Vec2 pos{static_cast<double>(x), static_cast<double>(y)};
      if (cfg.subpixel) {
        auto sample = [&](int sx, int sy) {
          if (sx < 0 || sy < 0 || sx >= shape.width || sy >= shape.height) return 0.0;
          return field.at(sx, sy);
        };
        if (sample(x + 1, y) > sample(x - 1, y))
          pos.x += 0.25;
        else if (sample(x - 1, y) > sample(x + 1, y))
          pos.x -= 0.25;
        if (sample(x, y + 1) > sample(x, y - 1))
          pos.y += 0.25;
        else if (sample(x, y - 1) > sample(x, y + 1))
          pos.y -= 0.25;
      }
      candidates.push_back(Keypoint{pos, v, joint});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.confidence > b.confidence; });
  std::vector<Keypoint> kept;
  const double r2 = static_cast<double>(cfg.nms_radius) * cfg.nms_radius;
  for (const Keypoint& c : candidates) {
    bool suppressed = false;
    for (const Keypoint& k : kept)
      if ((c.position - k.position).norm2() <= r2) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

// Per-joint peak candidates, each list sorted by confidence descending.
inline std::vector<std::vector<Keypoint>> extract_peaks(const HeatmapStack& stack,
                                                        const PeakConfig& cfg) {
  std::vector<std::vector<Keypoint>> peaks(stack.joint_count());
  for (int j = 0; j < stack.joint_count(); ++j)
    peaks[j] = extract_peaks_channel(stack.channels[j], j, cfg);
  return peaks;
}

// M(p) = 1 where the channel-max confidence strictly exceeds tau.
inline BinaryMask pose_mask(const HeatmapStack& stack, double tau = 0.2) {
  if (tau <= 0.0 || tau >= 1.0) throw InvalidInput("mask tau must lie in (0, 1)");
  ScalarField cmax = max_over_channels(stack);
  BinaryMask mask(stack.shape);
  for (int y = 0; y < stack.shape.height; ++y)
    for (int x = 0; x < stack.shape.width; ++x)
      if (cmax.at(x, y) > tau) mask.set(x, y, true);
  return mask;
}

}  // namespace pggtrack
