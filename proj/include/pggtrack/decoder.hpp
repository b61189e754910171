#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pggtrack/grid.hpp"
#include "pggtrack/skeleton.hpp"

namespace pggtrack {

struct DecodeConfig {
  std::vector<int> joint_order;  // empty = natural order (head first)
  double theta_ke = 1.0;         // embedding distance gate
  double theta_sie = 10.0;       // center distance scale, pixels
  double omega = 0.5;            // embedding weight in the mixed cost
  int max_people = 20;
  bool bilinear_sampling = false;

  void validate(int joint_count) const {
    if (theta_ke <= 0.0 || theta_sie <= 0.0) throw InvalidInput("decode thresholds must be > 0");
    if (omega < 0.0 || omega > 1.0) throw InvalidInput("decode omega must lie in [0, 1]");
    if (max_people < 1) throw InvalidInput("decode max_people must be >= 1");
    if (!joint_order.empty()) {
      if (static_cast<int>(joint_order.size()) != joint_count)
        throw InvalidInput("joint order must be a permutation of all joints");
      std::vector<bool> seen(joint_count, false);
      for (int j : joint_order) {
        if (j < 0 || j >= joint_count || seen[j])
          throw InvalidInput("joint order must be a permutation of all joints");
        seen[j] = true;
      }
    }
  }
};

// A growing person proposal: its keypoints, the running means the grouping
// costs compare against, and the accumulated confidence.
struct PersonHypothesis {
  std::vector<std::optional<Keypoint>> joints;
  double ref_ke = 0.0;     // running mean of member embedding values
  Vec2 ref_center;         // running mean of member center votes
  double confidence = 0.0; // cumulative
  int member_count = 0;

  void absorb(const Keypoint& kp, double ke_value, Vec2 center_vote) {
    joints[kp.joint] = kp;
    ref_ke = (ref_ke * member_count + ke_value) / (member_count + 1);
    ref_center = (ref_center * static_cast<double>(member_count) + center_vote) *
                 (1.0 / (member_count + 1));
    confidence += kp.confidence;
    ++member_count;
  }
};

// Greedy grouping of peak candidates into person instances. Joints are
// processed in the configured order, peaks within a joint by descending
// confidence. A peak joins the cheapest hypothesis that still lacks its
// joint when the mixed cost is within budget, otherwise it founds a new
// hypothesis up to the population cap. Each component's gate participates
// only when its weight does, so omega = 1 and omega = 0 give the pure
// embedding-only and center-only ablations.
inline std::vector<Pose> greedy_decode(const std::vector<std::vector<Keypoint>>& peaks,
                                       const ScalarField& ke, const VectorField2& sie,
                                       const DecodeConfig& cfg) {
  const int joint_count = static_cast<int>(peaks.size());
  cfg.validate(joint_count);

  std::vector<int> order = cfg.joint_order;
  if (order.empty()) {
    order.resize(joint_count);
    for (int j = 0; j < joint_count; ++j) order[j] = j;
  }

  auto sample_ke = [&](const Vec2& p) {
    return cfg.bilinear_sampling ? ke.sample_bilinear(p.x, p.y) : ke.sample_nearest(p.x, p.y);
  };

  std::vector<PersonHypothesis> hypotheses;
  for (int j : order) {
    for (const Keypoint& peak : peaks[j]) {
      const double ke_value = sample_ke(peak.position);
      const Vec2 center_vote = sie.sample_nearest(peak.position.x, peak.position.y);

      int best = -1;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t h = 0; h < hypotheses.size(); ++h) {
        if (hypotheses[h].joints[j]) continue;  // one keypoint per joint type
        const double d_ke = std::abs(ke_value - hypotheses[h].ref_ke);
        const double d_center = (center_vote - hypotheses[h].ref_center).norm();
        if (cfg.omega > 0.0 && d_ke > cfg.theta_ke) continue;
        const double cost = cfg.omega * d_ke + (1.0 - cfg.omega) * d_center / cfg.theta_sie;
        if (cost < best_cost) {
          best_cost = cost;
          best = static_cast<int>(h);
        }
      }
      if (best >= 0 && best_cost <= 1.0) {
        hypotheses[best].absorb(peak, ke_value, center_vote);
      } else if (static_cast<int>(hypotheses.size()) < cfg.max_people) {
        PersonHypothesis h;
        h.joints.assign(joint_count, std::nullopt);
        h.absorb(peak, ke_value, center_vote);
        hypotheses.push_back(std::move(h));
      }
      // else: population cap reached and nothing fits; the peak is dropped
    }
  }

  std::vector<Pose> poses;
  poses.reserve(hypotheses.size());
  for (const PersonHypothesis& h : hypotheses) {
    Pose pose(joint_count);
    pose.joints = h.joints;
    poses.push_back(std::move(pose));
  }
  return poses;
}

}  // namespace pggtrack
