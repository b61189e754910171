#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pggtrack/errors.hpp"
#include "pggtrack/grid.hpp"

namespace pggtrack {

// Joint layout shared by poses, heatmap stacks and the evaluator. The head
// pair (head_top, neck) defines the head segment used for size ordering and
// for PCKh match thresholds.
struct Skeleton {
  std::vector<std::string> joint_names;
  int head_top_index = 0;
  int neck_index = 1;

  int joint_count() const { return static_cast<int>(joint_names.size()); }

  void validate() const {
    const int j = joint_count();
    if (j < 1) throw InvalidInput("skeleton needs at least one joint");
    if (head_top_index < 0 || head_top_index >= j || neck_index < 0 || neck_index >= j ||
        head_top_index == neck_index)
      throw InvalidInput("skeleton head joints must be valid and distinct");
  }

  int joint_index(const std::string& name) const {
    for (int i = 0; i < joint_count(); ++i)
      if (joint_names[i] == name) return i;
    throw InvalidInput("unknown joint name: " + name);
  }
};

// 15-joint layout matching PoseTrack-style evaluation columns.
inline Skeleton default_skeleton() {
  Skeleton s;
  s.joint_names = {"head_top", "neck",    "l_shoulder", "r_shoulder", "l_elbow",
                   "r_elbow",  "l_wrist", "r_wrist",    "l_hip",      "r_hip",
                   "l_knee",   "r_knee",  "l_ankle",    "r_ankle",    "pelvis"};
  s.head_top_index = 0;
  s.neck_index = 1;
  return s;
}

struct Keypoint {
  Vec2 position;
  double confidence = 1.0;
  int joint = 0;
};

// A person instance: up to J keypoints plus an optional identity. The id is
// the ground-truth person index on simulator output and the track id on
// tracker output; decoded proposals leave it unset.
struct Pose {
  std::vector<std::optional<Keypoint>> joints;
  std::optional<int> person_id;

  explicit Pose(int joint_count = 0) : joints(joint_count) {}

  void set(int joint, Vec2 position, double confidence = 1.0) {
    joints[joint] = Keypoint{position, confidence, joint};
  }

  int present_count() const {
    int n = 0;
    for (const auto& k : joints)
      if (k) ++n;
    return n;
  }

  // Mean of present keypoints; the "person center" of the vector-field
  // targets.
  Vec2 centroid() const {
    Vec2 c;
    int n = 0;
    for (const auto& k : joints)
      if (k) {
        c = c + k->position;
        ++n;
      }
    if (n == 0) throw InvalidInput("pose has no keypoints");
    return c * (1.0 / n);
  }

  // Tight axis-aligned bounding box (x0, y0, x1, y1) over present keypoints.
  std::array<double, 4> bounding_box() const {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    bool any = false;
    for (const auto& k : joints)
      if (k) {
        any = true;
        x0 = std::min(x0, k->position.x);
        y0 = std::min(y0, k->position.y);
        x1 = std::max(x1, k->position.x);
        y1 = std::max(y1, k->position.y);
      }
    if (!any) throw InvalidInput("pose has no keypoints");
    return {x0, y0, x1, y1};
  }

  // Squared head-segment length, the paper's person-size proxy.
  double head_size_sq(const Skeleton& skel) const {
    const auto& a = joints[skel.head_top_index];
    const auto& b = joints[skel.neck_index];
    if (!a || !b) throw InvalidInput("pose is missing a head joint");
    return (a->position - b->position).norm2();
  }
};

// Mean keypoint confidence; the proposal ranking score for AP evaluation.
inline double pose_score(const Pose& pose) {
  double sum = 0.0;
  int n = 0;
  for (const auto& k : pose.joints)
    if (k) {
      sum += k->confidence;
      ++n;
    }
  if (n == 0) throw InvalidInput("pose has no keypoints");
  return sum / n;
}

}  // namespace pggtrack
