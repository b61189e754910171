#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pggtrack/skeleton.hpp"

namespace pggtrack {

struct JointCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long idsw = 0;
  long long gt = 0;  // tp + fn
};

struct Detection {
  double score = 0.0;
  bool matched = false;
};

// Per-frame, per-joint matching outcome plus the records AP needs.
struct MatchResult {
  std::vector<JointCounts> per_joint;
  std::vector<std::vector<Detection>> detections;      // per joint type
  std::vector<std::pair<int, int>> person_matches;     // (pred idx, gt idx)
  int skipped_gt_persons = 0;                          // gt without head joints
};

// PCKh-style matching for one frame. Persons are matched greedily by
// descending pose score: each prediction claims the unmatched ground-truth
// person with the most joints inside factor * head-segment length (ties by
// total distance, then index). A boundary displacement counts as a match.
inline MatchResult match_pckh(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                              double factor, const Skeleton& skeleton) {
  const int j_count = skeleton.joint_count();
  MatchResult result;
  result.per_joint.assign(j_count, {});
  result.detections.assign(j_count, {});

  std::vector<double> gt_threshold(gt.size(), -1.0);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const auto& head = gt[g].joints[skeleton.head_top_index];
    const auto& neck = gt[g].joints[skeleton.neck_index];
    if (!head || !neck) {
      ++result.skipped_gt_persons;
      continue;
    }
    gt_threshold[g] = factor * (head->position - neck->position).norm();
  }

  std::vector<int> order(pred.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pose_score(pred[a]) > pose_score(pred[b]); });

  std::vector<char> gt_taken(gt.size(), 0);
  std::vector<int> pred_to_gt(pred.size(), -1);
  for (int p : order) {
    int best_gt = -1, best_hits = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_taken[g] || gt_threshold[g] < 0.0) continue;
      int hits = 0;
      double dist = 0.0;
      for (int j = 0; j < j_count; ++j) {
        const auto& pj = pred[p].joints[j];
        const auto& gj = gt[g].joints[j];
        if (!pj || !gj) continue;
        const double d = (pj->position - gj->position).norm();
        if (d <= gt_threshold[g]) {
          ++hits;
          dist += d;
        }
      }
      if (hits > best_hits || (hits == best_hits && hits > 0 && dist < best_dist)) {
        best_hits = hits;
        best_dist = dist;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_hits > 0) {
      gt_taken[best_gt] = 1;
      pred_to_gt[p] = best_gt;
      result.person_matches.emplace_back(p, best_gt);
    }
  }

  for (std::size_t p = 0; p < pred.size(); ++p) {
    const int g = pred_to_gt[p];
    for (int j = 0; j < j_count; ++j) {
      const auto& pj = pred[p].joints[j];
      if (!pj) continue;
      bool is_tp = false;
      if (g >= 0) {
        const auto& gj = gt[g].joints[j];
        if (gj && (pj->position - gj->position).norm() <= gt_threshold[g]) is_tp = true;
      }
      if (is_tp)
        ++result.per_joint[j].tp;
      else
        ++result.per_joint[j].fp;
      result.detections[j].push_back({pose_score(pred[p]), is_tp});
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (gt_threshold[g] < 0.0) continue;  // skipped person
    const int p = [&] {
      for (std::size_t i = 0; i < pred_to_gt.size(); ++i)
        if (pred_to_gt[i] == static_cast<int>(g)) return static_cast<int>(i);
      return -1;
    }();
    for (int j = 0; j < j_count; ++j) {
      const auto& gj = gt[g].joints[j];
      if (!gj) continue;
      ++result.per_joint[j].gt;
      bool covered = false;
      if (p >= 0) {
        const auto& pj = pred[p].joints[j];
        if (pj && (pj->position - gj->position).norm() <= gt_threshold[g]) covered = true;
      }
      if (!covered) ++result.per_joint[j].fn;
    }
  }
  return result;
}

// Frame-by-frame evaluation of tracked poses. Identity switches follow the
// CLEAR-MOT convention: when a ground-truth person's matched track id differs
// from the id it was matched to last (gaps do not reset the memory), every
// currently matched joint of that person counts one switch.
inline std::vector<MatchResult> evaluate_sequence(
    const std::vector<std::vector<Pose>>& pred_frames,
    const std::vector<std::vector<Pose>>& gt_frames, double factor, const Skeleton& skeleton) {
  if (pred_frames.size() != gt_frames.size())
    throw InvalidInput("prediction and ground truth must cover the same frames");
  std::vector<MatchResult> results;
  results.reserve(pred_frames.size());
  std::map<int, int> last_track_of_gt;
  for (std::size_t t = 0; t < pred_frames.size(); ++t) {
    MatchResult r = match_pckh(pred_frames[t], gt_frames[t], factor, skeleton);
    for (const auto& [p, g] : r.person_matches) {
      const Pose& pp = pred_frames[t][p];
      const Pose& gp = gt_frames[t][g];
      if (!pp.person_id || !gp.person_id) continue;
      auto it = last_track_of_gt.find(*gp.person_id);
      if (it != last_track_of_gt.end() && it->second != *pp.person_id) {
        const auto& head = gp.joints[skeleton.head_top_index];
        const auto& neck = gp.joints[skeleton.neck_index];
        const double thr = factor * (head->position - neck->position).norm();
        for (int j = 0; j < skeleton.joint_count(); ++j) {
          const auto& pj = pp.joints[j];
          const auto& gj = gp.joints[j];
          if (pj && gj && (pj->position - gj->position).norm() <= thr) ++r.per_joint[j].idsw;
        }
      }
      last_track_of_gt[*gp.person_id] = *pp.person_id;
    }
    results.push_back(std::move(r));
  }
  return results;
}

// Interpolated area under the precision-recall curve for the pooled
// detections of the given joint types; NaN when they have no ground truth.
inline double average_precision(std::span<const MatchResult> results,
                                const std::vector<int>& joints) {
  long long gt_total = 0;
  std::vector<Detection> pool;
  for (const MatchResult& r : results)
    for (int j : joints) {
      gt_total += r.per_joint[j].gt;
      pool.insert(pool.end(), r.detections[j].begin(), r.detections[j].end());
    }
  if (gt_total == 0) return std::numeric_limits<double>::quiet_NaN();
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<double> precision, recall;
  long long tp = 0, fp = 0;
  for (const Detection& d : pool) {
    if (d.matched)
      ++tp;
    else
      ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / gt_total);
  }
  // Monotone envelope, integrated over recall.
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = precision.size(); i-- > 0;) {
    if (i + 1 < precision.size()) precision[i] = std::max(precision[i], precision[i + 1]);
  }
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// MOTA over the pooled counts of the given joint types: 1 - (FN+FP+IDSW)/GT;
// NaN when they have no ground truth.
inline double mota(std::span<const MatchResult> results, const std::vector<int>& joints) {
  long long fn = 0, fp = 0, idsw = 0, gt = 0;
  for (const MatchResult& r : results)
    for (int j : joints) {
      fn += r.per_joint[j].fn;
      fp += r.per_joint[j].fp;
      idsw += r.per_joint[j].idsw;
      gt += r.per_joint[j].gt;
    }
  if (gt == 0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - static_cast<double>(fn + fp + idsw) / gt;
}

// Evaluation columns: PoseTrack-style body groups when the skeleton carries
// the standard names, otherwise one column per joint.
struct JointGroups {
  std::vector<std::string> names;
  std::vector<std::vector<int>> joints;
};

inline JointGroups default_joint_groups(const Skeleton& skeleton) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> layout = {
      {"Head", {"head_top", "neck"}},
      {"Shou", {"l_shoulder", "r_shoulder"}},
      {"Elb", {"l_elbow", "r_elbow"}},
      {"Wri", {"l_wrist", "r_wrist"}},
      {"Hip", {"l_hip", "r_hip", "pelvis"}},
      {"Knee", {"l_knee", "r_knee"}},
      {"Ankl", {"l_ankle", "r_ankle"}},
  };
  JointGroups groups;
  std::vector<char> used(skeleton.joint_count(), 0);
  for (const auto& [name, members] : layout) {
    std::vector<int> ids;
    for (const std::string& m : members)
      for (int j = 0; j < skeleton.joint_count(); ++j)
        if (skeleton.joint_names[j] == m) {
          ids.push_back(j);
          used[j] = 1;
        }
    if (!ids.empty()) {
      groups.names.push_back(name);
      groups.joints.push_back(std::move(ids));
    }
  }
  for (int j = 0; j < skeleton.joint_count(); ++j)
    if (!used[j]) {
      groups.names.push_back(skeleton.joint_names[j]);
      groups.joints.push_back({j});
    }
  return groups;
}

// One metric row in evaluation-table layout: group columns plus Total. The
// AP total is the mean of defined group values; the MOTA total pools counts
// over every joint before the ratio.
struct MetricRow {
  std::vector<std::string> columns;  // group names + "Total"
  std::vector<double> values;
};

inline MetricRow ap_row(std::span<const MatchResult> results, const Skeleton& skeleton) {
  const JointGroups groups = default_joint_groups(skeleton);
  MetricRow row;
  double sum = 0.0;
  int defined = 0;
  for (std::size_t g = 0; g < groups.names.size(); ++g) {
    const double v = average_precision(results, groups.joints[g]);
    row.columns.push_back(groups.names[g]);
    row.values.push_back(v);
    if (!std::isnan(v)) {
      sum += v;
      ++defined;
    }
  }
  row.columns.push_back("Total");
  row.values.push_back(defined ? sum / defined : std::numeric_limits<double>::quiet_NaN());
  return row;
}

inline MetricRow mota_row(std::span<const MatchResult> results, const Skeleton& skeleton) {
  const JointGroups groups = default_joint_groups(skeleton);
  MetricRow row;
  for (std::size_t g = 0; g < groups.names.size(); ++g) {
    row.columns.push_back(groups.names[g]);
    row.values.push_back(mota(results, groups.joints[g]));
  }
  std::vector<int> all(skeleton.joint_count());
  for (int j = 0; j < skeleton.joint_count(); ++j) all[j] = j;
  row.columns.push_back("Total");
  row.values.push_back(mota(results, all));
  return row;
}

}  // namespace pggtrack
