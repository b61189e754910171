#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pggtrack/skeleton.hpp"
#include "pggtrack/temporal_embed.hpp"

namespace pggtrack {

// A partial matching between current poses (rows) and previous tracks
// (columns): every row and column is used at most once, and the smaller side
// is fully assigned.
struct Assignment {
  std::vector<int> row_to_col;  // -1 = unassigned
  std::vector<int> col_to_row;
  double total_cost = 0.0;
};

// Minimum-cost bipartite assignment via shortest augmenting paths (the
// Jonker-Volgenant form of the Munkres algorithm), O(n^2 m). Entries must be
// finite; callers replace incomparable pairs with a large constant first.
inline Assignment munkres_solve(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows ? static_cast<int>(cost[0].size()) : 0;
  Assignment result;
  result.row_to_col.assign(rows, -1);
  result.col_to_row.assign(cols, -1);
  if (rows == 0 || cols == 0) return result;
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != cols) throw InvalidInput("cost matrix is ragged");
    for (double c : row)
      if (!std::isfinite(c)) throw InvalidInput("cost matrix entries must be finite");
  }

  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;  // n <= m
  const int m = transposed ? rows : cols;
  auto at = [&](int i, int j) { return transposed ? cost[j][i] : cost[i][j]; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);  // match[j]: row (1-based) on column j
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= m; ++j) {
    if (match[j] == 0) continue;
    const int small_side = match[j] - 1;
    const int big_side = j - 1;
    const int r = transposed ? big_side : small_side;
    const int c = transposed ? small_side : big_side;
    result.row_to_col[r] = c;
    result.col_to_row[c] = r;
    result.total_cost += cost[r][c];
  }
  return result;
}

// A tracked person: id, its time-indexed poses, and the state the next
// association step compares against.
struct Trajectory {
  int id = 0;
  std::vector<std::pair<int, Pose>> poses;  // (time, pose), strictly increasing
  int last_seen = -1;
  HumanEmbedding last_he;
  bool alive = true;

  const Pose& last_pose() const { return poses.back().second; }

  void append(int time, Pose pose, HumanEmbedding he) {
    if (!poses.empty() && time <= poses.back().first)
      throw InvalidInput("trajectory times must be strictly increasing");
    pose.person_id = id;
    poses.emplace_back(time, std::move(pose));
    last_seen = time;
    last_he = std::move(he);
  }
};

enum class MetricMode { kCombined, kHeOnly, kTieOnly, kOks, kIou };

inline const char* metric_mode_name(MetricMode m) {
  switch (m) {
    case MetricMode::kCombined: return "combined";
    case MetricMode::kHeOnly: return "he_only";
    case MetricMode::kTieOnly: return "tie_only";
    case MetricMode::kOks: return "oks";
    case MetricMode::kIou: return "iou";
  }
  return "?";
}

inline MetricMode metric_mode_from_name(const std::string& name) {
  for (MetricMode m : {MetricMode::kCombined, MetricMode::kHeOnly, MetricMode::kTieOnly,
                       MetricMode::kOks, MetricMode::kIou})
    if (name == metric_mode_name(m)) return m;
  throw InvalidInput("unknown tracker metric mode: " + name);
}

struct TrackerConfig {
  double gate = 10.0;      // matches costlier than this are severed
  int max_age = 1;         // frames a track survives unmatched
  double lambda_he = 3.0;
  double lambda_tie = 1.0;
  MetricMode metric = MetricMode::kCombined;

  void validate() const {
    if (gate <= 0.0) throw InvalidInput("tracker gate must be positive");
    if (max_age < 1) throw InvalidInput("tracker max age must be >= 1");
  }
};

// Per-joint falloff constants of the standard keypoint-similarity kernel;
// joints outside the usual set borrow the nearest body part's constant.
inline std::vector<double> default_oks_kappas(const Skeleton& skeleton) {
  std::vector<double> kappas(skeleton.joint_count(), 0.079);
  for (int j = 0; j < skeleton.joint_count(); ++j) {
    const std::string& n = skeleton.joint_names[j];
    if (n.find("head") != std::string::npos) kappas[j] = 0.035;
    else if (n.find("neck") != std::string::npos) kappas[j] = 0.079;
    else if (n.find("shoulder") != std::string::npos) kappas[j] = 0.079;
    else if (n.find("elbow") != std::string::npos) kappas[j] = 0.072;
    else if (n.find("wrist") != std::string::npos) kappas[j] = 0.062;
    else if (n.find("hip") != std::string::npos) kappas[j] = 0.107;
    else if (n.find("pelvis") != std::string::npos) kappas[j] = 0.107;
    else if (n.find("knee") != std::string::npos) kappas[j] = 0.087;
    else if (n.find("ankle") != std::string::npos) kappas[j] = 0.089;
  }
  return kappas;
}

// Object-keypoint similarity over shared joints; 1 for identical poses,
// falling off with displacement relative to the object scale.
inline double oks_similarity(const Pose& a, const Pose& b, double scale,
                             const std::vector<double>& kappas) {
  if (scale <= 0.0) scale = 1.0;
  double acc = 0.0;
  int shared = 0;
  const std::size_t j_count = std::min(a.joints.size(), b.joints.size());
  for (std::size_t j = 0; j < j_count; ++j) {
    if (!a.joints[j] || !b.joints[j]) continue;
    const double kappa = j < kappas.size() ? kappas[j] : 0.079;
    const double d2 = (a.joints[j]->position - b.joints[j]->position).norm2();
    acc += std::exp(-d2 / (2.0 * scale * scale * kappa * kappa));
    ++shared;
  }
  return shared ? acc / shared : 0.0;
}

// Intersection over union of the tight keypoint bounding boxes; degenerate
// boxes are widened to one pixel.
inline double iou_similarity(const Pose& a, const Pose& b) {
  auto box = [](const Pose& p) {
    auto bb = p.bounding_box();
    if (bb[2] - bb[0] <= 0.0) {
      bb[0] -= 0.5;
      bb[2] += 0.5;
    }
    if (bb[3] - bb[1] <= 0.0) {
      bb[1] -= 0.5;
      bb[3] += 0.5;
    }
    return bb;
  };
  const auto ba = box(a);
  const auto bb = box(b);
  const double ix = std::max(0.0, std::min(ba[2], bb[2]) - std::max(ba[0], bb[0]));
  const double iy = std::max(0.0, std::min(ba[3], bb[3]) - std::max(ba[1], bb[1]));
  const double inter = ix * iy;
  const double area_a = (ba[2] - ba[0]) * (ba[3] - ba[1]);
  const double area_b = (bb[2] - bb[0]) * (bb[3] - bb[1]);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Field context for one association step. The previous-frame fields may be
// absent on the first frame or when temporal fields were not generated.
struct AssociationFields {
  const VectorField2* sie_t = nullptr;
  const VectorField2* sie_prev = nullptr;
  const TemporalFields* temporal = nullptr;
};

// One online association step: build the pairwise cost per the configured
// metric, solve the assignment, sever gated matches, extend or retire tracks
// and give unmatched poses fresh ids.
inline void associate(const std::vector<Pose>& current, const std::vector<HumanEmbedding>& he,
                      int time_index, std::vector<Trajectory>& tracks,
                      const AssociationFields& fields, const TrackerConfig& cfg, int& next_id) {
  cfg.validate();
  if (he.size() != current.size() &&
      (cfg.metric == MetricMode::kCombined || cfg.metric == MetricMode::kHeOnly))
    throw InvalidInput("appearance metric requires one embedding per pose");

  std::vector<int> candidates;
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (tracks[t].alive && time_index - tracks[t].last_seen <= cfg.max_age)
      candidates.push_back(static_cast<int>(t));

  auto pair_cost = [&](std::size_t row, int track_idx) -> double {
    const Trajectory& track = tracks[track_idx];
    const bool consecutive = track.last_seen == time_index - 1 && fields.temporal &&
                             fields.sie_t && fields.sie_prev;
    switch (cfg.metric) {
      case MetricMode::kHeOnly:
        return psi_he(he[row], track.last_he);
      case MetricMode::kTieOnly: {
        if (!consecutive) return kIncomparable;
        return psi_tie(current[row], track.last_pose(), *fields.sie_t, *fields.sie_prev,
                       fields.temporal->tie_forward, fields.temporal->tie_backward);
      }
      case MetricMode::kOks: {
        const auto bb = track.last_pose().bounding_box();
        const double scale = std::sqrt(std::max(1.0, (bb[2] - bb[0]) * (bb[3] - bb[1])));
        static const std::vector<double> generic(32, 0.079);
        return 1.0 - oks_similarity(current[row], track.last_pose(), scale, generic);
      }
      case MetricMode::kIou:
        return 1.0 - iou_similarity(current[row], track.last_pose());
      case MetricMode::kCombined: {
        const double d_he = psi_he(he[row], track.last_he);
        // A track older than one frame has no temporal fields to compare
        // against; its appearance cost stands alone.
        double d_tie = 0.0;
        if (consecutive)
          d_tie = psi_tie(current[row], track.last_pose(), *fields.sie_t, *fields.sie_prev,
                          fields.temporal->tie_forward, fields.temporal->tie_backward);
        if (!std::isfinite(d_tie)) return kIncomparable;
        return combined_cost(d_he, d_tie, cfg.lambda_he, cfg.lambda_tie);
      }
    }
    return kIncomparable;
  };

  std::vector<std::vector<double>> cost(current.size(),
                                        std::vector<double>(candidates.size(), 0.0));
  double max_finite = 0.0;
  for (std::size_t r = 0; r < current.size(); ++r)
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      cost[r][c] = pair_cost(r, candidates[c]);
      if (std::isfinite(cost[r][c])) max_finite = std::max(max_finite, cost[r][c]);
    }
  const double big = std::max(cfg.gate * 2.0, max_finite * 2.0) + 1e6;
  for (auto& row : cost)
    for (double& c : row)
      if (!std::isfinite(c)) c = big;

  Assignment assignment = munkres_solve(cost);

  std::vector<char> track_extended(tracks.size(), 0);
  for (std::size_t r = 0; r < current.size(); ++r) {
    int col = assignment.row_to_col[r];
    if (col >= 0 && cost[r][col] > cfg.gate) col = -1;  // sever gated matches
    HumanEmbedding embedding = r < he.size() ? he[r] : HumanEmbedding{};
    if (col >= 0) {
      Trajectory& track = tracks[candidates[col]];
      track.append(time_index, current[r], std::move(embedding));
      track_extended[candidates[col]] = 1;
    } else {
      Trajectory fresh;
      fresh.id = next_id++;
      fresh.append(time_index, current[r], std::move(embedding));
      tracks.push_back(std::move(fresh));
    }
  }

  for (std::size_t t = 0; t < track_extended.size(); ++t) {
    Trajectory& track = tracks[t];
    if (!track_extended[t] && track.alive && time_index - track.last_seen >= cfg.max_age)
      track.alive = false;
  }
}

}  // namespace pggtrack
