#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "pggtrack/autodiff.hpp"
#include "pggtrack/frame.hpp"
#include "pggtrack/spatial_embed.hpp"

namespace pggtrack {

// Association cost for pose pairs with no common evidence.
inline constexpr double kIncomparable = std::numeric_limits<double>::infinity();

// The bidirectional temporal fields of one (t-1, t) transition. The forward
// field lives on frame t and points away from the previous-frame person
// center; the backward field lives on frame t-1 and points away from the
// current-frame center. Decoded variants hold the propagated centers.
struct TemporalFields {
  VectorField2 tvf_forward;
  VectorField2 tvf_backward;
  VectorField2 tie_forward;
  VectorField2 tie_backward;
};

// TIE decoding: T(p) = p - tvf(p); at a frame-t joint this is the matching
// person's center in the other frame.
inline VectorField2 decode_tie(const VectorField2& tvf) { return decode_sie(tvf); }

inline TemporalFields make_temporal_fields(const VectorField2& tvf_forward,
                                           const VectorField2& tvf_backward) {
  return TemporalFields{tvf_forward, tvf_backward, decode_tie(tvf_forward),
                        decode_tie(tvf_backward)};
}

// Triplet loss over human embeddings with margin alpha, summed over aligned
// (anchor, positive, negative) rows. The registered leaf is the row-wise
// concatenation anchors | positives | negatives.
inline ad::DualValue he_triplet_loss(const std::vector<HumanEmbedding>& anchors,
                                     const std::vector<HumanEmbedding>& positives,
                                     const std::vector<HumanEmbedding>& negatives,
                                     double alpha = 0.3) {
  if (anchors.size() != positives.size() || anchors.size() != negatives.size())
    throw InvalidInput("triplet lists must be aligned");
  if (anchors.empty()) return ad::DualValue::constant(0.0);
  const std::size_t dim = anchors[0].vector.size();
  std::vector<double> flat;
  flat.reserve(anchors.size() * dim * 3);
  for (const auto* list : {&anchors, &positives, &negatives})
    for (const auto& h : *list) {
      if (h.vector.size() != dim) throw InvalidInput("embedding lengths disagree");
      flat.insert(flat.end(), h.vector.begin(), h.vector.end());
    }
  auto tape = std::make_shared<ad::Tape>();
  ad::Var leaf = tape->leaf(flat, static_cast<int>(flat.size()));
  const int m = static_cast<int>(anchors.size());
  const int e = static_cast<int>(dim);
  auto slice = [&](int block, int row) {
    std::vector<int> idx(dim);
    for (int i = 0; i < e; ++i) idx[i] = (block * m + row) * e + i;
    return tape->gather(leaf, idx);
  };
  ad::Var total = tape->constant(0.0);
  for (int i = 0; i < m; ++i) {
    ad::Var a = slice(0, i), p = slice(1, i), n = slice(2, i);
    ad::Var dp = tape->sum(tape->square(tape->sub(a, p)));
    ad::Var dn = tape->sum(tape->square(tape->sub(a, n)));
    ad::Var hinge = tape->relu(tape->add_scalar(tape->sub(dp, dn), alpha));
    total = tape->add(total, hinge);
  }
  return ad::DualValue(tape, total, {leaf});
}

// Bidirectional temporal-vector-field loss. Forward term: l1 residual at
// frame-t joints against (p_t - prev center); backward term symmetric. Only
// persons present in both frames (shared ids) participate; leaves are the
// flattened forward and backward fields, in that order.
inline ad::DualValue tvf_loss(const TemporalFields& fields, const std::vector<Pose>& poses_t,
                              const std::vector<Pose>& poses_prev) {
  const GridShape shape = fields.tvf_forward.shape();
  detail::check_keypoints_in_grid(poses_t, shape);
  detail::check_keypoints_in_grid(poses_prev, shape);

  auto find_by_id = [](const std::vector<Pose>& poses, int id) -> const Pose* {
    for (const Pose& p : poses)
      if (p.person_id && *p.person_id == id) return &p;
    return nullptr;
  };

  auto tape = std::make_shared<ad::Tape>();
  std::vector<double> fwd_flat = detail::flatten_vector_field(fields.tvf_forward);
  std::vector<double> bwd_flat = detail::flatten_vector_field(fields.tvf_backward);
  ad::Var fwd_leaf = tape->leaf(fwd_flat, static_cast<int>(fwd_flat.size()));
  ad::Var bwd_leaf = tape->leaf(bwd_flat, static_cast<int>(bwd_flat.size()));

  auto one_direction = [&](ad::Var field_leaf, const std::vector<Pose>& at,
                           const std::vector<Pose>& other) {
    std::vector<const Pose*> kept;
    std::vector<Vec2> other_center;
    for (const Pose& p : at) {
      if (!p.person_id) continue;
      const Pose* o = find_by_id(other, *p.person_id);
      if (!o) continue;
      kept.push_back(&p);
      other_center.push_back(o->centroid());
    }
    ad::Var term = tape->constant(0.0);
    const int k_count = static_cast<int>(kept.size());
    for (int k = 0; k < k_count; ++k) {
      std::vector<int> pix;
      std::vector<double> target;
      for (const auto& kp : kept[k]->joints)
        if (kp) {
          pix.push_back(nearest_index(shape, kp->position.x, kp->position.y));
          target.push_back(kp->position.x - other_center[k].x);
          target.push_back(kp->position.y - other_center[k].y);
        }
      if (pix.empty()) continue;
      ad::Var pred = tape->gather(field_leaf, detail::vector_gather_indices(pix));
      ad::Var residual = tape->sub(pred, tape->constant(target, static_cast<int>(target.size())));
      term = tape->add(term, tape->scale(tape->sum(tape->abs(residual)),
                                         1.0 / (static_cast<double>(pix.size()) * k_count)));
    }
    return term;
  };

  ad::Var root = tape->add(one_direction(fwd_leaf, poses_t, poses_prev),
                           one_direction(bwd_leaf, poses_prev, poses_t));
  return ad::DualValue(tape, root, {fwd_leaf, bwd_leaf});
}

// Appearance potential: squared l2 distance between human embeddings.
inline double psi_he(const HumanEmbedding& a, const HumanEmbedding& b) {
  if (a.vector.size() != b.vector.size()) throw InvalidInput("embedding lengths disagree");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    const double d = a.vector[i] - b.vector[i];
    acc += d * d;
  }
  return acc;
}

// Temporal-smoothness potential: squared disagreement between propagated
// centers (TIE) and predicted centers (SIE), averaged over joints the two
// poses share; no shared joints means the pair is incomparable.
inline double psi_tie(const Pose& pose_t, const Pose& pose_prev, const VectorField2& sie_t,
                      const VectorField2& sie_prev, const VectorField2& tie_forward,
                      const VectorField2& tie_backward) {
  const std::size_t j_count = std::min(pose_t.joints.size(), pose_prev.joints.size());
  double acc = 0.0;
  int shared = 0;
  for (std::size_t j = 0; j < j_count; ++j) {
    const auto& kt = pose_t.joints[j];
    const auto& kp = pose_prev.joints[j];
    if (!kt || !kp) continue;
    ++shared;
    const Vec2 t_prev = tie_backward.sample_nearest(kp->position.x, kp->position.y);
    const Vec2 s_t = sie_t.sample_nearest(kt->position.x, kt->position.y);
    const Vec2 t_fwd = tie_forward.sample_nearest(kt->position.x, kt->position.y);
    const Vec2 s_prev = sie_prev.sample_nearest(kp->position.x, kp->position.y);
    acc += (t_prev - s_t).norm2() + (t_fwd - s_prev).norm2();
  }
  if (shared == 0) return kIncomparable;
  return acc / (2.0 * shared);
}

// Total pairwise potential, used as a cost: lower = more similar. The paper
// phrases Eq. 8 as a maximization, but both potentials are distances, so the
// assignment is solved as minimum cost.
inline double combined_cost(double d_he, double d_tie, double lambda_he = 3.0,
                            double lambda_tie = 1.0) {
  if (lambda_he < 0.0 || lambda_tie < 0.0) throw InvalidInput("potential weights must be >= 0");
  return lambda_he * d_he + lambda_tie * d_tie;
}

}  // namespace pggtrack
