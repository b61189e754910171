#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

#include "pggtrack/autodiff.hpp"
#include "pggtrack/frame.hpp"
#include "pggtrack/grid.hpp"
#include "pggtrack/skeleton.hpp"

namespace pggtrack {

// Per-person mean of the embeddings sampled at that person's present joints.
struct ReferenceEmbedding {
  std::vector<double> values;  // one reference per person
  int person_count() const { return static_cast<int>(values.size()); }
};

namespace detail {

inline void check_keypoints_in_grid(const std::vector<Pose>& poses, const GridShape& shape) {
  for (const Pose& p : poses)
    for (const auto& kp : p.joints)
      if (kp && !shape.contains(kp->position.x, kp->position.y))
        throw InvalidInput("keypoint lies outside the grid");
}

inline std::vector<int> keypoint_pixel_indices(const Pose& pose, const GridShape& shape) {
  std::vector<int> idx;
  for (const auto& kp : pose.joints)
    if (kp) idx.push_back(nearest_index(shape, kp->position.x, kp->position.y));
  return idx;
}

// Mean of a gathered vector as a scalar Var.
inline ad::Var mean_of(ad::Tape& t, ad::Var vec, int n) {
  return t.scale(t.sum(vec), 1.0 / n);
}

// vec - broadcast(scalar), via a ones-column matmul.
inline ad::Var sub_broadcast(ad::Tape& t, ad::Var vec, ad::Var scalar, int n) {
  ad::Var rep = t.matmul(t.ones(n, 1), scalar);  // scalar is 1x1
  return t.sub(vec, rep);
}

}  // namespace detail

inline ReferenceEmbedding reference_embeddings(const ScalarField& field,
                                               const std::vector<Pose>& poses) {
  detail::check_keypoints_in_grid(poses, field.shape());
  ReferenceEmbedding refs;
  for (const Pose& p : poses) {
    double sum = 0.0;
    int n = 0;
    for (const auto& kp : p.joints)
      if (kp) {
        sum += field.sample_nearest(kp->position.x, kp->position.y);
        ++n;
      }
    refs.values.push_back(n ? sum / n : 0.0);
  }
  return refs;
}

// Pull loss: mean squared distance between each sampled joint embedding and
// its person's reference. Persons with missing joints are averaged over
// their present joints, which reduces to the plain 1/(J*K) form when every
// joint is annotated.
inline ad::Var pull_loss_on(ad::Tape& t, ad::Var field_flat, const GridShape& shape,
                            const std::vector<Pose>& poses) {
  const int k_count = static_cast<int>(poses.size());
  ad::Var total = t.constant(0.0);
  if (k_count == 0) return total;
  for (const Pose& p : poses) {
    std::vector<int> idx = detail::keypoint_pixel_indices(p, shape);
    const int n = static_cast<int>(idx.size());
    if (n == 0) continue;
    ad::Var vals = t.gather(field_flat, idx);
    ad::Var ref = detail::mean_of(t, vals, n);
    ad::Var diff = detail::sub_broadcast(t, vals, ref, n);
    total = t.add(total, t.scale(t.sum(t.square(diff)), 1.0 / (static_cast<double>(n) * k_count)));
  }
  return total;
}

inline ad::DualValue pull_loss(const ScalarField& ke, const std::vector<Pose>& poses) {
  detail::check_keypoints_in_grid(poses, ke.shape());
  auto tape = std::make_shared<ad::Tape>();
  ad::Var leaf = tape->leaf(ke.values(), static_cast<int>(ke.size()));
  ad::Var root = pull_loss_on(*tape, leaf, ke.shape(), poses);
  return ad::DualValue(tape, root, {leaf});
}

// Push loss: (1/K^2) sum over ordered person pairs, including k = k', of
// exp(-(ref_k - ref_k')^2 / 2). The diagonal contributes a gradient-free
// constant 1/K, kept to match the formula as printed.
inline ad::Var push_loss_on(ad::Tape& t, ad::Var field_flat, const GridShape& shape,
                            const std::vector<Pose>& poses) {
  const int k_count = static_cast<int>(poses.size());
  if (k_count == 0) return t.constant(0.0);
  std::vector<ad::Var> refs;
  for (const Pose& p : poses) {
    std::vector<int> idx = detail::keypoint_pixel_indices(p, shape);
    ad::Var vals = t.gather(field_flat, idx);
    refs.push_back(detail::mean_of(t, vals, static_cast<int>(idx.size())));
  }
  ad::Var total = t.constant(0.0);
  for (int a = 0; a < k_count; ++a)
    for (int b = 0; b < k_count; ++b) {
      ad::Var d = t.sub(refs[a], refs[b]);
      total = t.add(total, t.exp(t.scale(t.square(d), -0.5)));
    }
  return t.scale(total, 1.0 / (static_cast<double>(k_count) * k_count));
}

inline ad::DualValue push_loss(const ScalarField& ke, const std::vector<Pose>& poses) {
  detail::check_keypoints_in_grid(poses, ke.shape());
  auto tape = std::make_shared<ad::Tape>();
  ad::Var leaf = tape->leaf(ke.values(), static_cast<int>(ke.size()));
  ad::Var root = push_loss_on(*tape, leaf, ke.shape(), poses);
  return ad::DualValue(tape, root, {leaf});
}

// K x K ground-truth order matrix: entry (k, k') is +1 when person k precedes
// person k' under the relation's sort key, -1 otherwise; the diagonal is 0.
// Location relations sort centroids, size relations sort the squared
// head-segment length; ties break toward the lower person index.
class OrderMatrix {
 public:
  OrderMatrix() = default;
  explicit OrderMatrix(int k) : k_(k), entries_(static_cast<std::size_t>(k) * k, 0) {}

  int person_count() const { return k_; }
  int at(int a, int b) const { return entries_[static_cast<std::size_t>(a) * k_ + b]; }
  void set(int a, int b, int v) { entries_[static_cast<std::size_t>(a) * k_ + b] = v; }

 private:
  int k_ = 0;
  std::vector<int> entries_;
};

inline OrderMatrix ground_truth_order(const std::vector<Pose>& poses, OrderRelation relation,
                                      const Skeleton& skeleton) {
  const int k_count = static_cast<int>(poses.size());
  std::vector<double> key(k_count);
  for (int k = 0; k < k_count; ++k) {
    switch (relation) {
      case OrderRelation::kLeftToRight: key[k] = poses[k].centroid().x; break;
      case OrderRelation::kRightToLeft: key[k] = -poses[k].centroid().x; break;
      case OrderRelation::kTopToBottom: key[k] = poses[k].centroid().y; break;
      case OrderRelation::kBottomToTop: key[k] = -poses[k].centroid().y; break;
      case OrderRelation::kFarToNear: key[k] = poses[k].head_size_sq(skeleton); break;
      case OrderRelation::kNearToFar: key[k] = -poses[k].head_size_sq(skeleton); break;
    }
  }
  OrderMatrix ord(k_count);
  for (int a = 0; a < k_count; ++a)
    for (int b = 0; b < k_count; ++b) {
      if (a == b) continue;
      const bool precedes = key[a] < key[b] || (key[a] == key[b] && a < b);
      ord.set(a, b, precedes ? 1 : -1);
    }
  return ord;
}

// Ordinal auxiliary loss: the push term is replaced by a logistic ranking
// penalty log(1 + exp(Ord * (ref_k - ref_k'))) over distinct pairs (the
// diagonal has no defined order and is skipped); the pull term is kept.
inline ad::Var aux_ordinal_loss_on(ad::Tape& t, ad::Var field_flat, const GridShape& shape,
                                   const std::vector<Pose>& poses, const OrderMatrix& ord) {
  const int k_count = static_cast<int>(poses.size());
  if (ord.person_count() != k_count)
    throw InvalidInput("order matrix size does not match person count");
  ad::Var total = pull_loss_on(t, field_flat, shape, poses);
  if (k_count < 2) return total;
  std::vector<ad::Var> refs;
  for (const Pose& p : poses) {
    std::vector<int> idx = detail::keypoint_pixel_indices(p, shape);
    ad::Var vals = t.gather(field_flat, idx);
    refs.push_back(detail::mean_of(t, vals, static_cast<int>(idx.size())));
  }
  ad::Var ordinal = t.constant(0.0);
  for (int a = 0; a < k_count; ++a)
    for (int b = 0; b < k_count; ++b) {
      if (a == b) continue;
      ad::Var d = t.scale(t.sub(refs[a], refs[b]), static_cast<double>(ord.at(a, b)));
      ordinal = t.add(ordinal, t.softplus(d));
    }
  return t.add(total, t.scale(ordinal, 1.0 / (static_cast<double>(k_count) * k_count)));
}

inline ad::DualValue aux_ordinal_loss(const ScalarField& aux_map, const std::vector<Pose>& poses,
                                      const OrderMatrix& ord) {
  detail::check_keypoints_in_grid(poses, aux_map.shape());
  auto tape = std::make_shared<ad::Tape>();
  ad::Var leaf = tape->leaf(aux_map.values(), static_cast<int>(aux_map.size()));
  ad::Var root = aux_ordinal_loss_on(*tape, leaf, aux_map.shape(), poses, ord);
  return ad::DualValue(tape, root, {leaf});
}

namespace detail {

// Gathers (dx, dy) pairs of a flattened vector field at given pixels.
inline std::vector<int> vector_gather_indices(const std::vector<int>& pixel_idx) {
  std::vector<int> idx;
  idx.reserve(pixel_idx.size() * 2);
  for (int p : pixel_idx) {
    idx.push_back(2 * p);
    idx.push_back(2 * p + 1);
  }
  return idx;
}

inline std::vector<double> flatten_vector_field(const VectorField2& f) {
  std::vector<double> flat;
  flat.reserve(f.size() * 2);
  for (const Vec2& v : f.values()) {
    flat.push_back(v.x);
    flat.push_back(v.y);
  }
  return flat;
}

}  // namespace detail

// Spatial-vector-field loss: l1 distance between the predicted offset at each
// joint pixel and the displacement from the person center to that joint.
inline ad::Var svf_loss_on(ad::Tape& t, ad::Var svf_flat, const GridShape& shape,
                           const std::vector<Pose>& poses) {
  const int k_count = static_cast<int>(poses.size());
  ad::Var total = t.constant(0.0);
  if (k_count == 0) return total;
  for (const Pose& p : poses) {
    const Vec2 center = p.centroid();
    std::vector<int> pix;
    std::vector<double> target;
    for (const auto& kp : p.joints)
      if (kp) {
        pix.push_back(nearest_index(shape, kp->position.x, kp->position.y));
        target.push_back(kp->position.x - center.x);
        target.push_back(kp->position.y - center.y);
      }
    if (pix.empty()) continue;
    ad::Var pred = t.gather(svf_flat, detail::vector_gather_indices(pix));
    ad::Var residual = t.sub(pred, t.constant(target, static_cast<int>(target.size())));
    total = t.add(total, t.scale(t.sum(t.abs(residual)),
                                 1.0 / (static_cast<double>(pix.size()) * k_count)));
  }
  return total;
}

inline ad::DualValue svf_loss(const VectorField2& svf, const std::vector<Pose>& poses) {
  detail::check_keypoints_in_grid(poses, svf.shape());
  auto tape = std::make_shared<ad::Tape>();
  std::vector<double> flat = detail::flatten_vector_field(svf);
  ad::Var leaf = tape->leaf(flat, static_cast<int>(flat.size()));
  ad::Var root = svf_loss_on(*tape, leaf, svf.shape(), poses);
  return ad::DualValue(tape, root, {leaf});
}

// SIE decoding: S(p) = p - svf(p), the predicted human-center location.
inline VectorField2 decode_sie(const VectorField2& svf) {
  VectorField2 out(svf.shape());
  for (int y = 0; y < svf.shape().height; ++y)
    for (int x = 0; x < svf.shape().width; ++x) {
      const Vec2 v = svf.at(x, y);
      out.at(x, y) = {x - v.x, y - v.y};
    }
  return out;
}

}  // namespace pggtrack
