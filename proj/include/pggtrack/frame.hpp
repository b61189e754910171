#pragma once

#include <array>
#include <optional>
#include <vector>

#include "pggtrack/grid.hpp"
#include "pggtrack/heatmap.hpp"
#include "pggtrack/skeleton.hpp"

namespace pggtrack {

// The six geometric ordering relations regularizing the keypoint embedding.
enum class OrderRelation { kLeftToRight, kRightToLeft, kTopToBottom, kBottomToTop, kFarToNear, kNearToFar };

inline constexpr std::array<OrderRelation, 6> kAllOrderRelations = {
    OrderRelation::kLeftToRight, OrderRelation::kRightToLeft, OrderRelation::kTopToBottom,
    OrderRelation::kBottomToTop, OrderRelation::kFarToNear,   OrderRelation::kNearToFar};

inline const char* order_relation_name(OrderRelation r) {
  switch (r) {
    case OrderRelation::kLeftToRight: return "l2r";
    case OrderRelation::kRightToLeft: return "r2l";
    case OrderRelation::kTopToBottom: return "t2b";
    case OrderRelation::kBottomToTop: return "b2t";
    case OrderRelation::kFarToNear: return "f2n";
    case OrderRelation::kNearToFar: return "n2f";
  }
  return "?";
}

// Per-person appearance vector with an optional identity label.
struct HumanEmbedding {
  std::vector<double> vector;
  std::optional<int> person_id;
};

// Everything one frame carries: detection heatmaps, the keypoint embedding,
// the six ordinal maps, the spatial vector field, the bidirectional temporal
// vector fields of the (t-1, t) transition, per-person appearance vectors,
// and optionally the ground truth that generated them. The temporal fields
// exist only when the frame has a predecessor; the backward field is sampled
// on the previous frame's grid.
struct FrameBundle {
  int time_index = 0;
  HeatmapStack heatmaps;
  ScalarField ke;
  std::array<ScalarField, 6> aux_maps;
  VectorField2 svf;
  std::optional<VectorField2> tvf_forward;
  std::optional<VectorField2> tvf_backward;
  std::vector<HumanEmbedding> he_vectors;
  std::optional<std::vector<Pose>> ground_truth;

  const GridShape& shape() const { return heatmaps.shape; }

  const ScalarField& aux_map(OrderRelation r) const { return aux_maps[static_cast<int>(r)]; }
  ScalarField& aux_map(OrderRelation r) { return aux_maps[static_cast<int>(r)]; }

  void validate() const {
    const GridShape& s = heatmaps.shape;
    if (!(ke.shape() == s) || !(svf.shape() == s))
      throw InvalidInput("frame fields disagree on grid shape");
    for (const auto& m : aux_maps)
      if (!(m.shape() == s)) throw InvalidInput("aux map shape mismatch");
    if (tvf_forward && !(tvf_forward->shape() == s)) throw InvalidInput("tvf shape mismatch");
    if (tvf_backward && !(tvf_backward->shape() == s)) throw InvalidInput("tvf shape mismatch");
    if (tvf_forward.has_value() != tvf_backward.has_value())
      throw InvalidInput("temporal fields must come as a forward/backward pair");
    if ((time_index == 0) && tvf_forward.has_value())
      throw InvalidInput("frame 0 cannot carry temporal fields");
  }
};

}  // namespace pggtrack
