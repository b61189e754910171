#pragma once

#include <vector>

#include "pggtrack/config.hpp"
#include "pggtrack/decoder.hpp"
#include "pggtrack/frame.hpp"
#include "pggtrack/metrics.hpp"
#include "pggtrack/pgg.hpp"
#include "pggtrack/spatial_embed.hpp"
#include "pggtrack/tracker.hpp"

namespace pggtrack {

// Output of the single-frame pipeline: the pose proposals plus the fields
// the tracker needs, and the grouping snapshots the plots use.
struct DecodedFrame {
  std::vector<Pose> poses;
  ScalarField ke;     // refined where masked, raw elsewhere
  VectorField2 sie;   // refined where masked, raw elsewhere
  EmbeddingMatrix embeddings_before;
  EmbeddingMatrix embeddings_after;
  MaskIndex mask_index;
};

// Heatmaps -> peaks -> pose mask -> mean-shift refinement of the masked
// KE/SIE columns -> greedy grouping. Pixels outside the mask keep their raw
// embedding values (peaks can sit slightly below the mask threshold).
inline DecodedFrame decode_frame(const FrameBundle& frame, const RunConfig& cfg,
                                 const Skeleton& skeleton) {
  DecodedFrame out;
  const auto peaks = extract_peaks(frame.heatmaps, cfg.peak_config());
  out.ke = frame.ke;
  out.sie = decode_sie(frame.svf);

  if (cfg.pgg.enabled) {
    const BinaryMask mask = pose_mask(frame.heatmaps, cfg.mask.tau);
    if (mask.occupancy > 0) {
      auto [x0, index] = gather_masked({&frame.ke, &out.sie}, mask);
      const PggTrace trace = pgg_forward(x0, cfg.pgg_config());
      const EmbeddingMatrix& refined = trace.iterates.back();
      for (int i = 0; i < refined.cols; ++i) {
        const int p = index[i];
        out.ke[p] = refined.at(0, i);
        out.sie[p] = {refined.at(1, i), refined.at(2, i)};
      }
      out.embeddings_before = x0;
      out.embeddings_after = refined;
      out.mask_index = std::move(index);
    }
  }

  out.poses = greedy_decode(peaks, out.ke, out.sie, cfg.decode_config(skeleton));
  return out;
}

// Appearance vector for a decoded pose: the bundle's embedding of the
// ground-truth person whose centroid lies nearest, standing in for the
// region-pooled feature extractor.
inline HumanEmbedding embedding_for_pose(const Pose& pose, const FrameBundle& frame) {
  if (frame.he_vectors.empty() || !frame.ground_truth) return {};
  const Vec2 c = pose.centroid();
  int best_id = -1;
  double best = std::numeric_limits<double>::infinity();
  for (const Pose& gt : *frame.ground_truth) {
    if (!gt.person_id) continue;
    const double d = (gt.centroid() - c).norm2();
    if (d < best) {
      best = d;
      best_id = *gt.person_id;
    }
  }
  for (const HumanEmbedding& h : frame.he_vectors)
    if (h.person_id && *h.person_id == best_id) return h;
  return {};
}

// Online tracking over a time-ordered sequence: decode each frame, then
// associate against the live tracks. No lookahead; appending frames never
// changes earlier output.
inline std::vector<Trajectory> track_sequence(const std::vector<FrameBundle>& frames,
                                              const RunConfig& cfg, const Skeleton& skeleton,
                                              double calibrated_gate) {
  std::vector<Trajectory> tracks;
  int next_id = 0;
  const TrackerConfig tracker_cfg = cfg.tracker_config(calibrated_gate);

  VectorField2 prev_sie;
  bool have_prev = false;
  int prev_time = 0;
  for (const FrameBundle& frame : frames) {
    if (have_prev && frame.time_index <= prev_time)
      throw InvalidInput("frames must be strictly time ordered");
    DecodedFrame decoded = decode_frame(frame, cfg, skeleton);

    std::vector<HumanEmbedding> embeddings;
    embeddings.reserve(decoded.poses.size());
    for (const Pose& pose : decoded.poses) embeddings.push_back(embedding_for_pose(pose, frame));

    TemporalFields temporal;
    AssociationFields fields;
    fields.sie_t = &decoded.sie;
    if (have_prev && frame.tvf_forward && frame.tvf_backward) {
      temporal = make_temporal_fields(*frame.tvf_forward, *frame.tvf_backward);
      fields.sie_prev = &prev_sie;
      fields.temporal = &temporal;
    }
    associate(decoded.poses, embeddings, frame.time_index, tracks, fields, tracker_cfg, next_id);

    prev_sie = std::move(decoded.sie);
    have_prev = true;
    prev_time = frame.time_index;
  }
  return tracks;
}

// Flattens trajectories back into per-frame pose lists (person_id = track
// id), aligned with the given frame times.
inline std::vector<std::vector<Pose>> trajectories_to_frames(const std::vector<Trajectory>& tracks,
                                                             const std::vector<int>& frame_times) {
  std::vector<std::vector<Pose>> frames(frame_times.size());
  for (const Trajectory& track : tracks)
    for (const auto& [time, pose] : track.poses)
      for (std::size_t t = 0; t < frame_times.size(); ++t)
        if (frame_times[t] == time) frames[t].push_back(pose);
  return frames;
}

}  // namespace pggtrack
