#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pggtrack/frame.hpp"
#include "pggtrack/simulator.hpp"
#include "pggtrack/tensor_io.hpp"
#include "pggtrack/tracker.hpp"

namespace pggtrack {

// ---- pose <-> JSON (joint names spelled out, never bare indices) ----------

inline nlohmann::json pose_to_json(const Pose& pose, const Skeleton& skeleton) {
  nlohmann::json j;
  if (pose.person_id) j["person_id"] = *pose.person_id;
  j["score"] = pose_score(pose);
  nlohmann::json kps = nlohmann::json::object();
  for (int i = 0; i < skeleton.joint_count(); ++i) {
    const auto& kp = pose.joints[i];
    if (!kp) continue;
    kps[skeleton.joint_names[i]] = {kp->position.x, kp->position.y, kp->confidence};
  }
  j["keypoints"] = std::move(kps);
  return j;
}

inline Pose pose_from_json(const nlohmann::json& j, const Skeleton& skeleton) {
  Pose pose(skeleton.joint_count());
  if (j.contains("person_id")) pose.person_id = j.at("person_id").get<int>();
  for (auto it = j.at("keypoints").begin(); it != j.at("keypoints").end(); ++it) {
    const int joint = skeleton.joint_index(it.key());
    const auto& v = it.value();
    pose.set(joint, {v.at(0).get<double>(), v.at(1).get<double>()}, v.at(2).get<double>());
  }
  if (pose.present_count() == 0) throw InvalidInput("pose has no keypoints");
  return pose;
}

// ---- config echoes ---------------------------------------------------------

inline nlohmann::json skeleton_to_json(const Skeleton& s) {
  return {{"joint_names", s.joint_names},
          {"head_top_index", s.head_top_index},
          {"neck_index", s.neck_index}};
}

inline Skeleton skeleton_from_json(const nlohmann::json& j) {
  Skeleton s;
  s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  s.head_top_index = j.at("head_top_index").get<int>();
  s.neck_index = j.at("neck_index").get<int>();
  s.validate();
  return s;
}

inline nlohmann::json scene_to_json(const SceneConfig& c) {
  nlohmann::json motions = nlohmann::json::array();
  for (const PersonMotion& m : c.motions)
    motions.push_back({{"start", {m.start.x, m.start.y}},
                       {"velocity", {m.velocity.x, m.velocity.y}},
                       {"scale", m.scale},
                       {"articulation", m.articulation},
                       {"phase", m.phase},
                       {"visible_from", m.visible_from},
                       {"visible_until", m.visible_until}});
  nlohmann::json occ = nlohmann::json::array();
  for (const OcclusionWindow& w : c.occlusions)
    occ.push_back({{"person", w.person}, {"from", w.from}, {"until", w.until}});
  return {{"person_count", c.person_count},
          {"frame_count", c.frame_count},
          {"grid", {{"width", c.shape.width}, {"height", c.shape.height}}},
          {"motions", motions},
          {"camera", {{"zoom_rate", c.camera.zoom_rate}, {"pan", {c.camera.pan.x, c.camera.pan.y}}}},
          {"occlusions", occ},
          {"seed", c.seed},
          {"snap_to_pixels", c.snap_to_pixels},
          {"margin", c.margin},
          {"auto_speed", c.auto_speed},
          {"auto_articulation", c.auto_articulation},
          {"auto_scale", c.auto_scale}};
}

inline SceneConfig scene_from_json(const nlohmann::json& j, const Skeleton& skeleton) {
  SceneConfig c;
  c.skeleton = skeleton;
  c.person_count = j.at("person_count").get<int>();
  c.frame_count = j.at("frame_count").get<int>();
  c.shape = {j.at("grid").at("width").get<int>(), j.at("grid").at("height").get<int>()};
  for (const auto& m : j.at("motions")) {
    PersonMotion pm;
    pm.start = {m.at("start").at(0).get<double>(), m.at("start").at(1).get<double>()};
    pm.velocity = {m.at("velocity").at(0).get<double>(), m.at("velocity").at(1).get<double>()};
    pm.scale = m.at("scale").get<double>();
    pm.articulation = m.at("articulation").get<double>();
    pm.phase = m.at("phase").get<double>();
    pm.visible_from = m.at("visible_from").get<int>();
    pm.visible_until = m.at("visible_until").get<int>();
    c.motions.push_back(pm);
  }
  c.camera.zoom_rate = j.at("camera").at("zoom_rate").get<double>();
  c.camera.pan = {j.at("camera").at("pan").at(0).get<double>(),
                  j.at("camera").at("pan").at(1).get<double>()};
  for (const auto& w : j.at("occlusions"))
    c.occlusions.push_back(
        {w.at("person").get<int>(), w.at("from").get<int>(), w.at("until").get<int>()});
  c.seed = j.at("seed").get<std::uint64_t>();
  c.snap_to_pixels = j.at("snap_to_pixels").get<bool>();
  c.margin = j.at("margin").get<double>();
  c.auto_speed = j.at("auto_speed").get<double>();
  c.auto_articulation = j.at("auto_articulation").get<double>();
  c.auto_scale = j.at("auto_scale").get<double>();
  return c;
}

inline nlohmann::json noise_to_json(const NoiseConfig& n) {
  return {{"sigma", n.sigma},
          {"paint_radius_factor", n.paint_radius_factor},
          {"heatmap_noise", n.heatmap_noise},
          {"ke_latent_spacing", n.ke_latent_spacing},
          {"ke_jitter", n.ke_jitter},
          {"ke_background", n.ke_background},
          {"aux_jitter", n.aux_jitter},
          {"svf_jitter", n.svf_jitter},
          {"tvf_jitter", n.tvf_jitter},
          {"tvf_motion_error_factor", n.tvf_motion_error_factor},
          {"he_dim", n.he_dim},
          {"he_scale", n.he_scale},
          {"he_jitter", n.he_jitter},
          {"he_drift_rate", n.he_drift_rate},
          {"he_scramble_from", n.he_scramble_from},
          {"he_scramble_until", n.he_scramble_until},
          {"confusion_probability", n.confusion_probability}};
}

inline NoiseConfig noise_from_json(const nlohmann::json& j) {
  NoiseConfig n;
  n.sigma = j.at("sigma").get<double>();
  n.paint_radius_factor = j.at("paint_radius_factor").get<double>();
  n.heatmap_noise = j.at("heatmap_noise").get<double>();
  n.ke_latent_spacing = j.at("ke_latent_spacing").get<double>();
  n.ke_jitter = j.at("ke_jitter").get<double>();
  n.ke_background = j.at("ke_background").get<double>();
  n.aux_jitter = j.at("aux_jitter").get<double>();
  n.svf_jitter = j.at("svf_jitter").get<double>();
  n.tvf_jitter = j.at("tvf_jitter").get<double>();
  n.tvf_motion_error_factor = j.at("tvf_motion_error_factor").get<double>();
  n.he_dim = j.at("he_dim").get<int>();
  n.he_scale = j.at("he_scale").get<double>();
  n.he_jitter = j.at("he_jitter").get<double>();
  n.he_drift_rate = j.at("he_drift_rate").get<double>();
  n.he_scramble_from = j.at("he_scramble_from").get<int>();
  n.he_scramble_until = j.at("he_scramble_until").get<int>();
  n.confusion_probability = j.at("confusion_probability").get<double>();
  return n;
}

// ---- gate calibration ------------------------------------------------------

inline double mean_center_motion(const std::vector<std::vector<Pose>>& gt) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t t = 1; t < gt.size(); ++t)
    for (const Pose& cur : gt[t])
      for (const Pose& prev : gt[t - 1])
        if (cur.person_id && prev.person_id && *cur.person_id == *prev.person_id) {
          sum += (cur.centroid() - prev.centroid()).norm();
          ++count;
        }
  return count ? sum / count : 0.0;
}

// Expected within-track appearance cost under the noise model, with headroom
// for concentration tails; scrambled appearance behaves like a fresh latent.
inline double expected_he_match_cost(const NoiseConfig& n) {
  double cost = 2.0 * n.he_dim * n.he_jitter * n.he_jitter +
                n.he_dim * n.he_drift_rate * n.he_drift_rate;
  if (n.he_scramble_until > n.he_scramble_from)
    cost = std::max(cost, 2.0 * n.he_scale * n.he_scale);
  return 1.5 * cost;
}

inline double expected_tie_match_cost(const NoiseConfig& n, double mean_motion) {
  const double sigma = n.tvf_jitter + n.tvf_motion_error_factor * mean_motion + n.svf_jitter;
  return (2.0 * sigma) * (2.0 * sigma);
}

// Birth/death gate per metric mode, derived from the noise configuration and
// the scene's measured center motion; stored in the run manifest.
inline std::map<std::string, double> calibrate_gates(const NoiseConfig& noise, double mean_motion,
                                                     double lambda_he = 3.0,
                                                     double lambda_tie = 1.0) {
  const double he = expected_he_match_cost(noise);
  const double tie = expected_tie_match_cost(noise, mean_motion);
  auto floored = [](double v) { return std::max(v, 1e-6); };
  return {{"combined", floored(lambda_he * he + lambda_tie * tie)},
          {"he_only", floored(he)},
          {"tie_only", floored(tie)},
          {"oks", 0.9},
          {"iou", 0.9}};
}

// ---- sequence directory ----------------------------------------------------

struct SequenceManifest {
  std::string sequence_id;
  int frame_count = 0;
  GridShape grid;
  Skeleton skeleton;
  std::uint64_t seed = 0;
  std::string preset;
  SceneConfig scene;
  NoiseConfig noise;
  double mean_motion = 0.0;
  std::map<std::string, double> calibrated_gates;
  std::vector<std::string> frame_files;
  std::vector<std::vector<Pose>> ground_truth;
  std::vector<std::vector<int>> he_ids;
};

namespace detail {

inline std::string frame_file_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.pggt", t);
  return buf;
}

inline Tensor scalar_tensor(const std::string& name, const ScalarField& f) {
  return Tensor::from_doubles(name,
                              {static_cast<std::uint32_t>(f.shape().height),
                               static_cast<std::uint32_t>(f.shape().width)},
                              f.values());
}

inline Tensor vector_tensor(const std::string& name, const VectorField2& f) {
  std::vector<double> flat;
  flat.reserve(f.size() * 2);
  for (const Vec2& v : f.values()) flat.push_back(v.x);
  for (const Vec2& v : f.values()) flat.push_back(v.y);
  return Tensor::from_doubles(name,
                              {2, static_cast<std::uint32_t>(f.shape().height),
                               static_cast<std::uint32_t>(f.shape().width)},
                              flat);
}

inline ScalarField scalar_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2) throw InvalidInput("tensor " + t.name + " is not a 2-D field");
  ScalarField f(GridShape{static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0])});
  f.values() = t.to_doubles();
  return f;
}

inline VectorField2 vector_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3 || t.dims[0] != 2)
    throw InvalidInput("tensor " + t.name + " is not a 2-channel field");
  const GridShape shape{static_cast<int>(t.dims[2]), static_cast<int>(t.dims[1])};
  const std::vector<double> flat = t.to_doubles();
  VectorField2 f(shape);
  const std::size_t plane = shape.pixels();
  for (std::size_t i = 0; i < plane; ++i) f[i] = {flat[i], flat[plane + i]};
  return f;
}

}  // namespace detail

inline TensorContainer frame_to_container(const FrameBundle& frame) {
  TensorContainer c;
  const GridShape shape = frame.shape();
  std::vector<double> heat;
  heat.reserve(shape.pixels() * frame.heatmaps.joint_count());
  for (const auto& ch : frame.heatmaps.channels)
    heat.insert(heat.end(), ch.values().begin(), ch.values().end());
  c.tensors.push_back(Tensor::from_doubles(
      "heatmaps",
      {static_cast<std::uint32_t>(frame.heatmaps.joint_count()),
       static_cast<std::uint32_t>(shape.height), static_cast<std::uint32_t>(shape.width)},
      heat));
  c.tensors.push_back(detail::scalar_tensor("ke", frame.ke));
  for (std::size_t r = 0; r < kAllOrderRelations.size(); ++r)
    c.tensors.push_back(detail::scalar_tensor(
        std::string("aux_") + order_relation_name(kAllOrderRelations[r]), frame.aux_maps[r]));
  c.tensors.push_back(detail::vector_tensor("svf", frame.svf));
  if (frame.tvf_forward) c.tensors.push_back(detail::vector_tensor("tvf_forward", *frame.tvf_forward));
  if (frame.tvf_backward)
    c.tensors.push_back(detail::vector_tensor("tvf_backward", *frame.tvf_backward));
  std::vector<double> he;
  const std::uint32_t he_dim =
      frame.he_vectors.empty() ? 0 : static_cast<std::uint32_t>(frame.he_vectors[0].vector.size());
  for (const HumanEmbedding& h : frame.he_vectors)
    he.insert(he.end(), h.vector.begin(), h.vector.end());
  c.tensors.push_back(Tensor::from_doubles(
      "he", {static_cast<std::uint32_t>(frame.he_vectors.size()), he_dim}, he));
  return c;
}

inline FrameBundle frame_from_container(const TensorContainer& c, int time_index,
                                        const std::vector<Pose>& gt,
                                        const std::vector<int>& he_ids) {
  FrameBundle frame;
  frame.time_index = time_index;
  const Tensor& heat = c.require("heatmaps");
  if (heat.dims.size() != 3) throw InvalidInput("heatmaps tensor must be rank 3");
  const GridShape shape{static_cast<int>(heat.dims[2]), static_cast<int>(heat.dims[1])};
  const int j_count = static_cast<int>(heat.dims[0]);
  const std::vector<double> flat = heat.to_doubles();
  frame.heatmaps = HeatmapStack(shape, j_count);
  for (int j = 0; j < j_count; ++j)
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(j) * shape.pixels(),
              flat.begin() + static_cast<std::ptrdiff_t>(j + 1) * shape.pixels(),
              frame.heatmaps.channels[j].values().begin());
  frame.ke = detail::scalar_from_tensor(c.require("ke"));
  for (std::size_t r = 0; r < kAllOrderRelations.size(); ++r)
    frame.aux_maps[r] = detail::scalar_from_tensor(
        c.require(std::string("aux_") + order_relation_name(kAllOrderRelations[r])));
  frame.svf = detail::vector_from_tensor(c.require("svf"));
  if (c.find("tvf_forward")) frame.tvf_forward = detail::vector_from_tensor(c.require("tvf_forward"));
  if (c.find("tvf_backward"))
    frame.tvf_backward = detail::vector_from_tensor(c.require("tvf_backward"));
  const Tensor& he = c.require("he");
  if (he.dims.size() != 2) throw InvalidInput("he tensor must be rank 2");
  const std::vector<double> he_flat = he.to_doubles();
  const std::size_t rows = he.dims[0], dim = he.dims[1];
  if (he_ids.size() != rows) throw InvalidInput("he id list does not match the he tensor");
  for (std::size_t k = 0; k < rows; ++k) {
    HumanEmbedding h;
    h.vector.assign(he_flat.begin() + static_cast<std::ptrdiff_t>(k * dim),
                    he_flat.begin() + static_cast<std::ptrdiff_t>((k + 1) * dim));
    h.person_id = he_ids[k];
    frame.he_vectors.push_back(std::move(h));
  }
  if (!gt.empty()) frame.ground_truth = gt;
  frame.validate();
  return frame;
}

inline void save_sequence(const std::filesystem::path& dir, const SequenceManifest& manifest,
                          const std::vector<FrameBundle>& frames) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["sequence_id"] = manifest.sequence_id;
  j["frame_count"] = static_cast<int>(frames.size());
  j["grid"] = {{"width", manifest.grid.width}, {"height", manifest.grid.height}};
  j["skeleton"] = skeleton_to_json(manifest.skeleton);
  j["seed"] = manifest.seed;
  j["preset"] = manifest.preset;
  j["scene"] = scene_to_json(manifest.scene);
  j["noise"] = noise_to_json(manifest.noise);
  j["mean_center_motion"] = manifest.mean_motion;
  j["calibrated_gates"] = manifest.calibrated_gates;
  nlohmann::json frame_list = nlohmann::json::array();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::string file = detail::frame_file_name(static_cast<int>(t));
    write_container(dir / file, frame_to_container(frames[t]));
    nlohmann::json gt = nlohmann::json::array();
    if (frames[t].ground_truth)
      for (const Pose& p : *frames[t].ground_truth) gt.push_back(pose_to_json(p, manifest.skeleton));
    std::vector<int> ids;
    for (const HumanEmbedding& h : frames[t].he_vectors) ids.push_back(h.person_id.value_or(-1));
    frame_list.push_back(
        {{"file", file}, {"time", frames[t].time_index}, {"gt", gt}, {"he_ids", ids}});
  }
  j["frames"] = std::move(frame_list);
  write_text_atomic(dir / "sequence.json", j.dump(2) + "\n");
}

struct LoadedSequence {
  SequenceManifest manifest;
  std::vector<FrameBundle> frames;
};

inline LoadedSequence load_sequence(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / "sequence.json"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("sequence manifest is not valid JSON: ") + e.what());
  }
  LoadedSequence seq;
  SequenceManifest& m = seq.manifest;
  m.sequence_id = j.at("sequence_id").get<std::string>();
  m.frame_count = j.at("frame_count").get<int>();
  m.grid = {j.at("grid").at("width").get<int>(), j.at("grid").at("height").get<int>()};
  m.skeleton = skeleton_from_json(j.at("skeleton"));
  m.seed = j.at("seed").get<std::uint64_t>();
  m.preset = j.at("preset").get<std::string>();
  m.scene = scene_from_json(j.at("scene"), m.skeleton);
  m.noise = noise_from_json(j.at("noise"));
  m.mean_motion = j.at("mean_center_motion").get<double>();
  m.calibrated_gates = j.at("calibrated_gates").get<std::map<std::string, double>>();
  for (const auto& f : j.at("frames")) {
    const std::string file = f.at("file").get<std::string>();
    m.frame_files.push_back(file);
    std::vector<Pose> gt;
    for (const auto& p : f.at("gt")) gt.push_back(pose_from_json(p, m.skeleton));
    m.ground_truth.push_back(gt);
    m.he_ids.push_back(f.at("he_ids").get<std::vector<int>>());
    seq.frames.push_back(frame_from_container(read_container(dir / file), f.at("time").get<int>(),
                                              gt, m.he_ids.back()));
  }
  return seq;
}

}  // namespace pggtrack
