#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pggtrack/decoder.hpp"
#include "pggtrack/errors.hpp"
#include "pggtrack/heatmap.hpp"
#include "pggtrack/pgg.hpp"
#include "pggtrack/skeleton.hpp"
#include "pggtrack/tracker.hpp"

namespace pggtrack {

// Every pipeline hyperparameter in one document. Defaults carry the values
// the method prescribes (sigma 2, tau 0.2, delta 5, R 1, lambda 3:1); the
// parser rejects unknown keys so typos fail loudly instead of silently
// running defaults.
struct RunConfig {
  struct Heatmap {
    double sigma = 2.0;
    double peak_threshold = 0.1;
    int nms_radius = 2;
    bool subpixel = false;
  } heatmap;

  struct Mask {
    double tau = 0.2;
  } mask;

  struct Pgg {
    bool enabled = true;
    double delta = 5.0;
    int iterations = 1;
    std::string kernel = "paper";  // or "inverse"
    std::vector<double> channel_scales;
  } pgg;

  struct Decode {
    double theta_ke = 1.0;
    double theta_sie = 10.0;
    double omega = 0.5;
    std::vector<std::string> joint_order;  // names; empty = natural order
    int max_people = 20;
    bool bilinear = false;
  } decode;

  struct Tracker {
    double lambda_he = 3.0;
    double lambda_tie = 1.0;
    double gate = -1.0;  // < 0 = use the calibrated gate from the manifest
    int max_age = 1;
    std::string metric = "combined";
  } tracker;

  struct Eval {
    double pckh_factor = 0.5;
  } eval;

  PggConfig pgg_config() const {
    PggConfig cfg;
    cfg.delta = pgg.delta;
    cfg.iterations = pgg.iterations;
    if (pgg.kernel == "paper")
      cfg.kernel = PggKernel::kPaper;
    else if (pgg.kernel == "inverse")
      cfg.kernel = PggKernel::kInverse;
    else
      throw InvalidInput("pgg kernel must be 'paper' or 'inverse'");
    cfg.channel_scales = pgg.channel_scales;
    return cfg;
  }

  PeakConfig peak_config() const { return {heatmap.peak_threshold, heatmap.nms_radius, heatmap.subpixel}; }

  DecodeConfig decode_config(const Skeleton& skeleton) const {
    DecodeConfig cfg;
    cfg.theta_ke = decode.theta_ke;
    cfg.theta_sie = decode.theta_sie;
    cfg.omega = decode.omega;
    cfg.max_people = decode.max_people;
    cfg.bilinear_sampling = decode.bilinear;
    for (const std::string& name : decode.joint_order)
      cfg.joint_order.push_back(skeleton.joint_index(name));
    return cfg;
  }

  TrackerConfig tracker_config(double calibrated_gate) const {
    TrackerConfig cfg;
    cfg.lambda_he = tracker.lambda_he;
    cfg.lambda_tie = tracker.lambda_tie;
    cfg.gate = tracker.gate > 0.0 ? tracker.gate : calibrated_gate;
    cfg.max_age = tracker.max_age;
    cfg.metric = metric_mode_from_name(tracker.metric);
    return cfg;
  }
};

namespace detail {

class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : json_(j), path_(std::move(path)) {
    if (!j.is_object()) throw InvalidInput("config section " + path_ + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) unknown_.push_back(it.key());
  }

  template <typename T>
  void get(const char* key, T& out) {
    mark(key);
    if (json_.contains(key)) {
      try {
        out = json_.at(key).get<T>();
      } catch (const nlohmann::json::exception&) {
        throw InvalidInput("config key " + path_ + "." + key + " has the wrong type");
      }
    }
  }

  const nlohmann::json* section(const char* key) {
    mark(key);
    return json_.contains(key) ? &json_.at(key) : nullptr;
  }

  void finish() const {
    for (const std::string& k : unknown_)
      throw InvalidInput("unknown config key: " + path_ + "." + k);
  }

 private:
  void mark(const char* key) {
    for (auto it = unknown_.begin(); it != unknown_.end(); ++it)
      if (*it == key) {
        unknown_.erase(it);
        return;
      }
  }

  const nlohmann::json& json_;
  std::string path_;
  std::vector<std::string> unknown_;
};

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  detail::StrictObject root(j, "config");
  if (const auto* s = root.section("heatmap")) {
    detail::StrictObject o(*s, "heatmap");
    o.get("sigma", cfg.heatmap.sigma);
    o.get("peak_threshold", cfg.heatmap.peak_threshold);
    o.get("nms_radius", cfg.heatmap.nms_radius);
    o.get("subpixel", cfg.heatmap.subpixel);
    o.finish();
  }
  if (const auto* s = root.section("mask")) {
    detail::StrictObject o(*s, "mask");
    o.get("tau", cfg.mask.tau);
    o.finish();
  }
  if (const auto* s = root.section("pgg")) {
    detail::StrictObject o(*s, "pgg");
    o.get("enabled", cfg.pgg.enabled);
    o.get("delta", cfg.pgg.delta);
    o.get("iterations", cfg.pgg.iterations);
    o.get("kernel", cfg.pgg.kernel);
    o.get("channel_scales", cfg.pgg.channel_scales);
    o.finish();
  }
  if (const auto* s = root.section("decode")) {
    detail::StrictObject o(*s, "decode");
    o.get("theta_ke", cfg.decode.theta_ke);
    o.get("theta_sie", cfg.decode.theta_sie);
    o.get("omega", cfg.decode.omega);
    o.get("joint_order", cfg.decode.joint_order);
    o.get("max_people", cfg.decode.max_people);
    o.get("bilinear", cfg.decode.bilinear);
    o.finish();
  }
  if (const auto* s = root.section("tracker")) {
    detail::StrictObject o(*s, "tracker");
    o.get("lambda_he", cfg.tracker.lambda_he);
    o.get("lambda_tie", cfg.tracker.lambda_tie);
    o.get("gate", cfg.tracker.gate);
    o.get("max_age", cfg.tracker.max_age);
    o.get("metric", cfg.tracker.metric);
    o.finish();
  }
  if (const auto* s = root.section("eval")) {
    detail::StrictObject o(*s, "eval");
    o.get("pckh_factor", cfg.eval.pckh_factor);
    o.finish();
  }
  root.finish();
  return cfg;
}

inline RunConfig parse_run_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["heatmap"] = {{"sigma", cfg.heatmap.sigma},
                  {"peak_threshold", cfg.heatmap.peak_threshold},
                  {"nms_radius", cfg.heatmap.nms_radius},
                  {"subpixel", cfg.heatmap.subpixel}};
  j["mask"] = {{"tau", cfg.mask.tau}};
  j["pgg"] = {{"enabled", cfg.pgg.enabled},
              {"delta", cfg.pgg.delta},
              {"iterations", cfg.pgg.iterations},
              {"kernel", cfg.pgg.kernel},
              {"channel_scales", cfg.pgg.channel_scales}};
  j["decode"] = {{"theta_ke", cfg.decode.theta_ke}, {"theta_sie", cfg.decode.theta_sie},
                 {"omega", cfg.decode.omega},       {"joint_order", cfg.decode.joint_order},
                 {"max_people", cfg.decode.max_people}, {"bilinear", cfg.decode.bilinear}};
  j["tracker"] = {{"lambda_he", cfg.tracker.lambda_he},
                  {"lambda_tie", cfg.tracker.lambda_tie},
                  {"gate", cfg.tracker.gate},
                  {"max_age", cfg.tracker.max_age},
                  {"metric", cfg.tracker.metric}};
  j["eval"] = {{"pckh_factor", cfg.eval.pckh_factor}};
  return j;
}

}  // namespace pggtrack
