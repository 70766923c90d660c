/// @file config.hpp
/// @brief Run configuration loaded from JSON, with sections named after the library's config types.
///
/// ```json
/// {
///   "tracker":    {"hop": 0.01, "f_min": 73.4, "f_max": 587.2, "steps_per_octave": 48, "strength_threshold": 0.2},
///   "feature":    {"kind": "KPD", "bins": 120, "kernel_width": 10, "ref_hz": 73.4},
///   "search":     {"mode": "AC", "bc_peak_count": 7, "metric": "bhattacharyya", "tonic_floor_hz": 73.4},
///   "classifier": {"kind": "NN", "gmm_components": 3, "priors": "uniform", "max_dimensions": 0},
///   "sweep":      {"features": ["PCD", "KPD-120"], "kernel_widths": [5, 10], "metrics": ["euclidean"],
///                  "modes": ["AC"], "classifiers": ["NN"]},
///   "precisions": [5, 10, 15, 25, 50]
/// }
/// ```
/// Every key is optional.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ragaid/error.hpp"
#include "ragaid/eval.hpp"
#include "ragaid/features.hpp"
#include "ragaid/pitch_tracker.hpp"

namespace ragaid {

struct RunConfig {
  TrackerConfig tracker;
  FeatureConfig feature = FeatureConfig::kpd(120, 10.0);
  EvalConfig eval;
  SweepGrid sweep;

  /// Search feature follows `feature`; call after editing either.
  void sync() { eval.search.feature = feature; }

  void validate() const {
    tracker.validate();
    feature.validate();
    sweep.validate();
    if (eval.search.bc_peak_count < 1) throw Error(ErrorCode::InvalidConfig, "bc_peak_count must be >= 1");
    if (eval.bayes.gmm_components < 1) throw Error(ErrorCode::InvalidConfig, "gmm_components must be >= 1");
    if (eval.bayes.max_dimensions < 0) throw Error(ErrorCode::InvalidConfig, "max_dimensions must be >= 0");
  }
};

inline PriorKind parse_prior_kind(std::string_view s) {
  if (s == "uniform") return PriorKind::Uniform;
  if (s == "empirical") return PriorKind::Empirical;
  throw Error(ErrorCode::InvalidConfig, "unknown priors '" + std::string(s) + "'");
}

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig rc;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");

    if (auto it = j.find("tracker"); it != j.end()) {
      auto& t = rc.tracker;
      t.hop = it->value("hop", t.hop);
      t.f_min = it->value("f_min", t.f_min);
      t.f_max = it->value("f_max", t.f_max);
      t.steps_per_octave = it->value("steps_per_octave", t.steps_per_octave);
      t.strength_threshold = it->value("strength_threshold", t.strength_threshold);
      t.window = it->value("window", t.window);
    }
    if (auto it = j.find("feature"); it != j.end()) {
      auto& f = rc.feature;
      if (it->contains("kind")) {
        f.kind = parse_feature_kind(it->at("kind").get<std::string>());
        f.bins = f.kind == FeatureKind::PCD ? 12 : 120;
      }
      f.bins = it->value("bins", f.bins);
      f.kernel_width = it->value("kernel_width", f.kernel_width);
      f.ref_hz = it->value("ref_hz", f.ref_hz);
    }
    if (auto it = j.find("search"); it != j.end()) {
      auto& s = rc.eval.search;
      if (it->contains("mode")) s.mode = parse_search_mode(it->at("mode").get<std::string>());
      if (it->contains("metric")) s.metric = parse_metric(it->at("metric").get<std::string>());
      s.bc_peak_count = it->value("bc_peak_count", s.bc_peak_count);
      s.tonic_floor_hz = it->value("tonic_floor_hz", s.tonic_floor_hz);
    }
    if (auto it = j.find("classifier"); it != j.end()) {
      if (it->contains("kind")) rc.eval.classifier = parse_classifier(it->at("kind").get<std::string>());
      auto& b = rc.eval.bayes;
      b.gmm_components = it->value("gmm_components", b.gmm_components);
      if (it->contains("priors")) b.priors = parse_prior_kind(it->at("priors").get<std::string>());
      b.max_dimensions = it->value("max_dimensions", b.max_dimensions);
      b.max_iterations = it->value("max_iterations", b.max_iterations);
    }
    if (auto it = j.find("sweep"); it != j.end()) {
      auto& g = rc.sweep;
      if (it->contains("features")) {
        g.features.clear();
        for (const auto& s : it->at("features")) g.features.push_back(parse_feature_axis(s.get<std::string>()));
      }
      if (it->contains("kernel_widths")) g.kernel_widths = it->at("kernel_widths").get<std::vector<double>>();
      if (it->contains("metrics")) {
        g.metrics.clear();
        for (const auto& s : it->at("metrics")) g.metrics.push_back(parse_metric(s.get<std::string>()));
      }
      if (it->contains("modes")) {
        g.modes.clear();
        for (const auto& s : it->at("modes")) g.modes.push_back(parse_search_mode(s.get<std::string>()));
      }
      if (it->contains("classifiers")) {
        g.classifiers.clear();
        for (const auto& s : it->at("classifiers")) g.classifiers.push_back(parse_classifier(s.get<std::string>()));
      }
    }
    if (j.contains("precisions")) rc.eval.precisions = j.at("precisions").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidConfig, ex.what());
  }
  rc.sync();
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace ragaid
