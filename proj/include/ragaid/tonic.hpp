/// @file tonic.hpp
/// @brief Joint tonic and raga estimation by rotation search against a labeled database.
///
/// A query distribution is computed against an arbitrary reference. Every tonic
/// hypothesis rotates it so that the hypothesized tonic sits at bin 0, and the
/// rotated vector is matched against the tonic-aligned database. The pair
/// (hypothesis, neighbour) with the smallest distance gives both answers.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ragaid/classify.hpp"
#include "ragaid/error.hpp"
#include "ragaid/features.hpp"
#include "ragaid/pitch_track.hpp"

namespace ragaid {

enum class SearchMode { AC, BC };

inline std::string_view to_string(SearchMode m) { return m == SearchMode::AC ? "AC" : "BC"; }

inline SearchMode parse_search_mode(std::string_view s) {
  if (s == "AC" || s == "ac") return SearchMode::AC;
  if (s == "BC" || s == "bc") return SearchMode::BC;
  throw Error(ErrorCode::InvalidConfig, "unknown search mode '" + std::string(s) + "'");
}

struct TonicSearchConfig {
  SearchMode mode = SearchMode::AC;
  int bc_peak_count = 7;
  DistanceMetric metric = DistanceMetric::Bhattacharyya;
  FeatureConfig feature = FeatureConfig::kpd(120, 10.0);
  double tonic_floor_hz = 73.4;  ///< reported tonics are folded into [floor, 2 floor)
};

struct TonicHypothesis {
  std::size_t rotation_k = 0;
  double tonic_hz = 0.0;
  PitchDistribution rotated_pd;
};

struct JointEstimate {
  double tonic_hz = 0.0;
  std::string raga_label;
  double distance = std::numeric_limits<double>::infinity();
  std::string neighbor_id;
  std::size_t hypothesis_count = 0;
  std::size_t rotation_k = 0;
  std::size_t neighbor_index = 0;
};

namespace detail {

inline void require_searchable(const PitchDistribution& pd) {
  if (pd.kind == FeatureKind::PCD || pd.size() == 12) {
    throw Error(ErrorCode::PcdNotSearchable, "12-bin PCD cannot drive a tonic search");
  }
  if (pd.size() == 0) throw Error(ErrorCode::FeatureMismatch, "empty distribution");
}

inline TonicHypothesis make_hypothesis(const PitchDistribution& pd, std::size_t k, double floor_hz) {
  TonicHypothesis h;
  h.rotation_k = k;
  h.rotated_pd = rotate(pd, static_cast<long long>(k));
  h.tonic_hz = fold_to_octave(h.rotated_pd.ref_hz, floor_hz);
  return h;
}

}  // namespace detail

/// All-Candidates: one hypothesis per bin.
inline std::vector<TonicHypothesis> enumerate_ac(const PitchDistribution& pd, double floor_hz = 73.4) {
  detail::require_searchable(pd);
  std::vector<TonicHypothesis> out;
  out.reserve(pd.size());
  for (std::size_t k = 0; k < pd.size(); ++k) out.push_back(detail::make_hypothesis(pd, k, floor_hz));
  return out;
}

/// Best-Candidates: one hypothesis per peak of the query's own distribution, highest peaks first.
inline std::vector<TonicHypothesis> enumerate_bc(const PitchDistribution& pd, std::size_t count,
                                                 double floor_hz = 73.4) {
  detail::require_searchable(pd);
  const auto peaks = find_peaks(pd, count);
  if (peaks.empty()) throw Error(ErrorCode::NoPeaksFound, "distribution has no strict local maxima");
  std::vector<TonicHypothesis> out;
  out.reserve(peaks.size());
  for (std::size_t k : peaks) out.push_back(detail::make_hypothesis(pd, k, floor_hz));
  return out;
}

/// @brief Global minimum over (hypothesis, neighbour); ties: lower rotation, then database order.
inline JointEstimate estimate(const PitchDistribution& query, std::span<const LabeledSample> db,
                              const TonicSearchConfig& cfg, SearchStats* stats = nullptr) {
  if (db.empty()) throw Error(ErrorCode::EmptyDatabase, "empty database");
  for (const auto& s : db) {
    if (s.pd.size() != query.size() || s.pd.kind != query.kind) {
      throw Error(ErrorCode::FeatureMismatch, "query " + std::string(to_string(query.kind)) + "-" +
                                                  std::to_string(query.size()) + " vs database sample '" +
                                                  s.sample_id + "'");
    }
  }
  if (cfg.bc_peak_count < 1) throw Error(ErrorCode::InvalidConfig, "bc_peak_count must be >= 1");

  const auto hypotheses = cfg.mode == SearchMode::AC
                              ? enumerate_ac(query, cfg.tonic_floor_hz)
                              : enumerate_bc(query, static_cast<std::size_t>(cfg.bc_peak_count),
                                             cfg.tonic_floor_hz);

  JointEstimate best;
  best.hypothesis_count = hypotheses.size();
  bool have = false;
  for (const auto& h : hypotheses) {
    const auto r = nn_classify(h.rotated_pd, db, cfg.metric, stats);
    const auto key = std::make_tuple(r.score, h.rotation_k, r.neighbor_index);
    if (!have || key < std::make_tuple(best.distance, best.rotation_k, best.neighbor_index)) {
      have = true;
      best.tonic_hz = h.tonic_hz;
      best.raga_label = r.label;
      best.distance = r.score;
      best.neighbor_id = r.neighbor_id;
      best.rotation_k = h.rotation_k;
      best.neighbor_index = r.neighbor_index;
    }
  }
  return best;
}

/// Computes the query distribution from a pitch track (reference `cfg.feature.ref_hz`) and searches.
inline JointEstimate estimate(const PitchTrack& track, std::span<const LabeledSample> db,
                              const TonicSearchConfig& cfg, SearchStats* stats = nullptr) {
  return estimate(compute_distribution(track, cfg.feature), db, cfg, stats);
}

/// True when `estimate_hz` lies within `precision_cents` of `truth_hz` on the octave circle.
inline bool tonic_correct(double estimate_hz, double truth_hz, double precision_cents) {
  return circular_cents_distance(estimate_hz, truth_hz) <= precision_cents;
}

}  // namespace ragaid
