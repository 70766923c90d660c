/// @file synth.hpp
/// @brief Synthetic raga corpora: pitch tracks drawn from weighted scale templates with ornaments.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragaid/error.hpp"
#include "ragaid/manifest.hpp"
#include "ragaid/pitch_track.hpp"

namespace ragaid {

struct SyntheticRagaSpec {
  std::string name;
  std::vector<double> scale_degrees;   ///< cents above the tonic, each in [0, 1200)
  std::vector<double> degree_weights;  ///< occupancy probabilities, sum to 1
  double vibrato_depth_cents = 20.0;   ///< peak sinusoidal deviation (andolan)
  double vibrato_rate_hz = 5.0;
  double glide_probability = 0.3;      ///< chance that a note starts with a linear glide (meend)
  int frames_per_sample = 3000;
  double tonic_min_hz = 110.0;
  double tonic_max_hz = 220.0;
  int note_min_frames = 20;
  int note_max_frames = 60;
  double hop = 0.010;

  void validate() const {
    auto bad = [&](const std::string& why) { throw Error(ErrorCode::InvalidSpec, "'" + name + "': " + why); };
    if (name.empty()) throw Error(ErrorCode::InvalidSpec, "empty raga name");
    if (scale_degrees.empty()) bad("no scale degrees");
    if (scale_degrees.size() != degree_weights.size()) bad("degree_weights length differs from scale_degrees");
    double sum = 0.0;
    for (double w : degree_weights) {
      if (!(w >= 0.0)) bad("negative degree weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("degree_weights must sum to 1");
    for (double d : scale_degrees) {
      if (!(d >= 0.0 && d < 1200.0)) bad("scale degree outside [0, 1200)");
    }
    if (!(vibrato_depth_cents >= 0.0) || !(vibrato_rate_hz >= 0.0)) bad("negative vibrato parameter");
    if (!(glide_probability >= 0.0 && glide_probability <= 1.0)) bad("glide_probability outside [0, 1]");
    if (frames_per_sample < 1) bad("frames_per_sample must be positive");
    if (!(tonic_min_hz > 0.0) || !(tonic_min_hz <= tonic_max_hz)) bad("invalid tonic range");
    if (note_min_frames < 1 || note_max_frames < note_min_frames) bad("invalid note length range");
    if (!(hop > 0.0)) bad("hop must be positive");
  }
};

inline SyntheticRagaSpec spec_from_json(const nlohmann::json& j) {
  SyntheticRagaSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.scale_degrees = j.at("scale_degrees").get<std::vector<double>>();
    s.degree_weights = j.at("degree_weights").get<std::vector<double>>();
    s.vibrato_depth_cents = j.value("vibrato_depth_cents", s.vibrato_depth_cents);
    s.vibrato_rate_hz = j.value("vibrato_rate_hz", s.vibrato_rate_hz);
    s.glide_probability = j.value("glide_probability", s.glide_probability);
    s.frames_per_sample = j.value("frames_per_sample", s.frames_per_sample);
    if (j.contains("tonic_range_hz")) {
      const auto range = j.at("tonic_range_hz").get<std::vector<double>>();
      if (range.size() != 2) throw Error(ErrorCode::InvalidSpec, "tonic_range_hz needs two values");
      s.tonic_min_hz = range[0];
      s.tonic_max_hz = range[1];
    }
    s.note_min_frames = j.value("note_min_frames", s.note_min_frames);
    s.note_max_frames = j.value("note_max_frames", s.note_max_frames);
    s.hop = j.value("hop", s.hop);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidSpec, ex.what());
  }
  s.validate();
  return s;
}

/// Accepts either an array of specs or {"ragas": [...]}.
inline std::vector<SyntheticRagaSpec> parse_synth_specs(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidSpec, ex.what());
  }
  const nlohmann::json& list = j.is_object() && j.contains("ragas") ? j.at("ragas") : j;
  if (!list.is_array() || list.empty()) throw Error(ErrorCode::InvalidSpec, "expected a non-empty list of ragas");
  std::vector<SyntheticRagaSpec> specs;
  for (const auto& item : list) specs.push_back(spec_from_json(item));
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t k = i + 1; k < specs.size(); ++k)
      if (specs[i].name == specs[k].name) throw Error(ErrorCode::InvalidSpec, "duplicate raga name " + specs[i].name);
  return specs;
}

inline std::vector<SyntheticRagaSpec> load_synth_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_specs(ss.str());
}

/// Independent generator per (seed, raga, sample) so corpora do not depend on generation order.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::size_t raga_index, std::size_t sample_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(raga_index), static_cast<std::uint32_t>(sample_index)};
  return std::mt19937_64(seq);
}

/// @brief Draws one track: notes from the degree weights, sinusoidal vibrato, optional linear glide into each note.
inline PitchTrack synthesize_track(const SyntheticRagaSpec& spec, double tonic_hz, std::mt19937_64& rng) {
  spec.validate();
  std::discrete_distribution<std::size_t> degree(spec.degree_weights.begin(), spec.degree_weights.end());
  std::uniform_int_distribution<int> length(spec.note_min_frames, spec.note_max_frames);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PitchTrack track;
  track.frames.reserve(static_cast<std::size_t>(spec.frames_per_sample));
  double prev_cents = spec.scale_degrees[degree(rng)];
  int i = 0;
  while (i < spec.frames_per_sample) {
    const double target = spec.scale_degrees[degree(rng)];
    const int len = length(rng);
    const bool glide = unit(rng) < spec.glide_probability;
    const int glide_len = glide ? std::max(1, len / 3) : 0;
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (int n = 0; n < len && i < spec.frames_per_sample; ++n, ++i) {
      double cents = target;
      if (n < glide_len) cents = prev_cents + (target - prev_cents) * static_cast<double>(n) / glide_len;
      const double t = n * spec.hop;
      if (spec.vibrato_depth_cents > 0.0) {
        cents += spec.vibrato_depth_cents * std::sin(2.0 * std::numbers::pi * spec.vibrato_rate_hz * t + phase);
      }
      PitchFrame frame;
      frame.time_s = i * spec.hop;
      frame.freq_hz = cents == 0.0 ? tonic_hz : tonic_hz * std::exp2(cents / 1200.0);
      frame.strength = 1.0;
      track.frames.push_back(frame);
    }
    prev_cents = target;
  }
  return track;
}

struct SyntheticSample {
  ManifestEntry entry;
  PitchTrack track;
};

/// @brief Generates `count_per_raga` samples per spec; tonics are uniform in the spec's range, rounded to 1e-6 Hz.
inline std::vector<SyntheticSample> synthesize_corpus(const std::vector<SyntheticRagaSpec>& specs,
                                                      int count_per_raga, std::uint64_t seed) {
  if (count_per_raga < 1) throw Error(ErrorCode::InvalidSpec, "count per raga must be positive");
  std::vector<SyntheticSample> out;
  for (std::size_t r = 0; r < specs.size(); ++r) {
    const auto& spec = specs[r];
    spec.validate();
    for (int k = 0; k < count_per_raga; ++k) {
      auto rng = sample_rng(seed, r, static_cast<std::size_t>(k));
      std::uniform_real_distribution<double> tonic_dist(spec.tonic_min_hz, spec.tonic_max_hz);
      const double tonic = std::round(tonic_dist(rng) * 1e6) / 1e6;
      char id[32];
      std::snprintf(id, sizeof(id), "_%03d", k);
      SyntheticSample s;
      s.entry.sample_id = spec.name + id;
      s.entry.audio_path = "tracks/" + s.entry.sample_id + ".csv";
      s.entry.raga_label = spec.name;
      s.entry.tonic_hz = tonic;
      s.track = synthesize_track(spec, tonic, rng);
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Writes `<dir>/manifest.csv` and `<dir>/tracks/<id>.csv`.
inline void write_corpus(const std::vector<SyntheticSample>& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tracks");
  std::vector<ManifestEntry> entries;
  for (const auto& s : corpus) {
    save_pitch_track_csv(s.track, dir / "tracks" / (s.entry.sample_id + ".csv"));
    entries.push_back(s.entry);
  }
  save_manifest_csv(entries, dir / "manifest.csv");
}

}  // namespace ragaid
