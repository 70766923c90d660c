/// @file eval.hpp
/// @brief Corpus processing and evaluation: extraction, database building, leave-one-out, sweeps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragaid/audio.hpp"
#include "ragaid/classify.hpp"
#include "ragaid/error.hpp"
#include "ragaid/feature_db.hpp"
#include "ragaid/features.hpp"
#include "ragaid/manifest.hpp"
#include "ragaid/pitch_track.hpp"
#include "ragaid/pitch_tracker.hpp"
#include "ragaid/tonic.hpp"

namespace ragaid {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Pitch-track extraction with a content-keyed cache
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string extraction_key(std::span<const unsigned char> audio_bytes, const TrackerConfig& cfg) {
  const auto fp = cfg.fingerprint();
  std::uint64_t h = fnv1a64(audio_bytes);
  h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(fp.data()), fp.size()), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ExtractSummary {
  std::size_t computed = 0;
  std::size_t cached = 0;
  std::vector<std::pair<std::string, std::string>> failures;  ///< (sample_id, message)
};

/// @brief Tracks every manifest entry into `<tracks_dir>/<id>.csv`; a `<id>.key` sidecar skips unchanged work.
inline ExtractSummary extract_tracks(const DatasetManifest& manifest, const TrackerConfig& cfg,
                                     const std::filesystem::path& tracks_dir) {
  std::filesystem::create_directories(tracks_dir);
  ExtractSummary summary;
  for (const auto& e : manifest.entries) {
    try {
      const auto bytes = read_file_bytes(e.audio_path);
      const auto key = extraction_key(bytes, cfg);
      const auto csv = tracks_dir / (e.sample_id + ".csv");
      const auto key_path = tracks_dir / (e.sample_id + ".key");
      if (std::filesystem::exists(csv) && std::filesystem::exists(key_path)) {
        std::ifstream in(key_path);
        std::string stored;
        std::getline(in, stored);
        if (stored == key) {
          ++summary.cached;
          continue;
        }
      }
      const auto track = estimate_pitch_track(decode_wav(bytes), cfg);
      save_pitch_track_csv(track, csv);
      std::ofstream(key_path) << key << '\n';
      ++summary.computed;
    } catch (const std::exception& ex) {
      summary.failures.emplace_back(e.sample_id, ex.what());
    }
  }
  return summary;
}

/// Pitch track for an entry: `<tracks_dir>/<id>.csv` if present, else a `.csv` audio_path, else tracked from WAV.
inline PitchTrack resolve_track(const ManifestEntry& e, const std::optional<std::filesystem::path>& tracks_dir,
                                const TrackerConfig& tracker) {
  if (tracks_dir) {
    const auto p = *tracks_dir / (e.sample_id + ".csv");
    if (std::filesystem::exists(p)) return load_pitch_track_csv(p);
  }
  const std::filesystem::path audio(e.audio_path);
  if (audio.extension() == ".csv") return load_pitch_track_csv(audio);
  return estimate_pitch_track(load_wav(audio), tracker);
}

struct CorpusTrack {
  ManifestEntry entry;
  PitchTrack track;
};

inline std::vector<CorpusTrack> load_corpus_tracks(const DatasetManifest& manifest,
                                                   const std::optional<std::filesystem::path>& tracks_dir,
                                                   const TrackerConfig& tracker) {
  std::vector<CorpusTrack> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back({e, resolve_track(e, tracks_dir, tracker)});
  return out;
}

/// @brief Tonic-aligned database: each sample's distribution uses its ground-truth tonic as reference.
inline FeatureDb build_feature_db(const std::vector<CorpusTrack>& corpus, FeatureConfig feature) {
  std::string missing;
  for (const auto& c : corpus) {
    if (!c.entry.tonic_hz) missing += (missing.empty() ? "" : ", ") + c.entry.sample_id;
  }
  if (!missing.empty()) throw Error(ErrorCode::MissingTonic, missing);

  FeatureDb db;
  db.feature = feature;
  db.feature.validate();
  db.config_fingerprint = feature.fingerprint();
  for (const auto& c : corpus) {
    FeatureConfig cfg = feature;
    cfg.ref_hz = *c.entry.tonic_hz;
    LabeledSample s;
    s.sample_id = c.entry.sample_id;
    s.raga_label = c.entry.raga_label;
    s.tonic_hz = *c.entry.tonic_hz;
    s.pd = compute_distribution(c.track, cfg);
    db.samples.push_back(std::move(s));
  }
  db.validate();
  return db;
}

// ---------------------------------------------------------------------------
// Leave-one-out evaluation
// ---------------------------------------------------------------------------

enum class ClassifierKind { NN, MVG, GMM };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::NN: return "NN";
    case ClassifierKind::MVG: return "MVG";
    case ClassifierKind::GMM: return "GMM";
  }
  return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
  if (s == "NN" || s == "nn") return ClassifierKind::NN;
  if (s == "MVG" || s == "mvg") return ClassifierKind::MVG;
  if (s == "GMM" || s == "gmm") return ClassifierKind::GMM;
  throw Error(ErrorCode::InvalidConfig, "unknown classifier '" + std::string(s) + "'");
}

struct EvalConfig {
  TonicSearchConfig search;
  ClassifierKind classifier = ClassifierKind::NN;
  BayesConfig bayes;
  std::vector<double> precisions{5.0, 10.0, 15.0, 25.0, 50.0};
  std::uint64_t seed = 0;
};

struct SampleOutcome {
  std::string sample_id;
  std::string true_raga;
  std::string predicted_raga;
  double true_tonic_hz = 0.0;
  double predicted_tonic_hz = std::numeric_limits<double>::quiet_NaN();  ///< NaN without tonic search
  double distance = std::numeric_limits<double>::quiet_NaN();
  std::size_t presented_rotation = 0;
};

struct EvalReport {
  nlohmann::json config;
  std::size_t sample_count = 0;
  double raga_error_rate = 0.0;
  std::map<double, double> tonic_error_rate_at;  ///< empty when the feature cannot drive a tonic search
  std::vector<std::string> labels;               ///< confusion order (sorted)
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
  std::vector<SampleOutcome> per_sample;
};

/// Held-out rotation for fold `index`; independent of fold order.
inline std::size_t heldout_rotation(std::uint64_t seed, std::size_t index, std::size_t bins) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::mt19937_64 rng(seq);
  return std::uniform_int_distribution<std::size_t>(0, bins - 1)(rng);
}

inline nlohmann::json eval_config_json(const FeatureConfig& feature, const EvalConfig& cfg) {
  nlohmann::json j;
  j["validation"] = "leave-one-out";
  j["feature"] = feature.label();
  j["feature_kind"] = std::string(to_string(feature.kind));
  j["bins"] = feature.bins;
  j["kernel_width"] = feature.kind == FeatureKind::KPD ? feature.kernel_width : 0.0;
  j["metric"] = std::string(to_string(cfg.search.metric));
  j["mode"] = std::string(to_string(cfg.search.mode));
  j["bc_peak_count"] = cfg.search.bc_peak_count;
  j["classifier"] = std::string(to_string(cfg.classifier));
  if (cfg.classifier != ClassifierKind::NN) {
    j["gmm_components"] = cfg.bayes.gmm_components;
    j["priors"] = std::string(to_string(cfg.bayes.priors));
    j["max_dimensions"] = cfg.bayes.max_dimensions;
  }
  j["precisions_cents"] = cfg.precisions;
  j["seed"] = cfg.seed;
  return j;
}

/// @brief Leave-one-out over a tonic-aligned database.
///
/// Each held-out sample is rotated by a seeded random number of bins (so its
/// tonic is unknown to the search) and estimated against the remaining samples.
/// For NN the raga is the global nearest neighbour's label. For MVG/GMM the tonic
/// comes from the same search and the raga is the posterior argmax of the query
/// aligned to that tonic, with the model fit on the fold's training samples.
/// A 12-bin PCD cannot drive the search, so PCD queries are presented tonic-aligned
/// and no tonic error is reported.
inline EvalReport cross_validate(const FeatureDb& db, const EvalConfig& cfg) {
  if (db.samples.size() < 2) throw Error(ErrorCode::TooFewSamples, "leave-one-out needs at least 2 samples");
  db.validate();
  const bool searchable = db.feature.kind != FeatureKind::PCD;
  const std::size_t bins = static_cast<std::size_t>(db.feature.bins);

  EvalReport report;
  report.config = eval_config_json(db.feature, cfg);
  report.sample_count = db.samples.size();

  std::set<std::string> label_set;
  for (const auto& s : db.samples) label_set.insert(s.raga_label);
  report.labels.assign(label_set.begin(), label_set.end());
  report.confusion.assign(report.labels.size(), std::vector<std::size_t>(report.labels.size(), 0));
  auto label_index = [&](const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(report.labels.begin(), report.labels.end(), l) -
                                    report.labels.begin());
  };

  std::map<double, std::size_t> tonic_errors;
  std::size_t raga_errors = 0;

  for (std::size_t i = 0; i < db.samples.size(); ++i) {
    const auto& held = db.samples[i];
    std::vector<LabeledSample> train;
    train.reserve(db.samples.size() - 1);
    for (std::size_t k = 0; k < db.samples.size(); ++k) {
      if (k != i) train.push_back(db.samples[k]);
    }
    for (const auto& t : train) {
      if (t.sample_id == held.sample_id) {
        throw Error(ErrorCode::DuplicateSampleId, "held-out sample leaked into its own fold: " + held.sample_id);
      }
    }

    SampleOutcome out;
    out.sample_id = held.sample_id;
    out.true_raga = held.raga_label;
    out.true_tonic_hz = held.tonic_hz;

    PitchDistribution aligned = held.pd;
    if (searchable) {
      out.presented_rotation = heldout_rotation(cfg.seed, i, bins);
      const auto query = rotate(held.pd, static_cast<long long>(out.presented_rotation));
      const auto est = estimate(query, train, cfg.search);
      out.predicted_raga = est.raga_label;
      out.predicted_tonic_hz = est.tonic_hz;
      out.distance = est.distance;
      aligned = rotate(query, static_cast<long long>(est.rotation_k));
    } else {
      const auto r = nn_classify(held.pd, train, cfg.search.metric);
      out.predicted_raga = r.label;
      out.distance = r.score;
    }

    if (cfg.classifier != ClassifierKind::NN) {
      BayesConfig bc = cfg.bayes;
      bc.kind = cfg.classifier == ClassifierKind::MVG ? DensityKind::MVG : DensityKind::GMM;
      bc.seed = cfg.seed;
      const auto model = fit_bayes(train, bc);
      out.predicted_raga = bayes_classify(aligned, model).label;
    }

    if (out.predicted_raga != out.true_raga) ++raga_errors;
    const std::size_t t = label_index(out.true_raga);
    const std::size_t p = label_index(out.predicted_raga);
    if (p < report.labels.size() && report.labels[p] == out.predicted_raga) ++report.confusion[t][p];
    if (searchable) {
      for (double c : cfg.precisions) {
        if (!tonic_correct(out.predicted_tonic_hz, out.true_tonic_hz, c)) ++tonic_errors[c];
        else tonic_errors.try_emplace(c, 0);
      }
    }
    report.per_sample.push_back(std::move(out));
  }

  const double n = static_cast<double>(db.samples.size());
  report.raga_error_rate = static_cast<double>(raga_errors) / n;
  for (const auto& [c, errors] : tonic_errors) report.tonic_error_rate_at[c] = static_cast<double>(errors) / n;
  return report;
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline std::string precision_key(double c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", c);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["config"] = r.config;
  j["sample_count"] = r.sample_count;
  j["raga_error_rate"] = r.raga_error_rate;
  nlohmann::json tonic = nlohmann::json::object();
  for (const auto& [c, e] : r.tonic_error_rate_at) tonic[detail::precision_key(c)] = e;
  j["tonic_error_rate_at"] = r.tonic_error_rate_at.empty() ? nlohmann::json(nullptr) : tonic;
  j["labels"] = r.labels;
  j["confusion"] = r.confusion;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.per_sample) {
    rows.push_back({{"sample_id", s.sample_id},
                    {"true_raga", s.true_raga},
                    {"predicted_raga", s.predicted_raga},
                    {"true_tonic_hz", s.true_tonic_hz},
                    {"predicted_tonic_hz", detail::number_or_null(s.predicted_tonic_hz)},
                    {"distance", detail::number_or_null(s.distance)},
                    {"presented_rotation", s.presented_rotation}});
  }
  j["per_sample"] = rows;
  return j;
}

/// Square matrix with a raga-name header row and column; rows are true labels.
inline std::string confusion_csv(const EvalReport& r) {
  std::string out = "true\\predicted";
  for (const auto& l : r.labels) out += "," + l;
  out += "\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    out += r.labels[i];
    for (std::size_t k = 0; k < r.labels.size(); ++k) out += "," + std::to_string(r.confusion[i][k]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

struct FeatureAxis {
  FeatureKind kind = FeatureKind::KPD;
  int bins = 120;

  std::string label() const { return kind == FeatureKind::PCD ? "PCD" : std::string(to_string(kind)) + "-" + std::to_string(bins); }
};

inline FeatureAxis parse_feature_axis(std::string_view s) {
  if (s == "PCD") return {FeatureKind::PCD, 12};
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) throw Error(ErrorCode::InvalidConfig, "feature must look like KPD-120");
  FeatureAxis a{parse_feature_kind(s.substr(0, dash)), 0};
  double bins = 0.0;
  if (!detail::parse_double(s.substr(dash + 1), bins)) throw Error(ErrorCode::InvalidConfig, "bad bin count");
  a.bins = static_cast<int>(bins);
  FeatureConfig{a.kind, a.bins, 1.0, 1.0}.validate();
  return a;
}

struct SweepGrid {
  std::vector<FeatureAxis> features{{FeatureKind::PCD, 12}, {FeatureKind::FPD, 120}, {FeatureKind::FPD, 240},
                                    {FeatureKind::KPD, 120}, {FeatureKind::KPD, 240}};
  std::vector<double> kernel_widths{1.0, 2.5, 5.0, 10.0, 25.0};
  std::vector<DistanceMetric> metrics{DistanceMetric::Bhattacharyya, DistanceMetric::Euclidean,
                                      DistanceMetric::CityBlock};
  std::vector<SearchMode> modes{SearchMode::AC, SearchMode::BC};
  std::vector<ClassifierKind> classifiers{ClassifierKind::NN};

  void validate() const {
    if (features.empty() || metrics.empty() || modes.empty() || classifiers.empty()) {
      throw Error(ErrorCode::InvalidConfig, "sweep axes must be non-empty");
    }
    const bool has_kpd = std::any_of(features.begin(), features.end(),
                                     [](const FeatureAxis& f) { return f.kind == FeatureKind::KPD; });
    if (has_kpd && kernel_widths.empty()) throw Error(ErrorCode::InvalidConfig, "KPD needs kernel widths");
    for (double h : kernel_widths) {
      if (!(h > 0.0)) throw Error(ErrorCode::NonPositiveBandwidth, "kernel widths must be positive");
    }
  }

  /// Kernel width applies to KPD only, so other features contribute one point per remaining combination.
  std::size_t cardinality() const {
    std::size_t feature_points = 0;
    for (const auto& f : features) feature_points += f.kind == FeatureKind::KPD ? kernel_widths.size() : 1;
    return feature_points * metrics.size() * modes.size() * classifiers.size();
  }
};

struct SweepRow {
  std::string feature;
  double kernel_width = 0.0;
  std::string metric;
  std::string mode;
  std::string classifier;
  double raga_error = std::numeric_limits<double>::quiet_NaN();
  double tonic_error_15 = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

/// @brief One leave-one-out run per grid point. Feature databases are computed once per (feature, width).
inline std::vector<SweepRow> run_sweep(const std::vector<CorpusTrack>& corpus, const SweepGrid& grid,
                                       const EvalConfig& base) {
  grid.validate();
  std::vector<SweepRow> rows;
  for (const auto& f : grid.features) {
    const std::vector<double> widths =
        f.kind == FeatureKind::KPD ? grid.kernel_widths : std::vector<double>{0.0};
    for (double h : widths) {
      std::optional<FeatureDb> db;
      std::string db_error;
      try {
        db = build_feature_db(corpus, FeatureConfig{f.kind, f.bins, h, 1.0});
      } catch (const std::exception& ex) {
        db_error = ex.what();
      }
      for (auto metric : grid.metrics) {
        for (auto mode : grid.modes) {
          for (auto classifier : grid.classifiers) {
            SweepRow row;
            row.feature = f.label();
            row.kernel_width = h;
            row.metric = std::string(to_string(metric));
            row.mode = std::string(to_string(mode));
            row.classifier = std::string(to_string(classifier));
            if (!db) {
              row.error = db_error;
              rows.push_back(std::move(row));
              continue;
            }
            try {
              EvalConfig cfg = base;
              cfg.search.metric = metric;
              cfg.search.mode = mode;
              cfg.classifier = classifier;
              const auto report = cross_validate(*db, cfg);
              row.raga_error = report.raga_error_rate;
              if (auto it = report.tonic_error_rate_at.find(15.0); it != report.tonic_error_rate_at.end()) {
                row.tonic_error_15 = it->second;
              }
            } catch (const std::exception& ex) {
              row.error = ex.what();
            }
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  // Failed points sort last; ties fall back to the configuration columns.
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    const double ea = std::isnan(a.raga_error) ? 2.0 : a.raga_error;
    const double eb = std::isnan(b.raga_error) ? 2.0 : b.raga_error;
    return std::tie(ea, a.feature, a.kernel_width, a.metric, a.mode, a.classifier) <
           std::tie(eb, b.feature, b.kernel_width, b.metric, b.mode, b.classifier);
  });
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto num = [](double v) { return std::isnan(v) ? std::string() : detail::format_fixed6(v); };
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  std::string out = "schema_version,feature,kernel_width,metric,mode,classifier,raga_error,tonic_error_15,error\n";
  for (const auto& r : rows) {
    out += std::to_string(kReportSchemaVersion) + "," + r.feature + "," + detail::format_fixed6(r.kernel_width) + "," +
           r.metric + "," + r.mode + "," + r.classifier + "," + num(r.raga_error) + "," + num(r.tonic_error_15) + "," +
           clean(r.error) + "\n";
  }
  return out;
}

}  // namespace ragaid
