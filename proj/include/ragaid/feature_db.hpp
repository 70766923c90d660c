/// @file feature_db.hpp
/// @brief Versioned JSON persistence for labeled distributions and fitted Bayes models.
///
/// Vectors are stored as base64 of little-endian IEEE-754 doubles, so a save/load
/// round trip is bit-exact.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragaid/classify.hpp"
#include "ragaid/error.hpp"
#include "ragaid/features.hpp"

namespace ragaid {

inline constexpr int kFeatureDbVersion = 1;

struct FeatureDb {
  int version = kFeatureDbVersion;
  std::string config_fingerprint;
  FeatureConfig feature;  ///< ref_hz is unused here; each sample carries its own tonic
  std::vector<LabeledSample> samples;
  std::optional<BayesModel> model;

  /// Throws MixedBinCounts unless every sample matches the declared feature kind and bin count.
  void validate() const {
    for (const auto& s : samples) {
      if (static_cast<int>(s.pd.size()) != feature.bins || s.pd.kind != feature.kind) {
        throw Error(ErrorCode::MixedBinCounts,
                    "sample '" + s.sample_id + "' is " + std::string(to_string(s.pd.kind)) + "-" +
                        std::to_string(s.pd.size()) + ", database is " + feature.label());
      }
    }
  }
};

struct LoadedFeatureDb {
  FeatureDb db;
  bool fingerprint_mismatch = false;  ///< stored fingerprint differs from the one the caller expects
};

// ---------------------------------------------------------------------------
// base64 of little-endian doubles
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::string_view kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64Alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    const auto p = kB64Alphabet.find(c);
    return p == std::string_view::npos ? -1 : static_cast<int>(p);
  };
  if (text.size() % 4 != 0) throw Error(ErrorCode::MalformedDatabase, "base64 length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = value(c);
        if (v[k] < 0 || pad > 0) throw Error(ErrorCode::MalformedDatabase, "invalid base64");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<unsigned char>((w >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((w >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(w & 0xFF));
  }
  return out;
}

inline std::string encode_doubles(std::span<const double> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
  }
  return base64_encode(bytes);
}

inline std::vector<double> decode_doubles(std::string_view text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw Error(ErrorCode::MalformedDatabase, "payload is not a whole number of doubles");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[k * 8 + static_cast<std::size_t>(i)]) << (8 * i);
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

inline std::string encode_matrix(const Eigen::MatrixXd& m) {
  // Row-major order on disk.
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return encode_doubles(flat);
}

inline Eigen::MatrixXd decode_matrix(std::string_view text, Eigen::Index rows, Eigen::Index cols) {
  const auto flat = decode_doubles(text);
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw Error(ErrorCode::MalformedDatabase, "matrix payload size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const BayesModel& model) {
  using nlohmann::json;
  json j;
  j["kind"] = std::string(to_string(model.kind));
  j["gmm_components"] = model.gmm_components;
  j["input_dimension"] = model.input_dimension;
  j["classes"] = model.classes;
  j["priors"] = model.priors;
  if (model.projection_basis.size() > 0) {
    j["projection"] = {{"rows", model.projection_basis.rows()},
                       {"cols", model.projection_basis.cols()},
                       {"center", detail::encode_matrix(model.projection_center)},
                       {"basis", detail::encode_matrix(model.projection_basis)}};
  }
  json densities = json::array();
  for (const auto& d : model.densities) {
    json comps = json::array();
    for (const auto& c : d.components) {
      comps.push_back({{"weight", c.weight},
                       {"dimension", c.mean.size()},
                       {"mean", detail::encode_matrix(c.mean)},
                       {"covariance", detail::encode_matrix(c.covariance)}});
    }
    densities.push_back({{"components", comps}});
  }
  j["densities"] = densities;
  return j;
}

inline BayesModel model_from_json(const nlohmann::json& j) {
  BayesModel model;
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "MVG" && kind != "GMM") throw Error(ErrorCode::MalformedDatabase, "unknown model kind " + kind);
  model.kind = kind == "MVG" ? DensityKind::MVG : DensityKind::GMM;
  model.gmm_components = j.at("gmm_components").get<int>();
  model.input_dimension = j.at("input_dimension").get<std::size_t>();
  model.classes = j.at("classes").get<std::vector<std::string>>();
  model.priors = j.at("priors").get<std::vector<double>>();
  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    model.projection_center = detail::decode_matrix(p.at("center").get<std::string>(), rows, 1);
    model.projection_basis = detail::decode_matrix(p.at("basis").get<std::string>(), rows, cols);
  }
  for (const auto& d : j.at("densities")) {
    ClassDensity density;
    for (const auto& c : d.at("components")) {
      GaussianComponent g;
      const auto dim = c.at("dimension").get<Eigen::Index>();
      g.weight = c.at("weight").get<double>();
      g.mean = detail::decode_matrix(c.at("mean").get<std::string>(), dim, 1);
      g.covariance = detail::decode_matrix(c.at("covariance").get<std::string>(), dim, dim);
      g.factorize();
      density.components.push_back(std::move(g));
    }
    model.densities.push_back(std::move(density));
  }
  if (model.classes.size() != model.priors.size() || model.classes.size() != model.densities.size()) {
    throw Error(ErrorCode::MalformedDatabase, "model class, prior and density counts differ");
  }
  return model;
}

inline std::string format_feature_db(const FeatureDb& db) {
  db.validate();
  nlohmann::json j;
  j["version"] = db.version;
  j["config_fingerprint"] = db.config_fingerprint;
  j["feature_kind"] = std::string(to_string(db.feature.kind));
  j["bins"] = db.feature.bins;
  j["kernel_width"] = db.feature.kernel_width;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : db.samples) {
    samples.push_back({{"sample_id", s.sample_id},
                       {"raga_label", s.raga_label},
                       {"tonic_hz", s.tonic_hz},
                       {"ref_hz", s.pd.ref_hz},
                       {"values", detail::encode_doubles(s.pd.values)}});
  }
  j["samples"] = samples;
  if (db.model) j["model"] = model_to_json(*db.model);
  return j.dump(1) + "\n";
}

inline LoadedFeatureDb parse_feature_db(std::string_view text,
                                        std::optional<std::string> expected_fingerprint = std::nullopt) {
  LoadedFeatureDb out;
  try {
    const auto j = nlohmann::json::parse(text);
    const int version = j.at("version").get<int>();
    if (version != kFeatureDbVersion) {
      throw Error(ErrorCode::VersionMismatch,
                  "on-disk version " + std::to_string(version) + ", supported " + std::to_string(kFeatureDbVersion));
    }
    auto& db = out.db;
    db.version = version;
    db.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    db.feature.kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
    db.feature.bins = j.at("bins").get<int>();
    db.feature.kernel_width = j.value("kernel_width", 0.0);
    for (const auto& s : j.at("samples")) {
      LabeledSample sample;
      sample.sample_id = s.at("sample_id").get<std::string>();
      sample.raga_label = s.at("raga_label").get<std::string>();
      sample.tonic_hz = s.at("tonic_hz").get<double>();
      sample.pd.kind = db.feature.kind;
      sample.pd.ref_hz = s.at("ref_hz").get<double>();
      sample.pd.values = detail::decode_doubles(s.at("values").get<std::string>());
      db.samples.push_back(std::move(sample));
    }
    if (j.contains("model")) db.model = model_from_json(j.at("model"));
    db.validate();
    if (expected_fingerprint && *expected_fingerprint != db.config_fingerprint) out.fingerprint_mismatch = true;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedDatabase, ex.what());
  }
  return out;
}

inline void save_feature_db(const FeatureDb& db, const std::filesystem::path& path) {
  const auto text = format_feature_db(db);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out << text;
}

inline LoadedFeatureDb load_feature_db(const std::filesystem::path& path,
                                       std::optional<std::string> expected_fingerprint = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_feature_db(ss.str(), std::move(expected_fingerprint));
}

}  // namespace ragaid
