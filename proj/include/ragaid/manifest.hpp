/// @file manifest.hpp
/// @brief Labeled-sample manifest (CSV or JSON).

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragaid/error.hpp"
#include "ragaid/pitch_track.hpp"

namespace ragaid {

struct ManifestEntry {
  std::string sample_id;
  std::string audio_path;  ///< resolved against the manifest's directory
  std::string raga_label;
  std::optional<double> tonic_hz;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;  ///< entries skipped because their audio file is missing
};

inline constexpr std::string_view kManifestHeader = "sample_id,audio_path,raga_label,tonic_hz";

namespace detail {

inline void add_entry(DatasetManifest& m, std::set<std::string>& seen, ManifestEntry e,
                      const std::filesystem::path& base, bool check_files) {
  if (e.sample_id.empty()) throw Error(ErrorCode::InvalidManifest, "empty sample_id");
  if (e.raga_label.empty()) throw Error(ErrorCode::InvalidManifest, "empty raga_label for '" + e.sample_id + "'");
  if (e.tonic_hz && !(*e.tonic_hz > 0.0)) {
    throw Error(ErrorCode::InvalidManifest, "non-positive tonic_hz for '" + e.sample_id + "'");
  }
  if (!seen.insert(e.sample_id).second) throw Error(ErrorCode::DuplicateSampleId, e.sample_id);

  std::filesystem::path p(e.audio_path);
  if (p.is_relative()) p = base / p;
  e.audio_path = p.lexically_normal().string();
  if (check_files && !std::filesystem::exists(p)) {
    m.warnings.push_back("missing audio file for '" + e.sample_id + "': " + e.audio_path);
    return;
  }
  m.entries.push_back(std::move(e));
}

}  // namespace detail

/// @brief Parses manifest CSV text. Relative audio paths resolve against `base`.
inline DatasetManifest parse_manifest_csv(std::string_view text, const std::filesystem::path& base,
                                          bool check_files = true) {
  DatasetManifest m;
  std::set<std::string> seen;
  bool header_seen = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kManifestHeader) {
        throw Error(ErrorCode::InvalidManifest, "expected header '" + std::string(kManifestHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::InvalidManifest, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    ManifestEntry e{std::string(f[0]), std::string(f[1]), std::string(f[2]), std::nullopt};
    if (!f[3].empty()) {
      double t = 0.0;
      if (!detail::parse_double(f[3], t)) {
        throw Error(ErrorCode::InvalidManifest, "line " + std::to_string(line_no) + ": bad tonic_hz");
      }
      e.tonic_hz = t;
    }
    detail::add_entry(m, seen, std::move(e), base, check_files);
  }
  if (!header_seen) throw Error(ErrorCode::InvalidManifest, "empty manifest");
  return m;
}

/// JSON form: either an array of entries or {"entries": [...]}, with the CSV field names.
inline DatasetManifest parse_manifest_json(std::string_view text, const std::filesystem::path& base,
                                           bool check_files = true) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidManifest, ex.what());
  }
  const nlohmann::json& list = j.is_object() && j.contains("entries") ? j.at("entries") : j;
  if (!list.is_array()) throw Error(ErrorCode::InvalidManifest, "expected an array of entries");

  DatasetManifest m;
  std::set<std::string> seen;
  for (const auto& item : list) {
    try {
      ManifestEntry e;
      e.sample_id = item.at("sample_id").get<std::string>();
      e.audio_path = item.at("audio_path").get<std::string>();
      e.raga_label = item.at("raga_label").get<std::string>();
      if (item.contains("tonic_hz") && !item.at("tonic_hz").is_null()) e.tonic_hz = item.at("tonic_hz").get<double>();
      detail::add_entry(m, seen, std::move(e), base, check_files);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::InvalidManifest, ex.what());
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = path.parent_path();
  if (path.extension() == ".json") return parse_manifest_json(ss.str(), base, check_files);
  return parse_manifest_csv(ss.str(), base, check_files);
}

/// Writes CSV with audio paths as given (callers pass paths relative to the manifest when portable).
inline void save_manifest_csv(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& e : entries) {
    out << e.sample_id << ',' << e.audio_path << ',' << e.raga_label << ',';
    if (e.tonic_hz) out << detail::format_fixed6(*e.tonic_hz);
    out << '\n';
  }
}

}  // namespace ragaid
