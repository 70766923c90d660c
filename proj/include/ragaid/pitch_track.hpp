/// @file pitch_track.hpp
/// @brief Frame-wise pitch track and its CSV cache format.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ragaid/error.hpp"

namespace ragaid {

/// @brief One analysis frame. Unvoiced frames carry a NaN frequency.
struct PitchFrame {
  double time_s = 0.0;
  double freq_hz = std::numeric_limits<double>::quiet_NaN();
  double strength = 0.0;

  bool voiced() const { return !std::isnan(freq_hz); }
};

struct PitchTrack {
  std::vector<PitchFrame> frames;

  std::size_t size() const { return frames.size(); }
  std::size_t voiced_count() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.voiced() ? 1 : 0;
    return n;
  }
};

inline constexpr std::string_view kPitchTrackHeader = "time_s,freq_hz,strength";

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return fields;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

/// @brief Parses CSV text with header `time_s,freq_hz,strength`.
inline PitchTrack parse_pitch_track_csv(std::string_view text) {
  PitchTrack track;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    if (!header_seen) {
      if (line != kPitchTrackHeader) {
        throw Error(ErrorCode::MalformedRow, "expected header '" + std::string(kPitchTrackHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    const auto fields = detail::split_csv(line);
    PitchFrame frame;
    bool ok = fields.size() == 3 && detail::parse_double(fields[0], frame.time_s) &&
              detail::parse_double(fields[2], frame.strength);
    if (ok) {
      if (fields[1] == "NaN") {
        frame.freq_hz = std::numeric_limits<double>::quiet_NaN();
      } else {
        ok = detail::parse_double(fields[1], frame.freq_hz) && std::isfinite(frame.freq_hz) &&
             frame.freq_hz > 0.0;
      }
    }
    if (!ok || !std::isfinite(frame.time_s) || !std::isfinite(frame.strength)) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": '" + std::string(line) + "'");
    }
    if (!track.frames.empty() && !(frame.time_s > track.frames.back().time_s)) {
      throw Error(ErrorCode::NonMonotonicTime, "line " + std::to_string(line_no));
    }
    track.frames.push_back(frame);
  }
  if (!header_seen) throw Error(ErrorCode::MalformedRow, "empty pitch-track file");
  return track;
}

inline std::string format_pitch_track_csv(const PitchTrack& track) {
  std::string out(kPitchTrackHeader);
  out += '\n';
  for (const auto& f : track.frames) {
    out += detail::format_fixed6(f.time_s);
    out += ',';
    out += f.voiced() ? detail::format_fixed6(f.freq_hz) : std::string("NaN");
    out += ',';
    out += detail::format_fixed6(f.strength);
    out += '\n';
  }
  return out;
}

inline PitchTrack load_pitch_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pitch_track_csv(ss.str());
}

inline void save_pitch_track_csv(const PitchTrack& track, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out << format_pitch_track_csv(track);
}

}  // namespace ragaid
