/// @file features.hpp
/// @brief Octave-folded, tonic-relative pitch distributions (PCD, FPD, KPD).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "ragaid/error.hpp"
#include "ragaid/pitch_track.hpp"

namespace ragaid {

inline constexpr double kCentsPerOctave = 1200.0;

enum class FeatureKind { PCD, FPD, KPD };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::PCD: return "PCD";
    case FeatureKind::FPD: return "FPD";
    case FeatureKind::KPD: return "KPD";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "PCD") return FeatureKind::PCD;
  if (s == "FPD") return FeatureKind::FPD;
  if (s == "KPD") return FeatureKind::KPD;
  throw Error(ErrorCode::InvalidConfig, "unknown feature kind '" + std::string(s) + "'");
}

struct FeatureConfig {
  FeatureKind kind = FeatureKind::KPD;
  int bins = 120;
  double kernel_width = 10.0;  ///< KDE bandwidth h in cents (KPD only)
  double ref_hz = 73.4;        ///< reference (tonic) frequency for bin 0

  static FeatureConfig pcd(double ref_hz = 73.4) { return {FeatureKind::PCD, 12, 0.0, ref_hz}; }
  static FeatureConfig fpd(int bins, double ref_hz = 73.4) { return {FeatureKind::FPD, bins, 0.0, ref_hz}; }
  static FeatureConfig kpd(int bins, double h, double ref_hz = 73.4) {
    return {FeatureKind::KPD, bins, h, ref_hz};
  }

  void validate() const {
    if (kind == FeatureKind::PCD && bins != 12) {
      throw Error(ErrorCode::InvalidConfig, "PCD requires 12 bins");
    }
    if (kind != FeatureKind::PCD && bins != 120 && bins != 240) {
      throw Error(ErrorCode::InvalidConfig, "FPD/KPD require 120 or 240 bins");
    }
    if (kind == FeatureKind::KPD && !(kernel_width > 0.0)) {
      throw Error(ErrorCode::NonPositiveBandwidth, "kernel width must be positive");
    }
    if (!(ref_hz > 0.0)) throw Error(ErrorCode::NonPositiveFrequency, "reference must be positive");
  }

  /// Short label such as "PCD", "FPD-240" or "KPD-120".
  std::string label() const {
    if (kind == FeatureKind::PCD) return "PCD";
    return std::string(to_string(kind)) + "-" + std::to_string(bins);
  }

  /// Feature parameters that determine stored distributions (the reference is per sample).
  std::string fingerprint() const {
    char buf[96];
    if (kind == FeatureKind::KPD) {
      std::snprintf(buf, sizeof(buf), "kind=KPD;bins=%d;h=%.9g", bins, kernel_width);
    } else {
      std::snprintf(buf, sizeof(buf), "kind=%s;bins=%d", std::string(to_string(kind)).c_str(), bins);
    }
    return buf;
  }
};

/// @brief Normalized circular distribution over one octave; bin 0 sits at `ref_hz`.
struct PitchDistribution {
  std::vector<double> values;
  FeatureKind kind = FeatureKind::FPD;
  double ref_hz = 0.0;

  std::size_t size() const { return values.size(); }
  double bin_width_cents() const { return kCentsPerOctave / static_cast<double>(values.size()); }

  friend bool operator==(const PitchDistribution&, const PitchDistribution&) = default;
};

inline double hz_to_cents(double f, double ref) {
  if (!(f > 0.0) || !(ref > 0.0)) {
    throw Error(ErrorCode::NonPositiveFrequency, "frequencies must be positive");
  }
  return kCentsPerOctave * std::log2(f / ref);
}

/// f * 2^k for the unique integer k that lands in [ref, 2 ref).
inline double fold_to_octave(double f, double ref) {
  if (!(f > 0.0) || !(ref > 0.0) || !std::isfinite(f) || !std::isfinite(ref)) {
    throw Error(ErrorCode::NonPositiveFrequency, "frequencies must be positive");
  }
  const int k = -static_cast<int>(std::floor(std::log2(f / ref)));
  double r = std::ldexp(f, k);
  while (r < ref) r *= 2.0;
  while (r >= 2.0 * ref) r *= 0.5;
  return r;
}

/// Cents of `f` above `ref` after folding, in [0, 1200).
inline double folded_cents(double f, double ref) {
  const double c = hz_to_cents(fold_to_octave(f, ref), ref);
  return c >= kCentsPerOctave ? c - kCentsPerOctave : std::max(c, 0.0);
}

/// Shortest distance between two pitches on the octave circle, in cents [0, 600].
inline double circular_cents_distance(double a_hz, double b_hz) {
  double d = std::fmod(std::abs(hz_to_cents(a_hz, b_hz)), kCentsPerOctave);
  return std::min(d, kCentsPerOctave - d);
}

namespace detail {

/// Round-half-up bin index on the circle; bin i covers [i w - w/2, i w + w/2).
/// The 1e-9 slack keeps values that land on a half-width edge from flipping down through log2 rounding.
inline std::size_t circular_bin(double cents, int bins) {
  const double width = kCentsPerOctave / bins;
  const auto idx = static_cast<long long>(std::floor(cents / width + 0.5 + 1e-9));
  const long long b = bins;
  return static_cast<std::size_t>(((idx % b) + b) % b);
}

inline std::vector<double> voiced_cents(const PitchTrack& track, double ref_hz) {
  std::vector<double> cents;
  cents.reserve(track.frames.size());
  for (const auto& frame : track.frames) {
    if (frame.voiced()) cents.push_back(folded_cents(frame.freq_hz, ref_hz));
  }
  if (cents.empty()) throw Error(ErrorCode::AllFramesUnvoiced, "no voiced frames");
  return cents;
}

inline void normalize(std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  for (double& v : values) v /= sum;
}

inline PitchDistribution histogram(const PitchTrack& track, const FeatureConfig& cfg) {
  const auto cents = voiced_cents(track, cfg.ref_hz);
  std::vector<double> counts(static_cast<std::size_t>(cfg.bins), 0.0);
  for (double c : cents) counts[circular_bin(c, cfg.bins)] += 1.0;
  normalize(counts);
  return {std::move(counts), cfg.kind, cfg.ref_hz};
}

}  // namespace detail

/// 12-bin pitch-class distribution, 100-cent bins centred on the reference's chromatic degrees.
inline PitchDistribution compute_pcd(const PitchTrack& track, FeatureConfig cfg) {
  cfg.kind = FeatureKind::PCD;
  cfg.validate();
  return detail::histogram(track, cfg);
}

/// Fine-grained histogram (120 or 240 bins).
inline PitchDistribution compute_fpd(const PitchTrack& track, FeatureConfig cfg) {
  cfg.kind = FeatureKind::FPD;
  cfg.validate();
  return detail::histogram(track, cfg);
}

/// @brief Gaussian kernel density of the folded pitches, sampled at bin centres.
///
/// Each kernel is wrapped around the 1200-cent circle; images at x +- 1200 m are
/// added until both new terms drop below 1e-12. Exponents are shifted by the
/// smallest squared distance in the data so that very narrow kernels cannot
/// underflow every bin; the shift is a common factor and vanishes in the final
/// normalization. Pitches are accumulated in sorted order, which makes the result
/// independent of frame order.
inline PitchDistribution compute_kpd(const PitchTrack& track, FeatureConfig cfg) {
  cfg.kind = FeatureKind::KPD;
  if (!(cfg.kernel_width > 0.0)) throw Error(ErrorCode::NonPositiveBandwidth, "kernel width must be positive");
  cfg.validate();
  auto cents = detail::voiced_cents(track, cfg.ref_hz);
  std::sort(cents.begin(), cents.end());

  const std::size_t bins = static_cast<std::size_t>(cfg.bins);
  const double width = kCentsPerOctave / cfg.bins;
  const double two_h2 = 2.0 * cfg.kernel_width * cfg.kernel_width;

  // Circular offset from x to its nearest bin centre is at most width / 2.
  double min_sq = std::numeric_limits<double>::infinity();
  for (double x : cents) {
    const double r = std::remainder(x, width);
    min_sq = std::min(min_sq, r * r);
  }

  std::vector<double> density(bins, 0.0);
  for (double x : cents) {
    for (std::size_t j = 0; j < bins; ++j) {
      double delta = std::remainder(static_cast<double>(j) * width - x, kCentsPerOctave);
      double acc = std::exp(-(delta * delta - min_sq) / two_h2);
      for (int m = 1;; ++m) {
        const double up = delta + kCentsPerOctave * m;
        const double down = delta - kCentsPerOctave * m;
        const double t_up = std::exp(-(up * up - min_sq) / two_h2);
        const double t_down = std::exp(-(down * down - min_sq) / two_h2);
        acc += t_up + t_down;
        if (t_up < 1e-12 && t_down < 1e-12) break;
      }
      density[j] += acc;
    }
  }
  detail::normalize(density);
  return {std::move(density), FeatureKind::KPD, cfg.ref_hz};
}

inline PitchDistribution compute_distribution(const PitchTrack& track, const FeatureConfig& cfg) {
  switch (cfg.kind) {
    case FeatureKind::PCD: return compute_pcd(track, cfg);
    case FeatureKind::FPD: return compute_fpd(track, cfg);
    case FeatureKind::KPD: return compute_kpd(track, cfg);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown feature kind");
}

/// @brief Circular shift: out[i] = in[(i + k) mod bins], i.e. the tonic hypothesis moves up k bins.
inline PitchDistribution rotate(const PitchDistribution& pd, long long k) {
  const auto n = static_cast<long long>(pd.size());
  if (n == 0) return pd;
  const long long shift = ((k % n) + n) % n;
  PitchDistribution out;
  out.kind = pd.kind;
  out.values.resize(pd.size());
  for (long long i = 0; i < n; ++i) {
    out.values[static_cast<std::size_t>(i)] = pd.values[static_cast<std::size_t>((i + shift) % n)];
  }
  out.ref_hz = shift == 0 ? pd.ref_hz
                          : pd.ref_hz * std::exp2(static_cast<double>(shift) / static_cast<double>(n));
  return out;
}

/// @brief Strict circular local maxima, highest first (ties: lower bin first), at most `count`.
inline std::vector<std::size_t> find_peaks(const PitchDistribution& pd, std::size_t count) {
  const std::size_t n = pd.size();
  std::vector<std::size_t> peaks;
  if (n < 3 || count == 0) return peaks;
  const auto& v = pd.values;
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = v[(i + n - 1) % n];
    const double next = v[(i + 1) % n];
    if (v[i] > prev && v[i] > next) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  if (peaks.size() > count) peaks.resize(count);
  return peaks;
}

}  // namespace ragaid
