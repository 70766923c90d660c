/// @file pitch_tracker.hpp
/// @brief Sawtooth-template spectral-matching f0 tracker.
///
/// Every frame is Hann windowed and transformed; the square-root compressed
/// magnitude spectrum is compared against the compressed spectrum of an ideal
/// sawtooth at each candidate pitch. The ideal sawtooth has harmonic amplitudes
/// 1/k up to Nyquist, each spread over the Hann main lobe. Both vectors are
/// mean-removed before the normalized inner product, so a flat noise floor adds
/// nothing and a perfect sawtooth scores ~1.0. The score doubles as the pitch
/// strength.
///
/// Harmonic lobes are only a few bins wide, so the match is evaluated at
/// kCellSubsteps positions inside every grid cell; a candidate's score is the
/// best of its cell.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "ragaid/audio.hpp"
#include "ragaid/error.hpp"
#include "ragaid/pitch_track.hpp"

namespace ragaid {

struct TrackerConfig {
  double hop = 0.010;                ///< seconds between frames
  double f_min = 73.4;               ///< Hz
  double f_max = 587.2;              ///< Hz
  int steps_per_octave = 48;
  double strength_threshold = 0.2;   ///< frames scoring below this are unvoiced
  double window = 0.0;               ///< seconds; 0 selects 4 periods of f_min

  void validate() const {
    if (!(f_min > 0.0) || !(f_min <= f_max) || !std::isfinite(f_max)) {
      throw Error(ErrorCode::InvalidConfig, "require 0 < f_min <= f_max");
    }
    if (steps_per_octave < 12) throw Error(ErrorCode::InvalidConfig, "steps_per_octave must be >= 12");
    if (!(strength_threshold >= 0.0 && strength_threshold <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "strength_threshold must lie in [0, 1]");
    }
    if (!(hop > 0.0)) throw Error(ErrorCode::InvalidConfig, "hop must be positive");
    if (window < 0.0) throw Error(ErrorCode::InvalidConfig, "window must be non-negative");
  }

  /// Stable text key used for cache invalidation.
  std::string fingerprint() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "hop=%.9g;fmin=%.9g;fmax=%.9g;steps=%d;thr=%.9g;win=%.9g", hop,
                  f_min, f_max, steps_per_octave, strength_threshold, window);
    return buf;
  }
};

/// @brief Geometric candidate grid f_min * 2^(i / steps_per_octave), up to f_max.
inline std::vector<double> candidate_grid(const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<double> grid;
  const double limit = cfg.f_max * (1.0 + 1e-12);
  for (int i = 0;; ++i) {
    const double f = cfg.f_min * std::pow(2.0, static_cast<double>(i) / cfg.steps_per_octave);
    if (f > limit) break;
    grid.push_back(std::min(f, cfg.f_max));
  }
  return grid;
}

/// Analysis window in samples: the configured (or 4 f_min periods) length rounded up to a power of two.
inline std::size_t window_samples(const TrackerConfig& cfg, int sample_rate) {
  const double seconds = cfg.window > 0.0 ? cfg.window : 4.0 / cfg.f_min;
  const auto wanted = static_cast<std::size_t>(std::ceil(seconds * sample_rate));
  std::size_t n = 1;
  while (n < wanted) n <<= 1;
  return n;
}

inline std::size_t hop_samples(const TrackerConfig& cfg, int sample_rate) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop * sample_rate)));
}

/// floor((length - window) / hop) + 1, or 0 when the signal is shorter than one window.
inline std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop) {
  return length < window ? 0 : (length - window) / hop + 1;
}

/// Fine evaluation positions per grid step; a grid candidate's score is the best over its cell.
inline constexpr int kCellSubsteps = 5;

/// @brief Frame-level estimator with templates precomputed for one sample rate.
///
/// Holds FFT scratch state, so one instance must not be shared across threads.
/// Distinct instances are independent.
class PitchEstimator {
 public:
  struct FrameEstimate {
    double freq_hz;   ///< NaN when unvoiced
    double strength;  ///< best normalized template score in [0, 1]
  };

  PitchEstimator(const TrackerConfig& cfg, int sample_rate)
      : cfg_(cfg), sample_rate_(sample_rate) {
    cfg_.validate();
    if (sample_rate <= 0) throw Error(ErrorCode::InvalidAudio, "sample rate must be positive");
    if (sample_rate < 4.0 * cfg_.f_max) {
      throw Error(ErrorCode::SampleRateTooLow,
                  std::to_string(sample_rate) + " Hz < 4 * f_max");
    }
    n_fft_ = window_samples(cfg_, sample_rate);
    hop_ = hop_samples(cfg_, sample_rate);
    grid_ = candidate_grid(cfg_);

    window_.resize(n_fft_);
    for (std::size_t n = 0; n < n_fft_; ++n) {
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / n_fft_);
    }
    build_templates();
  }

  std::size_t window_size() const { return n_fft_; }
  std::size_t hop_size() const { return hop_; }
  const std::vector<double>& grid() const { return grid_; }

  /// Normalized template score of every grid candidate against one frame of `window_size()` samples.
  std::vector<double> candidate_scores(std::span<const double> frame) {
    fine_scores(frame);
    std::vector<double> scores(grid_.size());
    for (std::size_t c = 0; c < grid_.size(); ++c) scores[c] = fine_[best_in_cell(c)];
    return scores;
  }

  FrameEstimate estimate_frame(std::span<const double> frame) {
    const auto scores = candidate_scores(frame);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    const double strength = scores[best];
    if (!(strength >= cfg_.strength_threshold) || strength <= 0.0) {
      return {std::numeric_limits<double>::quiet_NaN(), strength};
    }

    // Parabolic refinement over log-frequency neighbours of the winning position.
    const std::size_t j = best_in_cell(best);
    double offset = 0.0;
    if (j > 0 && j + 1 < fine_.size()) {
      const double a = fine_[j - 1];
      const double b = fine_[j];
      const double c = fine_[j + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    const double steps = (static_cast<double>(j) + offset) / kCellSubsteps;
    double f = cfg_.f_min * std::pow(2.0, steps / cfg_.steps_per_octave);
    f = std::clamp(f, cfg_.f_min, cfg_.f_max);
    return {f, strength};
  }

 private:
  struct Tap {
    std::size_t bin;
    double weight;
  };

  struct Template {
    std::vector<Tap> taps;
    double mean = 0.0;     ///< mean weight over all spectrum bins
    double inv_dev = 0.0;  ///< 1 / sqrt(sum of squared deviations)
  };

  /// Magnitude response of the periodic Hann window at a fractional bin offset, normalized to 1 at 0.
  static double hann_kernel(double delta) {
    const double ad = std::abs(delta);
    if (ad >= 2.0) return 0.0;
    if (ad < 1e-12) return 1.0;
    if (std::abs(ad - 1.0) < 1e-12) return 0.5;
    const double x = std::numbers::pi * delta;
    return std::abs(std::sin(x) / x / (1.0 - delta * delta));
  }

  std::size_t best_in_cell(std::size_t candidate) const {
    const std::size_t center = candidate * kCellSubsteps;
    const std::size_t half = kCellSubsteps / 2;
    const std::size_t lo = center >= half ? center - half : 0;
    const std::size_t hi = std::min(center + half, fine_.size() - 1);
    std::size_t best = center;
    for (std::size_t j = lo; j <= hi; ++j) {
      if (fine_[j] > fine_[best] || (fine_[j] == fine_[best] && j < best)) best = j;
    }
    return best;
  }

  void build_templates() {
    const double bin_hz = static_cast<double>(sample_rate_) / n_fft_;
    const std::size_t half = n_fft_ / 2;
    const double nyquist = sample_rate_ / 2.0;
    const double bins = static_cast<double>(half + 1);
    const std::size_t positions = (grid_.size() - 1) * kCellSubsteps + 1;
    templates_.clear();
    templates_.reserve(positions);

    std::vector<double> dense(half + 1);
    for (std::size_t j = 0; j < positions; ++j) {
      const double f0 = std::min(
          cfg_.f_max, cfg_.f_min * std::pow(2.0, static_cast<double>(j) /
                                                     (cfg_.steps_per_octave * kCellSubsteps)));
      std::fill(dense.begin(), dense.end(), 0.0);
      for (int k = 1; k * f0 < nyquist; ++k) {
        const double center = k * f0 / bin_hz;
        const auto lo = static_cast<std::ptrdiff_t>(std::ceil(center - 2.0));
        const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + 2.0));
        for (std::ptrdiff_t b = std::max<std::ptrdiff_t>(lo, 0);
             b <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(half)); ++b) {
          dense[static_cast<std::size_t>(b)] += hann_kernel(static_cast<double>(b) - center) / k;
        }
      }
      Template t;
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::size_t b = 0; b <= half; ++b) {
        if (dense[b] > 0.0) {
          const double w = std::sqrt(dense[b]);
          t.taps.push_back({b, w});
          sum += w;
          sum_sq += w * w;
        }
      }
      t.mean = sum / bins;
      const double dev = sum_sq - sum * sum / bins;
      t.inv_dev = dev > 0.0 ? 1.0 / std::sqrt(dev) : 0.0;
      templates_.push_back(std::move(t));
    }
    fine_.resize(positions);
  }

  void fine_scores(std::span<const double> frame) {
    const auto spectrum = compressed_spectrum(frame);
    const double bins = static_cast<double>(spectrum.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double s : spectrum) {
      sum += s;
      sum_sq += s * s;
    }
    const double dev = sum_sq - sum * sum / bins;
    if (!(dev > 0.0)) {
      std::fill(fine_.begin(), fine_.end(), 0.0);
      return;
    }
    const double inv_dev = 1.0 / std::sqrt(dev);
    for (std::size_t j = 0; j < templates_.size(); ++j) {
      const auto& t = templates_[j];
      double dot = 0.0;
      for (const auto& tap : t.taps) dot += tap.weight * spectrum[tap.bin];
      const double cov = dot - t.mean * sum;
      fine_[j] = std::clamp(cov * t.inv_dev * inv_dev, 0.0, 1.0);
    }
  }

  std::vector<double> compressed_spectrum(std::span<const double> frame) {
    if (frame.size() != n_fft_) {
      throw Error(ErrorCode::InvalidAudio, "frame length must equal the analysis window");
    }
    windowed_.resize(n_fft_);
    for (std::size_t n = 0; n < n_fft_; ++n) windowed_[n] = frame[n] * window_[n];
    fft_.fwd(bins_, windowed_);
    std::vector<double> out(n_fft_ / 2 + 1);
    for (std::size_t b = 0; b < out.size(); ++b) {
      const double re = bins_[b].real();
      const double im = bins_[b].imag();
      out[b] = std::sqrt(std::sqrt(re * re + im * im));
    }
    return out;
  }

  TrackerConfig cfg_;
  int sample_rate_;
  std::size_t n_fft_ = 0;
  std::size_t hop_ = 0;
  std::vector<double> grid_;
  std::vector<double> window_;
  std::vector<Template> templates_;
  std::vector<double> fine_;

  Eigen::FFT<double> fft_;
  std::vector<double> windowed_;
  std::vector<std::complex<double>> bins_;
};

/// @brief Estimates one frame per hop; frames that would read past the signal end are dropped.
inline PitchTrack estimate_pitch_track(const AudioBuffer& audio, const TrackerConfig& cfg = {}) {
  if (audio.samples.empty()) throw Error(ErrorCode::EmptyAudio, "no samples");
  PitchEstimator estimator(cfg, audio.sample_rate);

  const std::size_t win = estimator.window_size();
  const std::size_t hop = estimator.hop_size();
  const std::size_t frames = frame_count(audio.samples.size(), win, hop);
  const std::span<const double> samples(audio.samples);

  PitchTrack track;
  track.frames.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t start = i * hop;
    const auto est = estimator.estimate_frame(samples.subspan(start, win));
    PitchFrame frame;
    frame.time_s = (static_cast<double>(start) + 0.5 * static_cast<double>(win)) / audio.sample_rate;
    frame.freq_hz = est.freq_hz;
    frame.strength = est.strength;
    track.frames.push_back(frame);
  }
  return track;
}

}  // namespace ragaid
