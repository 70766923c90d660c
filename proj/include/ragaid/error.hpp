/// @file error.hpp
/// @brief Error type shared by every ragaid module.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ragaid {

enum class ErrorCode {
  // dataset-io
  MissingFile,
  UnsupportedEncoding,
  CorruptHeader,
  InvalidAudio,
  MalformedRow,
  NonMonotonicTime,
  DuplicateSampleId,
  InvalidManifest,
  VersionMismatch,
  MixedBinCounts,
  MalformedDatabase,
  // pitch-tracker
  InvalidConfig,
  SampleRateTooLow,
  EmptyAudio,
  // tonal-features
  NonPositiveFrequency,
  AllFramesUnvoiced,
  NonPositiveBandwidth,
  // classify
  BinCountMismatch,
  EmptyDatabase,
  InsufficientClassSamples,
  SingularCovariance,
  DimensionMismatch,
  // tonic-raga
  PcdNotSearchable,
  NoPeaksFound,
  FeatureMismatch,
  // eval-cli
  MissingTonic,
  TooFewSamples,
  InvalidSpec,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::InvalidAudio: return "InvalidAudio";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MixedBinCounts: return "MixedBinCounts";
    case ErrorCode::MalformedDatabase: return "MalformedDatabase";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SampleRateTooLow: return "SampleRateTooLow";
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::NonPositiveFrequency: return "NonPositiveFrequency";
    case ErrorCode::AllFramesUnvoiced: return "AllFramesUnvoiced";
    case ErrorCode::NonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::BinCountMismatch: return "BinCountMismatch";
    case ErrorCode::EmptyDatabase: return "EmptyDatabase";
    case ErrorCode::InsufficientClassSamples: return "InsufficientClassSamples";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PcdNotSearchable: return "PcdNotSearchable";
    case ErrorCode::NoPeaksFound: return "NoPeaksFound";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::MissingTonic: return "MissingTonic";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

/// @brief Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ragaid
