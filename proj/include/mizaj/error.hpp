#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mizaj {

enum class Errc {
  // signal_core
  MismatchedLength,
  MismatchedRate,
  NonFiniteSample,
  InvalidCutoff,
  TooShort,
  LagTooLarge,
  InvalidSpec,
  // pulse_analysis
  NoPeaks,
  OutOfPhysiologicalRange,
  InvalidBand,
  NotAPressureTrace,
  LayoutMismatch,
  // thermal_features
  OutOfBounds,
  DimensionMismatch,
  RoiTooSmall,
  ImplausibleFrame,
  // temperament_eval
  SchemaMismatch,
  LengthMismatch,
  EmptyInput,
  ZeroVariance,
  BadK,
  MissingClass,
  // device_sim
  InvalidParams,
  InvalidSize,
  BadMix,
  // telecare
  DuplicateId,
  StorageFailure,
  NotFound,
  CorruptRecord,
  AnalysisFailure,
  EmptyAnnotation,
  ParseError,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::MismatchedLength: return "MismatchedLength";
    case Errc::MismatchedRate: return "MismatchedRate";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::InvalidCutoff: return "InvalidCutoff";
    case Errc::TooShort: return "TooShort";
    case Errc::LagTooLarge: return "LagTooLarge";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::NoPeaks: return "NoPeaks";
    case Errc::OutOfPhysiologicalRange: return "OutOfPhysiologicalRange";
    case Errc::InvalidBand: return "InvalidBand";
    case Errc::NotAPressureTrace: return "NotAPressureTrace";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::RoiTooSmall: return "RoiTooSmall";
    case Errc::ImplausibleFrame: return "ImplausibleFrame";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::BadK: return "BadK";
    case Errc::MissingClass: return "MissingClass";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::InvalidSize: return "InvalidSize";
    case Errc::BadMix: return "BadMix";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::NotFound: return "NotFound";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::AnalysisFailure: return "AnalysisFailure";
    case Errc::EmptyAnnotation: return "EmptyAnnotation";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure in the library is reported as an Error carrying its code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mizaj
