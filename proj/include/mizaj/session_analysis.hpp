#pragma once

#include <json.hpp>

#include "mizaj/json_io.hpp"
#include "mizaj/pulse_analysis.hpp"
#include "mizaj/session.hpp"
#include "mizaj/thermal_features.hpp"

namespace mizaj {

struct AnalysisConfig {
  SensorLayout layout = default_sensor_layout();
  PulseOptions pulse;
};

struct ThermalAnalysis {
  RegionKind region = RegionKind::WristMalmas;
  FeatureVector warm_cold;
  FeatureVector dry_wet;
};

inline ThermalAnalysis analyze_thermal(const ThermalCapture& cap) {
  std::vector<ThermalFrame> rois;
  for (const auto& f : cap.frames) rois.push_back(extract_roi(f, cap.roi));
  if (rois.empty()) fail(Errc::EmptyInput, "thermal capture without frames");
  return {cap.roi.region_kind, warm_cold_features(rois), dry_wet_features(rois.back())};
}

// Analysis payload: the pulse report keys at top level plus "thermal".
inline json analyze_record(const SessionRecord& s, const AnalysisConfig& cfg = {}) {
  const PulseFeatures pulse = extract_pulse_features(s.recording, cfg.layout, cfg.pulse);
  json payload = to_json(pulse);
  json thermal = json::array();
  for (const auto& cap : s.thermal) {
    const auto ta = analyze_thermal(cap);
    thermal.push_back({{"region_kind", std::string(region_name(ta.region))},
                       {"warm_cold", to_json(ta.warm_cold)},
                       {"dry_wet", to_json(ta.dry_wet)}});
  }
  payload["thermal"] = thermal;
  return payload;
}

}  // namespace mizaj
