#pragma once

// JSON forms of the domain types: the session wire format, the analysis
// report, evaluation reports, ground-truth sidecars and config files.

#include <string>
#include <vector>

#include <json.hpp>

#include "mizaj/device_sim.hpp"
#include "mizaj/error.hpp"
#include "mizaj/pulse_analysis.hpp"
#include "mizaj/session.hpp"
#include "mizaj/temperament_eval.hpp"
#include "mizaj/thermal_features.hpp"

namespace mizaj {

using json = nlohmann::json;

namespace jsonio {

template <class T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::ParseError, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("bad value for '") + key + "': " + e.what());
  }
}

inline json ratio(const Ratio& r) { return r.defined() ? json(*r.value()) : json(nullptr); }

}  // namespace jsonio

// --- labels ----------------------------------------------------------------

inline json to_json(const TemperamentLabel& l) {
  return {{"warm_axis", std::string(to_string(l.warm_axis))}, {"wet_axis", std::string(to_string(l.wet_axis))}};
}

inline TemperamentLabel label_from_json(const json& j) {
  return {parse_warm_axis(jsonio::get<std::string>(j, "warm_axis")), parse_wet_axis(jsonio::get<std::string>(j, "wet_axis"))};
}

// --- acquisition / recording -----------------------------------------------

inline json to_json(const AcquisitionSpec& s) {
  return {{"rate_hz", s.rate_hz},
          {"lowpass_cutoff_hz", s.lowpass_cutoff_hz},
          {"duration_s", s.duration_s},
          {"pressure_range_mmHg", s.pressure_range_mmHg}};
}

inline AcquisitionSpec spec_from_json(const json& j) {
  AcquisitionSpec s;
  s.rate_hz = jsonio::get<double>(j, "rate_hz");
  s.lowpass_cutoff_hz = jsonio::get<double>(j, "lowpass_cutoff_hz");
  s.duration_s = jsonio::get<double>(j, "duration_s");
  s.pressure_range_mmHg = jsonio::get<std::array<double, 2>>(j, "pressure_range_mmHg");
  return s;
}

inline json to_json(const WristRecording& r) {
  json caps = json::array();
  for (const auto& c : r.capacitive) caps.push_back(c.samples);
  return {{"spec", to_json(r.spec)}, {"rate_hz", r.ppg.rate_hz}, {"capacitive", caps}, {"ppg", r.ppg.samples},
          {"pressure", r.pressure.samples}};
}

inline WristRecording recording_from_json(const json& j) {
  WristRecording r;
  r.spec = spec_from_json(jsonio::get<json>(j, "spec"));
  const double rate = j.contains("rate_hz") ? jsonio::get<double>(j, "rate_hz") : r.spec.rate_hz;
  const auto caps = jsonio::get<std::vector<std::vector<double>>>(j, "capacitive");
  for (std::size_t i = 0; i < caps.size(); ++i) r.capacitive.push_back({caps[i], rate, "c" + std::to_string(i + 1)});
  r.ppg = {jsonio::get<std::vector<double>>(j, "ppg"), rate, "ppg"};
  r.pressure = {jsonio::get<std::vector<double>>(j, "pressure"), rate, "pressure"};
  return r;
}

// --- thermal ---------------------------------------------------------------

inline json to_json(const Roi& r) { return {{"region_kind", std::string(region_name(r.region_kind))}, {"rect", r.rect}}; }

inline Roi roi_from_json(const json& j) {
  return {parse_region(jsonio::get<std::string>(j, "region_kind")), jsonio::get<std::array<std::size_t, 4>>(j, "rect")};
}

inline json to_json(const ThermalFrame& f) {
  return {{"width", f.width}, {"height", f.height}, {"captured_at_s", f.captured_at_s}, {"temps_c", f.temps_c}};
}

inline ThermalFrame frame_from_json(const json& j) {
  ThermalFrame f;
  f.width = jsonio::get<std::size_t>(j, "width");
  f.height = jsonio::get<std::size_t>(j, "height");
  f.captured_at_s = jsonio::get<double>(j, "captured_at_s");
  f.temps_c = jsonio::get<std::vector<double>>(j, "temps_c");
  return f;
}

inline json to_json(const FeatureVector& fv) {
  return {{"kind", fv.kind == FeatureKind::WarmCold ? "warm_cold" : "dry_wet"},
          {"names", fv.names},
          {"values", fv.values},
          {"single_frame", fv.single_frame}};
}

// --- questionnaire ---------------------------------------------------------

inline json to_json(const MmqSchema& s) {
  json items = json::array();
  for (const auto& it : s.items) {
    items.push_back({{"id", it.id}, {"axis", it.axis == MmqAxis::Warm ? "warm" : "wet"}, {"weight", it.weight}});
  }
  return {{"version", s.version}, {"items", items}, {"thresholds", {{"warm", s.warm_thresholds}, {"wet", s.wet_thresholds}}}};
}

inline MmqSchema mmq_schema_from_json(const json& j) {
  MmqSchema s;
  s.version = jsonio::get<std::string>(j, "version");
  for (const auto& it : jsonio::get<json>(j, "items")) {
    const auto axis = jsonio::get<std::string>(it, "axis");
    if (axis != "warm" && axis != "wet") fail(Errc::SchemaMismatch, "item axis must be warm or wet");
    s.items.push_back({jsonio::get<std::string>(it, "id"), axis == "warm" ? MmqAxis::Warm : MmqAxis::Wet,
                       it.contains("weight") ? jsonio::get<double>(it, "weight") : 1.0});
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    if (t.contains("warm")) s.warm_thresholds = jsonio::get<std::array<double, 2>>(t, "warm");
    if (t.contains("wet")) s.wet_thresholds = jsonio::get<std::array<double, 2>>(t, "wet");
  }
  return s;
}

// --- simulation ground truth -----------------------------------------------

inline json to_json(const SimParams& p) {
  const auto& pp = p.pressure_profile;
  return {{"heart_rate_bpm", p.heart_rate_bpm},
          {"channel_gain", p.channel_gain},
          {"channel_lag_s", p.channel_lag_s},
          {"channel_p_opt_mmHg", p.channel_p_opt_mmHg},
          {"pressure_profile",
           {{"t_hold1_s", pp.t_hold1_s},
            {"t_ramp_s", pp.t_ramp_s},
            {"t_hold2_s", pp.t_hold2_s},
            {"t_fall_s", pp.t_fall_s},
            {"peak_mmHg", pp.peak_mmHg}}},
          {"noise_snr_db", p.noise_snr_db},
          {"pressure_noise_mmHg", p.pressure_noise_mmHg},
          {"seed", p.seed},
          {"spec", to_json(p.spec)}};
}

inline SimParams sim_params_from_json(const json& j) {
  SimParams p;
  p.heart_rate_bpm = jsonio::get<double>(j, "heart_rate_bpm");
  p.channel_gain = jsonio::get<std::vector<double>>(j, "channel_gain");
  p.channel_lag_s = jsonio::get<std::vector<double>>(j, "channel_lag_s");
  p.channel_p_opt_mmHg = jsonio::get<std::vector<double>>(j, "channel_p_opt_mmHg");
  const auto pp = jsonio::get<json>(j, "pressure_profile");
  p.pressure_profile = {jsonio::get<double>(pp, "t_hold1_s"), jsonio::get<double>(pp, "t_ramp_s"),
                        jsonio::get<double>(pp, "t_hold2_s"), jsonio::get<double>(pp, "t_fall_s"),
                        jsonio::get<double>(pp, "peak_mmHg")};
  p.noise_snr_db = jsonio::get<double>(j, "noise_snr_db");
  p.pressure_noise_mmHg = jsonio::get<double>(j, "pressure_noise_mmHg");
  p.seed = jsonio::get<std::uint64_t>(j, "seed");
  p.spec = spec_from_json(jsonio::get<json>(j, "spec"));
  return p;
}

// Sidecar layout: the parameter echo under "ground_truth", derived
// expectations under "derived".
inline json to_json(const GroundTruth& gt) {
  return {{"ground_truth", to_json(gt.params)},
          {"derived",
           {{"inflation_start", gt.inflation_start},
            {"inflation_end", gt.inflation_end},
            {"deflation_end", gt.deflation_end},
            {"expected_phase_gain", gt.expected_phase_gain},
            {"deeper_under_pressure", gt.deeper_under_pressure}}}};
}

inline GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  gt.params = sim_params_from_json(jsonio::get<json>(j, "ground_truth"));
  const auto d = jsonio::get<json>(j, "derived");
  gt.inflation_start = jsonio::get<std::size_t>(d, "inflation_start");
  gt.inflation_end = jsonio::get<std::size_t>(d, "inflation_end");
  gt.deflation_end = jsonio::get<std::size_t>(d, "deflation_end");
  gt.expected_phase_gain = jsonio::get<std::vector<std::array<double, 3>>>(d, "expected_phase_gain");
  gt.deeper_under_pressure = jsonio::get<std::vector<bool>>(d, "deeper_under_pressure");
  return gt;
}

// --- layout ----------------------------------------------------------------

inline json to_json(const SensorLayout& layout) {
  json arr = json::array();
  for (const auto& p : layout) arr.push_back({{"x_mm", p.x_mm}, {"y_mm", p.y_mm}});
  return arr;
}

inline SensorLayout layout_from_json(const json& j) {
  if (!j.is_array()) fail(Errc::ParseError, "sensor layout must be an array");
  SensorLayout layout;
  for (const auto& p : j) layout.push_back({jsonio::get<double>(p, "x_mm"), jsonio::get<double>(p, "y_mm")});
  return layout;
}

// --- pulse analysis report -------------------------------------------------

inline json to_json(const PhaseSegmentation& seg) {
  json j;
  const char* names[3] = {"phase1", "phase2", "phase3"};
  for (std::size_t p = 0; p < 3; ++p) j[names[p]] = {seg.phases[p].begin, seg.phases[p].end};
  return j;
}

inline json to_json(const PulseFeatures& f) {
  json timeline = json::array();
  for (const auto& ch : f.power_timeline) {
    json pts = json::array();
    for (const auto& pt : ch) pts.push_back({{"t_s", pt.t_s}, {"strength", pt.strength}});
    timeline.push_back(pts);
  }
  json bins = json::array();
  for (const auto& b : f.pressure_bins) {
    bins.push_back({{"low_mmHg", b.low_mmHg}, {"high_mmHg", b.high_mmHg}, {"inflation", b.inflation}, {"deflation", b.deflation}});
  }
  return {{"heart_rate_bpm", f.heart_rate_bpm},
          {"channel_strength", f.channel_strength},
          {"lag_s", f.lag_s},
          {"lag_confidence", f.lag_confidence},
          {"phase_power", f.phase_power},
          {"phase_segmentation", to_json(f.segmentation)},
          {"power_timeline", timeline},
          {"pressure_bins", bins},
          {"spatial_map",
           {{"length_mm", f.spatial_map.length_mm},
            {"width_mm", f.spatial_map.width_mm},
            {"strength", f.spatial_map.strength},
            {"sensor_xy_mm", to_json(f.spatial_map.sensor_xy_mm)}}}};
}

// --- evaluation ------------------------------------------------------------

inline json to_json(const Metrics& m) {
  return {{"accuracy", jsonio::ratio(m.accuracy)},
          {"sensitivity", jsonio::ratio(m.sensitivity)},
          {"specificity", jsonio::ratio(m.specificity)}};
}

inline json to_json(const ConfusionMatrix& cm) { return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}}; }

inline json to_json(const EvalReport& r) {
  json folds = json::array();
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& f = r.folds[i];
    json fj = to_json(f.metrics);
    fj["fold"] = i;
    fj["test_indices"] = f.test_indices;
    fj["confusion"] = to_json(f.confusion);
    folds.push_back(fj);
  }
  return {{"k", r.k}, {"seed", r.seed}, {"pooled", to_json(r.pooled)}, {"pooled_confusion", to_json(r.pooled_confusion)},
          {"overall_accuracy", jsonio::ratio(r.overall_accuracy)},
          {"folds", folds}};
}

// --- sessions --------------------------------------------------------------

inline json to_json(const Annotation& a) {
  json j = {{"author", a.author}, {"timestamp", a.timestamp}, {"note", a.note}};
  j["temperament"] = a.temperament ? to_json(*a.temperament) : json(nullptr);
  if (!a.request_id.empty()) j["request_id"] = a.request_id;
  return j;
}

inline Annotation annotation_from_json(const json& j) {
  Annotation a;
  if (!j.is_object()) fail(Errc::ParseError, "annotation must be an object");
  a.author = j.value("author", "");
  a.timestamp = j.value("timestamp", "");
  a.note = j.value("note", "");
  a.request_id = j.value("request_id", "");
  if (j.contains("temperament") && !j.at("temperament").is_null()) a.temperament = label_from_json(j.at("temperament"));
  return a;
}

inline json to_json(const Participant& p) {
  return {{"pseudo_id", p.pseudo_id}, {"age_years", p.age_years}, {"sex", p.sex}};
}

inline json to_json(const MmqRecord& m) {
  return {{"schema_version", m.schema_version}, {"responses", m.responses}, {"label", to_json(m.label)}};
}

inline MmqRecord mmq_record_from_json(const json& j) {
  return {jsonio::get<std::string>(j, "schema_version"), jsonio::get<MmqResponse>(j, "responses"),
          label_from_json(jsonio::get<json>(j, "label"))};
}

inline json thermal_to_json(const std::vector<ThermalCapture>& caps) {
  json arr = json::array();
  for (const auto& c : caps) {
    json frames = json::array();
    for (const auto& f : c.frames) frames.push_back(to_json(f));
    arr.push_back({{"roi", to_json(c.roi)}, {"frames", frames}});
  }
  return arr;
}

inline std::vector<ThermalCapture> thermal_from_json(const json& j) {
  std::vector<ThermalCapture> caps;
  if (!j.is_array()) fail(Errc::ParseError, "thermal must be an array");
  for (const auto& c : j) {
    ThermalCapture cap;
    cap.roi = roi_from_json(jsonio::get<json>(c, "roi"));
    for (const auto& f : jsonio::get<json>(c, "frames")) cap.frames.push_back(frame_from_json(f));
    caps.push_back(std::move(cap));
  }
  return caps;
}

inline json annotations_to_json(const std::vector<Annotation>& list) {
  json arr = json::array();
  for (const auto& a : list) arr.push_back(to_json(a));
  return arr;
}

// Full session, signals inline as numeric arrays.
inline json to_json(const SessionRecord& s) {
  json j = {{"id", s.id},
            {"created_at", s.created_at},
            {"participant", to_json(s.participant)},
            {"mmq", to_json(s.mmq)},
            {"recording", to_json(s.recording)},
            {"thermal", thermal_to_json(s.thermal)},
            {"annotations", annotations_to_json(s.annotations)}};
  if (s.analysis) j["analysis"] = *s.analysis;
  if (s.ground_truth) j["ground_truth"] = to_json(*s.ground_truth);
  return j;
}

inline SessionRecord session_from_json(const json& j) {
  try {
    SessionRecord s;
    s.id = jsonio::get<std::string>(j, "id");
    s.created_at = j.value("created_at", "");
    const auto p = jsonio::get<json>(j, "participant");
    s.participant = {p.value("pseudo_id", ""), p.value("age_years", 0.0), p.value("sex", "")};
    s.mmq = mmq_record_from_json(jsonio::get<json>(j, "mmq"));
    s.recording = recording_from_json(jsonio::get<json>(j, "recording"));
    s.thermal = thermal_from_json(j.value("thermal", json::array()));
    if (j.contains("annotations")) {
      for (const auto& a : j.at("annotations")) s.annotations.push_back(annotation_from_json(a));
    }
    if (j.contains("analysis") && !j.at("analysis").is_null()) s.analysis = j.at("analysis");
    if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) s.ground_truth = ground_truth_from_json(j.at("ground_truth"));
    return s;
  } catch (const json::exception& e) {
    fail(Errc::ParseError, e.what());
  }
}

}  // namespace mizaj
