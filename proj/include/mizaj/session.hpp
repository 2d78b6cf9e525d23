#pragma once

// The unit of exchange between the clinic and the remote physician.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mizaj/sim_params.hpp"
#include "mizaj/signal_core.hpp"
#include "mizaj/temperament_eval.hpp"
#include "mizaj/thermal_features.hpp"

namespace mizaj {

struct Participant {
  std::string pseudo_id;
  double age_years = 0.0;
  std::string sex;  // "female" | "male" | free text
  friend bool operator==(const Participant&, const Participant&) = default;
};

struct MmqRecord {
  std::string schema_version;
  MmqResponse responses;
  TemperamentLabel label;
  friend bool operator==(const MmqRecord&, const MmqRecord&) = default;
};

struct ThermalCapture {
  Roi roi;
  std::vector<ThermalFrame> frames;
  friend bool operator==(const ThermalCapture&, const ThermalCapture&) = default;
};

struct Annotation {
  std::string author;
  std::string timestamp;  // assigned by the server
  std::optional<TemperamentLabel> temperament;
  std::string note;
  std::string request_id;  // optional client key for idempotent replays
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct SessionRecord {
  std::string id;
  std::string created_at;  // ISO-8601 UTC
  Participant participant;
  MmqRecord mmq;
  WristRecording recording;
  std::vector<ThermalCapture> thermal;
  std::optional<nlohmann::json> analysis;
  std::vector<Annotation> annotations;
  std::optional<GroundTruth> ground_truth;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

}  // namespace mizaj
