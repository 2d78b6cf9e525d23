#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mizaj/error.hpp"
#include "mizaj/signal_core.hpp"

namespace mizaj {

// Hold at 0, ramp to peak, hold at peak, fall back to 0, then rest at 0
// until the end of the record.
struct PressureProfile {
  double t_hold1_s = 10.0;
  double t_ramp_s = 20.0;
  double t_hold2_s = 0.0;
  double t_fall_s = 20.0;
  double peak_mmHg = 180.0;

  double active_s() const { return t_hold1_s + t_ramp_s + t_hold2_s + t_fall_s; }

  // Noise-free pressure at time t.
  double at(double t) const {
    if (t < t_hold1_s) return 0.0;
    t -= t_hold1_s;
    if (t < t_ramp_s) return peak_mmHg * t / t_ramp_s;
    t -= t_ramp_s;
    if (t < t_hold2_s) return peak_mmHg;
    t -= t_hold2_s;
    if (t < t_fall_s) return peak_mmHg * (1.0 - t / t_fall_s);
    return 0.0;
  }
  friend bool operator==(const PressureProfile&, const PressureProfile&) = default;
};

inline constexpr double kPressureResponseSigmaMmHg = 40.0;

struct SimParams {
  double heart_rate_bpm = 72.0;
  std::vector<double> channel_gain = std::vector<double>(7, 1.0);
  std::vector<double> channel_lag_s = {0.010, 0.012, 0.014, 0.016, 0.018, 0.020, 0.022};
  std::vector<double> channel_p_opt_mmHg = std::vector<double>(7, 60.0);
  PressureProfile pressure_profile;
  double noise_snr_db = 20.0;
  double pressure_noise_mmHg = 0.3;
  std::uint64_t seed = 1;
  AcquisitionSpec spec;

  std::size_t num_channels() const { return channel_gain.size(); }
  friend bool operator==(const SimParams&, const SimParams&) = default;
};

inline void validate(const SimParams& p) {
  try {
    validate(p.spec);
  } catch (const Error& e) {
    fail(Errc::InvalidParams, e.what());
  }
  if (!(p.heart_rate_bpm >= 40.0 && p.heart_rate_bpm <= 180.0)) fail(Errc::InvalidParams, "heart rate must lie in [40, 180]");
  const std::size_t n = p.channel_gain.size();
  if (n == 0) fail(Errc::InvalidParams, "need at least one channel");
  if (p.channel_lag_s.size() != n || p.channel_p_opt_mmHg.size() != n) {
    fail(Errc::InvalidParams, "per-channel arrays must share the channel count");
  }
  for (double g : p.channel_gain) {
    if (!(g >= 0.0) || !std::isfinite(g)) fail(Errc::InvalidParams, "channel gains must be finite and >= 0");
  }
  for (double l : p.channel_lag_s) {
    if (!(std::abs(l) < 0.5)) fail(Errc::InvalidParams, "channel lags must lie in (-0.5, 0.5) s");
  }
  for (double po : p.channel_p_opt_mmHg) {
    if (!std::isfinite(po)) fail(Errc::InvalidParams, "non-finite optimal pressure");
  }
  const auto& pp = p.pressure_profile;
  if (!(pp.peak_mmHg > 0.0 && pp.peak_mmHg <= 180.0)) fail(Errc::InvalidParams, "peak pressure must lie in (0, 180]");
  if (!(pp.t_hold1_s >= 0 && pp.t_ramp_s > 0 && pp.t_hold2_s >= 0 && pp.t_fall_s > 0)) {
    fail(Errc::InvalidParams, "pressure profile durations must be non-negative (ramp, fall positive)");
  }
  if (pp.active_s() > p.spec.duration_s) fail(Errc::InvalidParams, "pressure profile longer than the record");
  if (!std::isfinite(p.noise_snr_db)) fail(Errc::InvalidParams, "non-finite SNR");
  if (!(p.pressure_noise_mmHg >= 0.0)) fail(Errc::InvalidParams, "pressure noise must be >= 0");
}

struct GroundTruth {
  SimParams params;
  // Construction boundaries of the pressure phases (sample indices).
  std::size_t inflation_start = 0;
  std::size_t inflation_end = 0;
  std::size_t deflation_end = 0;
  // Mean pressure-response gain of each channel in each phase and whether
  // the inflation phase is expected to beat the no-pressure phase.
  std::vector<std::array<double, 3>> expected_phase_gain;
  std::vector<bool> deeper_under_pressure;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

}  // namespace mizaj
