#pragma once

// Synthetic stand-in for the wrist pulse device and thermal camera. Every
// output carries the ground truth it was built from, so analysis can be
// checked against known values.
//
// Beat model: a systolic Gaussian bump plus a dicrotic bump at 0.35 of its
// amplitude, positioned in beat-fraction units. Capacitive channel i is
//   gain_i * G(P(t); p_opt_i) * (beat(t - lag_i) - mean beat) + noise
// with G a Gaussian pressure-response window of width 40 mmHg.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mizaj/error.hpp"
#include "mizaj/session.hpp"
#include "mizaj/signal_core.hpp"
#include "mizaj/sim_params.hpp"
#include "mizaj/temperament_eval.hpp"
#include "mizaj/thermal_features.hpp"

namespace mizaj {

// Portable generator: mt19937_64 with explicit uniform / normal mappings, so
// a seed produces the same data under any standard library.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace sim {

inline constexpr double kSystolicCentre = 0.20;
inline constexpr double kSystolicWidth = 0.06;
inline constexpr double kDicroticCentre = 0.50;
inline constexpr double kDicroticWidth = 0.08;
inline constexpr double kDicroticRatio = 0.35;

// Beat waveform at time t for the given heart rate; neighbouring beats are
// summed so the wrap at each beat boundary is continuous.
inline double beat(double t, double hr_bpm) {
  const double cycles = t * hr_bpm / 60.0;
  const double phase = cycles - std::floor(cycles);
  double v = 0.0;
  for (int k = -1; k <= 1; ++k) {
    const double ph = phase - k;
    const double ds = (ph - kSystolicCentre) / kSystolicWidth;
    const double dd = (ph - kDicroticCentre) / kDicroticWidth;
    v += std::exp(-0.5 * ds * ds) + kDicroticRatio * std::exp(-0.5 * dd * dd);
  }
  return v;
}

// One-beat average of the waveform (the bumps are fully contained in a beat).
inline double beat_mean() {
  return std::sqrt(2.0 * std::numbers::pi) * (kSystolicWidth + kDicroticRatio * kDicroticWidth);
}

inline double pressure_response(double p_mmHg, double p_opt_mmHg) {
  const double d = (p_mmHg - p_opt_mmHg) / kPressureResponseSigmaMmHg;
  return std::exp(-0.5 * d * d);
}

inline std::size_t num_samples(const SimParams& p) {
  return static_cast<std::size_t>(std::llround(p.spec.duration_s * p.spec.rate_hz));
}

inline std::vector<double> clean_beats(const SimParams& p, double lag_s) {
  const std::size_t n = num_samples(p);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = beat(static_cast<double>(i) / p.spec.rate_hz - lag_s, p.heart_rate_bpm);
  return w;
}

inline double variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline double noise_sigma(const SimParams& p, const std::vector<double>& clean) {
  return std::sqrt(variance(clean) / std::pow(10.0, p.noise_snr_db / 10.0));
}

// Independent streams per signal component.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace sim

// Clean and noise components kept apart so SNR can be measured.
struct PpgComponents {
  std::vector<double> clean;
  std::vector<double> noise;
};

inline PpgComponents synth_ppg_components(const SimParams& params) {
  validate(params);
  PpgComponents c;
  c.clean = sim::clean_beats(params, 0.0);
  const double sigma = sim::noise_sigma(params, c.clean);
  SimRng rng(sim::stream_seed(params.seed, 0));
  c.noise.resize(c.clean.size());
  for (auto& v : c.noise) v = sigma * rng.normal();
  return c;
}

inline TimeSeries synth_ppg(const SimParams& params) {
  auto c = synth_ppg_components(params);
  TimeSeries ts{std::move(c.clean), params.spec.rate_hz, "ppg"};
  for (std::size_t i = 0; i < ts.samples.size(); ++i) ts.samples[i] += c.noise[i];
  return ts;
}

inline GroundTruth ground_truth_for(const SimParams& params) {
  GroundTruth gt;
  gt.params = params;
  const auto& pp = params.pressure_profile;
  const double rate = params.spec.rate_hz;
  const std::size_t n = sim::num_samples(params);
  gt.inflation_start = static_cast<std::size_t>(std::llround(pp.t_hold1_s * rate));
  gt.inflation_end = static_cast<std::size_t>(std::llround((pp.t_hold1_s + pp.t_ramp_s) * rate));
  gt.deflation_end = std::min(n, static_cast<std::size_t>(std::llround(pp.active_s() * rate)));
  const std::array<std::pair<std::size_t, std::size_t>, 3> ranges = {
      std::pair{std::size_t{0}, gt.inflation_start}, std::pair{gt.inflation_start, gt.inflation_end},
      std::pair{gt.inflation_end, gt.deflation_end}};
  for (std::size_t c = 0; c < params.num_channels(); ++c) {
    std::array<double, 3> g{0, 0, 0};
    for (std::size_t ph = 0; ph < 3; ++ph) {
      const auto [b, e] = ranges[ph];
      if (e <= b) continue;
      double acc = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        acc += sim::pressure_response(pp.at(static_cast<double>(i) / rate), params.channel_p_opt_mmHg[c]);
      }
      g[ph] = params.channel_gain[c] * acc / static_cast<double>(e - b);
    }
    gt.expected_phase_gain.push_back(g);
    gt.deeper_under_pressure.push_back(g[1] > g[0]);
  }
  return gt;
}

inline std::pair<WristRecording, GroundTruth> synth_recording(const SimParams& params) {
  validate(params);
  const double rate = params.spec.rate_hz;
  const std::size_t n = sim::num_samples(params);
  const auto& pp = params.pressure_profile;

  TimeSeries pressure{std::vector<double>(n), rate, "pressure"};
  {
    SimRng rng(sim::stream_seed(params.seed, 1));
    const double lo = params.spec.pressure_range_mmHg[0];
    const double hi = params.spec.pressure_range_mmHg[1];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = pp.at(static_cast<double>(i) / rate) + params.pressure_noise_mmHg * rng.normal();
      pressure.samples[i] = std::clamp(v, lo, hi);
    }
  }

  const TimeSeries ppg = synth_ppg(params);
  const auto reference = sim::clean_beats(params, 0.0);
  const double sigma = sim::noise_sigma(params, reference);
  const double mean_beat = sim::beat_mean();

  std::vector<TimeSeries> caps;
  for (std::size_t c = 0; c < params.num_channels(); ++c) {
    SimRng rng(sim::stream_seed(params.seed, 2 + c));
    TimeSeries ts{std::vector<double>(n), rate, "c" + std::to_string(c + 1)};
    const double gain = params.channel_gain[c];
    const double lag = params.channel_lag_s[c];
    const double p_opt = params.channel_p_opt_mmHg[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      const double g = sim::pressure_response(pp.at(t), p_opt);
      ts.samples[i] = gain * g * (sim::beat(t - lag, params.heart_rate_bpm) - mean_beat) + sigma * rng.normal();
    }
    caps.push_back(std::move(ts));
  }
  return {make_recording(std::move(caps), ppg, std::move(pressure), params.spec), ground_truth_for(params)};
}

// ---------------------------------------------------------------------------
// Thermal frames

struct ThermalStyle {
  double offset_c;
  double roughness_c;  // std of the texture field
  int blur_radius;     // box-blur radius in pixels; smaller = rougher
};

inline ThermalStyle thermal_style(const TemperamentLabel& label) {
  ThermalStyle s{0.0, 0.0, 0};
  s.offset_c = label.warm_axis == WarmAxis::Warm ? 1.5 : label.warm_axis == WarmAxis::Cold ? -1.5 : 0.0;
  switch (label.wet_axis) {
    case WetAxis::Dry: s.roughness_c = 0.6; s.blur_radius = 1; break;
    case WetAxis::Moderate: s.roughness_c = 0.4; s.blur_radius = 2; break;
    case WetAxis::Wet: s.roughness_c = 0.25; s.blur_radius = 4; break;
  }
  return s;
}

inline constexpr double kThermalBaseC = 31.0;

// Level carries warm/cold; texture roughness carries dry/wet.
inline ThermalFrame synth_thermal_frame(const TemperamentLabel& label, std::size_t width, std::size_t height,
                                        std::uint64_t seed) {
  if (width < 16 || height < 16) fail(Errc::InvalidSize, "thermal frames must be at least 16x16");
  const ThermalStyle style = thermal_style(label);
  SimRng rng(sim::stream_seed(seed, 100));
  std::vector<double> white(width * height);
  for (auto& v : white) v = rng.normal();

  const int r = style.blur_radius;
  std::vector<double> field(width * height, 0.0);
  const auto w = static_cast<long>(width), h = static_cast<long>(height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      int cnt = 0;
      for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
          const long xx = std::clamp(x + dx, 0L, w - 1), yy = std::clamp(y + dy, 0L, h - 1);
          acc += white[static_cast<std::size_t>(yy * w + xx)];
          ++cnt;
        }
      }
      field[static_cast<std::size_t>(y * w + x)] = acc / cnt;
    }
  }
  double mean = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double v : field) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(field.size()));

  ThermalFrame f;
  f.width = width;
  f.height = height;
  f.temps_c.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double z = sd > 0.0 ? (field[i] - mean) / sd : 0.0;
    f.temps_c[i] = std::clamp(kThermalBaseC + style.offset_c + style.roughness_c * z, kMinSkinTempC, kMaxSkinTempC);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Cohort

struct LabelMix {
  std::size_t warm = 15;
  std::size_t moderate = 17;
  std::size_t cold = 2;
  std::size_t total() const { return warm + moderate + cold; }
};

// The reference 15/17/2 proportions rescaled to n; rounding slack goes to
// the moderate class.
inline LabelMix scaled_mix(std::size_t n) {
  const LabelMix ref;
  LabelMix m;
  m.warm = static_cast<std::size_t>(std::llround(static_cast<double>(n * ref.warm) / static_cast<double>(ref.total())));
  m.cold = static_cast<std::size_t>(std::llround(static_cast<double>(n * ref.cold) / static_cast<double>(ref.total())));
  if (m.warm + m.cold > n) m.cold = n - std::min(n, m.warm);
  m.moderate = n - m.warm - m.cold;
  return m;
}

inline constexpr std::size_t kThermalWidth = 64;
inline constexpr std::size_t kThermalHeight = 48;

inline std::string iso_timestamp(std::int64_t epoch_s) {
  // Civil-from-days (proleptic Gregorian, UTC).
  std::int64_t days = epoch_s / 86400;
  std::int64_t secs = epoch_s % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const std::int64_t doe = days - era * 146097;
  const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = yoe + era * 400;
  const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const std::int64_t mp = (5 * doy + 2) / 153;
  const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
  const std::int64_t m = mp < 10 ? mp + 3 : mp - 9;
  if (m <= 2) ++y;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lldT%02lld:%02lld:%02lldZ", static_cast<long long>(y),
                static_cast<long long>(m), static_cast<long long>(d), static_cast<long long>(secs / 3600),
                static_cast<long long>((secs % 3600) / 60), static_cast<long long>(secs % 60));
  return buf;
}

// Axis-consistent questionnaire answers: every item of the axis lands in the
// score band of the assigned label.
inline MmqResponse synth_mmq_response(const MmqSchema& schema, const TemperamentLabel& label, SimRng& rng) {
  auto band = [](int level) -> std::pair<double, double> {
    if (level > 0) return {0.75, 1.0};
    if (level < 0) return {0.0, 0.25};
    return {0.4, 0.6};
  };
  const int warm = label.warm_axis == WarmAxis::Warm ? 1 : label.warm_axis == WarmAxis::Cold ? -1 : 0;
  const int wet = label.wet_axis == WetAxis::Wet ? 1 : label.wet_axis == WetAxis::Dry ? -1 : 0;
  MmqResponse resp;
  for (const auto& item : schema.items) {
    const auto [lo, hi] = band(item.axis == MmqAxis::Warm ? warm : wet);
    resp[item.id] = rng.uniform(lo, hi);
  }
  return resp;
}

inline SimParams cohort_member_params(std::uint64_t seed, std::size_t index) {
  SimRng rng(sim::stream_seed(seed + index, 7));
  SimParams p;
  p.seed = seed + index;
  p.heart_rate_bpm = std::round(rng.uniform(55.0, 95.0) * 10.0) / 10.0;
  p.noise_snr_db = 20.0;
  const std::size_t nch = 7;
  p.channel_gain.assign(nch, 0.0);
  p.channel_p_opt_mmHg.assign(nch, 0.0);
  p.channel_lag_s.assign(nch, 0.0);
  // Gaussian gain profile along the longitudinal row, centred near the
  // middle sensor; transverse sensors weaker.
  const double centre = rng.uniform(1.0, 3.0);
  for (std::size_t c = 0; c < nch; ++c) {
    double g;
    if (c < 5) {
      const double d = (static_cast<double>(c) - centre) / 1.5;
      g = std::exp(-0.5 * d * d);
    } else {
      g = 0.4 + 0.2 * rng.uniform();
    }
    p.channel_gain[c] = std::round(g * 1000.0) / 1000.0;
    p.channel_p_opt_mmHg[c] = std::round(rng.uniform(20.0, 150.0));
    p.channel_lag_s[c] = 0.010 + 0.002 * static_cast<double>(c);
  }
  p.spec.duration_s = std::round(rng.uniform(60.0, 90.0) * 2.0) / 2.0;
  auto& pp = p.pressure_profile;
  pp.t_hold1_s = std::round(rng.uniform(8.0, 12.0));
  pp.t_ramp_s = std::round(rng.uniform(15.0, 25.0));
  pp.t_hold2_s = std::round(rng.uniform(0.0, 5.0));
  pp.t_fall_s = std::round(rng.uniform(15.0, 25.0));
  pp.peak_mmHg = std::round(rng.uniform(140.0, 180.0));
  if (pp.active_s() + 5.0 > p.spec.duration_s) p.spec.duration_s = std::min(90.0, pp.active_s() + 5.0);
  return p;
}

inline std::vector<SessionRecord> generate_cohort(std::size_t n, LabelMix mix, std::uint64_t seed,
                                                  const MmqSchema& schema = default_mmq_schema()) {
  if (mix.total() != n) fail(Errc::BadMix, "label mix must sum to n");
  if (n == 0) fail(Errc::BadMix, "empty cohort");

  std::vector<WarmAxis> warm;
  warm.insert(warm.end(), mix.warm, WarmAxis::Warm);
  warm.insert(warm.end(), mix.moderate, WarmAxis::Moderate);
  warm.insert(warm.end(), mix.cold, WarmAxis::Cold);
  std::vector<WetAxis> wet;
  for (std::size_t i = 0; i < n; ++i) wet.push_back(static_cast<WetAxis>(i % 3));
  // 21 of 34 female in the reference cohort.
  const auto females = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 21.0 / 34.0));
  std::vector<std::string> sex(n, "male");
  std::fill(sex.begin(), sex.begin() + static_cast<std::ptrdiff_t>(females), "female");

  const auto pw = seeded_permutation(n, sim::stream_seed(seed, 200));
  const auto pv = seeded_permutation(n, sim::stream_seed(seed, 201));
  const auto ps = seeded_permutation(n, sim::stream_seed(seed, 202));

  const std::int64_t base_epoch = 1767254400;  // 2026-01-01T08:00:00Z
  std::vector<SessionRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SessionRecord s;
    char id[48];
    std::snprintf(id, sizeof(id), "sim-%llu-%03zu", static_cast<unsigned long long>(seed), i + 1);
    s.id = id;
    s.created_at = iso_timestamp(base_epoch + static_cast<std::int64_t>(i) * 900);
    TemperamentLabel label{warm[pw[i]], wet[pv[i]]};

    SimRng rng(sim::stream_seed(seed + i, 300));
    char pid[32];
    std::snprintf(pid, sizeof(pid), "P%03zu", i + 1);
    s.participant = {pid, std::round(rng.uniform(20.0, 60.0)), sex[ps[i]]};
    s.mmq.schema_version = schema.version;
    s.mmq.responses = synth_mmq_response(schema, label, rng);
    s.mmq.label = score_mmq(schema, s.mmq.responses);

    auto [rec, gt] = synth_recording(cohort_member_params(seed, i));
    s.recording = std::move(rec);
    s.ground_truth = std::move(gt);

    const std::array<RegionKind, 3> regions = {RegionKind::WristMalmas, RegionKind::HandBack, RegionKind::Face};
    for (std::size_t r = 0; r < regions.size(); ++r) {
      ThermalCapture cap;
      cap.roi = {regions[r], {8, 8, 56, 40}};
      ThermalFrame frame = synth_thermal_frame(label, kThermalWidth, kThermalHeight, sim::stream_seed(seed + i, 400 + r));
      frame.captured_at_s = 300.0;  // after the five-minute equilibration
      cap.frames.push_back(std::move(frame));
      s.thermal.push_back(std::move(cap));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mizaj
