#pragma once

// Pulse features from a wrist recording: heart rate from the PPG, per-channel
// strength through the cross-spectral density against the PPG reference,
// cross-correlation lag, pressure-phase segmentation with per-phase channel
// power, a sliding-window power timeline and the spatial (length / width)
// pulse map.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mizaj/detail/fft.hpp"
#include "mizaj/error.hpp"
#include "mizaj/signal_core.hpp"

namespace mizaj {

struct Spectrum {
  std::vector<double> freqs_hz;
  std::vector<std::complex<double>> values;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool empty() const noexcept { return end <= begin; }
  std::size_t size() const noexcept { return empty() ? 0 : end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// No-pressure, inflation and deflation phases of the cuff trace.
struct PhaseSegmentation {
  std::array<IndexRange, 3> phases{};

  const IndexRange& phase1() const { return phases[0]; }
  const IndexRange& phase2() const { return phases[1]; }
  const IndexRange& phase3() const { return phases[2]; }
  friend bool operator==(const PhaseSegmentation&, const PhaseSegmentation&) = default;
};

// rows = channels, columns = phases 1..3.
using ChannelPhasePower = std::vector<std::array<double, 3>>;

struct SensorPosition {
  double x_mm = 0.0;  // longitudinal (along the radial artery)
  double y_mm = 0.0;  // transverse
  friend bool operator==(const SensorPosition&, const SensorPosition&) = default;
};

using SensorLayout = std::vector<SensorPosition>;

// Five sensors along the artery at 8 mm pitch plus two transverse sensors
// 8 mm either side of the centre one.
inline SensorLayout default_sensor_layout() {
  return {{-16, 0}, {-8, 0}, {0, 0}, {8, 0}, {16, 0}, {0, -8}, {0, 8}};
}

struct SpatialPulseMap {
  SensorLayout sensor_xy_mm;
  std::vector<double> strength;
  double length_mm = 0.0;
  double width_mm = 0.0;
};

struct LagEstimate {
  double lag_s = 0.0;
  double peak_value = 0.0;   // R at the argmax
  double confidence = 0.0;   // peak normalised by sqrt(Rxx(0) Ryy(0))
};

struct TimelinePoint {
  double t_s = 0.0;
  double strength = 0.0;
};

struct PressureBinPower {
  double low_mmHg = 0.0;
  double high_mmHg = 0.0;
  std::vector<double> inflation;  // per channel
  std::vector<double> deflation;  // per channel
};

struct PulseFeatures {
  double heart_rate_bpm = 0.0;
  std::vector<double> channel_strength;
  std::vector<double> lag_s;  // > 0: channel lags the PPG reference
  std::vector<double> lag_confidence;
  PhaseSegmentation segmentation;
  ChannelPhasePower phase_power;
  std::vector<std::vector<TimelinePoint>> power_timeline;
  std::vector<PressureBinPower> pressure_bins;
  SpatialPulseMap spatial_map;
};

struct PulseOptions {
  std::array<double, 2> band_hz{0.5, 20.0};
  double max_lag_s = 0.15;
  double window_s = 5.0;
  double window_overlap = 0.5;
  double pressure_bin_mmHg = 20.0;
  bool prefilter = true;  // acquisition low-pass before analysis
};

// ---------------------------------------------------------------------------

inline std::vector<std::size_t> detect_peaks(std::span<const double> x, std::size_t min_separation,
                                             double min_prominence) {
  const std::size_t n = x.size();
  if (n < 3) fail(Errc::TooShort, "peak detection needs at least 3 samples");
  struct Candidate {
    std::size_t index;
    double height;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(x[i] > x[i - 1] && x[i] > x[i + 1])) continue;
    double left_min = x[i];
    for (std::size_t j = i; j-- > 0;) {
      if (x[j] > x[i]) break;
      left_min = std::min(left_min, x[j]);
    }
    double right_min = x[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (x[j] > x[i]) break;
      right_min = std::min(right_min, x[j]);
    }
    const double prominence = x[i] - std::max(left_min, right_min);
    if (prominence >= min_prominence) cands.push_back({i, x[i]});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.height > b.height; });
  std::vector<std::size_t> kept;
  for (const auto& c : cands) {
    bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (k > c.index ? k - c.index : c.index - k) < min_separation;
    });
    if (!clash) kept.push_back(c.index);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

inline std::vector<std::size_t> detect_peaks(const TimeSeries& ts, double min_separation_s, double min_prominence) {
  validate(ts);
  const auto sep = static_cast<std::size_t>(std::llround(min_separation_s * ts.rate_hz));
  return detect_peaks(std::span<const double>(ts.samples), sep, min_prominence);
}

namespace detail {

inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return percentile_sorted(v, 0.5);
}

}  // namespace detail

inline constexpr double kMinHeartRateBpm = 20.0;
inline constexpr double kMaxHeartRateBpm = 250.0;

// Band-pass 0.5-5 Hz, systolic peaks, 60 / median inter-beat interval.
// Peak times are refined to sub-sample precision by parabolic interpolation.
inline double estimate_heart_rate(const TimeSeries& ppg) {
  validate(ppg);
  if (ppg.duration_s() < 5.0) fail(Errc::TooShort, "heart rate needs at least 5 s of PPG");
  const TimeSeries f = bandpass_filter(ppg, 0.5, 5.0);
  std::vector<double> sorted = f.samples;
  std::sort(sorted.begin(), sorted.end());
  const double span = detail::percentile_sorted(sorted, 0.99) - detail::percentile_sorted(sorted, 0.01);
  if (!(span > 0.0)) fail(Errc::NoPeaks, "flat PPG");
  const double min_sep_s = 60.0 / kMaxHeartRateBpm;
  const auto peaks = detect_peaks(f.samples, static_cast<std::size_t>(std::llround(min_sep_s * f.rate_hz)), 0.5 * span);
  if (peaks.size() < 2) fail(Errc::NoPeaks, "fewer than two beats detected");

  std::vector<double> times;
  times.reserve(peaks.size());
  for (std::size_t p : peaks) {
    const double ym = f.samples[p - 1], y0 = f.samples[p], yp = f.samples[p + 1];
    const double denom = ym - 2.0 * y0 + yp;
    const double delta = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    times.push_back((static_cast<double>(p) + delta) / f.rate_hz);
  }
  std::vector<double> intervals;
  for (std::size_t i = 1; i < times.size(); ++i) intervals.push_back(times[i] - times[i - 1]);
  const double bpm = 60.0 / detail::median(std::move(intervals));
  if (!(bpm >= kMinHeartRateBpm && bpm <= kMaxHeartRateBpm)) {
    fail(Errc::OutOfPhysiologicalRange, "heart rate " + std::to_string(bpm) + " BPM");
  }
  return bpm;
}

// CSD as the DFT of the biased cross-correlation (both inputs detrended),
// S(f) = sum_tau R(tau) exp(-i 2 pi f tau) dtau. Evaluated on the grid
// f_k = k * rate / M, M the power of two >= 2N - 1, where it equals
// conj(X_k) Y_k / (N * rate) with no circular wrap-around.
inline Spectrum cross_spectral_density(std::span<const double> x, std::span<const double> y, double rate_hz) {
  const std::size_t n = x.size();
  const std::size_t m = detail::next_pow2(2 * n - 1);
  const auto xd = detrend(x);
  const auto yd = detrend(y);
  const auto fx = detail::rfft(xd, m);
  const auto fy = detail::rfft(yd, m);
  Spectrum s;
  s.freqs_hz.resize(fx.size());
  s.values.resize(fx.size());
  const double scale = 1.0 / (static_cast<double>(n) * rate_hz);
  for (std::size_t k = 0; k < fx.size(); ++k) {
    s.freqs_hz[k] = static_cast<double>(k) * rate_hz / static_cast<double>(m);
    s.values[k] = std::conj(fx[k]) * fy[k] * scale;
  }
  return s;
}

inline Spectrum cross_spectral_density(const TimeSeries& x, const TimeSeries& y) {
  detail::check_pair(x, y);
  if (x.size() < 2) fail(Errc::TooShort, "CSD needs at least 2 samples");
  return cross_spectral_density(x.samples, y.samples, x.rate_hz);
}

// Trapezoidal integral of |S| over [low, high], interpolating the band edges.
inline double band_strength(const Spectrum& s, std::array<double, 2> band_hz) {
  const double low = band_hz[0], high = band_hz[1];
  if (s.freqs_hz.size() < 2) fail(Errc::InvalidBand, "spectrum too short");
  if (!(low >= 0.0 && low < high && high <= s.freqs_hz.back())) {
    fail(Errc::InvalidBand, "band must satisfy 0 <= low < high <= max frequency");
  }
  const auto& f = s.freqs_hz;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    const double a = std::max(f[k], low);
    const double b = std::min(f[k + 1], high);
    if (b <= a) continue;
    const double df = f[k + 1] - f[k];
    const double m0 = std::abs(s.values[k]);
    const double m1 = std::abs(s.values[k + 1]);
    const double va = m0 + (m1 - m0) * (a - f[k]) / df;
    const double vb = m0 + (m1 - m0) * (b - f[k]) / df;
    total += 0.5 * (va + vb) * (b - a);
  }
  return total;
}

// argmax_tau R_xy(tau); ties go to the smallest |tau| (positive first).
inline LagEstimate lag_time(const TimeSeries& x, const TimeSeries& y, double max_lag_s) {
  const CorrelationFunction cf = cross_correlation(x, y, max_lag_s);
  const std::size_t centre = cf.values.size() / 2;
  std::size_t best = centre;
  for (std::size_t d = 1; d <= centre; ++d) {
    for (std::size_t idx : {centre + d, centre - d}) {
      if (cf.values[idx] > cf.values[best]) best = idx;
    }
  }
  LagEstimate est;
  est.lag_s = cf.lags_s[best];
  est.peak_value = cf.values[best];
  const auto rxx = detail::biased_xcorr(x.samples, x.samples, 0)[0];
  const auto ryy = detail::biased_xcorr(y.samples, y.samples, 0)[0];
  const double norm = std::sqrt(rxx * ryy);
  est.confidence = norm > 0.0 ? est.peak_value / norm : 0.0;
  return est;
}

// ---------------------------------------------------------------------------
// Pressure phases

inline constexpr double kPhaseOnsetMmHg = 5.0;
inline constexpr double kPhaseOnsetSlope = 5.0;  // mmHg/s

namespace detail {

struct Line {
  double intercept = 0.0;
  double slope = 0.0;

  double at_level(double level) const { return (level - intercept) / slope; }
};

inline std::optional<Line> fit_line(std::span<const double> raw, std::span<const std::size_t> idx) {
  if (idx.size() < 3) return std::nullopt;
  double mi = 0.0, mv = 0.0;
  for (std::size_t i : idx) {
    mi += static_cast<double>(i);
    mv += raw[i];
  }
  mi /= static_cast<double>(idx.size());
  mv /= static_cast<double>(idx.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i : idx) {
    const double di = static_cast<double>(i) - mi;
    sxy += di * (raw[i] - mv);
    sxx += di * di;
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  if (slope == 0.0) return std::nullopt;
  return Line{mv - slope * mi, slope};
}

inline std::vector<double> moving_average(std::span<const double> x, std::size_t half) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

inline double median_of(std::span<const double> x, std::size_t begin, std::size_t end) {
  if (end <= begin) return std::numeric_limits<double>::quiet_NaN();
  return median({x.begin() + static_cast<std::ptrdiff_t>(begin), x.begin() + static_cast<std::ptrdiff_t>(end)});
}

struct TopFit {
  double level = 0.0;
  double gain = 0.0;  // squared-error reduction over the bare flank model
};

// argmin_L sum (raw_i - min(ramp_i, L, fall_i))^2 over [begin, end), by
// golden-section search on [lo, hi].
inline TopFit fit_top_level(std::span<const double> raw, std::size_t begin, std::size_t end, const Line& ramp,
                            const Line& fall, double lo, double hi) {
  auto cost = [&](double level) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double t = static_cast<double>(i);
      const double model = std::min({ramp.intercept + ramp.slope * t, level, fall.intercept + fall.slope * t});
      acc += (raw[i] - model) * (raw[i] - model);
    }
    return acc;
  };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = cost(c), fd = cost(d);
  for (int it = 0; it < 80 && b - a > 1e-9; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = cost(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = cost(d);
    }
  }
  const double level = 0.5 * (a + b);
  return {level, cost(std::numeric_limits<double>::infinity()) - cost(level)};
}

inline double residual_variance(std::span<const double> raw, std::span<const std::size_t> idx, const Line& l) {
  if (idx.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i : idx) {
    const double e = raw[i] - (l.intercept + l.slope * static_cast<double>(i));
    acc += e * e;
  }
  return acc / static_cast<double>(idx.size() - 2);
}

inline std::size_t to_index(double pos, std::size_t lo, std::size_t hi) {
  if (!std::isfinite(pos)) return lo;
  const double r = std::round(pos);
  if (r <= static_cast<double>(lo)) return lo;
  if (r >= static_cast<double>(hi)) return hi;
  return static_cast<std::size_t>(r);
}

}  // namespace detail

// Detection follows the 0.5 s moving average: inflation is the first point
// above 5 mmHg rising faster than 5 mmHg/s, its peak the global maximum after
// that, and deflation ends once the trace drops below 5 mmHg again. The
// boundaries are then located on the raw trace by intersecting
// least-squares fits of the ramp and fall flanks with the surrounding
// baseline, plateau or opposite flank, so they land on the kinks of the
// profile instead of at the threshold crossings.
inline PhaseSegmentation segment_pressure_phases(const TimeSeries& pressure) {
  validate(pressure);
  if (pressure.duration_s() < 10.0) fail(Errc::TooShort, "pressure trace shorter than 10 s");
  const auto& raw = pressure.samples;
  for (double p : raw) {
    if (p < kPressureMinPlausible || p > kPressureMaxPlausible) {
      fail(Errc::NotAPressureTrace, "pressure sample outside [-5, 300] mmHg");
    }
  }
  const std::size_t n = raw.size();
  const double rate = pressure.rate_hz;
  const auto half = static_cast<std::size_t>(std::llround(0.25 * rate));
  const auto sm = detail::moving_average(raw, half);
  const std::size_t dk = std::max<std::size_t>(1, half / 2);
  auto slope_at = [&](std::size_t i) {
    const std::size_t lo = i >= dk ? i - dk : 0;
    const std::size_t hi = std::min(n - 1, i + dk);
    return hi > lo ? (sm[hi] - sm[lo]) * rate / static_cast<double>(hi - lo) : 0.0;
  };

  PhaseSegmentation seg;
  std::size_t onset_detect = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (sm[i] > kPhaseOnsetMmHg && slope_at(i) > kPhaseOnsetSlope) {
      onset_detect = i;
      break;
    }
  }
  if (onset_detect == n) {
    seg.phases = {IndexRange{0, n}, IndexRange{n, n}, IndexRange{n, n}};
    return seg;
  }

  const std::size_t peak = static_cast<std::size_t>(
      std::max_element(sm.begin() + static_cast<std::ptrdiff_t>(onset_detect), sm.end()) - sm.begin());
  const double top = sm[peak];

  double base = detail::median_of(raw, 0, onset_detect > 2 * half ? onset_detect - 2 * half : 0);
  if (!std::isfinite(base)) base = *std::min_element(sm.begin(), sm.begin() + static_cast<std::ptrdiff_t>(onset_detect + 1));
  const double rise = top - base;

  std::size_t ramp_from = onset_detect;
  while (ramp_from > 0 && sm[ramp_from - 1] > base + 0.1 * rise) --ramp_from;
  std::vector<std::size_t> ramp_idx;
  for (std::size_t i = ramp_from; i <= peak; ++i) {
    if (sm[i] >= base + 0.2 * rise && sm[i] <= base + 0.8 * rise) ramp_idx.push_back(i);
  }
  const auto ramp = detail::fit_line(raw, ramp_idx);

  std::size_t fall_detect = n;
  for (std::size_t i = peak; i < n; ++i) {
    if (sm[i] < kPhaseOnsetMmHg) {
      fall_detect = i;
      break;
    }
  }

  std::optional<detail::Line> fall;
  double base_end = base;
  {
    const std::size_t stop = fall_detect == n ? n : fall_detect;
    if (fall_detect < n) {
      const std::size_t settle = std::min(n, fall_detect + 2 * half);
      base_end = detail::median_of(raw, settle, n);
      if (!std::isfinite(base_end)) base_end = detail::median_of(raw, fall_detect, n);
    } else {
      base_end = *std::min_element(sm.begin() + static_cast<std::ptrdiff_t>(peak), sm.end());
    }
    const double drop = top - base_end;
    std::vector<std::size_t> fall_idx;
    if (drop > 0.0) {
      for (std::size_t i = peak; i < stop; ++i) {
        if (sm[i] >= base_end + 0.2 * drop && sm[i] <= base_end + 0.8 * drop) fall_idx.push_back(i);
      }
    }
    // A partial fall that never reaches the baseline is still a fall as
    // long as it loses a meaningful fraction of the peak.
    if (fall_detect < n || (drop > 0.5 * rise && fall_idx.size() >= 3)) fall = detail::fit_line(raw, fall_idx);
    if (fall && fall->slope >= 0.0) fall.reset();
  }

  // Plateau: flat stretch near the top of at least 0.5 s.
  std::vector<double> plateau_vals;
  for (std::size_t i = onset_detect; i < std::min(n, fall_detect); ++i) {
    if (sm[i] >= base + 0.9 * rise && std::abs(slope_at(i)) < 2.0) plateau_vals.push_back(raw[i]);
  }
  const bool has_plateau = static_cast<double>(plateau_vals.size()) >= 0.5 * rate;

  std::size_t start2 = ramp ? detail::to_index(ramp->at_level(base), 0, onset_detect) : onset_detect;

  double ramp_end_pos = std::numeric_limits<double>::infinity();
  if (ramp && fall) {
    ramp_end_pos = (fall->intercept - ramp->intercept) / (ramp->slope - fall->slope);
    // Holds too short for the plateau test: fit the top level of
    // min(ramp, level, fall) to the samples between the flank fits. For a
    // pure triangle the level lands above the apex and the flank
    // intersection wins.
    const std::size_t lo = ramp_idx.empty() ? onset_detect : ramp_idx.back();
    const std::size_t hi = std::min(n, fall_detect);
    std::size_t hi_top = peak;
    while (hi_top + 1 < hi && sm[hi_top + 1] >= base_end + 0.8 * (top - base_end)) ++hi_top;
    if (has_plateau) {
      ramp_end_pos = std::min(ramp_end_pos, ramp->at_level(detail::median(plateau_vals)));
    } else if (hi_top > lo + 2) {
      const auto fit = detail::fit_top_level(raw, lo, hi_top + 1, *ramp, *fall, base + 0.8 * rise,
                                             *std::max_element(raw.begin() + static_cast<std::ptrdiff_t>(lo),
                                                               raw.begin() + static_cast<std::ptrdiff_t>(hi_top + 1)));
      // The extra parameter has to pay for itself well beyond the noise.
      const double var = std::max(detail::residual_variance(raw, ramp_idx, *ramp), 1e-12 * rise * rise);
      if (fit.gain > 25.0 * var) ramp_end_pos = std::min(ramp_end_pos, ramp->at_level(fit.level));
    }
  }
  if (ramp && has_plateau && !fall) ramp_end_pos = std::min(ramp_end_pos, ramp->at_level(detail::median(plateau_vals)));
  if (!ramp) ramp_end_pos = static_cast<double>(peak);
  std::size_t end2 = std::isfinite(ramp_end_pos) ? detail::to_index(ramp_end_pos, start2, n) : n;

  std::size_t end3 = n;
  if (fall) end3 = detail::to_index(fall->at_level(base_end), end2, n);
  if (fall_detect < n && !fall) end3 = std::max(end2, fall_detect);
  if (!fall && fall_detect == n && !has_plateau) end3 = end2;

  seg.phases = {IndexRange{0, start2}, IndexRange{start2, end2}, IndexRange{end2, std::max(end2, end3)}};
  return seg;
}

// ---------------------------------------------------------------------------

namespace detail {

inline double slice_strength(std::span<const double> c, std::span<const double> ref, double rate,
                             std::array<double, 2> band) {
  if (c.size() < 2) return 0.0;
  if (std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; })) return 0.0;
  const Spectrum s = cross_spectral_density(c, ref, rate);
  const double high = std::min(band[1], s.freqs_hz.back());
  if (!(band[0] < high)) return 0.0;
  return band_strength(s, {band[0], high});
}

template <class T>
std::span<const T> sub(const std::vector<T>& v, IndexRange r) {
  r.end = std::min(r.end, v.size());
  if (r.empty()) return {};
  return std::span<const T>(v).subspan(r.begin, r.end - r.begin);
}

}  // namespace detail

inline ChannelPhasePower channel_phase_power(const WristRecording& rec, const PhaseSegmentation& seg,
                                             std::array<double, 2> band_hz = {0.5, 20.0}) {
  ChannelPhasePower out(rec.capacitive.size(), std::array<double, 3>{0.0, 0.0, 0.0});
  for (std::size_t c = 0; c < rec.capacitive.size(); ++c) {
    for (std::size_t p = 0; p < 3; ++p) {
      const IndexRange r = seg.phases[p];
      if (r.empty()) continue;
      out[c][p] = detail::slice_strength(detail::sub(rec.capacitive[c].samples, r), detail::sub(rec.ppg.samples, r),
                                         rec.rate_hz(), band_hz);
    }
  }
  return out;
}

// The per-phase computation repeated over fixed-width pressure bins of the
// inflation and deflation phases.
inline std::vector<PressureBinPower> pressure_binned_power(const WristRecording& rec, const PhaseSegmentation& seg,
                                                           double bin_mmHg = 20.0,
                                                           std::array<double, 2> band_hz = {0.5, 20.0}) {
  if (!(bin_mmHg > 0.0)) fail(Errc::InvalidParams, "pressure bin width must be positive");
  const double hi_range = rec.spec.pressure_range_mmHg[1];
  const double lo_range = rec.spec.pressure_range_mmHg[0];
  const auto nbins = static_cast<std::size_t>(std::ceil((hi_range - lo_range) / bin_mmHg));
  std::vector<PressureBinPower> bins;
  const auto& p = rec.pressure.samples;
  for (std::size_t b = 0; b < nbins; ++b) {
    PressureBinPower bin;
    bin.low_mmHg = lo_range + static_cast<double>(b) * bin_mmHg;
    bin.high_mmHg = std::min(hi_range, bin.low_mmHg + bin_mmHg);
    const bool last = b + 1 == nbins;
    for (int which : {1, 2}) {
      const IndexRange phase = seg.phases[static_cast<std::size_t>(which)];
      IndexRange span{phase.end, phase.end};
      for (std::size_t i = phase.begin; i < std::min(phase.end, p.size()); ++i) {
        if (p[i] >= bin.low_mmHg && (p[i] < bin.high_mmHg || (last && p[i] <= bin.high_mmHg))) {
          if (span.begin == phase.end) span.begin = i;
          span.end = i + 1;
        }
      }
      std::vector<double> row(rec.capacitive.size(), 0.0);
      if (!span.empty()) {
        for (std::size_t c = 0; c < rec.capacitive.size(); ++c) {
          row[c] = detail::slice_strength(detail::sub(rec.capacitive[c].samples, span), detail::sub(rec.ppg.samples, span),
                                          rec.rate_hz(), band_hz);
        }
      }
      (which == 1 ? bin.inflation : bin.deflation) = std::move(row);
    }
    bins.push_back(std::move(bin));
  }
  return bins;
}

// Length / width: extent along each axis of the sensors whose strength is at
// least half the maximum. No support at all when every strength is zero.
inline SpatialPulseMap spatial_pulse_map(std::span<const double> strength, const SensorLayout& layout) {
  if (strength.size() != layout.size()) fail(Errc::LayoutMismatch, "layout needs one coordinate per channel");
  SpatialPulseMap map;
  map.sensor_xy_mm = layout;
  map.strength.assign(strength.begin(), strength.end());
  const double peak = strength.empty() ? 0.0 : *std::max_element(strength.begin(), strength.end());
  if (!(peak > 0.0)) return map;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (strength[i] < 0.5 * peak) continue;
    xmin = std::min(xmin, layout[i].x_mm);
    xmax = std::max(xmax, layout[i].x_mm);
    ymin = std::min(ymin, layout[i].y_mm);
    ymax = std::max(ymax, layout[i].y_mm);
  }
  map.length_mm = xmax - xmin;
  map.width_mm = ymax - ymin;
  return map;
}

inline SpatialPulseMap spatial_pulse_map(const WristRecording& rec, const SensorLayout& layout,
                                         std::array<double, 2> band_hz = {0.5, 20.0}) {
  if (layout.size() != rec.capacitive.size()) fail(Errc::LayoutMismatch, "layout needs one coordinate per channel");
  std::vector<double> strength;
  for (const auto& c : rec.capacitive) strength.push_back(detail::slice_strength(c.samples, rec.ppg.samples, rec.rate_hz(), band_hz));
  return spatial_pulse_map(strength, layout);
}

inline std::vector<TimelinePoint> power_timeline(std::span<const double> c, std::span<const double> ref, double rate,
                                                 double window_s, double overlap, std::array<double, 2> band) {
  const auto win = static_cast<std::size_t>(std::llround(window_s * rate));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_s * (1.0 - overlap) * rate)));
  std::vector<TimelinePoint> out;
  if (win < 2 || c.size() < win) return out;
  for (std::size_t start = 0; start + win <= c.size(); start += hop) {
    TimelinePoint pt;
    pt.t_s = (static_cast<double>(start) + static_cast<double>(win) / 2.0) / rate;
    pt.strength = detail::slice_strength(c.subspan(start, win), ref.subspan(start, win), rate, band);
    out.push_back(pt);
  }
  return out;
}

inline PulseFeatures extract_pulse_features(const WristRecording& input, const SensorLayout& layout,
                                            const PulseOptions& opt = {}) {
  validate(input);
  if (layout.size() != input.capacitive.size()) fail(Errc::LayoutMismatch, "layout needs one coordinate per channel");
  WristRecording rec = input;
  if (opt.prefilter) {
    const double cutoff = rec.spec.lowpass_cutoff_hz;
    for (auto& c : rec.capacitive) c = lowpass_filter(c, cutoff);
    rec.ppg = lowpass_filter(rec.ppg, cutoff);
  }
  PulseFeatures f;
  f.heart_rate_bpm = estimate_heart_rate(rec.ppg);

  const TimeSeries ref = detrend(rec.ppg);
  for (const auto& c : rec.capacitive) {
    f.channel_strength.push_back(detail::slice_strength(c.samples, rec.ppg.samples, rec.rate_hz(), opt.band_hz));
    const LagEstimate lag = lag_time(ref, detrend(c), opt.max_lag_s);
    f.lag_s.push_back(lag.lag_s);
    f.lag_confidence.push_back(lag.confidence);
    f.power_timeline.push_back(
        power_timeline(c.samples, rec.ppg.samples, rec.rate_hz(), opt.window_s, opt.window_overlap, opt.band_hz));
  }
  f.segmentation = segment_pressure_phases(rec.pressure);
  f.phase_power = channel_phase_power(rec, f.segmentation, opt.band_hz);
  f.pressure_bins = pressure_binned_power(rec, f.segmentation, opt.pressure_bin_mmHg, opt.band_hz);
  f.spatial_map = spatial_pulse_map(f.channel_strength, layout);
  return f;
}

}  // namespace mizaj
