#pragma once

// Uniformly sampled time-series primitives shared by all analysis:
// validation, zero-phase Butterworth filtering, detrending, and the
// biased cross-correlation estimator.
//
// Lag sign convention (used everywhere in the library): a positive lag
// means the second argument is DELAYED relative to the first.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mizaj/detail/numfmt.hpp"
#include "mizaj/error.hpp"

namespace mizaj {

struct TimeSeries {
  std::vector<double> samples;
  double rate_hz = 0.0;
  std::string label;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept { return rate_hz > 0 ? static_cast<double>(samples.size()) / rate_hz : 0.0; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

struct AcquisitionSpec {
  double rate_hz = 200.0;
  double lowpass_cutoff_hz = 20.0;
  double duration_s = 60.0;
  std::array<double, 2> pressure_range_mmHg{0.0, 180.0};

  friend bool operator==(const AcquisitionSpec&, const AcquisitionSpec&) = default;
};

struct WristRecording {
  std::vector<TimeSeries> capacitive;  // C_1..C_n
  TimeSeries ppg;
  TimeSeries pressure;  // mmHg
  AcquisitionSpec spec;

  std::size_t num_samples() const noexcept { return ppg.size(); }
  double rate_hz() const noexcept { return ppg.rate_hz; }

  friend bool operator==(const WristRecording&, const WristRecording&) = default;
};

struct CorrelationFunction {
  std::vector<double> lags_s;
  std::vector<double> values;
};

inline constexpr double kPressureMinPlausible = -5.0;
inline constexpr double kPressureMaxPlausible = 300.0;

inline void validate(const TimeSeries& ts) {
  if (!(ts.rate_hz > 0.0) || !std::isfinite(ts.rate_hz)) {
    fail(Errc::MismatchedRate, "series '" + ts.label + "' has non-positive rate");
  }
  if (ts.samples.empty()) fail(Errc::TooShort, "series '" + ts.label + "' is empty");
  for (std::size_t i = 0; i < ts.samples.size(); ++i) {
    if (!std::isfinite(ts.samples[i])) {
      fail(Errc::NonFiniteSample, "series '" + ts.label + "' sample " + std::to_string(i));
    }
  }
}

inline void validate(const AcquisitionSpec& spec) {
  if (!(spec.rate_hz > 0.0)) fail(Errc::InvalidSpec, "rate_hz must be positive");
  if (!(spec.lowpass_cutoff_hz > 0.0 && spec.lowpass_cutoff_hz < spec.rate_hz / 2)) {
    fail(Errc::InvalidSpec, "lowpass cutoff must lie in (0, rate/2)");
  }
  if (!(spec.duration_s >= 60.0 && spec.duration_s <= 90.0)) {
    fail(Errc::InvalidSpec, "duration_s must lie in [60, 90]");
  }
  if (!(spec.pressure_range_mmHg[0] < spec.pressure_range_mmHg[1])) {
    fail(Errc::InvalidSpec, "pressure range low must be below high");
  }
}

inline void validate(const WristRecording& rec) {
  validate(rec.spec);
  if (rec.capacitive.empty()) fail(Errc::TooShort, "recording has no capacitive channels");
  validate(rec.ppg);
  validate(rec.pressure);
  auto check = [&](const TimeSeries& ts) {
    validate(ts);
    if (ts.rate_hz != rec.ppg.rate_hz) fail(Errc::MismatchedRate, "channel '" + ts.label + "'");
    if (ts.size() != rec.ppg.size()) fail(Errc::MismatchedLength, "channel '" + ts.label + "'");
  };
  for (const auto& c : rec.capacitive) check(c);
  check(rec.pressure);
  if (rec.ppg.rate_hz != rec.spec.rate_hz) fail(Errc::MismatchedRate, "series rate differs from acquisition spec");
  for (double p : rec.pressure.samples) {
    if (p < kPressureMinPlausible || p > kPressureMaxPlausible) {
      fail(Errc::NotAPressureTrace, "pressure sample outside [-5, 300] mmHg");
    }
  }
}

inline WristRecording make_recording(std::vector<TimeSeries> capacitive, TimeSeries ppg, TimeSeries pressure,
                                     AcquisitionSpec spec = {}) {
  WristRecording rec{std::move(capacitive), std::move(ppg), std::move(pressure), spec};
  validate(rec);
  return rec;
}

// ---------------------------------------------------------------------------
// Filtering

namespace detail {

// One second-order section, transposed direct form II.
struct Biquad {
  double b0, b1, b2, a1, a2;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

enum class PassKind { Low, High };

// Butterworth of order 4 as two bilinear biquads (pre-warped at cutoff).
inline std::array<Biquad, 2> butterworth4(double cutoff_hz, double rate_hz, PassKind kind) {
  std::array<Biquad, 2> out{};
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate_hz;
  const double cw = std::cos(w0);
  const double sw = std::sin(w0);
  for (int k = 0; k < 2; ++k) {
    const double q = 1.0 / (2.0 * std::cos(std::numbers::pi * (2 * k + 1) / 8.0));
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s{};
    if (kind == PassKind::Low) {
      s.b0 = (1.0 - cw) / 2.0 / a0;
      s.b1 = (1.0 - cw) / a0;
      s.b2 = s.b0;
    } else {
      s.b0 = (1.0 + cw) / 2.0 / a0;
      s.b1 = -(1.0 + cw) / a0;
      s.b2 = s.b0;
    }
    s.a1 = -2.0 * cw / a0;
    s.a2 = (1.0 - alpha) / a0;
    out[static_cast<std::size_t>(k)] = s;
  }
  return out;
}

// Runs the cascade in place, with section states initialised to the
// steady state for a constant input equal to x[0].
inline void run_cascade(std::span<const Biquad> sections, std::span<double> x) {
  if (x.empty()) return;
  double level = x[0];
  for (const Biquad& s : sections) {
    const double g = s.dc_gain();
    const double y0 = g * level;
    double z2 = s.b2 * level - s.a2 * y0;
    double z1 = s.b1 * level - s.a1 * y0 + z2;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level = y0;
  }
}

// Forward-backward application over a mirrored extension (edge sample not
// repeated).
inline std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n < 2) return {x.begin(), x.end()};
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(x[n - 1 - i]);

  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// Reflection length: four periods of the cutoff frequency.
inline std::size_t filter_pad(double cutoff_hz, double rate_hz) {
  return static_cast<std::size_t>(std::ceil(4.0 * rate_hz / cutoff_hz));
}

}  // namespace detail

inline TimeSeries lowpass_filter(const TimeSeries& ts, double cutoff_hz) {
  validate(ts);
  if (!(cutoff_hz > 0.0 && cutoff_hz < ts.rate_hz / 2)) {
    fail(Errc::InvalidCutoff, "cutoff must lie in (0, rate/2)");
  }
  auto sections = detail::butterworth4(cutoff_hz, ts.rate_hz, detail::PassKind::Low);
  return {detail::filtfilt(sections, ts.samples, detail::filter_pad(cutoff_hz, ts.rate_hz)), ts.rate_hz, ts.label};
}

inline TimeSeries highpass_filter(const TimeSeries& ts, double cutoff_hz) {
  validate(ts);
  if (!(cutoff_hz > 0.0 && cutoff_hz < ts.rate_hz / 2)) {
    fail(Errc::InvalidCutoff, "cutoff must lie in (0, rate/2)");
  }
  auto sections = detail::butterworth4(cutoff_hz, ts.rate_hz, detail::PassKind::High);
  return {detail::filtfilt(sections, ts.samples, detail::filter_pad(cutoff_hz, ts.rate_hz)), ts.rate_hz, ts.label};
}

inline TimeSeries bandpass_filter(const TimeSeries& ts, double low_hz, double high_hz) {
  if (!(low_hz < high_hz)) fail(Errc::InvalidCutoff, "band low must be below high");
  return lowpass_filter(highpass_filter(ts, low_hz), high_hz);
}

// ---------------------------------------------------------------------------

inline std::vector<double> detrend(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) fail(Errc::TooShort, "detrend needs at least 2 samples");
  // Centre the abscissa so the slope and intercept decouple.
  const double tc = (static_cast<double>(n) - 1.0) / 2.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - tc;
    sxy += t * (x[i] - mean);
    sxx += t * t;
  }
  const double slope = sxy / sxx;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - mean - slope * (static_cast<double>(i) - tc);
  return out;
}

inline TimeSeries detrend(const TimeSeries& ts) {
  validate(ts);
  return {detrend(std::span<const double>(ts.samples)), ts.rate_hz, ts.label};
}

namespace detail {

// R[l] for integer lags -max_lag..max_lag: (1/N) sum_n x[n] y[n+l].
inline std::vector<double> biased_xcorr(std::span<const double> x, std::span<const double> y, std::ptrdiff_t max_lag) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> r(static_cast<std::size_t>(2 * max_lag + 1), 0.0);
  for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -lag);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, n - lag);
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) acc += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i + lag)];
    r[static_cast<std::size_t>(lag + max_lag)] = acc / static_cast<double>(n);
  }
  return r;
}

inline void check_pair(const TimeSeries& x, const TimeSeries& y) {
  validate(x);
  validate(y);
  if (x.rate_hz != y.rate_hz) fail(Errc::MismatchedRate, "'" + x.label + "' vs '" + y.label + "'");
  if (x.size() != y.size()) fail(Errc::MismatchedLength, "'" + x.label + "' vs '" + y.label + "'");
}

inline std::ptrdiff_t lag_samples(const TimeSeries& x, double max_lag_s) {
  if (!(max_lag_s >= 0.0) || !(max_lag_s < x.duration_s())) {
    fail(Errc::LagTooLarge, "max lag must lie in [0, duration)");
  }
  auto l = static_cast<std::ptrdiff_t>(std::floor(max_lag_s * x.rate_hz + 1e-9));
  return std::min<std::ptrdiff_t>(l, static_cast<std::ptrdiff_t>(x.size()) - 1);
}

}  // namespace detail

inline CorrelationFunction cross_correlation(const TimeSeries& x, const TimeSeries& y, double max_lag_s) {
  detail::check_pair(x, y);
  const auto max_lag = detail::lag_samples(x, max_lag_s);
  CorrelationFunction cf;
  cf.values = detail::biased_xcorr(x.samples, y.samples, max_lag);
  cf.lags_s.reserve(cf.values.size());
  for (std::ptrdiff_t l = -max_lag; l <= max_lag; ++l) cf.lags_s.push_back(static_cast<double>(l) / x.rate_hz);
  return cf;
}

// ---------------------------------------------------------------------------
// Signal CSV: header `t,c1,...,cK,ppg,pressure`, one row per sample.

// Channels shorter than the longest one leave trailing cells blank, so a
// malformed recording round-trips unchanged and fails later at validation.
inline void write_signal_csv(std::ostream& os, const WristRecording& rec) {
  std::string line = "t";
  for (std::size_t i = 0; i < rec.capacitive.size(); ++i) line += ",c" + std::to_string(i + 1);
  line += ",ppg,pressure\n";
  os << line;
  std::size_t n = std::max(rec.ppg.size(), rec.pressure.size());
  for (const auto& c : rec.capacitive) n = std::max(n, c.size());
  const double rate = rec.ppg.rate_hz > 0 ? rec.ppg.rate_hz : rec.spec.rate_hz;
  auto cell = [&line](const TimeSeries& ts, std::size_t s) {
    if (s < ts.size()) detail::append_double(line, ts.samples[s]);
  };
  for (std::size_t s = 0; s < n; ++s) {
    line.clear();
    detail::append_fixed(line, static_cast<double>(s) / rate, 6);
    for (const auto& c : rec.capacitive) {
      line += ',';
      cell(c, s);
    }
    line += ',';
    cell(rec.ppg, s);
    line += ',';
    cell(rec.pressure, s);
    line += '\n';
    os << line;
  }
}

inline std::string signal_csv(const WristRecording& rec) {
  std::ostringstream os;
  write_signal_csv(os, rec);
  return os.str();
}

// Parses the signal CSV. When rate_hz is 0 the rate is inferred from the
// t column (requires at least two rows).
inline WristRecording read_signal_csv(std::istream& is, double rate_hz = 0.0, AcquisitionSpec spec = {}) {
  std::string line;
  if (!std::getline(is, line)) fail(Errc::ParseError, "empty signal file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 4 || header.front() != "t" || header[header.size() - 2] != "ppg" || header.back() != "pressure") {
    fail(Errc::ParseError, "bad signal header: " + line);
  }
  const std::size_t nc = header.size() - 3;
  for (std::size_t i = 0; i < nc; ++i) {
    if (header[i + 1] != "c" + std::to_string(i + 1)) fail(Errc::ParseError, "bad channel column " + header[i + 1]);
  }
  std::vector<std::vector<double>> cols(header.size());
  std::vector<bool> ended(header.size(), false);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    std::size_t col = 0, start = 0;
    std::string_view sv(line);
    while (true) {
      auto pos = sv.find(',', start);
      auto cell = sv.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
      if (col >= cols.size()) fail(Errc::ParseError, "too many columns on row " + std::to_string(row));
      if (cell.empty() || cell == "\r") {
        ended[col] = true;
      } else {
        if (ended[col]) fail(Errc::ParseError, "gap in column " + header[col]);
        cols[col].push_back(detail::parse_double(cell));
      }
      ++col;
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (col != cols.size()) fail(Errc::ParseError, "too few columns on row " + std::to_string(row));
  }
  if (rate_hz <= 0.0) {
    const auto& t = cols[0];
    if (t.size() < 2 || !(t.back() > t.front())) fail(Errc::ParseError, "cannot infer rate from t column");
    rate_hz = static_cast<double>(t.size() - 1) / (t.back() - t.front());
    rate_hz = std::round(rate_hz * 1e6) / 1e6;
  }
  WristRecording rec;
  rec.spec = spec;
  for (std::size_t i = 0; i < nc; ++i) rec.capacitive.push_back({std::move(cols[i + 1]), rate_hz, "c" + std::to_string(i + 1)});
  rec.ppg = {std::move(cols[nc + 1]), rate_hz, "ppg"};
  rec.pressure = {std::move(cols[nc + 2]), rate_hz, "pressure"};
  return rec;
}

// ---------------------------------------------------------------------------
// Small shared helpers.

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline TimeSeries slice(const TimeSeries& ts, std::size_t begin, std::size_t end) {
  end = std::min(end, ts.size());
  begin = std::min(begin, end);
  return {{ts.samples.begin() + static_cast<std::ptrdiff_t>(begin), ts.samples.begin() + static_cast<std::ptrdiff_t>(end)},
          ts.rate_hz,
          ts.label};
}

}  // namespace mizaj
