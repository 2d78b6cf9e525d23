#pragma once

// Temperament features from thermal frames of a region of interest.
//
// warm/cold (13): pooled spatial statistics of the last frame plus the
// temporal spread and trend of per-frame means.
// dry/wet (12): texture and distribution of a single ROI frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mizaj/detail/numfmt.hpp"
#include "mizaj/error.hpp"

namespace mizaj {

struct ThermalFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> temps_c;  // row-major, height rows of width
  double captured_at_s = 0.0;

  double at(std::size_t x, std::size_t y) const { return temps_c[y * width + x]; }
  friend bool operator==(const ThermalFrame&, const ThermalFrame&) = default;
};

enum class RegionKind { WristMalmas, HandBack, Face };

constexpr std::string_view region_name(RegionKind k) {
  switch (k) {
    case RegionKind::WristMalmas: return "wrist_malmas";
    case RegionKind::HandBack: return "hand_back";
    case RegionKind::Face: return "face";
  }
  return "wrist_malmas";
}

inline RegionKind parse_region(std::string_view s) {
  if (s == "wrist_malmas") return RegionKind::WristMalmas;
  if (s == "hand_back") return RegionKind::HandBack;
  if (s == "face") return RegionKind::Face;
  fail(Errc::ParseError, "unknown region kind '" + std::string(s) + "'");
}

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Roi {
  RegionKind region_kind = RegionKind::WristMalmas;
  std::array<std::size_t, 4> rect{0, 0, 0, 0};
  friend bool operator==(const Roi&, const Roi&) = default;
};

enum class FeatureKind { WarmCold, DryWet };

struct FeatureVector {
  FeatureKind kind = FeatureKind::WarmCold;
  std::vector<std::string> names;
  std::vector<double> values;
  bool single_frame = false;  // temporal entries are zero by construction

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline constexpr std::size_t kWarmColdCount = 13;
inline constexpr std::size_t kDryWetCount = 12;
inline constexpr std::size_t kHistogramBins = 16;
inline constexpr std::size_t kQuantLevels = 16;
inline constexpr double kMinSkinTempC = 0.0;
inline constexpr double kMaxSkinTempC = 50.0;

inline const std::vector<std::string>& warm_cold_names() {
  static const std::vector<std::string> names = {"mean", "median", "std",      "min",      "max",
                                                 "range", "p10",   "p90",      "iqr",      "skewness",
                                                 "kurtosis", "temporal_std", "temporal_slope"};
  return names;
}

inline const std::vector<std::string>& dry_wet_names() {
  static const std::vector<std::string> names = {
      "gradient_mean",      "gradient_std",      "histogram_entropy", "histogram_uniformity",
      "cooccurrence_contrast", "cooccurrence_homogeneity", "coefficient_of_variation", "mode_concentration",
      "hot_region_count",   "edge_density",      "lr_asymmetry",      "smoothness"};
  return names;
}

inline void validate(const ThermalFrame& f) {
  if (f.width == 0 || f.height == 0) fail(Errc::InvalidSize, "frame must be non-empty");
  if (f.temps_c.size() != f.width * f.height) fail(Errc::DimensionMismatch, "grid size differs from width x height");
  for (double t : f.temps_c) {
    if (!std::isfinite(t)) fail(Errc::NonFiniteSample, "non-finite temperature");
    if (t < kMinSkinTempC || t > kMaxSkinTempC) fail(Errc::ImplausibleFrame, "temperature outside [0, 50] C");
  }
}

inline ThermalFrame extract_roi(const ThermalFrame& frame, const Roi& roi) {
  validate(frame);
  const auto [x0, y0, x1, y1] = roi.rect;
  if (!(x0 < x1 && y0 < y1 && x1 <= frame.width && y1 <= frame.height)) {
    fail(Errc::OutOfBounds, "ROI outside frame or empty");
  }
  ThermalFrame out;
  out.width = x1 - x0;
  out.height = y1 - y0;
  out.captured_at_s = frame.captured_at_s;
  out.temps_c.reserve(out.width * out.height);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) out.temps_c.push_back(frame.at(x, y));
  }
  return out;
}

namespace detail {

struct Moments {
  double mean = 0, var = 0, skew = 0, kurt = 0;
};

inline Moments moments(std::span<const double> v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.var = m2;
  if (m2 > 0.0) {
    m.skew = m3 / std::pow(m2, 1.5);
    m.kurt = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

inline double quantile_sorted(std::span<const double> s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline std::size_t quantize(double v, double lo, double hi, std::size_t levels) {
  if (!(hi > lo)) return 0;
  const auto q = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(levels)));
  return std::min(q, levels - 1);
}

}  // namespace detail

inline FeatureVector warm_cold_features(std::span<const ThermalFrame> frames) {
  if (frames.empty()) fail(Errc::EmptyInput, "need at least one frame");
  for (const auto& f : frames) {
    validate(f);
    if (f.width != frames.front().width || f.height != frames.front().height) {
      fail(Errc::DimensionMismatch, "all frames must share dimensions");
    }
  }
  const ThermalFrame& last = frames.back();
  std::vector<double> sorted = last.temps_c;
  std::sort(sorted.begin(), sorted.end());
  const auto m = detail::moments(sorted);
  const double p10 = detail::quantile_sorted(sorted, 0.10);
  const double p25 = detail::quantile_sorted(sorted, 0.25);
  const double p75 = detail::quantile_sorted(sorted, 0.75);
  const double p90 = detail::quantile_sorted(sorted, 0.90);

  double temporal_std = 0.0, temporal_slope = 0.0;
  if (frames.size() > 1) {
    std::vector<double> means;
    for (const auto& f : frames) means.push_back(detail::moments(f.temps_c).mean);
    temporal_std = std::sqrt(detail::moments(means).var);
    const double tc = (static_cast<double>(means.size()) - 1.0) / 2.0;
    const double mu = detail::moments(means).mean;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
      const double t = static_cast<double>(i) - tc;
      sxy += t * (means[i] - mu);
      sxx += t * t;
    }
    temporal_slope = sxy / sxx;
  }

  FeatureVector fv;
  fv.kind = FeatureKind::WarmCold;
  fv.names = warm_cold_names();
  fv.values = {m.mean,
               detail::quantile_sorted(sorted, 0.5),
               std::sqrt(m.var),
               sorted.front(),
               sorted.back(),
               sorted.back() - sorted.front(),
               p10,
               p90,
               p75 - p25,
               m.skew,
               m.kurt,
               temporal_std,
               temporal_slope};
  fv.single_frame = frames.size() == 1;
  return fv;
}

inline FeatureVector warm_cold_features(const ThermalFrame& frame) { return warm_cold_features(std::span(&frame, 1)); }

inline constexpr std::size_t kMinDryWetSide = 8;
inline constexpr double kEdgeThresholdC = 0.5;  // C per pixel
inline constexpr double kModeHalfWidthC = 0.5;

// Forward differences, backward on the last row / column.
inline std::vector<double> gradient_magnitude(const ThermalFrame& f) {
  std::vector<double> g(f.width * f.height);
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < f.width; ++x) {
      double gx = 0.0, gy = 0.0;
      if (f.width > 1) gx = x + 1 < f.width ? f.at(x + 1, y) - f.at(x, y) : f.at(x, y) - f.at(x - 1, y);
      if (f.height > 1) gy = y + 1 < f.height ? f.at(x, y + 1) - f.at(x, y) : f.at(x, y) - f.at(x, y - 1);
      g[y * f.width + x] = std::hypot(gx, gy);
    }
  }
  return g;
}

// 4-connected components of the mask.
inline std::size_t count_components(const std::vector<char>& mask, std::size_t w, std::size_t h) {
  std::vector<char> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || seen[i]) continue;
    ++count;
    seen[i] = 1;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t x = p % w, y = p / w;
      auto visit = [&](std::size_t q) {
        if (mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
    }
  }
  return count;
}

inline FeatureVector dry_wet_features(const ThermalFrame& f) {
  validate(f);
  if (f.width < kMinDryWetSide || f.height < kMinDryWetSide) fail(Errc::RoiTooSmall, "dry/wet features need >= 8x8");
  const auto& t = f.temps_c;
  const auto m = detail::moments(t);
  const double sd = std::sqrt(m.var);
  const auto [lo_it, hi_it] = std::minmax_element(t.begin(), t.end());
  const double lo = *lo_it, hi = *hi_it;
  const double npix = static_cast<double>(t.size());

  const auto grad = gradient_magnitude(f);
  const auto gm = detail::moments(grad);
  double edges = 0.0;
  for (double g : grad) edges += g > kEdgeThresholdC ? 1.0 : 0.0;

  std::array<double, kHistogramBins> hist{};
  for (double v : t) hist[detail::quantize(v, lo, hi, kHistogramBins)] += 1.0;
  double entropy = 0.0, uniformity = 0.0;
  for (double c : hist) {
    if (c == 0.0) continue;
    const double p = c / npix;
    entropy -= p * std::log2(p);
    uniformity += p * p;
  }
  entropy = std::max(0.0, entropy);
  const auto mode_bin = static_cast<std::size_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
  const double bin_w = (hi - lo) / static_cast<double>(kHistogramBins);
  const double mode = lo + (static_cast<double>(mode_bin) + 0.5) * bin_w;
  double near_mode = 0.0;
  for (double v : t) near_mode += std::abs(v - mode) <= kModeHalfWidthC ? 1.0 : 0.0;

  double contrast = 0.0, homogeneity = 0.0, pairs = 0.0;
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x + 1 < f.width; ++x) {
      const auto i = static_cast<double>(detail::quantize(f.at(x, y), lo, hi, kQuantLevels));
      const auto j = static_cast<double>(detail::quantize(f.at(x + 1, y), lo, hi, kQuantLevels));
      contrast += (i - j) * (i - j);
      homogeneity += 1.0 / (1.0 + std::abs(i - j));
      pairs += 1.0;
    }
  }
  contrast /= pairs;
  homogeneity /= pairs;

  std::size_t hot = 0;
  if (sd > 0.0) {
    std::vector<char> mask(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) mask[i] = t[i] >= m.mean + sd ? 1 : 0;
    hot = count_components(mask, f.width, f.height);
  }

  // Odd widths leave the middle column out of both halves.
  const std::size_t half = f.width / 2;
  double left = 0.0, right = 0.0;
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < half; ++x) {
      left += f.at(x, y);
      right += f.at(f.width - 1 - x, y);
    }
  }
  const double per_half = static_cast<double>(half * f.height);
  const double asym = std::abs(left / per_half - right / per_half);

  FeatureVector fv;
  fv.kind = FeatureKind::DryWet;
  fv.names = dry_wet_names();
  fv.values = {gm.mean,
               std::sqrt(gm.var),
               entropy,
               uniformity,
               contrast,
               homogeneity,
               m.mean != 0.0 ? sd / m.mean : 0.0,
               near_mode / npix,
               static_cast<double>(hot),
               edges / npix,
               asym,
               1.0 - 1.0 / (1.0 + m.var)};
  return fv;
}

// ---------------------------------------------------------------------------
// ASCII matrix: first line `width height`, then height rows of width values.

inline void write_frame_matrix(std::ostream& os, const ThermalFrame& f) {
  std::string line = std::to_string(f.width) + " " + std::to_string(f.height) + "\n";
  os << line;
  for (std::size_t y = 0; y < f.height; ++y) {
    line.clear();
    for (std::size_t x = 0; x < f.width; ++x) {
      if (x) line += ' ';
      detail::append_double(line, f.temps_c[y * f.width + x]);
    }
    line += '\n';
    os << line;
  }
}

inline ThermalFrame read_frame_matrix(std::istream& is, double captured_at_s = 0.0) {
  ThermalFrame f;
  f.captured_at_s = captured_at_s;
  std::string line;
  if (!std::getline(is, line)) fail(Errc::ParseError, "empty frame file");
  {
    std::istringstream hs(line);
    if (!(hs >> f.width >> f.height)) fail(Errc::ParseError, "bad frame header");
  }
  f.temps_c.reserve(f.width * f.height);
  std::size_t rows = 0;
  while (rows < f.height && std::getline(is, line)) {
    std::string_view sv(line);
    std::size_t cols = 0, pos = 0;
    while (pos < sv.size()) {
      while (pos < sv.size() && (sv[pos] == ' ' || sv[pos] == '\r')) ++pos;
      if (pos >= sv.size()) break;
      std::size_t end = sv.find(' ', pos);
      if (end == std::string_view::npos) end = sv.size();
      f.temps_c.push_back(detail::parse_double(sv.substr(pos, end - pos)));
      ++cols;
      pos = end;
    }
    if (cols != f.width) fail(Errc::ParseError, "frame row " + std::to_string(rows) + " has wrong width");
    ++rows;
  }
  if (rows != f.height) fail(Errc::ParseError, "frame has too few rows");
  return f;
}

}  // namespace mizaj
