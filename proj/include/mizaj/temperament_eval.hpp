#pragma once

// Temperament labels, questionnaire scoring and the evaluation math:
// confusion-matrix metrics, Pearson correlation, K-fold splitting and
// cross-validation of any fit/predict classifier.

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mizaj/error.hpp"

namespace mizaj {

enum class WarmAxis { Warm, Moderate, Cold };
enum class WetAxis { Dry, Moderate, Wet };

struct TemperamentLabel {
  WarmAxis warm_axis = WarmAxis::Moderate;
  WetAxis wet_axis = WetAxis::Moderate;
  friend bool operator==(const TemperamentLabel&, const TemperamentLabel&) = default;
};

constexpr std::string_view to_string(WarmAxis a) {
  switch (a) {
    case WarmAxis::Warm: return "warm";
    case WarmAxis::Moderate: return "moderate";
    case WarmAxis::Cold: return "cold";
  }
  return "moderate";
}

constexpr std::string_view to_string(WetAxis a) {
  switch (a) {
    case WetAxis::Dry: return "dry";
    case WetAxis::Moderate: return "moderate";
    case WetAxis::Wet: return "wet";
  }
  return "moderate";
}

inline WarmAxis parse_warm_axis(std::string_view s) {
  if (s == "warm") return WarmAxis::Warm;
  if (s == "moderate") return WarmAxis::Moderate;
  if (s == "cold") return WarmAxis::Cold;
  fail(Errc::ParseError, "unknown warm-axis label '" + std::string(s) + "'");
}

inline WetAxis parse_wet_axis(std::string_view s) {
  if (s == "dry") return WetAxis::Dry;
  if (s == "moderate") return WetAxis::Moderate;
  if (s == "wet") return WetAxis::Wet;
  fail(Errc::ParseError, "unknown wet-axis label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Questionnaire

enum class MmqAxis { Warm, Wet };

struct MmqItem {
  std::string id;
  MmqAxis axis = MmqAxis::Warm;
  double weight = 1.0;
  friend bool operator==(const MmqItem&, const MmqItem&) = default;
};

struct MmqSchema {
  std::string version = "mmq-config-1";
  std::vector<MmqItem> items;
  std::array<double, 2> warm_thresholds{0.33, 0.66};
  std::array<double, 2> wet_thresholds{0.33, 0.66};
  friend bool operator==(const MmqSchema&, const MmqSchema&) = default;
};

// item id -> score in [0, 1]
using MmqResponse = std::map<std::string, double>;

inline MmqSchema default_mmq_schema(std::size_t items_per_axis = 10) {
  MmqSchema s;
  for (std::size_t i = 0; i < items_per_axis; ++i) s.items.push_back({"warm_" + std::to_string(i + 1), MmqAxis::Warm, 1.0});
  for (std::size_t i = 0; i < items_per_axis; ++i) s.items.push_back({"wet_" + std::to_string(i + 1), MmqAxis::Wet, 1.0});
  return s;
}

struct MmqScores {
  double warm = 0.0;
  double wet = 0.0;
};

inline MmqScores mmq_axis_scores(const MmqSchema& schema, const MmqResponse& resp) {
  if (resp.size() != schema.items.size()) fail(Errc::SchemaMismatch, "response does not cover the schema exactly");
  double num[2] = {0, 0}, den[2] = {0, 0};
  std::set<std::string> seen;
  for (const auto& item : schema.items) {
    if (!seen.insert(item.id).second) fail(Errc::SchemaMismatch, "duplicate schema item " + item.id);
    auto it = resp.find(item.id);
    if (it == resp.end()) fail(Errc::SchemaMismatch, "missing response for " + item.id);
    if (!(it->second >= 0.0 && it->second <= 1.0)) fail(Errc::SchemaMismatch, "score out of [0, 1] for " + item.id);
    const int a = item.axis == MmqAxis::Warm ? 0 : 1;
    num[a] += item.weight * it->second;
    den[a] += item.weight;
  }
  if (den[0] <= 0.0 || den[1] <= 0.0) fail(Errc::SchemaMismatch, "each axis needs positive total weight");
  return {num[0] / den[0], num[1] / den[1]};
}

inline TemperamentLabel score_mmq(const MmqSchema& schema, const MmqResponse& resp) {
  for (const auto& t : {schema.warm_thresholds, schema.wet_thresholds}) {
    if (!(t[0] < t[1])) fail(Errc::SchemaMismatch, "thresholds must satisfy low < high");
  }
  const MmqScores s = mmq_axis_scores(schema, resp);
  TemperamentLabel label;
  label.warm_axis = s.warm < schema.warm_thresholds[0]   ? WarmAxis::Cold
                    : s.warm > schema.warm_thresholds[1] ? WarmAxis::Warm
                                                         : WarmAxis::Moderate;
  label.wet_axis = s.wet < schema.wet_thresholds[0]   ? WetAxis::Dry
                   : s.wet > schema.wet_thresholds[1] ? WetAxis::Wet
                                                      : WetAxis::Moderate;
  return label;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics

struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// An exact ratio; a zero denominator is the undefined marker.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const noexcept { return den != 0; }
  std::optional<double> value() const {
    if (!defined()) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct Metrics {
  Ratio accuracy;
  Ratio sensitivity;
  Ratio specificity;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

template <class Label>
ConfusionMatrix confusion_matrix(std::span<const Label> pred, std::span<const Label> truth, const Label& positive) {
  if (pred.size() != truth.size()) fail(Errc::LengthMismatch, "predictions and truth differ in length");
  if (pred.empty()) fail(Errc::EmptyInput, "no predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive;
    const bool t = truth[i] == positive;
    if (p && t) ++cm.tp;
    else if (!p && !t) ++cm.tn;
    else if (p) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

template <class Label>
ConfusionMatrix confusion_matrix(const std::vector<Label>& pred, const std::vector<Label>& truth, const Label& positive) {
  return confusion_matrix(std::span<const Label>(pred), std::span<const Label>(truth), positive);
}

inline Metrics metrics(const ConfusionMatrix& cm) {
  return {Ratio{cm.tp + cm.tn, cm.total()}, Ratio{cm.tp, cm.tp + cm.fn}, Ratio{cm.tn, cm.fp + cm.tn}};
}

// ---------------------------------------------------------------------------

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(Errc::LengthMismatch, "pearson_r needs equal lengths");
  if (x.size() < 2) fail(Errc::TooShort, "pearson_r needs at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(Errc::ZeroVariance, "pearson_r undefined for a constant vector");
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// K-fold

// Fisher-Yates with an explicit generator so splits are identical across
// standard libraries.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) fail(Errc::BadK, "need 2 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  const auto perm = seeded_permutation(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// ---------------------------------------------------------------------------
// Classifiers

using FeatureMatrix = std::vector<std::vector<double>>;

template <class C>
concept Classifier = requires(C c, const C cc, const FeatureMatrix& x, const std::vector<int>& y, std::span<const double> row) {
  c.fit(x, y);
  { cc.predict(row) } -> std::convertible_to<int>;
};

// Per-class centroids in z-scored feature space (scaling from the training
// set). Ties go to the class seen first in training.
class NearestCentroid {
 public:
  // A failed fit leaves the model unfitted.
  void fit(const FeatureMatrix& x, const std::vector<int>& y) {
    *this = NearestCentroid{};
    if (x.size() != y.size()) fail(Errc::LengthMismatch, "features and labels differ in length");
    if (x.empty()) fail(Errc::EmptyInput, "empty training set");
    const std::size_t dim = x.front().size();
    for (const auto& row : x) {
      if (row.size() != dim) fail(Errc::DimensionMismatch, "ragged feature matrix");
    }
    std::vector<int> classes;
    for (int label : y) {
      if (std::find(classes.begin(), classes.end(), label) == classes.end()) classes.push_back(label);
    }
    if (classes.size() < 2) fail(Errc::MissingClass, "training set holds a single class");
    classes_ = std::move(classes);

    const double n = static_cast<double>(x.size());
    mean_.assign(dim, 0.0);
    scale_.assign(dim, 0.0);
    for (const auto& row : x) {
      for (std::size_t d = 0; d < dim; ++d) mean_[d] += row[d];
    }
    for (auto& m : mean_) m /= n;
    for (const auto& row : x) {
      for (std::size_t d = 0; d < dim; ++d) scale_[d] += (row[d] - mean_[d]) * (row[d] - mean_[d]);
    }
    for (auto& s : scale_) {
      s = std::sqrt(s / n);
      if (!(s > 0.0)) s = 1.0;
    }

    centroids_.assign(classes_.size(), std::vector<double>(dim, 0.0));
    std::vector<double> counts(classes_.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto c = class_index(y[i]);
      const auto z = standardize(x[i]);
      for (std::size_t d = 0; d < dim; ++d) centroids_[c][d] += z[d];
      counts[c] += 1.0;
    }
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      for (auto& v : centroids_[c]) v /= counts[c];
    }
  }

  int predict(std::span<const double> row) const {
    if (classes_.empty()) fail(Errc::MissingClass, "classifier not fitted");
    if (row.size() != mean_.size()) fail(Errc::DimensionMismatch, "query dimension differs from training");
    const auto z = standardize(row);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) d += (z[k] - centroids_[c][k]) * (z[k] - centroids_[c][k]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return classes_[best];
  }

  const std::vector<int>& classes() const noexcept { return classes_; }

 private:
  std::size_t class_index(int label) const {
    return static_cast<std::size_t>(std::find(classes_.begin(), classes_.end(), label) - classes_.begin());
  }

  std::vector<double> standardize(std::span<const double> row) const {
    std::vector<double> z(row.size());
    for (std::size_t d = 0; d < row.size(); ++d) z[d] = (row[d] - mean_[d]) / scale_[d];
    return z;
  }

  std::vector<int> classes_;
  std::vector<double> mean_, scale_;
  std::vector<std::vector<double>> centroids_;
};

static_assert(Classifier<NearestCentroid>);

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
  std::vector<std::size_t> test_indices;
  ConfusionMatrix confusion;
  Metrics metrics;
};

struct EvalReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  int positive_class = 0;
  ConfusionMatrix pooled_confusion;
  Metrics pooled;
  std::vector<FoldResult> folds;
  std::vector<int> predictions;  // indexed like the dataset
  Ratio overall_accuracy;         // exact-label agreement over all classes
};

// Fits on k-1 folds, predicts the held-out fold, and pools every
// prediction before computing the one-vs-rest metrics for positive_class.
template <Classifier C>
EvalReport cross_validate(const FeatureMatrix& x, const std::vector<int>& y, std::size_t k, std::uint64_t seed,
                          const C& prototype, int positive_class) {
  if (x.size() != y.size()) fail(Errc::LengthMismatch, "features and labels differ in length");
  EvalReport rep;
  rep.k = k;
  rep.seed = seed;
  rep.positive_class = positive_class;
  rep.predictions.assign(y.size(), 0);
  const auto folds = kfold_split(x.size(), k, seed);
  for (const auto& test : folds) {
    std::vector<char> held(x.size(), 0);
    for (std::size_t i : test) held[i] = 1;
    FeatureMatrix train_x;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (held[i]) continue;
      train_x.push_back(x[i]);
      train_y.push_back(y[i]);
    }
    C model = prototype;
    model.fit(train_x, train_y);
    std::vector<int> pred, truth;
    for (std::size_t i : test) {
      rep.predictions[i] = model.predict(x[i]);
      pred.push_back(rep.predictions[i]);
      truth.push_back(y[i]);
    }
    FoldResult fr;
    fr.test_indices = test;
    fr.confusion = confusion_matrix(pred, truth, positive_class);
    fr.metrics = metrics(fr.confusion);
    rep.pooled_confusion += fr.confusion;
    rep.folds.push_back(std::move(fr));
  }
  rep.pooled = metrics(rep.pooled_confusion);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < y.size(); ++i) agree += rep.predictions[i] == y[i] ? 1 : 0;
  rep.overall_accuracy = {agree, y.size()};
  return rep;
}

}  // namespace mizaj
