// Acceptance run: one PASS/FAIL line per primary criterion, nonzero exit if
// any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mizaj/device_sim.hpp"
#include "mizaj/pulse_analysis.hpp"
#include "mizaj/service.hpp"
#include "mizaj/store.hpp"
#include "mizaj/temperament_eval.hpp"
#include "mizaj/thermal_features.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"
#include "support/testgen.hpp"

using namespace mizaj;
namespace fs = std::filesystem;

namespace {

constexpr double kRate = 200.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(budget_s)) + " s budget";
  }
  if (!o.pass) ++g_failures;
  std::printf("%s  %-28s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TimeSeries series(std::vector<double> v, double rate = kRate) { return {std::move(v), rate, "x"}; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

int sh(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// --- criteria -------------------------------------------------------------

Outcome metrics_exact() {
  const auto m = metrics({45, 30, 10, 15});
  // Each ratio is exactly 3/4: 75/100, 45/60, 30/40.
  auto three_quarters = [](const Ratio& r) { return r.defined() && r.num * 4 == r.den * 3 && r.value() == 0.75; };
  bool ok = m.accuracy == Ratio{75, 100} && m.sensitivity == Ratio{45, 60} && m.specificity == Ratio{30, 40};
  ok = ok && three_quarters(m.accuracy) && three_quarters(m.sensitivity) && three_quarters(m.specificity);
  const auto no_neg = metrics({5, 0, 0, 2});
  const auto no_pos = metrics({0, 5, 2, 0});
  ok = ok && !no_neg.specificity.defined() && !no_neg.specificity.value() && no_neg.sensitivity.defined();
  ok = ok && !no_pos.sensitivity.defined() && no_pos.specificity.defined();
  ok = ok && !metrics({}).accuracy.defined();
  return {ok, "metrics(45,30,10,15) = 75/100, 45/60, 30/40; zero denominators undefined"};
}

Outcome csd_oracle() {
  testgen::Gen g(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(2, 512));
    const double rate = g.uniform(50.0, 500.0);
    const auto x = g.vec(n, -3.0, 3.0);
    const auto y = g.gaussian(n, 1.5);
    const auto s = cross_spectral_density(series(x, rate), series(y, rate));
    const auto ref = oracle::csd(x, y, rate);
    if (s.values.size() != ref.size()) return {false, "grid size mismatch at N=" + std::to_string(n)};
    double scale = 0.0, err = 0.0;
    for (const auto& v : ref) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < ref.size(); ++k) err = std::max(err, std::abs(s.values[k] - ref[k]));
    worst = std::max(worst, err / scale);
  }
  return {worst <= 1e-9, "100 signals N<=512, max relative error " + fmt("%.2e", worst)};
}

// Lags come from the analysis pipeline, which applies the 20 Hz acquisition
// low-pass first. The unfiltered argmax is reported alongside.
Outcome lag_recovery() {
  testgen::Gen g(202);
  int exact = 0, unfiltered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SimParams p;
    p.seed = 1000 + static_cast<std::uint64_t>(trial);
    p.noise_snr_db = 10.0;
    p.heart_rate_bpm = std::round(g.uniform(50.0, 120.0));
    const auto lag = g.integer(1, 20);
    const auto ch = static_cast<std::size_t>(g.integer(0, 6));
    p.channel_lag_s[ch] = static_cast<double>(lag) / kRate;
    const auto [rec, gt] = synth_recording(p);
    const auto f = extract_pulse_features(rec, default_sensor_layout());
    if (std::abs(f.lag_s[ch] * kRate - static_cast<double>(lag)) < 1e-9) ++exact;
    const auto raw = lag_time(detrend(rec.ppg), detrend(rec.capacitive[ch]), 0.15);
    if (std::abs(raw.lag_s * kRate - static_cast<double>(lag)) < 1e-9) ++unfiltered;
  }
  return {exact >= 95, std::to_string(exact) + "/100 exact at 10 dB (" + std::to_string(unfiltered) + "/100 without the acquisition low-pass)"};
}

Outcome pearson_oracle() {
  testgen::Gen g(303);
  double worst = 0.0, worst_affine = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(3, 1000));
    auto x = g.vec(n, -5.0, 5.0);
    auto y = g.vec(n, -5.0, 5.0);
    // Mix in some shared signal so r spans the whole range.
    const double mix = g.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) y[i] += mix * 3.0 * x[i];
    const double r = pearson_r(x, y);
    worst = std::max(worst, std::abs(r - oracle::pearson(x, y)));
    const double a = g.uniform(0.1, 10.0) * (g.uniform() < 0.5 ? -1 : 1), b = g.uniform(-100, 100);
    const double c = g.uniform(0.1, 10.0) * (g.uniform() < 0.5 ? -1 : 1), d = g.uniform(-100, 100);
    std::vector<double> xa(n), yc(n);
    for (std::size_t i = 0; i < n; ++i) {
      xa[i] = a * x[i] + b;
      yc[i] = c * y[i] + d;
    }
    const double sign = (a > 0) == (c > 0) ? 1.0 : -1.0;
    worst_affine = std::max(worst_affine, std::abs(pearson_r(xa, yc) - sign * r));
  }
  const bool ok = worst <= 1e-12 && worst_affine <= 1e-12;
  return {ok, "100 pairs, oracle diff " + fmt("%.1e", worst) + ", affine diff " + fmt("%.1e", worst_affine)};
}

Outcome segmentation() {
  testgen::Gen g(404);
  long worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double peak = g.uniform(40, 180);
    // Ramps faster than the 5 mmHg/s inflation onset slope.
    const double h1 = g.uniform(3, 15), r = g.uniform(2, peak / 6.0), h2 = g.uniform(0, 10), f = g.uniform(5, 25);
    const double total = std::max(60.0, h1 + r + h2 + f + 2.0);
    PressureProfile pp{h1, r, h2, f, peak};
    const auto n = static_cast<std::size_t>(std::llround(total * kRate));
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = pp.at(static_cast<double>(i) / kRate);
    const auto seg = segment_pressure_phases(series(v));
    auto d = [](std::size_t got, double t) { return std::abs(static_cast<long>(got) - std::lround(t * kRate)); };
    worst = std::max({worst, d(seg.phase2().begin, h1), d(seg.phase2().end, h1 + r), d(seg.phase3().end, h1 + r + h2 + f)});
    if (seg.phase1().begin != 0 || seg.phase1().end != seg.phase2().begin) worst = std::max(worst, 1000L);
  }
  return {worst <= 2, "50 trapezoids, worst boundary error " + std::to_string(worst) + " samples"};
}

Outcome depth_phenomenon() {
  testgen::Gen g(505);
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SimParams p = cohort_member_params(seed * 31, 0);
    const auto deep = static_cast<std::size_t>(g.integer(0, 6));
    for (std::size_t c = 0; c < p.num_channels(); ++c) p.channel_p_opt_mmHg[c] = c == deep ? 120.0 : std::round(g.uniform(0, 20));
    const auto [rec, gt] = synth_recording(p);
    const auto pp = channel_phase_power(rec, segment_pressure_phases(rec.pressure));
    bool ok = true;
    for (std::size_t c = 0; c < pp.size(); ++c) ok = ok && ((pp[c][1] > pp[c][0]) == (c == deep));
    hits += ok ? 1 : 0;
  }
  return {hits >= 48, std::to_string(hits) + "/50 seeds show the deep channel alone"};
}

Outcome hr_grid() {
  double worst = 0.0;
  for (int bpm = 40; bpm <= 180; ++bpm) {
    SimParams p;
    p.heart_rate_bpm = bpm;
    p.noise_snr_db = 10.0;
    p.seed = static_cast<std::uint64_t>(bpm);
    worst = std::max(worst, std::abs(estimate_heart_rate(synth_ppg(p)) - bpm));
  }
  return {worst <= 1.0, "40..180 BPM step 1 at 10 dB, worst error " + fmt("%.3f", worst) + " BPM"};
}

Outcome feature_contracts() {
  testgen::Gen g(606);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = static_cast<std::size_t>(g.integer(8, 64)), h = static_cast<std::size_t>(g.integer(8, 64));
    const auto nframes = static_cast<std::size_t>(g.integer(1, 4));
    std::vector<ThermalFrame> fs;
    for (std::size_t k = 0; k < nframes; ++k) {
      ThermalFrame f{w, h, g.vec(w * h, 20.0, 38.0), static_cast<double>(k)};
      if (trial % 5 == 0) std::fill(f.temps_c.begin(), f.temps_c.begin() + static_cast<long>(w), 31.0);
      fs.push_back(std::move(f));
    }
    const auto wc = warm_cold_features(fs);
    const auto dw = dry_wet_features(fs.back());
    ok = ok && wc.values.size() == 13 && wc.names.size() == 13 && dw.values.size() == 12 && dw.names.size() == 12;
    for (double v : wc.values) ok = ok && std::isfinite(v);
    for (double v : dw.values) ok = ok && std::isfinite(v);
  }
  ThermalFrame c{16, 12, std::vector<double>(16 * 12, 30.5), 0.0};
  const auto wc = warm_cold_features(c);
  const auto dw = dry_wet_features(c);
  auto val = [](const FeatureVector& fv, std::string_view name) {
    for (std::size_t i = 0; i < fv.names.size(); ++i) {
      if (fv.names[i] == name) return fv.values[i];
    }
    return std::nan("");
  };
  for (auto n : {"mean", "median", "min", "max", "p10", "p90"}) ok = ok && val(wc, n) == 30.5;
  for (auto n : {"std", "range", "iqr", "skewness", "kurtosis", "temporal_std", "temporal_slope"}) ok = ok && val(wc, n) == 0.0;
  for (auto n : {"gradient_mean", "gradient_std", "histogram_entropy", "cooccurrence_contrast", "coefficient_of_variation",
                 "hot_region_count", "edge_density", "lr_asymmetry", "smoothness"}) {
    ok = ok && val(dw, n) == 0.0;
  }
  for (auto n : {"histogram_uniformity", "cooccurrence_homogeneity", "mode_concentration"}) ok = ok && val(dw, n) == 1.0;
  return {ok, "200 random inputs give 13/12 finite values; constant frame values exact"};
}

Outcome kfold_properties() {
  std::size_t cases = 0;
  for (std::size_t n = 2; n <= 50; ++n) {
    for (std::size_t k = 2; k <= n; ++k) {
      const std::uint64_t seed = n * 100 + k;
      const auto folds = kfold_split(n, k, seed);
      if (folds.size() != k || folds != kfold_split(n, k, seed)) return {false, "fold count or determinism at n=" + std::to_string(n)};
      std::vector<int> seen(n, 0);
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        for (std::size_t i : f) {
          if (i >= n) return {false, "index out of range"};
          ++seen[i];
        }
      }
      if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
        return {false, "not a partition at n=" + std::to_string(n) + " k=" + std::to_string(k)};
      }
      if (hi - lo > 1 || lo != n / k) return {false, "fold sizes off at n=" + std::to_string(n) + " k=" + std::to_string(k)};
      ++cases;
    }
  }
  return {true, std::to_string(cases) + " (n,k) cases partition with +-1 sizes, deterministic per seed"};
}

struct Crash : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool manifest_consistent(const fs::path& root) {
  const json m = json::parse(slurp(root / "manifest.json"));
  std::set<std::string> listed, dirs;
  for (const auto& e : m.at("sessions")) listed.insert(e.at("id").get<std::string>());
  for (const auto& de : fs::directory_iterator(root)) {
    if (de.is_directory()) dirs.insert(de.path().filename().string());
  }
  return listed == dirs && m.at("total").get<std::size_t>() == dirs.size();
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x01));
}

Outcome store_integrity(const std::vector<SessionRecord>& cohort) {
  testgen::TempDir dir;
  SessionStore store(dir.path());
  std::size_t identical = 0;
  for (const auto& s : cohort) store.save_session(s);
  for (const auto& s : cohort) identical += store.load_session(s.id) == s ? 1 : 0;

  // Checksum faults.
  std::size_t flips = 0, caught = 0;
  testgen::Gen g(707);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const fs::path sd = store.session_dir(cohort[i].id);
    for (const char* name : {"signals.csv", "thermal_0_0.txt", "ground_truth.json"}) {
      const auto original = slurp(sd / name);
      flip_byte(sd / name, static_cast<std::size_t>(g.integer(0, static_cast<long>(original.size()) - 1)));
      ++flips;
      try {
        (void)store.load_session(cohort[i].id);
      } catch (const Error& e) {
        caught += e.code() == Errc::CorruptRecord ? 1 : 0;
      }
      std::ofstream(sd / name, std::ios::binary) << original;
    }
  }

  // Interrupted writes at every stage, on saves and annotations.
  testgen::TempDir fdir;
  std::size_t crashes = 0, consistent = 0;
  const std::vector<std::string> stages = {"session_written", "session_renamed", "manifest_written", "annotation_written"};
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& stage = stages[i % stages.size()];
    StoreOptions o;
    o.fault_hook = [stage](std::string_view s) {
      if (s == stage) throw Crash(stage);
    };
    {
      SessionStore faulty(fdir.path(), o);
      try {
        if (stage == "annotation_written" && i > 0) {
          faulty.add_annotation(cohort[i - 1].id, {"dr", "", std::nullopt, "note", ""});
        } else {
          faulty.save_session(cohort[i]);
        }
      } catch (const Crash&) {
        ++crashes;
      }
    }
    SessionStore reopened(fdir.path());
    bool ok = manifest_consistent(fdir.path());
    for (const auto& e : reopened.list_sessions(1, 100).sessions) {
      try {
        (void)reopened.load_session(e.id);
      } catch (const Error&) {
        ok = false;
      }
    }
    consistent += ok ? 1 : 0;
  }

  const bool ok = identical == cohort.size() && caught == flips && consistent == 12 && crashes == 12;
  return {ok, std::to_string(identical) + "/34 identical, " + std::to_string(caught) + "/" + std::to_string(flips) +
                  " flips CorruptRecord, " + std::to_string(consistent) + "/12 crashes leave a valid manifest"};
}

Outcome end_to_end() {
  testgen::TempDir dir;
  const std::string cli = MIZAJ_CLI_PATH;
  const auto data = dir.path() / "data", remote = dir.path() / "remote";
  if (sh(q(cli) + " simulate --n 34 --seed 42 --out " + q(data) + " >/dev/null") != 0) return {false, "simulate failed"};

  const auto log = dir.path() / "serve.log", pid = dir.path() / "serve.pid";
  if (sh(q(cli) + " serve --addr 127.0.0.1:0 --data-dir " + q(remote) + " 2>" + q(log) + " >/dev/null & echo $! >" + q(pid)) != 0) {
    return {false, "serve failed to start"};
  }
  struct Reaper {
    fs::path pid;
    ~Reaper() { sh("kill $(cat " + q(pid) + ") 2>/dev/null"); }
  } reaper{pid};
  int port = 0;
  for (int i = 0; i < 400 && port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    const auto text = slurp(log);
    const auto at = text.find("listening on 127.0.0.1:");
    if (at != std::string::npos) port = std::atoi(text.c_str() + at + 23);
  }
  if (port == 0) return {false, "server never listened"};
  const std::string url = "http://127.0.0.1:" + std::to_string(port);

  if (sh(q(cli) + " ingest " + q(data) + " --server " + url + " >/dev/null") != 0) return {false, "ingest failed"};

  TelecareClient client(url, std::nullopt);
  const auto listing = client.list_sessions(1, 100);
  if (listing.status != 200 || listing.body.at("total") != 34) return {false, "service does not list 34 sessions"};
  std::size_t hr_ok = 0;
  for (const auto& e : listing.body.at("sessions")) {
    const auto id = e.at("id").get<std::string>();
    const auto a = client.analysis(id);
    if (a.status != 200) return {false, "analysis of " + id + " returned " + std::to_string(a.status)};
    const auto gt = json::parse(slurp(data / id / "ground_truth.json"));
    const double truth = gt.at("ground_truth").at("heart_rate_bpm").get<double>();
    hr_ok += std::abs(a.body.at("heart_rate_bpm").get<double>() - truth) <= 1.0 ? 1 : 0;
  }

  const auto warm_out = dir.path() / "warm.json", wet_out = dir.path() / "wet.json";
  if (sh(q(cli) + " eval --dataset " + q(remote) + " --k 5 --seed 1 --axis warm --out " + q(warm_out)) != 0 ||
      sh(q(cli) + " eval --dataset " + q(remote) + " --k 5 --seed 1 --axis wet --out " + q(wet_out)) != 0) {
    return {false, "eval failed"};
  }
  const auto warm = json::parse(slurp(warm_out)), wet = json::parse(slurp(wet_out));
  const double wa = warm.at("pooled").at("accuracy").get<double>();
  const double da = wet.at("pooled").at("accuracy").get<double>();
  const bool ok = hr_ok == 34 && warm.at("n") == 34 && wa >= 0.9 && da >= 0.9;
  return {ok, "34 sessions via HTTP, HR within 1 BPM on " + std::to_string(hr_ok) + "/34, pooled accuracy warm " +
                  fmt("%.3f", wa) + " wet " + fmt("%.3f", da)};
}

}  // namespace

int main() {
  criterion("metrics-exactness", 1, metrics_exact);
  criterion("csd-oracle", 30, csd_oracle);
  criterion("lag-recovery", 30, lag_recovery);
  criterion("pearson", 0, pearson_oracle);
  criterion("phase-segmentation", 0, segmentation);
  criterion("depth-phenomenon", 0, depth_phenomenon);
  criterion("heart-rate-grid", 0, hr_grid);
  criterion("feature-contracts", 0, feature_contracts);
  criterion("kfold-properties", 0, kfold_properties);
  criterion("end-to-end", 120, end_to_end);
  const auto cohort = generate_cohort(34, LabelMix{}, 42);
  criterion("store-integrity", 0, [&] { return store_integrity(cohort); });
  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
