#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "mizaj/device_sim.hpp"
#include "mizaj/store.hpp"
#include "support/errcode.hpp"
#include "support/tempdir.hpp"

using namespace mizaj;
using testgen::code_of;
using testgen::TempDir;
namespace fs = std::filesystem;

namespace {

const std::vector<SessionRecord>& cohort() {
  static const auto c = generate_cohort(34, LabelMix{}, 42);
  return c;
}

const SessionRecord& sample() { return cohort().front(); }

SessionRecord small_session(const std::string& id, int minute) {
  SessionRecord s = sample();
  s.id = id;
  char ts[32];
  std::snprintf(ts, sizeof(ts), "2026-02-01T10:%02d:00Z", minute);
  s.created_at = ts;
  s.ground_truth.reset();
  return s;
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x01));
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// The on-disk manifest lists exactly the session directories present.
void expect_manifest_matches_dirs(const fs::path& root) {
  const json m = json::parse(slurp(root / "manifest.json"));
  std::set<std::string> listed, dirs;
  for (const auto& e : m.at("sessions")) listed.insert(e.at("id").get<std::string>());
  for (const auto& de : fs::directory_iterator(root)) {
    if (de.is_directory()) dirs.insert(de.path().filename().string());
  }
  EXPECT_EQ(listed, dirs);
  EXPECT_EQ(m.at("total").get<std::size_t>(), dirs.size());
  EXPECT_EQ(m.at("version"), "mizaj-store-1");
}

struct Crash : std::runtime_error {
  using std::runtime_error::runtime_error;
};

StoreOptions crash_at(std::string stage) {
  StoreOptions o;
  o.fault_hook = [stage](std::string_view s) {
    if (s == stage) throw Crash(stage);
  };
  return o;
}

bool all_finite(const json& j) {
  if (j.is_number()) return std::isfinite(j.get<double>());
  if (j.is_null()) return false;
  if (j.is_array() || j.is_object()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace

TEST(Store, RoundTripWholeCohortAndPagination) {
  TempDir dir;
  SessionStore store(dir.path());
  for (const auto& s : cohort()) EXPECT_EQ(store.save_session(s), s.id);
  for (const auto& s : cohort()) EXPECT_EQ(store.load_session(s.id), s) << s.id;

  std::vector<std::size_t> sizes;
  std::vector<std::string> order;
  for (std::size_t page = 1; page <= 5; ++page) {
    const auto m = store.list_sessions(page, 10);
    EXPECT_EQ(m.total, 34u);
    sizes.push_back(m.sessions.size());
    for (const auto& e : m.sessions) order.push_back(e.created_at);
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{10, 10, 10, 4, 0}));
  EXPECT_TRUE(std::is_sorted(order.rbegin(), order.rend()));
  EXPECT_EQ(std::set<std::string>(order.begin(), order.end()).size(), 34u);
  expect_manifest_matches_dirs(dir.path());

  // A fresh process sees the same state.
  SessionStore again(dir.path());
  EXPECT_EQ(again.list_sessions().sessions, store.list_sessions().sessions);
  EXPECT_EQ(again.load_session(cohort()[17].id), cohort()[17]);
}

TEST(Store, DuplicateUnknownAndInvalidIds) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(sample());
  EXPECT_EQ(code_of([&] { store.save_session(sample()); }), Errc::DuplicateId);
  EXPECT_EQ(code_of([&] { store.load_session("nope"); }), Errc::NotFound);
  EXPECT_EQ(code_of([&] { store.load_session("../etc"); }), Errc::NotFound);
  for (const char* bad : {"", "../x", "a/b", ".hidden", "with space"}) {
    EXPECT_EQ(code_of([&] { store.save_session(small_session(bad, 0)); }), Errc::StorageFailure) << bad;
  }
  EXPECT_EQ(store.list_sessions().total, 1u);
}

TEST(Store, ChecksumFaultsAreCorruptRecord) {
  TempDir dir;
  SessionStore store(dir.path());
  const auto& s = sample();
  store.save_session(s);
  const fs::path sd = dir.path() / s.id;
  const auto pristine_csv = slurp(sd / "signals.csv");

  flip_byte(sd / "signals.csv", pristine_csv.size() / 2);
  EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord);
  std::ofstream(sd / "signals.csv", std::ios::binary) << pristine_csv;
  EXPECT_EQ(store.load_session(s.id), s);

  const auto frame = slurp(sd / "thermal_1_0.txt");
  flip_byte(sd / "thermal_1_0.txt", 40);
  EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord);
  std::ofstream(sd / "thermal_1_0.txt", std::ios::binary) << frame;

  std::ofstream(sd / "signals.csv", std::ios::binary) << pristine_csv.substr(0, pristine_csv.size() - 100);
  EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord);
  fs::remove(sd / "signals.csv");
  EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord);

  std::ofstream(sd / "session.json", std::ios::binary) << "{ not json";
  EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord);
}

TEST(Store, RandomBitFlipsNeverLoadSilently) {
  TempDir dir;
  SessionStore store(dir.path());
  const auto& s = sample();
  store.save_session(s);
  const fs::path sd = dir.path() / s.id;
  std::mt19937_64 rng(5);
  const std::vector<std::string> files = {"signals.csv", "thermal_0_0.txt", "thermal_2_0.json", "ground_truth.json"};
  for (int trial = 0; trial < 40; ++trial) {
    const auto& name = files[static_cast<std::size_t>(trial) % files.size()];
    const auto original = slurp(sd / name);
    flip_byte(sd / name, static_cast<std::size_t>(rng() % original.size()));
    EXPECT_EQ(code_of([&] { store.load_session(s.id); }), Errc::CorruptRecord) << name;
    std::ofstream(sd / name, std::ios::binary) << original;
  }
  EXPECT_EQ(store.load_session(s.id), s);
}

TEST(Store, CrashBeforeRenameKeepsPreviousState) {
  TempDir dir;
  {
    SessionStore store(dir.path());
    store.save_session(small_session("a", 1));
  }
  {
    SessionStore store(dir.path(), crash_at("session_written"));
    EXPECT_THROW(store.save_session(small_session("b", 2)), Crash);
  }
  SessionStore reopened(dir.path());
  const auto m = reopened.list_sessions();
  ASSERT_EQ(m.total, 1u);
  EXPECT_EQ(m.sessions[0].id, "a");
  EXPECT_EQ(code_of([&] { reopened.load_session("b"); }), Errc::NotFound);
  for (const auto& de : fs::directory_iterator(dir.path())) {
    EXPECT_EQ(de.path().filename().string().rfind(".tmp", 0), std::string::npos) << de.path();
  }
  expect_manifest_matches_dirs(dir.path());
  EXPECT_EQ(reopened.save_session(small_session("b", 2)), "b");
}

TEST(Store, CrashAfterRenameRecoversManifest) {
  TempDir dir;
  {
    SessionStore store(dir.path());
    store.save_session(small_session("a", 1));
  }
  {
    SessionStore store(dir.path(), crash_at("session_renamed"));
    EXPECT_THROW(store.save_session(small_session("b", 2)), Crash);
  }
  // The renamed directory is complete, so recovery indexes it.
  SessionStore reopened(dir.path());
  EXPECT_EQ(reopened.list_sessions().total, 2u);
  EXPECT_EQ(reopened.load_session("b"), small_session("b", 2));
  expect_manifest_matches_dirs(dir.path());
}

TEST(Store, CrashDuringManifestWriteLeavesValidManifest) {
  TempDir dir;
  {
    SessionStore store(dir.path());
    store.save_session(small_session("a", 1));
  }
  const auto before = slurp(dir.path() / "manifest.json");
  {
    SessionStore store(dir.path(), crash_at("manifest_written"));
    EXPECT_THROW(store.save_session(small_session("b", 2)), Crash);
    // The old manifest is untouched until the rename.
    EXPECT_EQ(slurp(dir.path() / "manifest.json"), before);
    json parsed;
    EXPECT_NO_THROW(parsed = json::parse(slurp(dir.path() / "manifest.json")));
  }
  SessionStore reopened(dir.path());
  EXPECT_FALSE(fs::exists(dir.path() / "manifest.json.tmp"));
  expect_manifest_matches_dirs(dir.path());
  EXPECT_EQ(reopened.list_sessions().total, 2u);
}

TEST(Store, CrashDuringAnnotationKeepsOldLog) {
  TempDir dir;
  {
    SessionStore store(dir.path());
    store.save_session(small_session("a", 1));
    store.add_annotation("a", {"dr-1", "", TemperamentLabel{}, "first", ""});
  }
  {
    SessionStore store(dir.path(), crash_at("annotation_written"));
    EXPECT_THROW(store.add_annotation("a", {"dr-2", "", std::nullopt, "second", ""}), Crash);
  }
  SessionStore reopened(dir.path());
  const auto s = reopened.load_session("a");
  ASSERT_EQ(s.annotations.size(), 1u);
  EXPECT_EQ(s.annotations[0].note, "first");
  EXPECT_FALSE(fs::exists(dir.path() / "a" / "session.json.tmp"));
}

TEST(Store, InterruptedWritesAtEveryStageNeverCorruptManifest) {
  const std::vector<std::string> stages = {"session_written", "session_renamed", "manifest_written"};
  for (const auto& stage : stages) {
    TempDir dir;
    for (int k = 0; k < 6; ++k) {
      {
        SessionStore store(dir.path(), k % 2 ? crash_at(stage) : StoreOptions{});
        try {
          store.save_session(small_session("s" + std::to_string(k), k));
        } catch (const Crash&) {
        }
      }
      SessionStore check(dir.path());
      expect_manifest_matches_dirs(dir.path());
      for (const auto& e : check.list_sessions().sessions) EXPECT_NO_THROW(check.load_session(e.id)) << stage;
    }
  }
}

TEST(Store, AnalysisCachedAndCoherent) {
  TempDir dir;
  SessionStore store(dir.path());
  const auto& s = sample();
  store.save_session(s);
  const json first = store.analyze_session(s.id);
  EXPECT_TRUE(all_finite(first.at("heart_rate_bpm")));
  EXPECT_NEAR(first.at("heart_rate_bpm").get<double>(), s.ground_truth->params.heart_rate_bpm, 1.0);
  EXPECT_TRUE(fs::exists(dir.path() / s.id / "analysis.json"));
  const json second = store.analyze_session(s.id);
  EXPECT_EQ(first.dump(), second.dump());
  // Cache equals recomputation from the stored raw data, bitwise on the serialized form.
  const auto loaded = store.load_session(s.id);
  ASSERT_TRUE(loaded.analysis.has_value());
  SessionRecord raw = loaded;
  raw.analysis.reset();
  EXPECT_EQ(loaded.analysis->dump(), analyze_record(raw).dump());
}

TEST(Store, AnalysisPayloadIsFinite) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(cohort()[3]);
  const json a = store.analyze_session(cohort()[3].id);
  EXPECT_TRUE(all_finite(a)) << a.dump().substr(0, 400);
  ASSERT_EQ(a.at("thermal").size(), 3u);
  for (const auto& t : a.at("thermal")) {
    EXPECT_EQ(t.at("warm_cold").at("values").size(), 13u);
    EXPECT_EQ(t.at("dry_wet").at("values").size(), 12u);
  }
}

TEST(Store, CorruptAnalysisCacheIsRecomputed) {
  TempDir dir;
  SessionStore store(dir.path());
  const auto& s = sample();
  store.save_session(s);
  const json a = store.analyze_session(s.id);
  std::ofstream(dir.path() / s.id / "analysis.json", std::ios::binary) << "{\"pulse\": 1}\n";
  const auto loaded = store.load_session(s.id);
  EXPECT_FALSE(loaded.analysis.has_value());
  EXPECT_EQ(store.analyze_session(s.id).dump(), a.dump());
}

TEST(Store, ZeroLengthPressureIsAnalysisFailure) {
  TempDir dir;
  SessionStore store(dir.path());
  SessionRecord s = small_session("empty-pressure", 3);
  s.recording.pressure.samples.clear();
  store.save_session(s);
  try {
    store.analyze_session("empty-pressure");
    FAIL() << "expected AnalysisFailure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AnalysisFailure);
    EXPECT_NE(std::string(e.what()).find("TooShort"), std::string::npos) << e.what();
  }
  EXPECT_EQ(code_of([&] { store.analyze_session("missing"); }), Errc::NotFound);
}

TEST(Store, AnnotationsAppendOnly) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(small_session("a", 1));
  const Annotation a1{"dr-a", "", TemperamentLabel{WarmAxis::Warm, WetAxis::Dry}, "warm pulse", ""};
  auto list = store.add_annotation("a", a1);
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0].author, "dr-a");
  EXPECT_EQ(list[0].temperament, a1.temperament);
  EXPECT_EQ(list[0].note, "warm pulse");
  EXPECT_FALSE(list[0].timestamp.empty());
  list = store.add_annotation("a", {"dr-b", "", std::nullopt, "follow up", ""});
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0], store.load_session("a").annotations[0]);
  EXPECT_LT(list[0].timestamp, list[1].timestamp);

  EXPECT_EQ(code_of([&] { store.add_annotation("a", {"", "", std::nullopt, "x", ""}); }), Errc::EmptyAnnotation);
  EXPECT_EQ(code_of([&] { store.add_annotation("a", {"dr", "", std::nullopt, "", ""}); }), Errc::EmptyAnnotation);
  EXPECT_EQ(code_of([&] { store.add_annotation("zz", a1); }), Errc::NotFound);
  EXPECT_EQ(store.load_session("a").annotations.size(), 2u);
}

TEST(Store, RequestIdMakesAnnotationIdempotent) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(small_session("a", 1));
  const Annotation a{"dr", "", std::nullopt, "once", "req-1"};
  const auto first = store.add_annotation("a", a);
  const auto again = store.add_annotation("a", a);
  EXPECT_EQ(first, again);
  EXPECT_EQ(store.load_session("a").annotations.size(), 1u);
}

TEST(Store, ConcurrentAnnotationsAllKept) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(small_session("a", 1));
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 5; ++k) store.add_annotation("a", {"dr-" + std::to_string(t), "", std::nullopt, std::to_string(k), ""});
    });
  }
  for (auto& th : threads) th.join();
  const auto s = store.load_session("a");
  ASSERT_EQ(s.annotations.size(), 40u);
  for (std::size_t i = 1; i < s.annotations.size(); ++i) EXPECT_LT(s.annotations[i - 1].timestamp, s.annotations[i].timestamp);
  for (int t = 0; t < 8; ++t) {
    const auto n = std::count_if(s.annotations.begin(), s.annotations.end(),
                                 [&](const Annotation& a) { return a.author == "dr-" + std::to_string(t); });
    EXPECT_EQ(n, 5) << t;
  }
}

TEST(Store, ConcurrentSavesAndReads) {
  TempDir dir;
  SessionStore store(dir.path());
  store.save_session(small_session("base", 0));
  std::vector<std::thread> threads;
  std::atomic<int> read_failures{0};
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      store.save_session(small_session("w" + std::to_string(t), t + 1));
      for (int k = 0; k < 3; ++k) {
        try {
          store.load_session("base");
        } catch (...) {
          ++read_failures;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(read_failures.load(), 0);
  EXPECT_EQ(store.list_sessions().total, 7u);
  expect_manifest_matches_dirs(dir.path());
}

TEST(Store, ReplayedRequestLogGivesSameState) {
  TempDir a_dir, b_dir;
  auto apply = [](SessionStore& store, int times) {
    for (int r = 0; r < times; ++r) {
      for (int k = 0; k < 3; ++k) {
        try {
          store.save_session(small_session("s" + std::to_string(k), k));
        } catch (const Error& e) {
          ASSERT_EQ(e.code(), Errc::DuplicateId);
        }
        store.add_annotation("s" + std::to_string(k), {"dr", "", std::nullopt, "n", "req-" + std::to_string(k)});
      }
    }
  };
  SessionStore once(a_dir.path()), twice(b_dir.path());
  apply(once, 1);
  apply(twice, 3);
  EXPECT_EQ(once.list_sessions().sessions, twice.list_sessions().sessions);
  for (int k = 0; k < 3; ++k) {
    auto x = once.load_session("s" + std::to_string(k)), y = twice.load_session("s" + std::to_string(k));
    ASSERT_EQ(x.annotations.size(), 1u);
    ASSERT_EQ(y.annotations.size(), 1u);
    x.annotations[0].timestamp = y.annotations[0].timestamp;  // server clock differs between runs
    EXPECT_EQ(x, y);
  }
}
