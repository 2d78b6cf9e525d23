#pragma once

// File-backed session store.
//
//   <root>/manifest.json          store manifest (version + session index)
//   <root>/<id>/session.json      metadata, annotations, per-file checksums
//   <root>/<id>/signals.csv       t,c1..cK,ppg,pressure
//   <root>/<id>/thermal_R_F.txt   ASCII temperature matrix (+ .json sidecar)
//   <root>/<id>/analysis.json     cached analysis payload (optional)
//   <root>/<id>/ground_truth.json simulator sidecar (optional)
//
// Every mutation writes a temporary file or directory and renames it into
// place. Opening a store removes leftovers of interrupted writes and
// rebuilds the manifest from the session directories that made it.

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mizaj/device_sim.hpp"
#include "mizaj/error.hpp"
#include "mizaj/json_io.hpp"
#include "mizaj/session.hpp"
#include "mizaj/session_analysis.hpp"

namespace mizaj {

namespace fs = std::filesystem;

inline constexpr std::string_view kStoreFormat = "mizaj-store-1";
inline constexpr std::string_view kSessionFormat = "mizaj-session-1";

namespace storeio {

inline std::string crc32_hex(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::NotFound, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes, flushes to disk and closes.
inline void write_file(const fs::path& p, std::string_view bytes) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) fail(Errc::StorageFailure, "cannot create " + p.string());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n <= 0) {
      ::close(fd);
      fail(Errc::StorageFailure, "short write to " + p.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

inline void write_file_atomic(const fs::path& p, std::string_view bytes,
                              const std::function<void(std::string_view)>& hook = {}, std::string_view stage = {}) {
  fs::path tmp = p;
  tmp += ".tmp";
  write_file(tmp, bytes);
  if (hook) hook(stage);
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) fail(Errc::StorageFailure, "rename " + tmp.string() + ": " + ec.message());
}

inline std::string now_iso_micro() {
  using namespace std::chrono;
  const auto now = time_point_cast<microseconds>(system_clock::now());
  const auto us = now.time_since_epoch().count();
  const auto secs = us / 1000000;
  auto base = iso_timestamp(secs);
  char frac[16];
  std::snprintf(frac, sizeof(frac), ".%06lld", static_cast<long long>(us % 1000000));
  base.insert(base.size() - 1, frac);
  return base;
}

// Adds one microsecond to a timestamp produced by now_iso_micro().
inline std::string bump_micro(const std::string& ts) {
  // Parse the fixed-width layout YYYY-MM-DDTHH:MM:SS.ffffffZ.
  if (ts.size() != 27) return ts;
  std::tm tm{};
  tm.tm_year = std::stoi(ts.substr(0, 4)) - 1900;
  tm.tm_mon = std::stoi(ts.substr(5, 2)) - 1;
  tm.tm_mday = std::stoi(ts.substr(8, 2));
  tm.tm_hour = std::stoi(ts.substr(11, 2));
  tm.tm_min = std::stoi(ts.substr(14, 2));
  tm.tm_sec = std::stoi(ts.substr(17, 2));
  long long frac = std::stoll(ts.substr(20, 6)) + 1;
  long long secs = static_cast<long long>(timegm(&tm));
  if (frac >= 1000000) {
    frac -= 1000000;
    ++secs;
  }
  auto base = iso_timestamp(secs);
  char buf[24];
  std::snprintf(buf, sizeof(buf), ".%06lld", frac);
  base.insert(base.size() - 1, buf);
  return base;
}

inline bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
  });
}

inline std::string frame_stem(std::size_t r, std::size_t f) {
  return "thermal_" + std::to_string(r) + "_" + std::to_string(f);
}

// Writes every file of a session into dir (which must exist).
inline void write_session_dir(const fs::path& dir, const SessionRecord& s) {
  json checksums = json::object();
  auto put = [&](const std::string& name, const std::string& bytes) {
    write_file(dir / name, bytes);
    checksums[name] = crc32_hex(bytes);
  };
  put("signals.csv", signal_csv(s.recording));

  json thermal = json::array();
  for (std::size_t r = 0; r < s.thermal.size(); ++r) {
    const auto& cap = s.thermal[r];
    json frames = json::array();
    for (std::size_t f = 0; f < cap.frames.size(); ++f) {
      const auto stem = frame_stem(r, f);
      std::ostringstream os;
      write_frame_matrix(os, cap.frames[f]);
      put(stem + ".txt", os.str());
      json sidecar = to_json(cap.roi);
      sidecar["captured_at_s"] = cap.frames[f].captured_at_s;
      put(stem + ".json", sidecar.dump(2) + "\n");
      frames.push_back({{"file", stem + ".txt"}, {"sidecar", stem + ".json"}});
    }
    thermal.push_back({{"roi", to_json(cap.roi)}, {"frames", frames}});
  }

  json meta = {{"format", kSessionFormat},
               {"id", s.id},
               {"created_at", s.created_at},
               {"participant", to_json(s.participant)},
               {"mmq", to_json(s.mmq)},
               {"recording",
                {{"spec", to_json(s.recording.spec)},
                 {"rate_hz", s.recording.ppg.rate_hz},
                 {"channels", s.recording.capacitive.size()},
                 {"file", "signals.csv"}}},
               {"thermal", thermal},
               {"annotations", annotations_to_json(s.annotations)}};
  if (s.analysis) {
    put("analysis.json", s.analysis->dump() + "\n");
    meta["analysis_file"] = "analysis.json";
  }
  if (s.ground_truth) {
    put("ground_truth.json", to_json(*s.ground_truth).dump(2) + "\n");
    meta["ground_truth_file"] = "ground_truth.json";
  }
  meta["checksums"] = checksums;
  write_file(dir / "session.json", meta.dump(2) + "\n");
}

inline json read_session_meta(const fs::path& dir) {
  const auto p = dir / "session.json";
  if (!fs::exists(p)) fail(Errc::NotFound, "no session at " + dir.string());
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    fail(Errc::CorruptRecord, "session.json unreadable: " + std::string(e.what()));
  }
}

// Loads a session directory, verifying every checksummed file. A cached
// analysis whose checksum fails is dropped (it is derived data); any other
// mismatch is CorruptRecord.
inline SessionRecord read_session_dir(const fs::path& dir) {
  const json meta = read_session_meta(dir);
  try {
    const json sums = meta.value("checksums", json::object());
    auto load = [&](const std::string& name) {
      std::string bytes;
      try {
        bytes = read_file(dir / name);
      } catch (const Error&) {
        fail(Errc::CorruptRecord, "missing file " + name);
      }
      if (!sums.contains(name) || sums.at(name).get<std::string>() != crc32_hex(bytes)) {
        fail(Errc::CorruptRecord, "checksum mismatch in " + name);
      }
      return bytes;
    };

    SessionRecord s;
    s.id = meta.at("id").get<std::string>();
    s.created_at = meta.at("created_at").get<std::string>();
    const auto& p = meta.at("participant");
    s.participant = {p.value("pseudo_id", ""), p.value("age_years", 0.0), p.value("sex", "")};
    s.mmq = mmq_record_from_json(meta.at("mmq"));

    const auto& rj = meta.at("recording");
    {
      std::istringstream is(load(rj.at("file").get<std::string>()));
      s.recording = read_signal_csv(is, rj.at("rate_hz").get<double>(), spec_from_json(rj.at("spec")));
    }
    for (const auto& cj : meta.at("thermal")) {
      ThermalCapture cap;
      cap.roi = roi_from_json(cj.at("roi"));
      for (const auto& fj : cj.at("frames")) {
        const json sidecar = json::parse(load(fj.at("sidecar").get<std::string>()));
        std::istringstream is(load(fj.at("file").get<std::string>()));
        cap.frames.push_back(read_frame_matrix(is, sidecar.at("captured_at_s").get<double>()));
      }
      s.thermal.push_back(std::move(cap));
    }
    for (const auto& a : meta.at("annotations")) s.annotations.push_back(annotation_from_json(a));
    if (meta.contains("ground_truth_file")) {
      s.ground_truth = ground_truth_from_json(json::parse(load(meta.at("ground_truth_file").get<std::string>())));
    }
    if (meta.contains("analysis_file")) {
      try {
        s.analysis = json::parse(load(meta.at("analysis_file").get<std::string>()));
      } catch (const Error&) {
        s.analysis.reset();
      } catch (const json::exception&) {
        s.analysis.reset();
      }
    }
    return s;
  } catch (const json::exception& e) {
    fail(Errc::CorruptRecord, "session metadata malformed: " + std::string(e.what()));
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError) fail(Errc::CorruptRecord, e.what());
    throw;
  }
}

}  // namespace storeio

struct ManifestEntry {
  std::string id;
  std::string created_at;
  TemperamentLabel label;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct StoreManifest {
  std::string version{kStoreFormat};
  std::size_t total = 0;
  std::size_t page = 1;
  std::size_t page_size = 0;
  std::vector<ManifestEntry> sessions;
};

inline json to_json(const StoreManifest& m) {
  json rows = json::array();
  for (const auto& e : m.sessions) rows.push_back({{"id", e.id}, {"created_at", e.created_at}, {"label", to_json(e.label)}});
  return {{"version", m.version}, {"total", m.total}, {"page", m.page}, {"page_size", m.page_size}, {"sessions", rows}};
}

struct StoreOptions {
  // Called at named points of a write ("session_written", "session_renamed",
  // "manifest_written", "annotation_written", "analysis_computed"); throwing
  // from it simulates a crash at that point.
  std::function<void(std::string_view)> fault_hook;
};

class SessionStore {
 public:
  explicit SessionStore(fs::path root, StoreOptions opts = {}) : root_(std::move(root)), opts_(std::move(opts)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(Errc::StorageFailure, "cannot create store at " + root_.string());
    recover();
  }

  const fs::path& root() const noexcept { return root_; }
  fs::path session_dir(const std::string& id) const { return root_ / id; }

  std::string save_session(const SessionRecord& s) {
    if (!storeio::valid_id(s.id)) fail(Errc::StorageFailure, "invalid session id '" + s.id + "'");
    auto lock = lock_id(s.id);
    if (fs::exists(session_dir(s.id))) fail(Errc::DuplicateId, s.id);

    const fs::path tmp = root_ / (".tmp-" + s.id + "-" + std::to_string(tmp_counter_.fetch_add(1)));
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) fail(Errc::StorageFailure, "cannot create " + tmp.string());
    try {
      storeio::write_session_dir(tmp, s);
    } catch (...) {
      fs::remove_all(tmp, ec);
      throw;
    }
    hook("session_written");
    fs::rename(tmp, session_dir(s.id), ec);
    if (ec) fail(Errc::StorageFailure, "rename into place failed: " + ec.message());
    hook("session_renamed");

    std::unique_lock mlock(manifest_mu_);
    entries_.push_back({s.id, s.created_at, s.mmq.label});
    write_manifest_locked();
    return s.id;
  }

  SessionRecord load_session(const std::string& id) const {
    if (!storeio::valid_id(id) || !fs::exists(session_dir(id) / "session.json")) fail(Errc::NotFound, id);
    return storeio::read_session_dir(session_dir(id));
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(manifest_mu_);
    return std::any_of(entries_.begin(), entries_.end(), [&](const ManifestEntry& e) { return e.id == id; });
  }

  // Newest first; ties broken by id. page is 1-based.
  StoreManifest list_sessions(std::size_t page = 1, std::size_t page_size = 0) const {
    std::vector<ManifestEntry> all;
    {
      std::shared_lock lock(manifest_mu_);
      all = entries_;
    }
    sort_entries(all);
    StoreManifest m;
    m.total = all.size();
    m.page = std::max<std::size_t>(1, page);
    m.page_size = page_size == 0 ? all.size() : page_size;
    const std::size_t begin = page_size == 0 ? 0 : (m.page - 1) * page_size;
    for (std::size_t i = begin; i < all.size() && (page_size == 0 || i < begin + page_size); ++i) m.sessions.push_back(all[i]);
    return m;
  }

  // Appends under the session's write lock; timestamps are strictly
  // increasing within a session. A repeated non-empty request_id is a no-op.
  std::vector<Annotation> add_annotation(const std::string& id, Annotation a) {
    if (a.author.empty() || (!a.temperament && a.note.empty())) {
      fail(Errc::EmptyAnnotation, "annotation needs an author and a temperament or note");
    }
    if (!storeio::valid_id(id)) fail(Errc::NotFound, id);
    auto lock = lock_id(id);
    const fs::path dir = session_dir(id);
    json meta = storeio::read_session_meta(dir);
    std::vector<Annotation> list;
    for (const auto& aj : meta.at("annotations")) list.push_back(annotation_from_json(aj));
    if (!a.request_id.empty()) {
      for (const auto& existing : list) {
        if (existing.request_id == a.request_id) return list;
      }
    }
    a.timestamp = storeio::now_iso_micro();
    if (!list.empty() && a.timestamp <= list.back().timestamp) a.timestamp = storeio::bump_micro(list.back().timestamp);
    list.push_back(a);
    meta["annotations"] = annotations_to_json(list);
    storeio::write_file_atomic(dir / "session.json", meta.dump(2) + "\n", opts_.fault_hook, "annotation_written");
    return list;
  }

  // Returns the cached analysis, computing and caching it on first use.
  json analyze_session(const std::string& id, const AnalysisConfig& cfg = {}) {
    SessionRecord s = load_session(id);
    if (s.analysis) return *s.analysis;
    json payload;
    try {
      payload = analyze_record(s, cfg);
    } catch (const Error& e) {
      fail(Errc::AnalysisFailure, e.what());
    }
    hook("analysis_computed");
    store_analysis(id, payload);
    return payload;
  }

  void store_analysis(const std::string& id, const json& payload) {
    auto lock = lock_id(id);
    const fs::path dir = session_dir(id);
    json meta = storeio::read_session_meta(dir);
    const std::string bytes = payload.dump() + "\n";
    storeio::write_file_atomic(dir / "analysis.json", bytes);
    meta["analysis_file"] = "analysis.json";
    meta["checksums"]["analysis.json"] = storeio::crc32_hex(bytes);
    storeio::write_file_atomic(dir / "session.json", meta.dump(2) + "\n");
  }

  // Re-reads the directory (as a fresh process would after a crash).
  void recover() {
    std::unique_lock mlock(manifest_mu_);
    std::error_code ec;
    std::vector<ManifestEntry> found;
    for (const auto& de : fs::directory_iterator(root_, ec)) {
      const auto name = de.path().filename().string();
      if (name.rfind(".tmp-", 0) == 0) {
        fs::remove_all(de.path(), ec);
        continue;
      }
      if (de.is_regular_file() && name.size() > 4 && name.substr(name.size() - 4) == ".tmp") {
        fs::remove(de.path(), ec);
        continue;
      }
      if (!de.is_directory()) continue;
      for (const auto& inner : fs::directory_iterator(de.path(), ec)) {
        const auto iname = inner.path().filename().string();
        if (iname.size() > 4 && iname.substr(iname.size() - 4) == ".tmp") fs::remove(inner.path(), ec);
      }
      if (!fs::exists(de.path() / "session.json")) continue;
      try {
        const json meta = storeio::read_session_meta(de.path());
        found.push_back({meta.at("id").get<std::string>(), meta.at("created_at").get<std::string>(),
                         label_from_json(meta.at("mmq").at("label"))});
      } catch (...) {
        // Unreadable metadata stays on disk but out of the index.
      }
    }
    sort_entries(found);
    entries_ = std::move(found);
    const auto manifest_path = root_ / "manifest.json";
    const std::string want = manifest_bytes_locked();
    std::string have;
    try {
      have = storeio::read_file(manifest_path);
    } catch (const Error&) {
    }
    if (have != want) storeio::write_file_atomic(manifest_path, want);
  }

 private:
  static void sort_entries(std::vector<ManifestEntry>& v) {
    std::sort(v.begin(), v.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
      if (a.created_at != b.created_at) return a.created_at > b.created_at;
      return a.id < b.id;
    });
  }

  std::string manifest_bytes_locked() const {
    std::vector<ManifestEntry> sorted = entries_;
    sort_entries(sorted);
    StoreManifest m;
    m.total = sorted.size();
    m.page_size = sorted.size();
    m.sessions = std::move(sorted);
    json j = to_json(m);
    j.erase("page");
    j.erase("page_size");
    return j.dump(2) + "\n";
  }

  void write_manifest_locked() {
    storeio::write_file_atomic(root_ / "manifest.json", manifest_bytes_locked(), opts_.fault_hook, "manifest_written");
  }

  std::unique_lock<std::mutex> lock_id(const std::string& id) {
    std::shared_ptr<std::mutex> m;
    {
      std::lock_guard g(locks_mu_);
      auto& slot = id_locks_[id];
      if (!slot) slot = std::make_shared<std::mutex>();
      m = slot;
    }
    // The map keeps the mutex alive for the store's lifetime.
    return std::unique_lock<std::mutex>(*m);
  }

  void hook(std::string_view stage) const {
    if (opts_.fault_hook) opts_.fault_hook(stage);
  }

  fs::path root_;
  StoreOptions opts_;
  mutable std::shared_mutex manifest_mu_;
  std::vector<ManifestEntry> entries_;
  std::mutex locks_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> id_locks_;
  std::atomic<std::uint64_t> tmp_counter_{0};
};

}  // namespace mizaj
