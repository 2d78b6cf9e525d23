// mizaj: operator entry point.
//
//   mizaj simulate --n 34 --seed 42 --out data
//   mizaj analyze data/sim-42-001 --out report [--svg]
//   mizaj serve --addr 127.0.0.1:8080 --data-dir remote
//   mizaj ingest data --server http://127.0.0.1:8080
//   mizaj eval --dataset remote --k 5 --seed 1 [--axis warm|wet]
//   mizaj report data/sim-42-001
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mizaj/detail/numfmt.hpp"
#include "mizaj/device_sim.hpp"
#include "mizaj/json_io.hpp"
#include "mizaj/service.hpp"
#include "mizaj/session_analysis.hpp"
#include "mizaj/store.hpp"

namespace fs = std::filesystem;
using namespace mizaj;

namespace {

struct CliConfig {
  std::string data_dir;
  std::string server_url;
  std::optional<SensorLayout> sensor_layout;
  std::string mmq_schema;
  std::string listen_addr = "127.0.0.1:8080";
};

CliConfig load_config(const std::string& path) {
  CliConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) fail(Errc::NotFound, "config file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::ParseError, "config: " + std::string(e.what()));
  }
  c.data_dir = j.value("data_dir", "");
  c.server_url = j.value("server_url", "");
  c.mmq_schema = j.value("mmq_schema", "");
  c.listen_addr = j.value("listen_addr", c.listen_addr);
  if (j.contains("sensor_layout")) c.sensor_layout = layout_from_json(j.at("sensor_layout"));
  if (!c.mmq_schema.empty() && !fs::exists(c.mmq_schema)) fail(Errc::NotFound, "mmq schema not found: " + c.mmq_schema);
  return c;
}

AnalysisConfig analysis_config(const CliConfig& c) {
  AnalysisConfig a;
  if (c.sensor_layout) a.layout = *c.sensor_layout;
  return a;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(Errc::StorageFailure, "cannot write " + p.string());
  out << s;
}

// A session argument is a session directory or an id inside data_dir.
fs::path resolve_session(const std::string& arg, const std::string& data_dir) {
  if (fs::exists(fs::path(arg) / "session.json")) return arg;
  if (!data_dir.empty() && fs::exists(fs::path(data_dir) / arg / "session.json")) return fs::path(data_dir) / arg;
  fail(Errc::NotFound, "no session at '" + arg + "'");
}

std::string num(double v) { return detail::format_double(v); }

// --- CSV tables ---------------------------------------------------------------

std::string phase_power_csv(const json& a) {
  std::string out = "channel,phase1,phase2,phase3\n";
  const auto& pp = a.at("phase_power");
  for (std::size_t c = 0; c < pp.size(); ++c) {
    out += std::to_string(c + 1);
    for (const auto& v : pp[c]) out += "," + num(v.get<double>());
    out += "\n";
  }
  return out;
}

std::string timeline_csv(const json& a) {
  std::string out = "channel,t_s,strength\n";
  const auto& tl = a.at("power_timeline");
  for (std::size_t c = 0; c < tl.size(); ++c) {
    for (const auto& p : tl[c]) {
      out += std::to_string(c + 1) + "," + num(p.at("t_s").get<double>()) + "," + num(p.at("strength").get<double>()) + "\n";
    }
  }
  return out;
}

std::string spatial_csv(const json& a) {
  std::string out = "channel,x_mm,y_mm,strength\n";
  const auto& m = a.at("spatial_map");
  const auto& xy = m.at("sensor_xy_mm");
  const auto& st = m.at("strength");
  for (std::size_t c = 0; c < st.size(); ++c) {
    out += std::to_string(c + 1) + "," + num(xy[c].at("x_mm").get<double>()) + "," + num(xy[c].at("y_mm").get<double>()) + "," +
           num(st[c].get<double>()) + "\n";
  }
  return out;
}

// --- SVG bar charts (rendered from the same tables) ---------------------------

std::string bar_svg(const std::string& title, const std::vector<std::string>& groups,
                    const std::vector<std::string>& series, const std::vector<std::vector<double>>& values) {
  const double w = 640, h = 360, left = 50, bottom = 40, top = 30;
  double vmax = 0.0;
  for (const auto& row : values) {
    for (double v : row) vmax = std::max(vmax, v);
  }
  if (!(vmax > 0.0)) vmax = 1.0;
  const char* colors[] = {"#3b6ea8", "#c8553d", "#5c946e", "#8e6c8a"};
  const double plot_w = w - left - 10, plot_h = h - top - bottom;
  const double gw = plot_w / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  const double bw = gw * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
     << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
     << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - 10 << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = values[g][s];
      const double bh = plot_h * v / vmax;
      const double x = left + gw * static_cast<double>(g) + gw * 0.1 + bw * static_cast<double>(s);
      os << "<rect x=\"" << x << "\" y=\"" << (h - bottom - bh) << "\" width=\"" << bw << "\" height=\"" << bh
         << "\" fill=\"" << colors[s % 4] << "\"/>\n";
    }
    os << "<text x=\"" << left + gw * (static_cast<double>(g) + 0.5) << "\" y=\"" << h - bottom + 16
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << groups[g] << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<text x=\"" << w - 120 << "\" y=\"" << top + 14 * static_cast<double>(s + 1)
       << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << colors[s % 4] << "\">" << series[s] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svgs(const fs::path& out, const json& a) {
  std::vector<std::string> groups;
  std::vector<std::vector<double>> pp;
  for (std::size_t c = 0; c < a.at("phase_power").size(); ++c) {
    groups.push_back("ch" + std::to_string(c + 1));
    pp.push_back(a.at("phase_power")[c].get<std::vector<double>>());
  }
  write_text(out / "phase_power.svg", bar_svg("Pulse power per pressure phase", groups, {"phase1", "phase2", "phase3"}, pp));
  std::vector<std::vector<double>> st;
  for (const auto& v : a.at("spatial_map").at("strength")) st.push_back({v.get<double>()});
  write_text(out / "spatial_map.svg", bar_svg("Pulse strength per sensor", groups, {"strength"}, st));
}

// --- eval datasets ----------------------------------------------------------

struct Dataset {
  std::vector<std::string> ids;
  std::vector<TemperamentLabel> labels;
  FeatureMatrix warm;  // warm/cold feature columns
  FeatureMatrix wet;   // dry/wet feature columns
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// id,label_warm,label_wet,f1..fN. With 25 feature columns the first 13 are
// the warm/cold vector and the last 12 the dry/wet vector; any other width
// feeds both axes with every column.
Dataset read_dataset_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(Errc::NotFound, "dataset not found: " + p.string());
  std::string line;
  if (!std::getline(in, line)) fail(Errc::EmptyInput, "empty dataset");
  const auto header = split_csv(line);
  if (header.size() < 4 || header[1] != "label_warm" || header[2] != "label_wet") {
    fail(Errc::ParseError, "dataset header must start with id,label_warm,label_wet");
  }
  const std::size_t nf = header.size() - 3;
  Dataset d;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) fail(Errc::ParseError, "dataset row has " + std::to_string(cells.size()) + " cells");
    d.ids.push_back(cells[0]);
    d.labels.push_back({parse_warm_axis(cells[1]), parse_wet_axis(cells[2])});
    std::vector<double> f;
    for (std::size_t i = 3; i < cells.size(); ++i) f.push_back(detail::parse_double(cells[i]));
    if (nf == 25) {
      d.warm.emplace_back(f.begin(), f.begin() + 13);
      d.wet.emplace_back(f.begin() + 13, f.end());
    } else {
      d.warm.push_back(f);
      d.wet.push_back(f);
    }
  }
  return d;
}

// Features come from the wrist ROI, the cached analysis when present.
Dataset read_dataset_store(const fs::path& root) {
  SessionStore store(root);
  auto listing = store.list_sessions();
  // Chronological order, independent of how the listing sorts.
  std::reverse(listing.sessions.begin(), listing.sessions.end());
  Dataset d;
  for (const auto& e : listing.sessions) {
    const SessionRecord s = store.load_session(e.id);
    std::optional<std::pair<std::vector<double>, std::vector<double>>> feats;
    if (s.analysis && s.analysis->contains("thermal")) {
      for (const auto& t : s.analysis->at("thermal")) {
        if (t.at("region_kind") == region_name(RegionKind::WristMalmas)) {
          feats.emplace(t.at("warm_cold").at("values").get<std::vector<double>>(),
                        t.at("dry_wet").at("values").get<std::vector<double>>());
          break;
        }
      }
    }
    if (!feats) {
      for (const auto& cap : s.thermal) {
        if (cap.roi.region_kind != RegionKind::WristMalmas) continue;
        const auto ta = analyze_thermal(cap);
        feats.emplace(ta.warm_cold.values, ta.dry_wet.values);
        break;
      }
    }
    if (!feats) fail(Errc::EmptyInput, "session " + s.id + " has no wrist thermal capture");
    d.ids.push_back(s.id);
    d.labels.push_back(s.mmq.label);
    d.warm.push_back(feats->first);
    d.wet.push_back(feats->second);
  }
  if (d.ids.empty()) fail(Errc::EmptyInput, "no sessions in " + root.string());
  return d;
}

// --- subcommands ------------------------------------------------------------

int cmd_simulate(std::size_t n, std::uint64_t seed, const std::string& out, const CliConfig& cfg) {
  MmqSchema schema = default_mmq_schema();
  if (!cfg.mmq_schema.empty()) {
    std::ifstream in(cfg.mmq_schema);
    schema = mmq_schema_from_json(json::parse(in));
  }
  SessionStore store(out);
  for (const auto& s : generate_cohort(n, scaled_mix(n), seed, schema)) {
    store.save_session(s);
    std::cout << s.id << "\n";
  }
  return 0;
}

int cmd_analyze(const std::string& session, const std::string& out, bool svg, const CliConfig& cfg) {
  const SessionRecord s = storeio::read_session_dir(resolve_session(session, cfg.data_dir));
  json a;
  try {
    a = analyze_record(s, analysis_config(cfg));
  } catch (const Error& e) {
    fail(Errc::AnalysisFailure, e.what());
  }
  fs::create_directories(out);
  json report = {{"session_id", s.id}, {"analysis", a}};
  write_text(fs::path(out) / "report.json", report.dump(2) + "\n");
  write_text(fs::path(out) / "phase_power.csv", phase_power_csv(a));
  write_text(fs::path(out) / "power_timeline.csv", timeline_csv(a));
  write_text(fs::path(out) / "spatial_map.csv", spatial_csv(a));
  if (svg) write_svgs(out, a);
  std::cout << fs::path(out) / "report.json" << "\n";
  return 0;
}

std::pair<std::string, int> split_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) fail(Errc::ParseError, "address must be host:port");
  int port = 0;
  const auto tail = addr.substr(colon + 1);
  const auto [p, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), port);
  if (ec != std::errc() || p != tail.data() + tail.size() || port < 0 || port > 65535) {
    fail(Errc::ParseError, "bad port in " + addr);
  }
  return {addr.substr(0, colon), port};
}

TelecareService* g_service = nullptr;

int cmd_serve(const std::string& addr, const std::string& data_dir, const CliConfig& cfg) {
  if (data_dir.empty()) fail(Errc::NotFound, "serve needs --data-dir");
  const auto [host, port] = split_addr(addr);
  SessionStore store(data_dir);
  ServiceOptions opts;
  opts.analysis = analysis_config(cfg);
  TelecareService svc(store, opts);
  g_service = &svc;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->server().stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->server().stop();
  });
  if (port == 0) {
    const int bound = svc.server().bind_to_any_port(host);
    std::cerr << "listening on " << host << ":" << bound << std::endl;
    svc.server().listen_after_bind();
  } else {
    std::cerr << "listening on " << host << ":" << port << std::endl;
    if (!svc.listen(host, port)) fail(Errc::StorageFailure, "cannot listen on " + addr);
  }
  g_service = nullptr;
  return 0;
}

int cmd_ingest(const std::string& target, const std::string& server, const CliConfig& cfg) {
  if (server.empty()) fail(Errc::NotFound, "ingest needs --server");
  std::vector<fs::path> dirs;
  if (fs::exists(fs::path(target) / "manifest.json") && !fs::exists(fs::path(target) / "session.json")) {
    SessionStore store(target);
    auto listing = store.list_sessions();
    std::reverse(listing.sessions.begin(), listing.sessions.end());
    for (const auto& e : listing.sessions) dirs.push_back(store.session_dir(e.id));
  } else {
    dirs.push_back(resolve_session(target, cfg.data_dir));
  }
  TelecareClient client(server);
  int failures = 0;
  for (const auto& dir : dirs) {
    const SessionRecord s = storeio::read_session_dir(dir);
    const auto r = client.post_session(s);
    if (r.status == 201) {
      std::cout << s.id << " ingested\n";
    } else if (r.status == 409) {
      std::cout << s.id << " already present\n";
    } else {
      ++failures;
      std::cerr << s.id << ": " << (r.status == 0 ? std::string("connection failed") : "HTTP " + std::to_string(r.status))
                << (r.body.is_object() ? " " + r.body.value("message", "") : "") << "\n";
    }
  }
  return failures == 0 ? 0 : 2;
}

int cmd_eval(const std::string& dataset, std::size_t k, std::uint64_t seed, const std::string& axis,
             const std::string& positive, const std::string& out) {
  const Dataset d = fs::is_directory(dataset) ? read_dataset_store(dataset) : read_dataset_csv(dataset);
  std::vector<int> y;
  int pos = 0;
  if (axis == "warm") {
    for (const auto& l : d.labels) y.push_back(static_cast<int>(l.warm_axis));
    pos = static_cast<int>(positive.empty() ? WarmAxis::Warm : parse_warm_axis(positive));
  } else {
    for (const auto& l : d.labels) y.push_back(static_cast<int>(l.wet_axis));
    pos = static_cast<int>(positive.empty() ? WetAxis::Wet : parse_wet_axis(positive));
  }
  const auto rep = cross_validate(axis == "warm" ? d.warm : d.wet, y, k, seed, NearestCentroid{}, pos);
  json j = to_json(rep);
  j["axis"] = axis;
  j["positive_class"] = axis == "warm" ? to_string(static_cast<WarmAxis>(pos)) : to_string(static_cast<WetAxis>(pos));
  j["n"] = d.ids.size();
  json pred = json::array();
  for (std::size_t i = 0; i < d.ids.size(); ++i) {
    const auto p = rep.predictions[i];
    pred.push_back({{"id", d.ids[i]},
                    {"truth", axis == "warm" ? to_string(static_cast<WarmAxis>(y[i])) : to_string(static_cast<WetAxis>(y[i]))},
                    {"predicted", axis == "warm" ? to_string(static_cast<WarmAxis>(p)) : to_string(static_cast<WetAxis>(p))}});
  }
  j["predictions"] = pred;
  const auto text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

int cmd_report(const std::string& session, const CliConfig& cfg) {
  const SessionRecord s = storeio::read_session_dir(resolve_session(session, cfg.data_dir));
  json a;
  if (s.analysis) {
    a = *s.analysis;
  } else {
    try {
      a = analyze_record(s, analysis_config(cfg));
    } catch (const Error& e) {
      fail(Errc::AnalysisFailure, e.what());
    }
  }
  auto& os = std::cout;
  os << "session      " << s.id << "\n"
     << "created_at   " << s.created_at << "\n"
     << "participant  " << s.participant.pseudo_id << " (" << num(s.participant.age_years) << " y, " << s.participant.sex
     << ")\n"
     << "temperament  " << to_string(s.mmq.label.warm_axis) << "/" << to_string(s.mmq.label.wet_axis) << "\n"
     << "heart rate   " << num(a.at("heart_rate_bpm").get<double>()) << " bpm\n";
  const auto& seg = a.at("phase_segmentation");
  os << "phases       ";
  for (const char* k : {"phase1", "phase2", "phase3"}) os << k << "=[" << seg.at(k)[0] << "," << seg.at(k)[1] << ") ";
  os << "\n\nchannel  strength      lag_ms   phase1        phase2        phase3\n";
  for (std::size_t c = 0; c < a.at("channel_strength").size(); ++c) {
    std::string line = std::to_string(c + 1);
    line.resize(9, ' ');
    auto cell = [&](double v, int dec) {
      std::string t;
      detail::append_fixed(t, v, dec);
      t.resize(std::max<std::size_t>(t.size() + 1, 14), ' ');
      line += t;
    };
    cell(a.at("channel_strength")[c].get<double>(), 6);
    std::string lag;
    detail::append_fixed(lag, a.at("lag_s")[c].get<double>() * 1000.0, 1);
    lag.resize(9, ' ');
    line += lag;
    for (const auto& v : a.at("phase_power")[c]) cell(v.get<double>(), 6);
    os << line << "\n";
  }
  const auto& m = a.at("spatial_map");
  os << "\nspatial map  length " << num(m.at("length_mm").get<double>()) << " mm, width "
     << num(m.at("width_mm").get<double>()) << " mm\n";
  for (const auto& t : a.at("thermal")) {
    os << "thermal      " << t.at("region_kind").get<std::string>() << ": mean "
       << num(t.at("warm_cold").at("values")[0].get<double>()) << " C\n";
  }
  os << "annotations  " << s.annotations.size() << "\n";
  for (const auto& an : s.annotations) {
    os << "  " << an.timestamp << " " << an.author;
    if (an.temperament) os << " [" << to_string(an.temperament->warm_axis) << "/" << to_string(an.temperament->wet_axis) << "]";
    if (!an.note.empty()) os << " " << an.note;
    os << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mizaj: wrist pulse and thermal temperament pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file");

  auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort into a session store");
  std::size_t n = 34;
  std::uint64_t seed = 42;
  std::string out;
  sim->add_option("--n", n, "cohort size")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out, "output store directory")->required();

  auto* ana = app.add_subcommand("analyze", "analyze one session and write report tables");
  std::string session;
  std::string ana_out;
  bool svg = false;
  ana->add_option("session", session, "session directory or id")->required();
  ana->add_option("--out", ana_out, "output directory")->required();
  ana->add_flag("--svg", svg, "also render SVG bar charts");

  auto* srv = app.add_subcommand("serve", "run the telecare HTTP service");
  std::string addr;
  std::string data_dir;
  srv->add_option("--addr", addr, "host:port");
  srv->add_option("--data-dir", data_dir, "store directory");

  auto* ing = app.add_subcommand("ingest", "upload sessions to a telecare service");
  std::string ing_target;
  std::string server;
  ing->add_option("session", ing_target, "session directory, id, or a whole store")->required();
  ing->add_option("--server", server, "service base URL");

  auto* ev = app.add_subcommand("eval", "K-fold nearest-centroid evaluation");
  std::string dataset;
  std::size_t k = 5;
  std::uint64_t ev_seed = 1;
  std::string axis = "warm";
  std::string positive;
  std::string ev_out;
  ev->add_option("--dataset", dataset, "feature CSV or session store directory")->required();
  ev->add_option("--k", k, "number of folds");
  ev->add_option("--seed", ev_seed, "fold assignment seed");
  ev->add_option("--axis", axis, "warm or wet")->check(CLI::IsMember({"warm", "wet"}));
  ev->add_option("--positive", positive, "positive class for the one-vs-rest metrics");
  ev->add_option("--out", ev_out, "write the JSON report here instead of stdout");

  auto* rep = app.add_subcommand("report", "print a human-readable session summary");
  std::string rep_session;
  rep->add_option("session", rep_session, "session directory or id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const CliConfig cfg = load_config(config_path);
    if (*sim) return cmd_simulate(n, seed, out, cfg);
    if (*ana) return cmd_analyze(session, ana_out, svg, cfg);
    if (*srv) return cmd_serve(addr.empty() ? cfg.listen_addr : addr, data_dir.empty() ? cfg.data_dir : data_dir, cfg);
    if (*ing) return cmd_ingest(ing_target, server.empty() ? cfg.server_url : server, cfg);
    if (*ev) return cmd_eval(dataset, k, ev_seed, axis, positive, ev_out);
    if (*rep) return cmd_report(rep_session, cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
