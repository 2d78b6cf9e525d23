#pragma once

// HTTP/JSON front end over SessionStore, plus a small blocking client.

#include <charconv>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "mizaj/error.hpp"
#include "mizaj/json_io.hpp"
#include "mizaj/store.hpp"

namespace mizaj {

inline constexpr std::string_view kServiceVersion = "1.0.0";

inline int http_status(Errc c) {
  switch (c) {
    case Errc::NotFound: return 404;
    case Errc::DuplicateId: return 409;
    case Errc::AnalysisFailure: return 422;
    case Errc::CorruptRecord:
    case Errc::StorageFailure: return 500;
    default: return 400;
  }
}

inline std::optional<std::string> token_from_env() {
  const char* t = std::getenv("TELECARE_TOKEN");
  if (t == nullptr || *t == '\0') return std::nullopt;
  return std::string(t);
}

struct ServiceOptions {
  AnalysisConfig analysis;
  std::optional<std::string> token = token_from_env();
};

class TelecareService {
 public:
  TelecareService(SessionStore& store, ServiceOptions opts = {}) : store_(store), opts_(std::move(opts)) { routes(); }
  ~TelecareService() { stop(); }
  TelecareService(const TelecareService&) = delete;
  TelecareService& operator=(const TelecareService&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) fail(Errc::StorageFailure, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Blocks in the caller's thread.
  bool listen(const std::string& host, int port) {
    port_ = port;
    return server_.listen(host, port);
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  httplib::Server& server() noexcept { return server_; }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, std::string_view code, std::string_view msg) {
    send_json(res, status, {{"error", code}, {"message", msg}});
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (!opts_.token) return true;
    if (req.get_header_value("Authorization") == "Bearer " + *opts_.token) return true;
    send_error(res, 401, "Unauthorized", "missing or invalid bearer token");
    return false;
  }

  template <class F>
  httplib::Server::Handler guarded(F f, bool auth = true) {
    return [this, f, auth](const httplib::Request& req, httplib::Response& res) {
      if (auth && !authorized(req, res)) return;
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "ParseError", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  static std::size_t query_size(const httplib::Request& req, const char* key, std::size_t dflt) {
    if (!req.has_param(key)) return dflt;
    const auto v = req.get_param_value(key);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail(Errc::ParseError, std::string("bad query parameter ") + key);
    return out;
  }

  void routes() {
    server_.Get("/api/v1/health", guarded(
                                      [](const httplib::Request&, httplib::Response& res) {
                                        send_json(res, 200, {{"status", "ok"}, {"version", kServiceVersion}});
                                      },
                                      false));

    server_.Post("/api/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   SessionRecord s = session_from_json(json::parse(req.body));
                   // Uploaded analyses are checked against a local recomputation.
                   std::optional<bool> verified;
                   if (s.analysis) {
                     try {
                       const json fresh = analyze_record(s, opts_.analysis);
                       verified = fresh.dump() == s.analysis->dump();
                       s.analysis = fresh;
                     } catch (const Error&) {
                       verified = false;
                       s.analysis.reset();
                     }
                   }
                   const auto id = store_.save_session(s);
                   json body = {{"id", id}};
                   if (verified) body["analysis_verified"] = *verified;
                   send_json(res, 201, body);
                 }));

    server_.Get("/api/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto page = query_size(req, "page", 1);
                  const auto size = query_size(req, "page_size", 20);
                  if (page == 0 || size == 0) fail(Errc::ParseError, "page and page_size must be positive");
                  send_json(res, 200, to_json(store_.list_sessions(page, size)));
                }));

    server_.Get(R"(/api/v1/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, to_json(store_.load_session(req.matches[1])));
                }));

    server_.Get(R"(/api/v1/sessions/([^/]+)/analysis)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, store_.analyze_session(req.matches[1], opts_.analysis));
                }));

    server_.Post(R"(/api/v1/sessions/([^/]+)/annotations)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   Annotation a = annotation_from_json(json::parse(req.body));
                   a.timestamp.clear();
                   const auto list = store_.add_annotation(req.matches[1], std::move(a));
                   send_json(res, 201, annotations_to_json(list));
                 }));
  }

  SessionStore& store_;
  ServiceOptions opts_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

struct HttpResult {
  int status = 0;  // 0 when the connection failed
  json body;
  bool ok() const noexcept { return status >= 200 && status < 300; }
};

class TelecareClient {
 public:
  explicit TelecareClient(const std::string& base_url, std::optional<std::string> token = token_from_env())
      : cli_(base_url), token_(std::move(token)) {
    cli_.set_connection_timeout(5, 0);
    cli_.set_read_timeout(120, 0);
    cli_.set_write_timeout(120, 0);
  }

  HttpResult health() { return wrap(cli_.Get("/api/v1/health", headers())); }
  HttpResult post_session(const SessionRecord& s) {
    return wrap(cli_.Post("/api/v1/sessions", headers(), to_json(s).dump(), "application/json"));
  }
  HttpResult list_sessions(std::size_t page, std::size_t page_size) {
    return wrap(cli_.Get("/api/v1/sessions?page=" + std::to_string(page) + "&page_size=" + std::to_string(page_size),
                         headers()));
  }
  HttpResult get_session(const std::string& id) { return wrap(cli_.Get("/api/v1/sessions/" + id, headers())); }
  HttpResult analysis(const std::string& id) { return wrap(cli_.Get("/api/v1/sessions/" + id + "/analysis", headers())); }
  HttpResult annotate(const std::string& id, const Annotation& a) {
    return wrap(cli_.Post("/api/v1/sessions/" + id + "/annotations", headers(), to_json(a).dump(), "application/json"));
  }

 private:
  httplib::Headers headers() const {
    httplib::Headers h;
    if (token_) h.emplace("Authorization", "Bearer " + *token_);
    return h;
  }

  static HttpResult wrap(const httplib::Result& r) {
    HttpResult out;
    if (!r) return out;
    out.status = r->status;
    out.body = json::parse(r->body, nullptr, false);
    return out;
  }

  httplib::Client cli_;
  std::optional<std::string> token_;
};

}  // namespace mizaj
