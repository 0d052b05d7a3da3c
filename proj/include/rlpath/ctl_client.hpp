#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"
#include "rlpath/flows.hpp"
#include "rlpath/topo.hpp"

namespace rlpath {

// Northbound REST paths; overridable for controller versions that moved them.
struct ControllerPaths {
  std::string links = "/wm/topology/links/json";
  std::string devices = "/wm/device/";
  std::string push = "/wm/staticflowpusher/json";
  std::string list = "/wm/staticflowpusher/list/all/json";
};

struct ControllerEndpoint {
  std::string base_url;
  std::chrono::milliseconds timeout{10'000};
  int retries = 2;
  // First retry delay; doubles on each further attempt.
  std::chrono::milliseconds backoff{200};
  ControllerPaths paths;
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, without trailing '/'
  bool tls = false;
};

inline SplitUrl split_url(const std::string& url) {
  SplitUrl out;
  std::string rest;
  if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else if (url.rfind("https://", 0) == 0) {
    rest = url.substr(8);
    out.tls = true;
  } else {
    throw ConfigError("controller URL must start with http:// or https://: '" + url + "'");
  }
  const auto slash = rest.find('/');
  const std::string authority = rest.substr(0, slash);
  if (authority.empty() || authority.front() == ':') {
    throw ConfigError("controller URL has no host: '" + url + "'");
  }
  out.origin = url.substr(0, url.size() - rest.size()) + authority;
  if (slash != std::string::npos) {
    out.prefix = rest.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

inline std::string snippet(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace detail

inline void validate_endpoint(const ControllerEndpoint& ep) {
  detail::split_url(ep.base_url);
  if (ep.retries < 0) throw ConfigError("retries must be >= 0");
  if (ep.timeout.count() <= 0) throw ConfigError("timeout must be positive");
}

// Blocking client with per-request timeout and retry on transport failures
// and 5xx answers. 4xx answers are returned to the caller untouched.
class ControllerClient {
 public:
  explicit ControllerClient(ControllerEndpoint ep) : ep_(std::move(ep)) {
    url_ = detail::split_url(ep_.base_url);
    if (url_.tls) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
      throw TransportError("https controller URLs need a TLS-enabled build");
#endif
    }
  }

  const ControllerEndpoint& endpoint() const { return ep_; }

  httplib::Result get(const std::string& path) const {
    return with_retry([&](httplib::Client& c) { return c.Get(url_.prefix + path); });
  }

  httplib::Result post_json(const std::string& path, const std::string& body) const {
    return with_retry(
        [&](httplib::Client& c) { return c.Post(url_.prefix + path, body, "application/json"); });
  }

 private:
  template <class Call>
  httplib::Result with_retry(Call&& call) const {
    auto delay = ep_.backoff;
    for (int attempt = 0;; ++attempt) {
      httplib::Client client(url_.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(ep_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      auto res = call(client);
      const bool retryable = !res || res->status >= 500;
      if (!retryable || attempt >= ep_.retries) {
        if (!res) {
          throw TransportError("request to " + url_.origin + " failed after " +
                               std::to_string(attempt + 1) +
                               " attempt(s): " + httplib::to_string(res.error()));
        }
        return res;
      }
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }

  ControllerEndpoint ep_;
  detail::SplitUrl url_;
};

inline std::string expect_ok(const httplib::Result& res) {
  if (res->status != 200) throw ProtocolError(res->status, detail::snippet(res->body));
  return res->body;
}

// Raw links and devices bodies, for parse_topology.
inline FixtureBytes fetch_topology(const ControllerEndpoint& ep) {
  ControllerClient client(ep);
  FixtureBytes out;
  out.links = expect_ok(client.get(ep.paths.links));
  out.devices = expect_ok(client.get(ep.paths.devices));
  return out;
}

struct PushReport {
  std::size_t accepted = 0;
  std::vector<std::pair<std::string, std::string>> rejected;  // (name, reason)
};

inline nlohmann::ordered_json push_report_to_json(const PushReport& r) {
  nlohmann::ordered_json doc;
  doc["accepted"] = r.accepted;
  auto& rej = doc["rejected"] = nlohmann::ordered_json::array();
  for (const auto& [name, reason] : r.rejected) rej.push_back({{"name", name}, {"reason", reason}});
  return doc;
}

// One POST per entry. A 4xx is recorded as a rejection and pushing goes on;
// a transport failure or exhausted 5xx stops the batch with an exception.
inline PushReport push_flows(const ControllerEndpoint& ep, const std::vector<FlowEntry>& entries) {
  PushReport report;
  if (entries.empty()) return report;
  ControllerClient client(ep);
  for (const auto& e : entries) {
    auto res = client.post_json(ep.paths.push, render_entry(e));
    if (res->status >= 200 && res->status < 300) {
      ++report.accepted;
    } else if (res->status >= 400 && res->status < 500) {
      std::string reason = detail::snippet(res->body);
      try {
        auto doc = nlohmann::json::parse(res->body);
        if (doc.is_object() && doc.contains("reason") && doc["reason"].is_string()) {
          reason = doc["reason"].get<std::string>();
        }
      } catch (const nlohmann::json::exception&) {
      }
      report.rejected.emplace_back(e.name, reason);
    } else {
      throw ProtocolError(res->status, detail::snippet(res->body));
    }
  }
  return report;
}

inline PushReport push_flows(const ControllerEndpoint& ep, const FlowBatch& batch) {
  return push_flows(ep, batch.entries);
}

// In-process stand-in for the controller. Serves the fixture's links and
// devices bodies verbatim and records POSTed flow entries that pass
// validation against the fixture's switches and ports.
class MockController {
 public:
  explicit MockController(FixtureBytes fixture, ControllerPaths paths = {})
      : fixture_(std::move(fixture)),
        topo_(parse_topology(fixture_.links, fixture_.devices)),
        paths_(std::move(paths)) {
    install_routes();
  }

  MockController(const MockController&) = delete;
  MockController& operator=(const MockController&) = delete;

  ~MockController() { stop(); }

  // Binds and serves on a background thread. Port 0 picks a free port.
  void start(const std::string& host = "127.0.0.1", int port = 0) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) {
      throw TransportError("mock controller cannot bind " + host + ":" + std::to_string(port));
    }
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  // Blocks serving on the calling thread until stop() is called elsewhere.
  void run(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) {
      throw TransportError("mock controller cannot bind " + host + ":" + std::to_string(port));
    }
    host_ = host;
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

  std::vector<FlowEntry> received_flows() const {
    std::lock_guard lock(mutex_);
    return received_;
  }

  const Topology& topology() const { return topo_; }

  // Reason string for a rejected entry, empty when the entry is acceptable.
  std::string validate(const FlowEntry& e) const {
    if (!topo_.has_switch(e.switch_id)) return "unknown switch";
    const auto ports = topo_.ports_of(e.switch_id);
    if (!std::binary_search(ports.begin(), ports.end(), e.in_port)) {
      return "unknown port " + std::to_string(e.in_port) + " on " + e.switch_id.str();
    }
    if (!std::binary_search(ports.begin(), ports.end(), e.output_port)) {
      return "unknown port " + std::to_string(e.output_port) + " on " + e.switch_id.str();
    }
    return {};
  }

 private:
  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void install_routes() {
    server_.Get(paths_.links, [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(fixture_.links, "application/json");
    });
    server_.Get(paths_.devices, [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(fixture_.devices, "application/json");
    });
    server_.Post(paths_.push, [this](const httplib::Request& req, httplib::Response& res) {
      FlowEntry entry;
      try {
        entry = parse_entry(req.body);
      } catch (const ParseError&) {
        return reply(res, 400, {{"status", "error"}, {"reason", "invalid JSON"}});
      } catch (const ValidationError& e) {
        return reply(res, 400, {{"status", "error"}, {"reason", e.what()}});
      }
      if (auto reason = validate(entry); !reason.empty()) {
        return reply(res, 400, {{"status", "error"}, {"reason", reason}});
      }
      {
        std::lock_guard lock(mutex_);
        received_.push_back(std::move(entry));
      }
      reply(res, 200, {{"status", "Entry pushed"}});
    });
    server_.Get(paths_.list, [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const auto& e : received_flows()) list.push_back(entry_to_json(e));
      res.set_content(list.dump(), "application/json");
    });
  }

  FixtureBytes fixture_;
  Topology topo_;
  ControllerPaths paths_;
  httplib::Server server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = -1;
  mutable std::mutex mutex_;
  std::vector<FlowEntry> received_;
};

// Entries recorded by a controller's list endpoint, in arrival order.
inline std::vector<FlowEntry> list_flows(const ControllerEndpoint& ep) {
  ControllerClient client(ep);
  const auto body = expect_ok(client.get(ep.paths.list));
  std::vector<FlowEntry> out;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed flow list: ") + e.what(), e.byte);
  }
  if (!doc.is_array()) throw ValidationError("flow list must be a JSON array");
  for (const auto& rec : doc) out.push_back(parse_entry(rec.dump()));
  return out;
}

}  // namespace rlpath
