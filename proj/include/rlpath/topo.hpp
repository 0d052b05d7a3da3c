#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"

namespace rlpath {

namespace detail {

// Matches `octets` colon-separated two-digit hex groups.
inline bool is_colon_hex(std::string_view s, std::size_t octets) {
  if (s.size() != octets * 3 - 1) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i % 3 == 2) {
      if (s[i] != ':') return false;
    } else if (!std::isxdigit(static_cast<unsigned char>(s[i]))) {
      return false;
    }
  }
  return true;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// 8-byte datapath id, "00:00:00:00:00:00:00:01". Stored lower-case.
class SwitchId {
 public:
  SwitchId() = default;

  static SwitchId parse(std::string_view text) {
    if (!detail::is_colon_hex(text, 8)) {
      throw ValidationError("malformed DPID '" + std::string(text) + "'");
    }
    SwitchId id;
    id.dpid_ = detail::to_lower(text);
    return id;
  }

  const std::string& str() const noexcept { return dpid_; }

  auto operator<=>(const SwitchId&) const = default;

 private:
  std::string dpid_;
};

class MacAddress {
 public:
  MacAddress() = default;

  static MacAddress parse(std::string_view text) {
    if (!detail::is_colon_hex(text, 6)) {
      throw ValidationError("malformed MAC '" + std::string(text) + "'");
    }
    MacAddress mac;
    mac.text_ = detail::to_lower(text);
    return mac;
  }

  const std::string& str() const noexcept { return text_; }

  // Last three octets without separators, e.g. "000001".
  std::string short_form() const {
    std::string out;
    for (std::size_t i = 9; i < text_.size(); ++i) {
      if (text_[i] != ':') out += text_[i];
    }
    return out;
  }

  auto operator<=>(const MacAddress&) const = default;

 private:
  std::string text_;
};

struct Link {
  SwitchId src;
  int src_port = 0;
  SwitchId dst;
  int dst_port = 0;
  // Only consulted by WeightMode::inverse_bandwidth.
  std::optional<double> bandwidth_mbps;

  bool operator==(const Link&) const = default;

  // Same unordered endpoint pair with the same port on each switch.
  bool same_wiring(const Link& o) const {
    return (src == o.src && src_port == o.src_port && dst == o.dst && dst_port == o.dst_port) ||
           (src == o.dst && src_port == o.dst_port && dst == o.src && dst_port == o.src_port);
  }
};

struct Host {
  MacAddress mac;
  SwitchId attached_switch;
  int attached_port = 0;

  bool operator==(const Host&) const = default;
};

struct Topology {
  std::vector<SwitchId> switches;  // sorted
  std::vector<Link> links;
  std::vector<Host> hosts;  // sorted by MAC

  bool operator==(const Topology&) const = default;

  bool has_switch(const SwitchId& id) const {
    return std::binary_search(switches.begin(), switches.end(), id);
  }

  // Every port number the topology knows for `id`: link ends and host attachments.
  std::vector<int> ports_of(const SwitchId& id) const {
    std::vector<int> ports;
    for (const auto& l : links) {
      if (l.src == id) ports.push_back(l.src_port);
      if (l.dst == id) ports.push_back(l.dst_port);
    }
    for (const auto& h : hosts) {
      if (h.attached_switch == id) ports.push_back(h.attached_port);
    }
    std::sort(ports.begin(), ports.end());
    ports.erase(std::unique(ports.begin(), ports.end()), ports.end());
    return ports;
  }
};

namespace detail {

inline nlohmann::json parse_json(std::string_view bytes, const char* what) {
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed ") + what + " JSON: " + e.what(), e.byte);
  }
}

// Controllers render ports as numbers or as numeric strings.
inline int port_value(const nlohmann::json& v, const char* key) {
  int port = 0;
  if (v.is_number_integer()) {
    port = v.get<int>();
  } else if (v.is_string()) {
    try {
      std::size_t used = 0;
      port = std::stoi(v.get<std::string>(), &used);
      if (used != v.get<std::string>().size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ValidationError(std::string("non-numeric port in '") + key + "'");
    }
  } else {
    throw ValidationError(std::string("missing or non-integer '") + key + "'");
  }
  if (port < 1) throw ValidationError(std::string("port '") + key + "' must be >= 1");
  return port;
}

inline std::string string_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ValidationError(std::string("missing or non-string '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace detail

// Parses the controller's links and devices responses.
// Hosts without an attachment point are skipped; a note is appended to
// `warnings` when provided.
inline Topology parse_topology(std::string_view links_json, std::string_view devices_json,
                               std::vector<std::string>* warnings = nullptr) {
  const auto links = detail::parse_json(links_json, "links");
  auto devices = detail::parse_json(devices_json, "devices");
  if (devices.is_object() && devices.contains("devices")) devices = devices["devices"];
  if (!links.is_array()) throw ValidationError("links JSON must be an array");
  if (!devices.is_array()) throw ValidationError("devices JSON must be an array");

  Topology topo;
  std::vector<SwitchId> seen;

  for (const auto& rec : links) {
    if (!rec.is_object()) throw ValidationError("link record must be an object");
    Link link;
    link.src = SwitchId::parse(detail::string_field(rec, "src-switch"));
    link.dst = SwitchId::parse(detail::string_field(rec, "dst-switch"));
    link.src_port = detail::port_value(rec.value("src-port", nlohmann::json()), "src-port");
    link.dst_port = detail::port_value(rec.value("dst-port", nlohmann::json()), "dst-port");
    if (link.src == link.dst) throw ValidationError("self-loop on " + link.src.str());
    if (auto bw = rec.find("bandwidth"); bw != rec.end() && bw->is_number()) {
      if (bw->get<double>() <= 0) throw ValidationError("link bandwidth must be positive");
      link.bandwidth_mbps = bw->get<double>();
    }
    // Controllers may report one undirected link once per direction.
    bool duplicate = std::any_of(topo.links.begin(), topo.links.end(),
                                 [&](const Link& l) { return l.same_wiring(link); });
    if (duplicate) continue;
    seen.push_back(link.src);
    seen.push_back(link.dst);
    topo.links.push_back(std::move(link));
  }

  for (const auto& rec : devices) {
    if (!rec.is_object()) throw ValidationError("device record must be an object");
    const auto mac_field = rec.value("mac", nlohmann::json());
    std::string mac_text;
    if (mac_field.is_array() && !mac_field.empty() && mac_field[0].is_string()) {
      mac_text = mac_field[0].get<std::string>();
    } else if (mac_field.is_string()) {
      mac_text = mac_field.get<std::string>();
    } else {
      throw ValidationError("device record without a MAC");
    }
    const auto mac = MacAddress::parse(mac_text);
    const auto aps = rec.value("attachmentPoint", nlohmann::json::array());
    if (!aps.is_array() || aps.empty()) {
      if (warnings) warnings->push_back("host " + mac.str() + " has no attachment point; skipped");
      continue;
    }
    Host host;
    host.mac = mac;
    host.attached_switch = SwitchId::parse(detail::string_field(aps[0], "switchDPID"));
    host.attached_port = detail::port_value(aps[0].value("port", nlohmann::json()), "port");
    seen.push_back(host.attached_switch);
    topo.hosts.push_back(std::move(host));
  }

  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  topo.switches = std::move(seen);
  std::sort(topo.hosts.begin(), topo.hosts.end(),
            [](const Host& a, const Host& b) { return a.mac < b.mac; });
  return topo;
}

struct FixtureBytes {
  std::string links;
  std::string devices;
};

// A fixture directory holds `links.json` and `devices.json` in controller format.
inline FixtureBytes load_fixture(const std::filesystem::path& dir) {
  return {detail::read_file(dir / "links.json"), detail::read_file(dir / "devices.json")};
}

enum class WeightMode { unit, inverse_bandwidth };

inline std::string to_string(WeightMode mode) {
  return mode == WeightMode::unit ? "unit" : "inverse_bandwidth";
}

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "unit") return WeightMode::unit;
  if (s == "inverse_bandwidth") return WeightMode::inverse_bandwidth;
  throw ConfigError("unknown weight mode '" + std::string(s) + "'");
}

// Dense connection matrix over switches plus the two endpoint nodes.
struct AdjacencyModel {
  std::size_t n = 0;
  std::vector<double> net;  // row-major n*n
  std::vector<SwitchId> dpid_of;
  std::size_t start_node = 0;
  std::size_t end_node = 0;

  double at(std::size_t i, std::size_t j) const { return net[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return net[i * n + j]; }

  std::size_t index_of(const SwitchId& id) const {
    auto it = std::lower_bound(dpid_of.begin(), dpid_of.end(), id);
    if (it == dpid_of.end() || *it != id) throw ValidationError("unknown switch " + id.str());
    return static_cast<std::size_t>(it - dpid_of.begin());
  }

  bool operator==(const AdjacencyModel&) const = default;
};

inline std::vector<std::size_t> neighbors(const AdjacencyModel& m, std::size_t i) {
  if (i >= m.n) {
    throw std::out_of_range("node index " + std::to_string(i) + " outside [0," +
                            std::to_string(m.n) + ")");
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < m.n; ++j) {
    if (m.at(i, j) > 0) out.push_back(j);
  }
  return out;
}

// Builds the matrix and endpoints. With WeightMode::unit every link is 1.0;
// with inverse_bandwidth a link weighs max_bandwidth / bandwidth, so the
// fastest link is 1.0 and links without a bandwidth count as the fastest.
inline AdjacencyModel build_adjacency(const Topology& t, WeightMode mode = WeightMode::unit) {
  if (t.switches.size() < 2) {
    throw ValidationError("topology needs at least 2 switches, got " +
                          std::to_string(t.switches.size()));
  }
  if (t.hosts.size() < 2) {
    throw EndpointError("cannot identify end nodes: need 2 hosts with attachment points, got " +
                        std::to_string(t.hosts.size()));
  }

  AdjacencyModel m;
  m.n = t.switches.size();
  m.dpid_of = t.switches;
  m.net.assign(m.n * m.n, 0.0);

  double max_bw = 0;
  for (const auto& l : t.links) max_bw = std::max(max_bw, l.bandwidth_mbps.value_or(0.0));

  for (const auto& l : t.links) {
    const auto i = m.index_of(l.src);
    const auto j = m.index_of(l.dst);
    double w = 1.0;
    if (mode == WeightMode::inverse_bandwidth && l.bandwidth_mbps && max_bw > 0) {
      w = max_bw / *l.bandwidth_mbps;
    }
    m.at(i, j) = w;
    m.at(j, i) = w;
  }

  std::vector<Host> hosts = t.hosts;
  std::sort(hosts.begin(), hosts.end(),
            [](const Host& a, const Host& b) { return a.mac < b.mac; });
  m.start_node = m.index_of(hosts[0].attached_switch);
  m.end_node = m.index_of(hosts[1].attached_switch);
  if (m.start_node == m.end_node) {
    throw EndpointError("degenerate endpoints: hosts " + hosts[0].mac.str() + " and " +
                        hosts[1].mac.str() + " share switch " + hosts[0].attached_switch.str());
  }

  std::vector<bool> reached(m.n, false);
  std::queue<std::size_t> frontier;
  reached[0] = true;
  frontier.push(0);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : neighbors(m, u)) {
      if (!reached[v]) {
        reached[v] = true;
        frontier.push(v);
      }
    }
  }
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!reached[i]) {
      throw ConnectivityError("switch graph is disconnected: " + m.dpid_of[i].str() +
                                  " unreachable from " + m.dpid_of[0].str(),
                              m.dpid_of[i].str());
    }
  }
  return m;
}

// Normalized topology document written by `ingest` and read back by later stages.
inline nlohmann::ordered_json topology_to_json(const Topology& t) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  auto& sw = doc["switches"] = nlohmann::ordered_json::array();
  for (const auto& s : t.switches) sw.push_back(s.str());
  auto& links = doc["links"] = nlohmann::ordered_json::array();
  for (const auto& l : t.links) {
    nlohmann::ordered_json rec;
    rec["src-switch"] = l.src.str();
    rec["src-port"] = l.src_port;
    rec["dst-switch"] = l.dst.str();
    rec["dst-port"] = l.dst_port;
    if (l.bandwidth_mbps) rec["bandwidth"] = *l.bandwidth_mbps;
    links.push_back(std::move(rec));
  }
  auto& hosts = doc["hosts"] = nlohmann::ordered_json::array();
  for (const auto& h : t.hosts) {
    nlohmann::ordered_json rec;
    rec["mac"] = h.mac.str();
    rec["switch"] = h.attached_switch.str();
    rec["port"] = h.attached_port;
    hosts.push_back(std::move(rec));
  }
  return doc;
}

inline Topology topology_from_json(std::string_view bytes) {
  const auto doc = detail::parse_json(bytes, "topology");
  if (!doc.is_object() || doc.value("version", 0) != 1) {
    throw ValidationError("unsupported topology document version");
  }
  // Reuse the controller-format parser so both paths share validation.
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& h : doc.at("hosts")) {
    devices.push_back({{"mac", {h.at("mac")}},
                       {"attachmentPoint", {{{"switchDPID", h.at("switch")}, {"port", h.at("port")}}}}});
  }
  auto topo = parse_topology(doc.at("links").dump(), devices.dump());
  for (const auto& s : doc.at("switches")) {
    auto id = SwitchId::parse(s.get<std::string>());
    if (!topo.has_switch(id)) {
      topo.switches.insert(std::lower_bound(topo.switches.begin(), topo.switches.end(), id), id);
    }
  }
  return topo;
}

}  // namespace rlpath
