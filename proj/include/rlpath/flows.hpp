#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"
#include "rlpath/pathfind.hpp"
#include "rlpath/topo.hpp"

namespace rlpath {

enum class Direction { forward, reverse };

inline const char* to_string(Direction d) { return d == Direction::forward ? "fwd" : "rev"; }

inline constexpr int kDefaultPriority = 32768;

// One Static Flow Pusher record.
struct FlowEntry {
  SwitchId switch_id;
  std::string name;
  int priority = kDefaultPriority;
  int in_port = 0;
  std::optional<std::string> eth_type;
  int output_port = 0;
  bool active = true;
  Direction direction = Direction::forward;

  std::string actions() const { return "output=" + std::to_string(output_port); }

  bool operator==(const FlowEntry&) const = default;
};

struct FlowBatch {
  std::vector<FlowEntry> entries;  // forward entries, then reverse entries
  Path path;

  std::vector<FlowEntry> direction(Direction d) const {
    std::vector<FlowEntry> out;
    for (const auto& e : entries) {
      if (e.direction == d) out.push_back(e);
    }
    return out;
  }
};

struct CompileOptions {
  int priority = kDefaultPriority;
  std::optional<std::string> eth_type;  // e.g. "0x0800"
};

namespace detail {

// Ports (at a, at b) of a link joining a and b.
inline std::optional<std::pair<int, int>> link_ports(const Topology& t, const SwitchId& a,
                                                     const SwitchId& b) {
  for (const auto& l : t.links) {
    if (l.src == a && l.dst == b) return std::pair{l.src_port, l.dst_port};
    if (l.src == b && l.dst == a) return std::pair{l.dst_port, l.src_port};
  }
  return std::nullopt;
}

}  // namespace detail

// Per-switch in_port -> output rules realizing `path` in both directions
// between the first and second host (by MAC).
inline FlowBatch compile_flows(const Path& path, const Topology& topo,
                               const CompileOptions& opts = {}) {
  if (path.dpids.empty()) throw CompileError("empty path");
  if (topo.hosts.size() < 2) throw CompileError("host attachment missing: need two hosts");
  const Host& src_host = topo.hosts[0];
  const Host& dst_host = topo.hosts[1];
  if (src_host.attached_switch != path.dpids.front()) {
    throw CompileError("host attachment missing: " + src_host.mac.str() + " is not on " +
                       path.dpids.front().str());
  }
  if (dst_host.attached_switch != path.dpids.back()) {
    throw CompileError("host attachment missing: " + dst_host.mac.str() + " is not on " +
                       path.dpids.back().str());
  }

  const std::size_t k = path.dpids.size();
  // toward_next[i]: port on switch i facing switch i+1; from_prev[i]: port on
  // switch i facing switch i-1.
  std::vector<int> toward_next(k, 0), from_prev(k, 0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    auto ports = detail::link_ports(topo, path.dpids[i], path.dpids[i + 1]);
    if (!ports) {
      throw CompileError("no port data for link " + path.dpids[i].str() + " <-> " +
                         path.dpids[i + 1].str());
    }
    toward_next[i] = ports->first;
    from_prev[i + 1] = ports->second;
  }
  from_prev[0] = src_host.attached_port;
  toward_next[k - 1] = dst_host.attached_port;

  const std::string prefix =
      "rlpath-" + src_host.mac.short_form() + "-" + dst_host.mac.short_form() + "-";
  FlowBatch batch;
  batch.path = path;
  for (std::size_t i = 0; i < k; ++i) {
    FlowEntry e;
    e.switch_id = path.dpids[i];
    e.name = prefix + "fwd-" + std::to_string(i);
    e.priority = opts.priority;
    e.in_port = from_prev[i];
    e.eth_type = opts.eth_type;
    e.output_port = toward_next[i];
    e.direction = Direction::forward;
    batch.entries.push_back(std::move(e));
  }
  for (std::size_t seq = 0; seq < k; ++seq) {
    const std::size_t i = k - 1 - seq;
    FlowEntry e;
    e.switch_id = path.dpids[i];
    e.name = prefix + "rev-" + std::to_string(seq);
    e.priority = opts.priority;
    e.in_port = toward_next[i];
    e.eth_type = opts.eth_type;
    e.output_port = from_prev[i];
    e.direction = Direction::reverse;
    batch.entries.push_back(std::move(e));
  }

  for (const auto& e : batch.entries) {
    const auto ports = topo.ports_of(e.switch_id);
    for (int p : {e.in_port, e.output_port}) {
      if (!std::binary_search(ports.begin(), ports.end(), p)) {
        throw CompileError("port " + std::to_string(p) + " does not exist on " + e.switch_id.str());
      }
    }
  }
  return batch;
}

// Controller wire form; all values are strings, key order fixed.
inline nlohmann::ordered_json entry_to_json(const FlowEntry& e) {
  nlohmann::ordered_json doc;
  doc["switch"] = e.switch_id.str();
  doc["name"] = e.name;
  doc["priority"] = std::to_string(e.priority);
  doc["in_port"] = std::to_string(e.in_port);
  if (e.eth_type) doc["eth_type"] = *e.eth_type;
  doc["active"] = e.active ? "true" : "false";
  doc["actions"] = e.actions();
  return doc;
}

inline std::string render_entry(const FlowEntry& e) { return entry_to_json(e).dump(); }

namespace detail {

inline int int_field(const nlohmann::json& doc, const char* key, bool required, int fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    if (required) throw ValidationError(std::string("missing field '") + key + "'");
    return fallback;
  }
  if (it->is_number_integer()) return it->get<int>();
  if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw ValidationError(std::string("field '") + key + "' is not an integer");
}

}  // namespace detail

// Inverse of render_entry. Direction is not part of the wire form and is
// inferred from the name when it follows the compiled naming scheme.
inline FlowEntry parse_entry(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed flow entry: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("flow entry must be a JSON object");
  FlowEntry e;
  e.switch_id = SwitchId::parse(detail::string_field(doc, "switch"));
  e.name = detail::string_field(doc, "name");
  if (e.name.empty()) throw ValidationError("flow entry name is empty");
  e.priority = detail::int_field(doc, "priority", false, kDefaultPriority);
  e.in_port = detail::int_field(doc, "in_port", true, 0);
  if (auto it = doc.find("eth_type"); it != doc.end()) {
    if (!it->is_string()) throw ValidationError("field 'eth_type' must be a string");
    e.eth_type = it->get<std::string>();
  }
  if (auto it = doc.find("active"); it != doc.end()) {
    if (it->is_boolean()) {
      e.active = it->get<bool>();
    } else if (it->is_string() && (*it == "true" || *it == "false")) {
      e.active = *it == "true";
    } else {
      throw ValidationError("field 'active' must be true or false");
    }
  }
  const auto actions = detail::string_field(doc, "actions");
  constexpr std::string_view kOutput = "output=";
  if (actions.rfind(kOutput, 0) != 0) throw ValidationError("unsupported actions '" + actions + "'");
  try {
    std::size_t used = 0;
    const auto port_text = actions.substr(kOutput.size());
    e.output_port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw ValidationError("unsupported actions '" + actions + "'");
  }
  e.direction = e.name.find("-rev-") != std::string::npos ? Direction::reverse : Direction::forward;
  return e;
}

// Table-lookup forwarding over the topology: follow the best matching entry
// at each switch until the packet leaves on a host port or is dropped.
struct Delivery {
  bool delivered = false;
  std::optional<MacAddress> host;
  std::vector<SwitchId> switches;
  std::string drop_reason;
};

class ForwardingSimulator {
 public:
  ForwardingSimulator(const Topology& topo, const std::vector<FlowEntry>& entries)
      : topo_(&topo) {
    for (const auto& e : entries) {
      if (e.active) table_[e.switch_id].push_back(e);
    }
  }

  Delivery inject(const SwitchId& at, int in_port,
                  const std::optional<std::string>& eth_type = std::nullopt) const {
    Delivery d;
    SwitchId sw = at;
    int port = in_port;
    const std::size_t ttl = 4 * topo_->switches.size() + 4;
    for (std::size_t hop = 0; hop < ttl; ++hop) {
      d.switches.push_back(sw);
      const FlowEntry* best = nullptr;
      if (auto it = table_.find(sw); it != table_.end()) {
        for (const auto& e : it->second) {
          if (e.in_port != port) continue;
          if (e.eth_type && e.eth_type != eth_type) continue;
          if (!best || e.priority > best->priority) best = &e;
        }
      }
      if (!best) {
        d.drop_reason = "no matching entry on " + sw.str() + " port " + std::to_string(port);
        return d;
      }
      const int out = best->output_port;
      for (const auto& h : topo_->hosts) {
        if (h.attached_switch == sw && h.attached_port == out) {
          d.delivered = true;
          d.host = h.mac;
          return d;
        }
      }
      bool moved = false;
      for (const auto& l : topo_->links) {
        if (l.src == sw && l.src_port == out) {
          sw = l.dst;
          port = l.dst_port;
          moved = true;
          break;
        }
        if (l.dst == sw && l.dst_port == out) {
          sw = l.src;
          port = l.src_port;
          moved = true;
          break;
        }
      }
      if (!moved) {
        d.drop_reason = "port " + std::to_string(out) + " on " + sw.str() + " leads nowhere";
        return d;
      }
    }
    d.drop_reason = "forwarding loop";
    return d;
  }

 private:
  const Topology* topo_;
  std::map<SwitchId, std::vector<FlowEntry>> table_;
};

}  // namespace rlpath
