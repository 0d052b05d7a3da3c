#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"
#include "rlpath/policynet.hpp"
#include "rlpath/rlenv.hpp"
#include "rlpath/rng.hpp"
#include "rlpath/topo.hpp"

namespace rlpath {

struct Path {
  std::vector<std::size_t> nodes;
  std::vector<SwitchId> dpids;

  std::size_t hops() const { return nodes.empty() ? 0 : nodes.size() - 1; }

  bool operator==(const Path&) const = default;
};

inline Path make_path(const AdjacencyModel& adj, std::vector<std::size_t> nodes) {
  Path p;
  for (auto i : nodes) p.dpids.push_back(adj.dpid_of.at(i));
  p.nodes = std::move(nodes);
  return p;
}

class PathError : public ValidationError {
 public:
  PathError(const std::string& what, Path partial)
      : ValidationError(what), partial_(std::move(partial)) {}

  const Path& partial() const noexcept { return partial_; }

 private:
  Path partial_;
};

class NoPathError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Consecutive nodes adjacent, no repeats, endpoints as given.
inline bool is_valid_path(const Path& p, const AdjacencyModel& adj, std::size_t src,
                          std::size_t dst) {
  if (p.nodes.empty() || p.nodes.front() != src || p.nodes.back() != dst) return false;
  std::vector<bool> seen(adj.n, false);
  for (std::size_t k = 0; k < p.nodes.size(); ++k) {
    const auto u = p.nodes[k];
    if (u >= adj.n || seen[u]) return false;
    seen[u] = true;
    if (k > 0 && adj.at(p.nodes[k - 1], u) <= 0) return false;
  }
  return true;
}

enum class RolloutMode { greedy, sample };

// Walks from start to end choosing, among unvisited neighbours, the action the
// model rates highest (lowest index on ties), or a masked draw in sample mode.
inline Path rollout(const PolicyNet& model, const AdjacencyModel& adj, RolloutMode mode,
                    Rng* rng = nullptr) {
  if (mode == RolloutMode::sample && rng == nullptr) {
    throw ConfigError("sampling rollout needs a generator");
  }
  std::vector<bool> visited(adj.n, false);
  std::vector<std::size_t> nodes{adj.start_node};
  visited[adj.start_node] = true;
  while (nodes.back() != adj.end_node) {
    if (nodes.size() > adj.n) throw PathError("rollout cycled", make_path(adj, nodes));
    const auto here = nodes.back();
    ForwardCache cache;
    const auto probs = forward(model, one_hot(adj.n, here), &cache);
    // Logits order actions like probabilities but do not underflow to 0.
    const auto& logits = cache.pre.back();
    std::vector<std::size_t> open;
    for (auto j : neighbors(adj, here)) {
      if (!visited[j]) open.push_back(j);
    }
    std::optional<std::size_t> pick;
    for (auto j : open) {
      if (!pick || logits[j] > logits[*pick]) pick = j;
    }
    if (pick && mode == RolloutMode::sample) {
      std::vector<double> allowed(adj.n, 0.0);
      for (auto j : open) allowed[j] = probs[j];
      auto mask = mask_and_renormalize(allowed, allowed);
      if (!mask.dead_end) pick = sample_action(mask.masked, *rng);
    }
    if (!pick) {
      throw PathError("rollout trapped at " + adj.dpid_of[here].str() +
                          ": every neighbour already visited",
                      make_path(adj, nodes));
    }
    visited[*pick] = true;
    nodes.push_back(*pick);
  }
  return make_path(adj, std::move(nodes));
}

inline Path greedy_rollout(const PolicyNet& model, const AdjacencyModel& adj) {
  return rollout(model, adj, RolloutMode::greedy);
}

// Minimum-hop path. Among equal-length paths the lexicographically smallest
// node sequence wins.
inline Path bfs_shortest(const AdjacencyModel& adj, std::size_t src, std::size_t dst) {
  if (src >= adj.n || dst >= adj.n) throw std::out_of_range("node index out of range");
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(adj.n, kUnseen);
  std::queue<std::size_t> frontier;
  dist[dst] = 0;
  frontier.push(dst);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : neighbors(adj, u)) {
      if (dist[v] == kUnseen) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  if (dist[src] == kUnseen) {
    throw NoPathError("no path from " + adj.dpid_of[src].str() + " to " + adj.dpid_of[dst].str());
  }
  std::vector<std::size_t> nodes{src};
  while (nodes.back() != dst) {
    const auto u = nodes.back();
    for (auto v : neighbors(adj, u)) {  // ascending, so the first hit is smallest
      if (dist[v] + 1 == dist[u]) {
        nodes.push_back(v);
        break;
      }
    }
  }
  return make_path(adj, std::move(nodes));
}

// Least total weight, for non-unit weight modes. Ties: fewer hops, then
// lexicographically smallest sequence.
inline Path dijkstra_shortest(const AdjacencyModel& adj, std::size_t src, std::size_t dst) {
  if (src >= adj.n || dst >= adj.n) throw std::out_of_range("node index out of range");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(adj.n, kInf);
  std::vector<std::size_t> hops(adj.n, 0);
  std::vector<bool> done(adj.n, false);
  dist[dst] = 0;
  // Distances are measured towards dst so the forward walk can pick greedily.
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.push({0.0, dst});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = true;
    for (auto v : neighbors(adj, u)) {
      const double nd = d + adj.at(u, v);
      if (nd < dist[v] || (nd == dist[v] && hops[u] + 1 < hops[v])) {
        dist[v] = nd;
        hops[v] = hops[u] + 1;
        heap.push({nd, v});
      }
    }
  }
  if (dist[src] == kInf) {
    throw NoPathError("no path from " + adj.dpid_of[src].str() + " to " + adj.dpid_of[dst].str());
  }
  std::vector<std::size_t> nodes{src};
  while (nodes.back() != dst) {
    const auto u = nodes.back();
    for (auto v : neighbors(adj, u)) {
      if (dist[v] + adj.at(u, v) == dist[u] && hops[v] + 1 == hops[u]) {
        nodes.push_back(v);
        break;
      }
    }
  }
  return make_path(adj, std::move(nodes));
}

struct PathVerdict {
  bool valid = false;
  std::size_t hops = 0;
  std::size_t oracle_hops = 0;
  bool is_shortest = false;
};

inline PathVerdict compare_paths(const Path& learned, const Path& oracle,
                                 const AdjacencyModel& adj) {
  PathVerdict v;
  v.valid = !oracle.nodes.empty() &&
            is_valid_path(learned, adj, oracle.nodes.front(), oracle.nodes.back());
  v.hops = learned.hops();
  v.oracle_hops = oracle.hops();
  v.is_shortest = v.valid && v.hops == v.oracle_hops;
  return v;
}

inline nlohmann::ordered_json verdict_to_json(const PathVerdict& v) {
  nlohmann::ordered_json doc;
  doc["valid"] = v.valid;
  doc["hops"] = v.hops;
  doc["oracle_hops"] = v.oracle_hops;
  doc["is_shortest"] = v.is_shortest;
  return doc;
}

inline nlohmann::ordered_json path_to_json(const Path& p) {
  nlohmann::ordered_json doc;
  doc["nodes"] = p.nodes;
  auto& dpids = doc["dpids"] = nlohmann::ordered_json::array();
  for (const auto& d : p.dpids) dpids.push_back(d.str());
  doc["hops"] = p.hops();
  return doc;
}

inline Path path_from_json(const nlohmann::json& doc, const AdjacencyModel& adj) {
  try {
    auto nodes = doc.at("nodes").get<std::vector<std::size_t>>();
    const auto dpids = doc.at("dpids").get<std::vector<std::string>>();
    if (nodes.size() != dpids.size()) throw ValidationError("path nodes and dpids differ in length");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] >= adj.n || adj.dpid_of[nodes[k]] != SwitchId::parse(dpids[k])) {
        throw ValidationError("path does not match the topology");
      }
    }
    return make_path(adj, std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed path document: ") + e.what());
  }
}

}  // namespace rlpath
