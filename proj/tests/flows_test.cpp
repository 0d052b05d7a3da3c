#include "rlpath/flows.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace rlpath {
namespace {

Topology load(const std::string& name) {
  auto fx = load_fixture(oracle::fixture_dir(name));
  return parse_topology(fx.links, fx.devices);
}

const SwitchId kS1 = SwitchId::parse("00:00:00:00:00:00:00:01");
const SwitchId kS2 = SwitchId::parse("00:00:00:00:00:00:00:02");

TEST(Compile, TwoNodeExactEntries) {
  auto t = load("two-node");
  auto adj = build_adjacency(t);
  auto batch = compile_flows(make_path(adj, {0, 1}), t);
  ASSERT_EQ(batch.entries.size(), 4u);
  const auto fwd = batch.direction(Direction::forward);
  const auto rev = batch.direction(Direction::reverse);
  ASSERT_EQ(fwd.size(), 2u);
  EXPECT_EQ(render_entry(fwd[0]),
            R"({"switch":"00:00:00:00:00:00:00:01","name":"rlpath-000001-000002-fwd-0","priority":"32768","in_port":"1","active":"true","actions":"output=2"})");
  EXPECT_EQ(fwd[1].switch_id, kS2);
  EXPECT_EQ(fwd[1].in_port, 1);
  EXPECT_EQ(fwd[1].output_port, 2);
  // Reverse entries start at the h2 side.
  EXPECT_EQ(rev[0].switch_id, kS2);
  EXPECT_EQ(rev[0].name, "rlpath-000001-000002-rev-0");
  EXPECT_EQ(rev[0].in_port, 2);
  EXPECT_EQ(rev[0].output_port, 1);
  EXPECT_EQ(rev[1].switch_id, kS1);
  EXPECT_EQ(rev[1].in_port, 2);
  EXPECT_EQ(rev[1].output_port, 1);
}

TEST(Compile, EthTypeAndPriorityOptions) {
  auto t = load("two-node");
  auto adj = build_adjacency(t);
  auto batch = compile_flows(make_path(adj, {0, 1}), t, {100, "0x0800"});
  const auto doc = entry_to_json(batch.entries[0]);
  EXPECT_EQ(doc["priority"], "100");
  EXPECT_EQ(doc["eth_type"], "0x0800");
  std::vector<std::string> keys;
  for (auto& [k, v] : doc.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"switch", "name", "priority", "in_port", "eth_type",
                                            "active", "actions"}));
}

TEST(Compile, CanonicalPathDeliversBothWays) {
  auto t = load("fig4-representative");
  auto adj = build_adjacency(t);
  std::vector<std::size_t> nodes;
  for (int sw : {1, 2, 3, 4, 5, 6, 7, 14}) nodes.push_back(adj.index_of(SwitchId::parse(oracle::dpid(sw))));
  auto batch = compile_flows(make_path(adj, nodes), t);
  EXPECT_EQ(batch.entries.size(), 16u);
  ForwardingSimulator sim(t, batch.entries);
  auto there = sim.inject(t.hosts[0].attached_switch, t.hosts[0].attached_port);
  ASSERT_TRUE(there.delivered) << there.drop_reason;
  EXPECT_EQ(*there.host, t.hosts[1].mac);
  EXPECT_EQ(there.switches.size(), 8u);
  auto back = sim.inject(t.hosts[1].attached_switch, t.hosts[1].attached_port);
  ASSERT_TRUE(back.delivered) << back.drop_reason;
  EXPECT_EQ(*back.host, t.hosts[0].mac);
}

TEST(Compile, Errors) {
  auto t = load("fig4-representative");
  auto adj = build_adjacency(t);
  EXPECT_THROW(compile_flows(Path{}, t), CompileError);
  // Does not end at h2's switch.
  EXPECT_THROW(compile_flows(make_path(adj, {adj.start_node, adj.index_of(kS2)}), t), CompileError);
  // s1 and s14 are not linked.
  EXPECT_THROW(compile_flows(make_path(adj, {adj.start_node, adj.end_node}), t), CompileError);
  auto lonely = t;
  lonely.hosts.pop_back();
  EXPECT_THROW(compile_flows(make_path(adj, {adj.start_node}), lonely), CompileError);
  try {
    compile_flows(Path{}, t);
  } catch (const CompileError& e) {
    EXPECT_EQ(e.exit_code(), ExitCode::data);
  }
}

TEST(EntryJson, RoundTripAndRejects) {
  auto t = load("fig4-representative");
  auto adj = build_adjacency(t);
  auto path = make_path(adj, {adj.start_node, adj.index_of(kS2)});
  auto t2 = t;
  t2.hosts[1].attached_switch = kS2;
  t2.hosts[1].attached_port = 2;
  for (const auto& e : compile_flows(path, t2, {7, "0x0806"}).entries) {
    EXPECT_EQ(parse_entry(render_entry(e)), e);
  }
  EXPECT_THROW(parse_entry("{"), ParseError);
  EXPECT_THROW(parse_entry("[]"), ValidationError);
  EXPECT_THROW(parse_entry(R"({"switch":"00:00:00:00:00:00:00:01","name":"x","in_port":"1","actions":"drop"})"),
               ValidationError);
  EXPECT_THROW(parse_entry(R"({"switch":"00:00:00:00:00:00:00:01","name":"x","actions":"output=1"})"),
               ValidationError);
}

TEST(Simulator, DropsWithoutEntriesAndPrefersPriority) {
  auto t = load("two-node");
  ForwardingSimulator empty(t, {});
  auto d = empty.inject(kS1, 1);
  EXPECT_FALSE(d.delivered);
  EXPECT_FALSE(d.drop_reason.empty());

  FlowEntry low{kS1, "low", 1, 1, std::nullopt, 2, true, Direction::forward};
  FlowEntry high{kS1, "high", 9, 1, std::nullopt, 1, true, Direction::forward};
  ForwardingSimulator sim(t, {low, high});
  auto r = sim.inject(kS1, 1);
  ASSERT_TRUE(r.delivered);
  EXPECT_EQ(*r.host, t.hosts[0].mac);  // hairpinned back by the higher priority entry
}

// Random connected topologies, random simple path from h1's switch to h2's:
// the compiled entries must carry traffic both ways, and names must be unique.
TEST(Compile, DeliveryProperty) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 2 + gen() % 8;
    auto g = oracle::random_connected_graph(gen, n, 0.45);
    std::string links = "[";
    std::vector<int> next_port(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!g[i][j]) continue;
        if (links.size() > 1) links += ",";
        links += R"({"src-switch":")" + oracle::dpid(i + 1) + R"(","src-port":)" +
                 std::to_string(next_port[i]++) + R"(,"dst-switch":")" + oracle::dpid(j + 1) +
                 R"(","dst-port":)" + std::to_string(next_port[j]++) + "}";
      }
    }
    links += "]";
    const std::string devices =
        R"([{"mac":["00:00:00:00:00:01"],"attachmentPoint":[{"switchDPID":")" + oracle::dpid(1) +
        R"(","port":1}]},{"mac":["00:00:00:00:00:02"],"attachmentPoint":[{"switchDPID":")" +
        oracle::dpid(n) + R"(","port":1}]}])";
    auto t = parse_topology(links, devices);
    auto adj = build_adjacency(t);

    // Random self-avoiding walk until it reaches the end or gets stuck.
    std::vector<std::size_t> nodes{adj.start_node};
    std::vector<bool> seen(n, false);
    seen[adj.start_node] = true;
    while (nodes.back() != adj.end_node) {
      std::vector<std::size_t> open;
      for (auto v : neighbors(adj, nodes.back())) {
        if (!seen[v]) open.push_back(v);
      }
      if (open.empty()) break;
      auto v = open[gen() % open.size()];
      seen[v] = true;
      nodes.push_back(v);
    }
    if (nodes.back() != adj.end_node) continue;

    auto batch = compile_flows(make_path(adj, nodes), t);
    std::set<std::string> names;
    for (const auto& e : batch.entries) names.insert(e.name);
    EXPECT_EQ(names.size(), 2 * nodes.size());
    ForwardingSimulator sim(t, batch.entries);
    auto there = sim.inject(t.hosts[0].attached_switch, t.hosts[0].attached_port);
    auto back = sim.inject(t.hosts[1].attached_switch, t.hosts[1].attached_port);
    ASSERT_TRUE(there.delivered) << there.drop_reason;
    ASSERT_TRUE(back.delivered) << back.drop_reason;
    EXPECT_EQ(*there.host, t.hosts[1].mac);
    EXPECT_EQ(*back.host, t.hosts[0].mac);
    EXPECT_EQ(there.switches, batch.path.dpids);
  }
}

}  // namespace
}  // namespace rlpath
