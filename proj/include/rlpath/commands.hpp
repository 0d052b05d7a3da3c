#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlpath/ctl_client.hpp"
#include "rlpath/error.hpp"
#include "rlpath/flows.hpp"
#include "rlpath/pathfind.hpp"
#include "rlpath/policynet.hpp"
#include "rlpath/report.hpp"
#include "rlpath/rlenv.hpp"
#include "rlpath/topo.hpp"
#include "rlpath/trainer.hpp"

namespace rlpath {

// Everything a pipeline stage needs. Stages communicate through files in
// output_dir: topology.json, adjacency.json, model.json, trace.csv,
// train_report.json, path.json, verdict.json, flows.jsonl, push_report.json.
struct RunConfig {
  std::optional<ControllerEndpoint> controller;
  std::optional<std::filesystem::path> fixture;
  std::uint64_t seed = 1;
  TrainConfig train;
  WeightMode weight_mode = WeightMode::unit;
  std::filesystem::path output_dir = "out";
  bool dry_run = false;
  bool sample_rollout = false;
  std::optional<std::string> eth_type;
};

namespace files {
inline constexpr const char* topology = "topology.json";
inline constexpr const char* adjacency = "adjacency.json";
inline constexpr const char* model = "model.json";
inline constexpr const char* trace = "trace.csv";
inline constexpr const char* train_report = "train_report.json";
inline constexpr const char* path = "path.json";
inline constexpr const char* verdict = "verdict.json";
inline constexpr const char* flows = "flows.jsonl";
inline constexpr const char* push_report = "push_report.json";
inline constexpr const char* report_csv = "report.csv";
inline constexpr const char* report_txt = "report.txt";
}  // namespace files

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ExitCode::data, "cannot write " + path.string());
}

inline void ensure_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("output directory " + dir.string() + " is not writable");
  }
}

inline void check_source(const RunConfig& cfg) {
  if (cfg.controller && cfg.fixture) {
    throw ConfigError("set either a controller URL or a fixture directory, not both");
  }
}

struct LoadedTopology {
  Topology topo;
  AdjacencyModel adj;
  WeightMode mode = WeightMode::unit;
};

inline LoadedTopology load_ingested(const RunConfig& cfg) {
  const auto path = cfg.output_dir / files::topology;
  if (!std::filesystem::exists(path)) {
    throw ValidationError(path.string() + " not found; run ingest first");
  }
  const auto text = read_file(path);
  auto topo = topology_from_json(text);
  auto mode = WeightMode::unit;
  const auto doc = nlohmann::json::parse(text);
  if (doc.contains("weight_mode")) mode = parse_weight_mode(doc["weight_mode"].get<std::string>());
  auto adj = build_adjacency(topo, mode);
  return {std::move(topo), std::move(adj), mode};
}

inline std::string dump_line(const nlohmann::ordered_json& doc) { return doc.dump(2) + "\n"; }

}  // namespace detail

inline int cmd_ingest(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::check_source(cfg);
  if (!cfg.controller && !cfg.fixture) {
    throw ConfigError("ingest needs --controller URL or --fixture DIR");
  }
  detail::ensure_output_dir(cfg.output_dir);
  const auto bytes = cfg.controller ? fetch_topology(*cfg.controller) : load_fixture(*cfg.fixture);
  std::vector<std::string> warnings;
  const auto topo = parse_topology(bytes.links, bytes.devices, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  const auto adj = build_adjacency(topo, cfg.weight_mode);

  auto doc = topology_to_json(topo);
  doc["weight_mode"] = to_string(cfg.weight_mode);
  detail::write_text(cfg.output_dir / files::topology, detail::dump_line(doc));

  nlohmann::ordered_json summary;
  summary["n"] = adj.n;
  summary["links"] = topo.links.size();
  summary["start_node"] = adj.start_node;
  summary["end_node"] = adj.end_node;
  summary["start_dpid"] = adj.dpid_of[adj.start_node].str();
  summary["end_dpid"] = adj.dpid_of[adj.end_node].str();
  auto& index = summary["index"] = nlohmann::ordered_json::array();
  for (const auto& d : adj.dpid_of) index.push_back(d.str());
  auto& matrix = summary["net"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < adj.n; ++i) {
    matrix.push_back(std::vector<double>(adj.net.begin() + i * adj.n, adj.net.begin() + (i + 1) * adj.n));
  }
  detail::write_text(cfg.output_dir / files::adjacency, summary.dump() + "\n");

  out << adj.n << " switches, " << topo.links.size() << " links, start "
      << adj.dpid_of[adj.start_node].str() << ", end " << adj.dpid_of[adj.end_node].str() << '\n';
  return 0;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  detail::check_source(cfg);
  const auto loaded = detail::load_ingested(cfg);
  Env env(loaded.adj);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.log_path = cfg.output_dir / files::trace;
  tc.diagnostic_checkpoint = cfg.output_dir / "model.diverged.json";

  Rng rng(cfg.seed);
  auto model = create_model(env.num_nodes(), env.num_nodes(), tc.learning_rate, rng, cfg.seed);
  const auto result = train(model, env, tc, rng);

  save_checkpoint(model, cfg.output_dir / files::model);
  const auto report = report_to_json(result.report, tc, tc.effective_step_cap(env.num_nodes()));
  detail::write_text(cfg.output_dir / files::train_report, detail::dump_line(report));

  out << "episodes " << result.report.episodes_run << ", steps " << result.report.steps_total
      << ", aborted " << result.report.aborted_episodes << ", capped "
      << result.report.capped_episodes << ", converged_at ";
  if (result.report.converged_at) {
    out << *result.report.converged_at << '\n';
  } else {
    out << "none\n";
  }
  return 0;
}

inline int cmd_path(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  detail::check_source(cfg);
  const auto loaded = detail::load_ingested(cfg);
  const auto model = load_checkpoint(cfg.output_dir / files::model);
  if (model.input_dim() != loaded.adj.n || model.output_dim() != loaded.adj.n) {
    throw ValidationError("model dimensions do not match the ingested topology");
  }
  Rng rng(cfg.seed);
  const auto learned = cfg.sample_rollout
                           ? rollout(model, loaded.adj, RolloutMode::sample, &rng)
                           : greedy_rollout(model, loaded.adj);
  const auto oracle = loaded.mode == WeightMode::unit
                          ? bfs_shortest(loaded.adj, loaded.adj.start_node, loaded.adj.end_node)
                          : dijkstra_shortest(loaded.adj, loaded.adj.start_node, loaded.adj.end_node);
  const auto verdict = compare_paths(learned, oracle, loaded.adj);

  detail::write_text(cfg.output_dir / files::path, detail::dump_line(path_to_json(learned)));
  const auto vjson = verdict_to_json(verdict);
  detail::write_text(cfg.output_dir / files::verdict, vjson.dump() + "\n");
  out << vjson.dump() << '\n';
  return verdict.valid ? 0 : 2;
}

inline int cmd_push(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::check_source(cfg);
  if (!cfg.dry_run && !cfg.controller) {
    throw ConfigError("push needs --controller URL (or --dry-run)");
  }
  const auto loaded = detail::load_ingested(cfg);
  const auto path_file = cfg.output_dir / files::path;
  if (!std::filesystem::exists(path_file)) {
    throw ValidationError(path_file.string() + " not found; run path first");
  }
  nlohmann::json path_doc;
  try {
    path_doc = nlohmann::json::parse(detail::read_file(path_file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed path file: ") + e.what(), e.byte);
  }
  const auto path = path_from_json(path_doc, loaded.adj);
  if (!is_valid_path(path, loaded.adj, loaded.adj.start_node, loaded.adj.end_node)) {
    throw ValidationError("stored path is not a valid start-to-end path");
  }
  CompileOptions opts;
  opts.eth_type = cfg.eth_type;
  const auto batch = compile_flows(path, loaded.topo, opts);

  if (cfg.dry_run) {
    std::string lines;
    for (const auto& e : batch.entries) lines += render_entry(e) + "\n";
    detail::write_text(cfg.output_dir / files::flows, lines);
    out << "dry run: wrote " << batch.entries.size() << " entries to "
        << (cfg.output_dir / files::flows).string() << '\n';
    return 0;
  }

  const auto report = push_flows(*cfg.controller, batch);
  const auto rjson = push_report_to_json(report);
  detail::write_text(cfg.output_dir / files::push_report, detail::dump_line(rjson));
  out << rjson.dump() << '\n';
  for (const auto& [name, reason] : report.rejected) {
    err << "rejected " << name << ": " << reason << '\n';
  }
  return report.rejected.empty() ? 0 : 2;
}

inline int cmd_report(const std::filesystem::path& trace_csv, const std::filesystem::path& output_dir,
                      std::ostream& out) {
  if (!std::filesystem::exists(trace_csv)) {
    throw ValidationError(trace_csv.string() + " not found");
  }
  const auto rows = parse_trace_csv(detail::read_file(trace_csv));
  const auto r = summarize_trace(rows);
  detail::ensure_output_dir(output_dir);
  detail::write_text(output_dir / files::report_csv, report_csv(r));
  const auto summary = report_summary(r);
  detail::write_text(output_dir / files::report_txt, summary);
  out << summary;
  return 0;
}

// Runs a stage, turning library errors into their exit codes.
template <class Stage>
int run_stage(Stage&& stage, std::ostream& err) {
  try {
    return stage();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
}

}  // namespace rlpath
