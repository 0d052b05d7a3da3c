// rlpathctl: learn a forwarding path over a controller topology and push it
// as static flows.
//
//   rlpathctl ingest --fixture fixtures/fig4-representative --output out
//   rlpathctl train  --output out --seed 3 --episodes 200
//   rlpathctl path   --output out
//   rlpathctl push   --output out --controller http://127.0.0.1:8080
//   rlpathctl report --trace out/trace.csv --output out
//   rlpathctl mock   --fixture fixtures/fig4-representative --bind 127.0.0.1:8080

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rlpath/commands.hpp"

namespace {

rlpath::MockController* g_mock = nullptr;

void stop_mock(int) {
  if (g_mock) g_mock->stop();
}

std::pair<std::string, int> split_bind(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw rlpath::ConfigError("bind address must be HOST:PORT");
  try {
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
  } catch (const std::exception&) {
    throw rlpath::ConfigError("bad port in bind address '" + addr + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn a source-to-destination path over an SDN topology and push it as static flows"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI run configuration; command-line flags take precedence");

  std::string controller;
  std::string fixture;
  std::uint64_t seed = 1;
  std::size_t episodes = 1000;
  double learning_rate = 0.01;
  std::size_t step_cap = 0;
  std::string weight_mode = "unit";
  std::string output = "out";
  bool dry_run = false;
  bool sample_rollout = false;
  std::string eth_type;
  int timeout_ms = 10'000;
  int retries = 2;
  std::string trace;
  std::string bind;

  auto* controller_opt =
      app.add_option("--controller", controller, "Controller base URL (env RLPATHCTL_CONTROLLER)");
  auto* fixture_opt = app.add_option("--fixture", fixture, "Fixture directory with links.json and devices.json");
  app.add_option("--seed", seed, "Seed for initialization and action sampling");
  app.add_option("--episodes", episodes, "Training episodes")->check(CLI::PositiveNumber);
  app.add_option("--learning-rate", learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  app.add_option("--step-cap", step_cap, "Per-episode step cap (0 = 50 * switches)");
  app.add_option("--weight-mode", weight_mode, "Link weights: unit or inverse_bandwidth")
      ->check(CLI::IsMember({"unit", "inverse_bandwidth"}));
  app.add_option("--output", output, "Directory for stage outputs");
  app.add_flag("--dry-run", dry_run, "push: write flows.jsonl instead of POSTing");
  app.add_flag("--sample-rollout", sample_rollout, "path: sample actions instead of argmax");
  app.add_option("--eth-type", eth_type, "push: add an eth_type match, e.g. 0x0800");
  app.add_option("--timeout-ms", timeout_ms, "Controller request timeout")->check(CLI::PositiveNumber);
  app.add_option("--retries", retries, "Controller retries on transport errors")->check(CLI::NonNegativeNumber);
  app.add_option("--trace", trace, "report: trace CSV (default OUTPUT/trace.csv)");
  app.add_option("--bind", bind, "mock: HOST:PORT to serve on (env RLPATHCTL_MOCK_ADDR)");

  auto* ingest = app.add_subcommand("ingest", "Fetch or read the topology and build the adjacency model");
  auto* train = app.add_subcommand("train", "Train the policy network on the ingested topology");
  auto* path = app.add_subcommand("path", "Extract the learned path and compare it with BFS");
  auto* push = app.add_subcommand("push", "Compile the path into static flows and push them");
  auto* report = app.add_subcommand("report", "Summarize a trace CSV per episode");
  auto* mock = app.add_subcommand("mock", "Serve a fixture as a mock controller");
  for (auto* sub : {ingest, train, path, push, report, mock}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(rlpath::ExitCode::config);
  }

  return rlpath::run_stage(
      [&]() -> int {
        rlpath::RunConfig cfg;
        if (controller_opt->count() == 0 && fixture_opt->count() == 0) {
          if (const char* env = std::getenv("RLPATHCTL_CONTROLLER"); env && *env) controller = env;
        }
        if (!controller.empty()) {
          rlpath::ControllerEndpoint ep;
          ep.base_url = controller;
          ep.timeout = std::chrono::milliseconds(timeout_ms);
          ep.retries = retries;
          rlpath::validate_endpoint(ep);
          cfg.controller = ep;
        }
        if (!fixture.empty()) cfg.fixture = fixture;
        cfg.seed = seed;
        cfg.train.num_episodes = episodes;
        cfg.train.learning_rate = learning_rate;
        cfg.train.step_cap = step_cap;
        cfg.weight_mode = rlpath::parse_weight_mode(weight_mode);
        cfg.output_dir = output;
        cfg.dry_run = dry_run;
        cfg.sample_rollout = sample_rollout;
        if (!eth_type.empty()) cfg.eth_type = eth_type;

        if (*ingest) return rlpath::cmd_ingest(cfg, std::cout, std::cerr);
        if (*train) return rlpath::cmd_train(cfg, std::cout, std::cerr);
        if (*path) return rlpath::cmd_path(cfg, std::cout, std::cerr);
        if (*push) return rlpath::cmd_push(cfg, std::cout, std::cerr);
        if (*report) {
          const std::filesystem::path csv =
              trace.empty() ? cfg.output_dir / rlpath::files::trace : std::filesystem::path(trace);
          return rlpath::cmd_report(csv, cfg.output_dir, std::cout);
        }
        // mock
        if (fixture.empty()) throw rlpath::ConfigError("mock needs --fixture DIR");
        if (bind.empty()) {
          const char* env = std::getenv("RLPATHCTL_MOCK_ADDR");
          bind = env && *env ? env : "127.0.0.1:8080";
        }
        const auto [host, port] = split_bind(bind);
        rlpath::MockController server(rlpath::load_fixture(fixture));
        g_mock = &server;
        std::signal(SIGINT, stop_mock);
        std::signal(SIGTERM, stop_mock);
        std::cout << "mock controller serving " << fixture << " on http://" << host << ":" << port
                  << std::endl;
        server.run(host, port);
        g_mock = nullptr;
        return 0;
      },
      std::cerr);
}
