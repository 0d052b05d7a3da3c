#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"
#include "rlpath/policynet.hpp"
#include "rlpath/rlenv.hpp"
#include "rlpath/rng.hpp"

namespace rlpath {

struct TrainConfig {
  std::size_t num_episodes = 1000;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  // 0 selects the default of 50 * num_nodes.
  std::size_t step_cap = 0;
  // Per-step trace CSV, written as training runs. Empty disables the file.
  std::filesystem::path log_path;
  // Where the model is dumped if training hits a non-finite loss.
  std::filesystem::path diagnostic_checkpoint;

  std::size_t effective_step_cap(std::size_t num_nodes) const {
    return step_cap == 0 ? 50 * num_nodes : step_cap;
  }
};

// Predicted start-node distribution at one loop iteration.
struct TraceRow {
  std::size_t episode = 0;
  std::size_t step = 0;
  std::vector<double> probs;

  double max_prob() const { return *std::max_element(probs.begin(), probs.end()); }

  bool operator==(const TraceRow&) const = default;
};

struct TraceLog {
  std::size_t num_nodes = 0;
  std::vector<TraceRow> rows;
};

inline constexpr double kConvergedProb = 0.9;
inline constexpr std::size_t kConvergedWindow = 10;

// First episode whose row starts a run of kConvergedWindow rows with max
// probability >= kConvergedProb. A run cut short by the end of the log
// counts if every remaining row qualifies.
inline std::optional<std::size_t> converged_episode(const std::vector<TraceRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t end = std::min(rows.size(), i + kConvergedWindow);
    bool ok = true;
    for (std::size_t j = i; j < end && ok; ++j) ok = rows[j].max_prob() >= kConvergedProb;
    if (ok) return rows[i].episode;
  }
  return std::nullopt;
}

struct TrainReport {
  std::size_t episodes_run = 0;
  // Episodes ended by the dead-end branch.
  std::size_t aborted_episodes = 0;
  // Episodes force-ended by the step cap.
  std::size_t capped_episodes = 0;
  std::size_t steps_total = 0;
  std::size_t train_steps = 0;
  std::optional<std::size_t> converged_at;
};

inline nlohmann::ordered_json report_to_json(const TrainReport& r, const TrainConfig& cfg,
                                             std::size_t step_cap) {
  nlohmann::ordered_json doc;
  doc["episodes_run"] = r.episodes_run;
  doc["aborted_episodes"] = r.aborted_episodes;
  doc["capped_episodes"] = r.capped_episodes;
  doc["steps_total"] = r.steps_total;
  doc["train_steps"] = r.train_steps;
  doc["converged_at"] = r.converged_at ? nlohmann::ordered_json(*r.converged_at) : nlohmann::ordered_json(nullptr);
  doc["seed"] = cfg.seed;
  doc["learning_rate"] = cfg.learning_rate;
  doc["step_cap"] = step_cap;
  return doc;
}

inline std::string trace_header(std::size_t n) {
  std::string h = "episode,step";
  for (std::size_t i = 0; i < n; ++i) h += ",p_" + std::to_string(i);
  return h;
}

inline std::string format_trace_row(const TraceRow& row) {
  std::string line = std::to_string(row.episode) + "," + std::to_string(row.step);
  char buf[32];
  for (double p : row.probs) {
    std::snprintf(buf, sizeof buf, ",%.6f", p);
    line += buf;
  }
  return line;
}

inline void write_trace_csv(std::ostream& out, const TraceLog& log) {
  out << trace_header(log.num_nodes) << '\n';
  for (const auto& row : log.rows) out << format_trace_row(row) << '\n';
}

// Appends forward(model, one-hot(start)) to the log and, when open, the CSV sink.
// `start_probs` may supply that forward pass when the caller already has it.
inline void save_action_probs(const PolicyNet& model, const Env& env, std::size_t episode,
                              std::size_t step, TraceLog& log, std::ostream* sink = nullptr,
                              const std::vector<double>* start_probs = nullptr) {
  TraceRow row{episode, step,
               start_probs ? *start_probs
                           : forward(model, one_hot(env.num_nodes(), env.start_node()))};
  if (sink) {
    *sink << format_trace_row(row) << '\n';
    if (!*sink) throw Error(ExitCode::data, "failed writing trace log");
  }
  log.rows.push_back(std::move(row));
}

// Flushes subnormal results and operands to zero while alive. Collapsed
// policies drive probabilities, gradients and Adam moments into the subnormal
// range, where arithmetic is two orders of magnitude slower.
class ScopedFlushDenormals {
 public:
  ScopedFlushDenormals() {
#if defined(__SSE2__)
    saved_ = _mm_getcsr();
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
  }
  ~ScopedFlushDenormals() {
#if defined(__SSE2__)
    _mm_setcsr(saved_);
#endif
  }
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

 private:
  unsigned int saved_ = 0;
};

struct TrainResult {
  TraceLog trace;
  TrainReport report;
};

// Episode loop: predict, log, mask, sample, reward, one fit step.
// Draws from `rng` once per sampled action.
inline TrainResult train(PolicyNet& model, Env& env, const TrainConfig& cfg, Rng& rng) {
  const std::size_t n = env.num_nodes();
  if (cfg.num_episodes < 1) throw ConfigError("num_episodes must be >= 1");
  if (model.input_dim() != n || model.output_dim() != n) {
    throw ConfigError("model dims " + std::to_string(model.input_dim()) + "x" +
                      std::to_string(model.output_dim()) + " do not match " + std::to_string(n) +
                      " nodes");
  }
  const std::size_t cap = cfg.effective_step_cap(n);
  if (cap < n) throw ConfigError("step_cap must be >= number of nodes");

  std::ofstream file;
  std::ostream* sink = nullptr;
  if (!cfg.log_path.empty()) {
    file.open(cfg.log_path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ExitCode::data, "cannot open trace log " + cfg.log_path.string());
    file << trace_header(n) << '\n';
    sink = &file;
  }

  ScopedFlushDenormals ftz;
  TrainResult result;
  result.trace.num_nodes = n;
  auto& report = result.report;

  for (std::size_t ep = 0; ep < cfg.num_episodes; ++ep) {
    auto state = env.reset();
    std::size_t step = 0;
    while (env.current_node() != env.end_node()) {
      if (step >= cap) {
        ++report.capped_episodes;
        break;
      }
      ForwardCache cache;
      const auto probs = forward(model, state, &cache);
      const bool at_start = env.current_node() == env.start_node();
      save_action_probs(model, env, ep, step, result.trace, sink, at_start ? &probs : nullptr);
      ++report.steps_total;
      ++step;

      auto mask = mask_and_renormalize(probs, env.row(env.current_node()));
      if (mask.dead_end) {
        ++report.aborted_episodes;
        env.abort_on_dead_end();
        continue;
      }

      const auto next = sample_action(mask.masked, rng);
      auto outcome = env.step(next);
      std::vector<double> target(n, 0.0);
      target[next] = outcome.reward;
      try {
        train_step(model, state, target, &cache);
      } catch (const NumericError& e) {
        if (!cfg.diagnostic_checkpoint.empty()) save_checkpoint(model, cfg.diagnostic_checkpoint);
        throw TrainingError("training diverged in episode " + std::to_string(ep) + ": " + e.what());
      }
      ++report.train_steps;
      state = std::move(outcome.next_state);
    }
    ++report.episodes_run;
  }
  report.converged_at = converged_episode(result.trace.rows);
  return result;
}

// Single-stream form: the generator is seeded with cfg.seed and advanced past
// the draws create_model(..., cfg.seed) consumed for initialization.
inline TrainResult train(PolicyNet& model, Env& env, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  std::size_t weight_draws = 0;
  for (const auto& l : model.layers) weight_draws += l.weights.value.size();
  rng.discard(weight_draws);
  return train(model, env, cfg, rng);
}

}  // namespace rlpath
