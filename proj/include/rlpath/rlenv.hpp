#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rlpath/error.hpp"
#include "rlpath/rng.hpp"
#include "rlpath/topo.hpp"

namespace rlpath {

inline std::vector<double> one_hot(std::size_t n, std::size_t index) {
  std::vector<double> v(n, 0.0);
  v.at(index) = 1.0;
  return v;
}

struct StepOutcome {
  std::vector<double> next_state;
  double reward = 0;
  bool done = false;
  bool dead_end = false;
};

struct MaskResult {
  std::vector<double> masked;
  bool dead_end = false;
};

// Zeroes probabilities where `row` has no edge (the zero diagonal forbids
// staying put) and renormalizes. A zero masked sum is reported as a dead end
// and `masked` is left unnormalized.
inline MaskResult mask_and_renormalize(std::span<const double> probs, std::span<const double> row) {
  MaskResult r{std::vector<double>(probs.begin(), probs.end()), false};
  double total = 0;
  for (std::size_t i = 0; i < r.masked.size(); ++i) {
    if (row[i] == 0) r.masked[i] = 0;
    total += r.masked[i];
  }
  if (total != 0) {
    for (auto& p : r.masked) p /= total;
  } else {
    r.dead_end = true;
  }
  return r;
}

// Inverse-CDF categorical draw; consumes exactly one uniform.
// Never returns an index with zero probability.
inline std::size_t sample_action(std::span<const double> masked, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0;
  std::size_t last_positive = masked.size();
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (masked[i] <= 0) continue;
    last_positive = i;
    cumulative += masked[i];
    if (u < cumulative) return i;
  }
  if (last_positive == masked.size()) throw ContractError("sample_action on an all-zero distribution");
  // Rounding left the cumulative sum just below u.
  return last_positive;
}

// Episodic walk over the adjacency matrix. Holds a reference: the model must
// outlive the environment.
class Env {
 public:
  explicit Env(const AdjacencyModel& adj)
      : adj_(&adj), current_(adj.start_node) {
    if (adj.start_node == adj.end_node) throw EndpointError("start and end node coincide");
  }

  std::size_t num_nodes() const { return adj_->n; }
  std::size_t current_node() const { return current_; }
  std::size_t start_node() const { return adj_->start_node; }
  std::size_t end_node() const { return adj_->end_node; }
  bool done() const { return current_ == adj_->end_node; }
  const AdjacencyModel& model() const { return *adj_; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(adj_->net).subspan(i * adj_->n, adj_->n);
  }

  std::vector<double> reset() {
    current_ = adj_->start_node;
    return one_hot(adj_->n, current_);
  }

  StepOutcome step(std::size_t next_node) {
    if (next_node >= adj_->n || adj_->at(current_, next_node) <= 0) {
      throw ContractError("no edge from node " + std::to_string(current_) + " to node " +
                          std::to_string(next_node));
    }
    StepOutcome out;
    out.reward = adj_->at(current_, next_node);
    out.next_state = one_hot(adj_->n, next_node);
    current_ = next_node;
    out.done = done();
    return out;
  }

  // The dead-end branch: jump to the end node so the episode loop exits
  // without a training update.
  void abort_on_dead_end() { current_ = adj_->end_node; }

 private:
  const AdjacencyModel* adj_;
  std::size_t current_;
};

}  // namespace rlpath
