#pragma once

#include <cstddef>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rlpath/error.hpp"
#include "rlpath/trainer.hpp"

namespace rlpath {

// Reads a trace CSV written by the trainer.
inline std::vector<TraceRow> parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<TraceRow> rows;
  auto fail = [&](const std::string& why) {
    throw ValidationError("trace CSV line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line_no == 1) {
      if (cells.size() < 4 || cells[0] != "episode" || cells[1] != "step") fail("bad header");
      for (std::size_t i = 2; i < cells.size(); ++i) {
        if (cells[i] != "p_" + std::to_string(i - 2)) fail("bad header column '" + cells[i] + "'");
      }
      width = cells.size();
      continue;
    }
    if (line.empty()) continue;
    if (cells.size() != width) fail("expected " + std::to_string(width) + " columns");
    TraceRow row;
    try {
      std::size_t used = 0;
      row.episode = std::stoul(cells[0], &used);
      if (used != cells[0].size()) fail("bad episode");
      row.step = std::stoul(cells[1], &used);
      if (used != cells[1].size()) fail("bad step");
      for (std::size_t i = 2; i < cells.size(); ++i) {
        const double p = std::stod(cells[i], &used);
        if (used != cells[i].size() || !(p >= 0 && p <= 1)) fail("bad probability");
        row.probs.push_back(p);
      }
    } catch (const std::logic_error&) {
      fail("unparseable number");
    }
    if (!rows.empty() && row.episode < rows.back().episode) fail("episodes decrease");
    rows.push_back(std::move(row));
  }
  if (line_no == 0) throw ValidationError("trace CSV is empty");
  return rows;
}

struct EpisodeSummary {
  std::size_t episode = 0;
  double max_start_prob = 0;
};

struct ConvergenceReport {
  std::vector<EpisodeSummary> episodes;
  // First episode whose last logged row has max probability >= kConvergedProb.
  std::optional<std::size_t> first_reached;
  // Sustained criterion shared with the trainer.
  std::optional<std::size_t> converged_at;
};

inline ConvergenceReport summarize_trace(const std::vector<TraceRow>& rows) {
  ConvergenceReport r;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool last_of_episode = i + 1 == rows.size() || rows[i + 1].episode != rows[i].episode;
    if (!last_of_episode) continue;
    r.episodes.push_back({rows[i].episode, rows[i].max_prob()});
    if (!r.first_reached && rows[i].max_prob() >= kConvergedProb) r.first_reached = rows[i].episode;
  }
  r.converged_at = converged_episode(rows);
  return r;
}

inline std::string report_csv(const ConvergenceReport& r) {
  std::string out = "episode,max_start_prob\n";
  char buf[64];
  for (const auto& e : r.episodes) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e.episode, e.max_start_prob);
    out += buf;
  }
  return out;
}

inline std::string report_summary(const ConvergenceReport& r) {
  std::ostringstream out;
  out << "episodes logged: " << r.episodes.size() << '\n';
  char buf[64];
  for (const auto& e : r.episodes) {
    std::snprintf(buf, sizeof buf, "  %6zu  %.6f\n", e.episode, e.max_start_prob);
    out << buf;
  }
  if (r.first_reached) {
    out << "first episode with max start-node probability >= 0.9: " << *r.first_reached << '\n';
  } else {
    out << "not converged: max start-node probability never reached 0.9\n";
  }
  out << "converged_at: ";
  if (r.converged_at) {
    out << *r.converged_at << '\n';
  } else {
    out << "none\n";
  }
  return out.str();
}

}  // namespace rlpath
