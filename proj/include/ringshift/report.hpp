#pragma once

// Summary tables over one or more simulation reports.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ringshift/simulator.hpp"

namespace ringshift {

struct JobSummary {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::string job;
  std::string kind;
  std::string tag;
  std::size_t iterations = 0;
  double mean_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  Millis dedicated_iter_ms = 0;
  /// Mean iteration time minus the fixed compute time.
  double mean_comm_ms = 0.0;
  std::optional<double> score;
  std::optional<Millis> time_shift_ms;
};

struct LinkSummary {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::string link;
  std::int64_t congestion_events = 0;
  std::int64_t iterations = 0;
  double events_per_iteration = 0.0;
};

/// One baseline run against one cassini run. The job "*" pools every job.
struct Comparison {
  std::uint64_t seed = 0;
  std::string job;
  double baseline_mean_ms = 0.0;
  double baseline_p90_ms = 0.0;
  double cassini_mean_ms = 0.0;
  double cassini_p90_ms = 0.0;
  double mean_ratio = 0.0;
  double p90_ratio = 0.0;
  std::int64_t baseline_congestion = 0;
  std::int64_t cassini_congestion = 0;
};

struct Summary {
  std::vector<JobSummary> jobs;
  std::vector<LinkSummary> links;
  std::vector<Comparison> comparisons;
};

/// Baseline and cassini reports are paired in the order given (first
/// baseline with first cassini, and so on).
Summary summarize(const std::vector<SimReport>& reports);

nlohmann::ordered_json to_json(const Summary& summary);
std::string jobs_csv(const Summary& summary);
std::string links_csv(const Summary& summary);
std::string comparison_csv(const Summary& summary);
/// job, batch tag, mean comm time, score, time shift.
std::string snapshot_csv(const Summary& summary);

}  // namespace ringshift
