#pragma once

// Deterministic fluid-flow cluster simulator. Jobs alternate Up and Down arcs
// of their iteration profile; Up progress is stretched when the links on the
// job's ring route cannot carry its demand. Bandwidth is shared max-min fair
// every millisecond.

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "ringshift/profiles.hpp"
#include "ringshift/ranker.hpp"
#include "ringshift/topology.hpp"

namespace ringshift {

// ---- fluid model -----------------------------------------------------------

struct FluidFlow {
  double demand_gbps = 0.0;
  /// (link index, multiplicity) pairs; a flow crossing a link twice uses
  /// twice its rate there.
  std::vector<std::pair<std::size_t, int>> links;
};

/// Progressive-filling max-min fair rates.
std::vector<double> max_min_allocation(const std::vector<FluidFlow>& flows,
                                       const std::vector<double>& capacities_gbps);

/// Offered demand per link (multiplicity weighted).
std::vector<double> offered_load(const std::vector<FluidFlow>& flows, std::size_t link_count);

/// Adds one event per link whose offered load exceeds its capacity.
void count_congestion(const std::vector<double>& offered_gbps, const std::vector<double>& capacities_gbps,
                      std::vector<std::int64_t>& events);

/// Phase position after `dt_ms` at the given achieved rate: Up arcs advance
/// by (achieved/demand) per ms, Down arcs by one per ms.
double advance_position(const IterationProfile& profile, double position_ms, double achieved_gbps,
                        double dt_ms = 1.0);

// ---- drift -----------------------------------------------------------------

/// Phase deviation of one job. Each iteration adds Gaussian jitter to a
/// mean-reverting deviation; crossing the threshold (strictly) snaps the
/// deviation back to zero and counts as an adjustment.
class DriftTracker {
 public:
  DriftTracker(double threshold_ms, double persistence = 0.5, bool adjusting = true)
      : threshold_(threshold_ms), rho_(persistence), adjusting_(adjusting) {}

  /// Returns true when this observation triggered an adjustment.
  bool observe(double jitter_ms);
  double deviation() const { return dev_; }
  double threshold() const { return threshold_; }

 private:
  double threshold_;
  double rho_;
  bool adjusting_;
  double dev_ = 0.0;
};

// ---- traces ----------------------------------------------------------------

struct JobSpec {
  std::string id;
  std::string kind;
  int workers = 1;
  std::int64_t iterations = 500;
  /// Optional explicit placement, one server per worker.
  std::vector<std::string> servers;
  /// Free-form label such as a batch size; carried into reports.
  std::string tag;
};

enum class TraceEventKind { Arrival, Departure, LeaseExpiry };

struct TraceEvent {
  Millis at_ms = 0;
  TraceEventKind kind = TraceEventKind::Arrival;
  JobSpec job;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::map<std::string, IterationProfile> profiles;

  /// Non-decreasing times, unique arrivals, known departures.
  void validate() const;
};

Trace trace_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const Trace& trace);
Trace load_trace(const std::string& path);

/// Synthetic model catalog: square-wave profiles for common model kinds.
std::map<std::string, IterationProfile> builtin_profiles();

struct TraceGenOptions {
  int jobs = 40;
  /// Target busy-GPU fraction.
  double load = 0.9;
  std::int64_t min_iterations = 200;
  std::int64_t max_iterations = 1000;
  std::vector<int> worker_choices = {1, 2, 2, 4, 4, 8};
  std::uint64_t seed = 0;
};

/// Poisson arrivals over the catalog; arrivals that would push the projected
/// busy fraction past 1.0 are dropped.
Trace generate_trace(const Topology& topology, const std::map<std::string, IterationProfile>& profiles,
                     const TraceGenOptions& options);

// ---- simulation ------------------------------------------------------------

enum class Scheduler { Baseline, Cassini };

std::string_view to_string(Scheduler scheduler);
Scheduler scheduler_from_string(const std::string& name);

struct SimOptions {
  Scheduler scheduler = Scheduler::Baseline;
  std::uint64_t seed = 0;
  /// Per-iteration jitter standard deviation as a fraction of iteration time.
  double jitter_fraction = 0.0;
  double drift_threshold_fraction = 0.05;
  double drift_persistence = 0.5;
  Millis epoch_ms = 600'000;
  std::size_t n_max = 10;
  RankOptions rank;
  Millis max_time_ms = 86'400'000;
};

struct JobReport {
  std::string id;
  std::string kind;
  int workers = 0;
  std::vector<std::string> servers;
  Millis arrival_ms = 0;
  double start_ms = -1.0;
  double finish_ms = -1.0;
  std::string tag;
  Millis dedicated_iter_ms = 0;
  Millis compute_ms = 0;
  std::optional<Millis> time_shift_ms;
  /// Aggregate compatibility score of the placement that last shifted the job.
  std::optional<double> score;
  std::vector<double> iteration_ms;
};

struct LinkReport {
  std::string id;
  double capacity_gbps = 0.0;
  std::int64_t congestion_events = 0;
  /// Iterations completed by jobs routed over the link.
  std::int64_t iterations = 0;
};

struct ShiftEvent {
  Millis at_ms = 0;
  std::string job;
  Millis shift_ms = 0;
};

struct AdjustmentEvent {
  double at_ms = 0.0;
  std::string job;
  double deviation_ms = 0.0;
};

struct SimReport {
  std::string scheduler;
  std::uint64_t seed = 0;
  double jitter_fraction = 0.0;
  double end_ms = 0.0;
  std::vector<JobReport> jobs;
  std::vector<LinkReport> links;
  std::vector<ShiftEvent> shifts;
  std::vector<AdjustmentEvent> adjustments;
  std::vector<double> aggregate_scores;

  const JobReport& job(const std::string& id) const;
  const LinkReport* link(const std::string& id) const;
};

SimReport run(const Trace& trace, const Topology& topology, const SimOptions& options = {});

nlohmann::ordered_json to_json(const SimReport& report);
SimReport report_from_json(const nlohmann::json& doc);
std::string iterations_csv(const SimReport& report);
std::string congestion_csv(const SimReport& report);

/// Percentile with linear interpolation between closest ranks; q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace ringshift
