#pragma once

// Per-link rotation search. Jobs on a link are tiled onto their unified
// circle; the optimizer rotates them to minimize the average demand in excess
// of link capacity and reports the resulting compatibility score together
// with the per-job time-shift implied by each rotation.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ringshift/geometry.hpp"
#include "ringshift/profiles.hpp"

namespace ringshift {

struct LinkJob {
  std::string job_id;
  IterationProfile profile;
};

struct LinkJobSet {
  std::string link_id;
  double capacity_gbps = 0.0;
  std::vector<LinkJob> jobs;
};

enum class ScoreMode {
  Mean,  // 1 - sum(excess) / (|A| * C)
  Peak,  // 1 - max(excess) / C
};

struct OptimizerOptions {
  double precision_deg = 5.0;
  std::size_t max_jobs = 6;
  /// Up to this many jobs the rotation box is searched exhaustively.
  std::size_t exhaustive_max_jobs = 3;
  int restarts = 3;
  std::uint64_t seed = 0;
  ScoreMode mode = ScoreMode::Mean;
  PerimeterOptions perimeter;
};

struct JobRotation {
  std::string job_id;
  Millis iter_time_ms = 0;
  Millis repetitions = 1;
  double rotation_rad = 0.0;
  /// Delay of the job on the unified circle, in [0, iter_time).
  Millis circle_shift_ms = 0;
  /// Rotation converted to a start delay modulo the iteration time.
  Millis time_shift_ms = 0;
};

struct RotationSolution {
  std::string link_id;
  double capacity_gbps = 0.0;
  Millis perimeter_ms = 0;
  Millis quantum_ms = 1;
  bool rounded = false;
  double precision_deg = 0.0;
  double score = 1.0;
  std::vector<JobRotation> jobs;  // input order; jobs[0] is pinned at zero

  const JobRotation& job(const std::string& job_id) const;
  std::map<std::string, double> rotations() const;
  std::map<std::string, Millis> time_shifts() const;
};

/// Circles of every job on a link, tiled onto the link's unified perimeter.
struct LinkCircles {
  PerimeterResult perimeter;
  std::vector<UnifiedCircle> circles;
};

LinkCircles build_circles(const LinkJobSet& link, const PerimeterOptions& options = {});

double excess(double demand_gbps, double capacity_gbps);

/// Compatibility score of an already-overlaid demand function.
double score_demand(std::span<const double> total_demand, double capacity_gbps,
                    ScoreMode mode = ScoreMode::Mean);

double score(const LinkJobSet& link, std::span<const double> rotations_rad,
             const OptimizerOptions& options = {});

RotationSolution solve_rotations(const LinkJobSet& link, const OptimizerOptions& options = {});

Millis rotation_to_timeshift(double delta_rad, Millis perimeter_ms, Millis iter_time_ms);

nlohmann::ordered_json to_json(const RotationSolution& solution);

}  // namespace ringshift
