#pragma once

// Candidate placement ranking: route every candidate, build its affinity
// graph, drop candidates whose graph has a loop, solve rotations on each
// shared link and keep the most compatible placement together with the
// unique per-job time-shifts for it.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ringshift/affinity.hpp"
#include "ringshift/optimizer.hpp"
#include "ringshift/topology.hpp"

namespace ringshift {

struct JobRequest {
  std::string job_id;
  std::string kind;
  int workers = 1;
};

enum class Aggregate { Mean, Min };

struct RankOptions {
  OptimizerOptions optimizer;
  Aggregate aggregate = Aggregate::Mean;
  /// Treat directed links that carry exactly the same set of jobs as one
  /// link vertex. Their constraints are identical, so keeping them apart
  /// only adds cycles (every cross-rack pair shares the up and down link).
  bool bundle_links = true;
};

struct LinkScore {
  std::string link_id;  // representative: lowest-capacity member
  std::vector<std::string> members;
  double capacity_gbps = 0.0;
  RotationSolution solution;
};

struct CandidateEvaluation {
  int candidate_id = 0;
  bool discarded = false;
  AffinityGraph graph;
  std::vector<LinkScore> links;
  double aggregate_score = 1.0;

  std::size_t shared_links() const { return links.size(); }
};

struct RankedResult {
  Placement top_placement;
  std::map<std::string, double> per_link_scores;
  double aggregate_score = 1.0;
  TimeShiftAssignment time_shifts;
  AffinityGraph graph;
  std::vector<LinkScore> links;
  /// Surviving candidates in rank order, then discarded ones by id.
  std::vector<CandidateEvaluation> evaluations;
};

/// Job id -> profile, looked up by each job's kind. Throws ProfileMissing.
std::map<std::string, IterationProfile> resolve_profiles(const std::vector<JobRequest>& jobs,
                                                         const std::map<std::string, IterationProfile>& library);

/// Profile with every arc's demand multiplied by `factor`.
IterationProfile scale_demand(const IterationProfile& profile, double factor);

CandidateEvaluation score_candidate(const Placement& candidate,
                                    const std::map<std::string, IterationProfile>& job_profiles,
                                    const Topology& topology, const RankOptions& options = {});

RankedResult rank(const std::vector<Placement>& candidates,
                  const std::map<std::string, IterationProfile>& job_profiles, const Topology& topology,
                  const RankOptions& options = {});

/// Locality-first packer. Emits up to n_max distinct placements by varying
/// the rack order and whether fragmented jobs are packed or spread.
/// `occupied` counts slots already in use per server.
std::vector<Placement> generate_candidates(const std::vector<JobRequest>& jobs, const Topology& topology,
                                           std::size_t n_max, std::uint64_t seed = 0,
                                           const std::map<std::string, int>& occupied = {});

std::vector<JobRequest> jobs_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const RankedResult& result);

}  // namespace ringshift
