#pragma once

// Bipartite job/link affinity graph. Each edge carries the per-link
// time-shift the optimizer chose for that job; a signed BFS over a loop-free
// graph consolidates those into one time-shift per job while preserving every
// pairwise relative shift on every link.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ringshift/profiles.hpp"

namespace ringshift {

class AffinityGraph {
 public:
  void add_job(const std::string& job_id, Millis iter_time_ms);
  void add_link(const std::string& link_id, Millis perimeter_ms);
  /// Both endpoints must already exist.
  void add_edge(const std::string& job_id, const std::string& link_id, Millis weight_ms = 0);
  void set_weight(const std::string& job_id, const std::string& link_id, Millis weight_ms);
  void set_perimeter(const std::string& link_id, Millis perimeter_ms);

  bool empty() const { return jobs_.empty() && links_.empty(); }
  const std::map<std::string, Millis>& jobs() const { return jobs_; }
  const std::map<std::string, Millis>& links() const { return links_; }
  std::size_t edge_count() const;

  Millis iter_time(const std::string& job_id) const;
  Millis perimeter(const std::string& link_id) const;
  Millis weight(const std::string& job_id, const std::string& link_id) const;
  const std::set<std::string>& links_of(const std::string& job_id) const;
  const std::set<std::string>& jobs_on(const std::string& link_id) const;

  /// Throws SchemaViolation unless every link has degree >= 2 and every job >= 1.
  void validate() const;

 private:
  std::map<std::string, Millis> jobs_;
  std::map<std::string, Millis> links_;
  std::map<std::string, std::set<std::string>> job_links_;
  std::map<std::string, std::set<std::string>> link_jobs_;
  std::map<std::pair<std::string, std::string>, Millis> weights_;
};

/// Jobs sharing at least one link, and links carrying at least two jobs.
/// Perimeters are the exact LCM of the iteration times on each link when it
/// fits the default cap, otherwise the rounded fallback. Weights start at 0.
AffinityGraph build_graph(const std::map<std::string, std::set<std::string>>& job_routes,
                          const std::map<std::string, Millis>& iter_times);

bool has_loop(const AffinityGraph& graph);

struct TimeShiftAssignment {
  std::map<std::string, Millis> shifts;
  /// Reference job of each job's connected subgraph.
  std::map<std::string, std::string> reference_of;
};

TimeShiftAssignment bfs_time_shifts(const AffinityGraph& graph);

enum class VerifyMode {
  /// Pairwise relative shifts agree modulo gcd of the two iteration times,
  /// i.e. the two configurations are the same up to a common rotation.
  Periodic,
  /// Pairwise relative shifts agree modulo the link perimeter.
  Perimeter,
};

struct ShiftViolation {
  std::string link_id;
  std::string job_m;
  std::string job_n;
  friend bool operator==(const ShiftViolation&, const ShiftViolation&) = default;
};

std::vector<ShiftViolation> verify_assignment(const AffinityGraph& graph,
                                              const std::map<std::string, Millis>& shifts,
                                              VerifyMode mode = VerifyMode::Periodic);

std::string to_dot(const AffinityGraph& graph);
nlohmann::ordered_json to_json(const AffinityGraph& graph);
AffinityGraph graph_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const TimeShiftAssignment& assignment);

}  // namespace ringshift
