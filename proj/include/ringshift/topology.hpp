#pragma once

// Tree-shaped cluster topology (servers under ToRs under aggregation) with
// full-duplex links modelled as two directed links, and the static ring
// routing used for a job's collective traffic.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace ringshift {

struct Server {
  std::string id;
  int gpu_slots = 1;
  double nic_gbps = 50.0;
  std::string parent;  // ToR switch
};

struct Switch {
  std::string id;
  std::string parent;  // empty for the root
  double uplink_gbps = 0.0;
};

struct DirectedLink {
  std::string id;  // "from->to"
  std::string from;
  std::string to;
  double capacity_gbps = 0.0;
};

class Topology {
 public:
  Topology(std::vector<Server> servers, std::vector<Switch> switches);

  /// Servers grouped evenly under ToRs, one aggregation root, ToR uplinks
  /// sized to give the requested oversubscription.
  static Topology two_tier(int racks, int servers_per_rack, double nic_gbps = 50.0,
                           double oversubscription = 2.0, int gpu_slots = 1);
  /// 24 single-GPU servers, 50 Gbps NICs, 6 racks, 2:1 above the ToRs.
  static Topology testbed();

  const std::vector<Server>& servers() const { return servers_; }
  const std::vector<Switch>& switches() const { return switches_; }
  const std::map<std::string, DirectedLink>& links() const { return links_; }

  const Server& server(const std::string& id) const;
  std::size_t server_index(const std::string& id) const;
  bool has_server(const std::string& id) const { return server_index_.contains(id); }
  const DirectedLink& link(const std::string& id) const;
  int total_gpus() const;

  /// ToR id -> servers under it, in declaration order.
  const std::map<std::string, std::vector<std::string>>& racks() const { return racks_; }
  /// Largest ratio of downstream to upstream capacity over all switches.
  double oversubscription() const;

  /// Directed links from server a to server b (empty when a == b).
  std::vector<std::string> path(const std::string& a, const std::string& b) const;

 private:
  std::vector<std::string> ancestors(const std::string& node) const;

  std::vector<Server> servers_;
  std::vector<Switch> switches_;
  std::map<std::string, std::size_t> server_index_;
  std::map<std::string, std::size_t> switch_index_;
  std::map<std::string, DirectedLink> links_;
  std::map<std::string, std::vector<std::string>> racks_;
};

struct Placement {
  int candidate_id = 0;
  /// Job id -> server of each worker (a server may repeat on multi-GPU hosts).
  std::map<std::string, std::vector<std::string>> assignment;

  /// Checks slot limits and that every job has at least one worker.
  void validate(const Topology& topology) const;
  friend bool operator==(const Placement& a, const Placement& b) { return a.assignment == b.assignment; }
};

using Routes = std::map<std::string, std::vector<std::string>>;

/// Ring over each job's distinct servers (ordered by topology position);
/// every hop contributes its directed path links. Result is a multiset.
Routes route(const Placement& placement, const Topology& topology);

/// Route multisets collapsed to sets.
std::map<std::string, std::set<std::string>> link_sets(const Routes& routes);

nlohmann::ordered_json to_json(const Topology& topology);
Topology topology_from_json(const nlohmann::json& doc);
Topology load_topology(const std::string& path);

nlohmann::ordered_json to_json(const Placement& placement);
Placement placement_from_json(const nlohmann::json& doc);

}  // namespace ringshift
