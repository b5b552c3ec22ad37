#include "ringshift/topology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

std::string link_id(const std::string& from, const std::string& to) { return from + "->" + to; }

}  // namespace

Topology::Topology(std::vector<Server> servers, std::vector<Switch> switches)
    : servers_(std::move(servers)), switches_(std::move(switches)) {
  if (servers_.empty()) throw Error(ErrorCode::InvalidInput, "topology has no servers");
  for (std::size_t i = 0; i < switches_.size(); ++i) {
    if (!switch_index_.emplace(switches_[i].id, i).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate switch id " + switches_[i].id);
    }
  }
  for (std::size_t i = 0; i < servers_.size(); ++i) {
    const auto& s = servers_[i];
    if (switch_index_.contains(s.id) || !server_index_.emplace(s.id, i).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate node id " + s.id);
    }
    if (s.gpu_slots < 1) throw Error(ErrorCode::InvalidInput, "server " + s.id + " needs at least one GPU slot");
    if (!(s.nic_gbps > 0.0)) throw Error(ErrorCode::InvalidInput, "server " + s.id + " NIC capacity must be positive");
    if (!switch_index_.contains(s.parent)) {
      throw Error(ErrorCode::Disconnected, "server " + s.id + " is not attached to a known switch");
    }
    links_[link_id(s.id, s.parent)] = {link_id(s.id, s.parent), s.id, s.parent, s.nic_gbps};
    links_[link_id(s.parent, s.id)] = {link_id(s.parent, s.id), s.parent, s.id, s.nic_gbps};
    racks_[s.parent].push_back(s.id);
  }

  int roots = 0;
  for (const auto& sw : switches_) {
    if (sw.parent.empty()) {
      ++roots;
      continue;
    }
    if (!switch_index_.contains(sw.parent)) {
      throw Error(ErrorCode::Disconnected, "switch " + sw.id + " has unknown parent " + sw.parent);
    }
    if (!(sw.uplink_gbps > 0.0)) throw Error(ErrorCode::InvalidInput, "switch " + sw.id + " uplink must be positive");
    links_[link_id(sw.id, sw.parent)] = {link_id(sw.id, sw.parent), sw.id, sw.parent, sw.uplink_gbps};
    links_[link_id(sw.parent, sw.id)] = {link_id(sw.parent, sw.id), sw.parent, sw.id, sw.uplink_gbps};
  }
  if (roots != 1) throw Error(ErrorCode::Disconnected, "topology must have exactly one root switch");
  for (const auto& sw : switches_) {
    // Walks to the root; a cycle in parent pointers never gets there.
    if (ancestors(sw.id).size() > switches_.size()) {
      throw Error(ErrorCode::Disconnected, "switch hierarchy contains a cycle");
    }
  }
}

std::vector<std::string> Topology::ancestors(const std::string& node) const {
  std::vector<std::string> chain{node};
  std::string cur = node;
  if (auto it = server_index_.find(cur); it != server_index_.end()) {
    cur = servers_[it->second].parent;
    chain.push_back(cur);
  }
  while (chain.size() <= switches_.size() + 1) {
    const auto& sw = switches_[switch_index_.at(cur)];
    if (sw.parent.empty()) break;
    cur = sw.parent;
    chain.push_back(cur);
  }
  return chain;
}

Topology Topology::two_tier(int racks, int servers_per_rack, double nic_gbps, double oversubscription,
                            int gpu_slots) {
  if (racks < 1 || servers_per_rack < 1) throw Error(ErrorCode::InvalidInput, "need at least one rack and server");
  std::vector<Server> servers;
  std::vector<Switch> switches{{"agg0", "", 0.0}};
  const double uplink = nic_gbps * gpu_slots * servers_per_rack / oversubscription;
  for (int r = 0; r < racks; ++r) {
    const auto tor = "tor" + std::to_string(r);
    switches.push_back({tor, "agg0", uplink});
    for (int s = 0; s < servers_per_rack; ++s) {
      servers.push_back({"s" + std::to_string(r * servers_per_rack + s), gpu_slots, nic_gbps, tor});
    }
  }
  return Topology(std::move(servers), std::move(switches));
}

Topology Topology::testbed() { return two_tier(6, 4, 50.0, 2.0, 1); }

const Server& Topology::server(const std::string& id) const { return servers_[server_index(id)]; }

std::size_t Topology::server_index(const std::string& id) const {
  auto it = server_index_.find(id);
  if (it == server_index_.end()) throw Error(ErrorCode::InvalidInput, "unknown server " + id);
  return it->second;
}

const DirectedLink& Topology::link(const std::string& id) const {
  auto it = links_.find(id);
  if (it == links_.end()) throw Error(ErrorCode::InvalidInput, "unknown link " + id);
  return it->second;
}

int Topology::total_gpus() const {
  int total = 0;
  for (const auto& s : servers_) total += s.gpu_slots;
  return total;
}

double Topology::oversubscription() const {
  std::map<std::string, double> down;
  for (const auto& s : servers_) down[s.parent] += s.nic_gbps;
  for (const auto& sw : switches_) {
    if (!sw.parent.empty()) down[sw.parent] += sw.uplink_gbps;
  }
  double worst = 1.0;
  for (const auto& sw : switches_) {
    if (sw.parent.empty() || !down.contains(sw.id)) continue;
    worst = std::max(worst, down[sw.id] / sw.uplink_gbps);
  }
  return worst;
}

std::vector<std::string> Topology::path(const std::string& a, const std::string& b) const {
  if (a == b) return {};
  const auto up = ancestors(a);
  const auto down = ancestors(b);
  // Lowest common ancestor: first node on a's chain that is also on b's.
  std::size_t ia = 0;
  std::size_t ib = 0;
  bool found = false;
  for (ia = 0; ia < up.size() && !found; ++ia) {
    for (ib = 0; ib < down.size(); ++ib) {
      if (up[ia] == down[ib]) {
        found = true;
        break;
      }
    }
    if (found) break;
  }
  if (!found) throw Error(ErrorCode::Disconnected, "no path between " + a + " and " + b);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ia; ++i) out.push_back(link_id(up[i], up[i + 1]));
  for (std::size_t i = ib; i > 0; --i) out.push_back(link_id(down[i], down[i - 1]));
  return out;
}

void Placement::validate(const Topology& topology) const {
  std::map<std::string, int> used;
  for (const auto& [job, servers] : assignment) {
    if (servers.empty()) throw Error(ErrorCode::InvalidInput, "job " + job + " has no workers");
    for (const auto& s : servers) {
      if (!topology.has_server(s)) throw Error(ErrorCode::InvalidInput, "job " + job + " uses unknown server " + s);
      ++used[s];
    }
  }
  for (const auto& [s, n] : used) {
    if (n > topology.server(s).gpu_slots) {
      throw Error(ErrorCode::InsufficientCapacity, "server " + s + " hosts more workers than GPU slots");
    }
  }
}

Routes route(const Placement& placement, const Topology& topology) {
  Routes out;
  for (const auto& [job, servers] : placement.assignment) {
    std::vector<std::string> ring(servers.begin(), servers.end());
    std::sort(ring.begin(), ring.end(), [&](const std::string& x, const std::string& y) {
      return topology.server_index(x) < topology.server_index(y);
    });
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    auto& links = out[job];
    if (ring.size() < 2) continue;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const auto hop = topology.path(ring[i], ring[(i + 1) % ring.size()]);
      links.insert(links.end(), hop.begin(), hop.end());
    }
  }
  return out;
}

std::map<std::string, std::set<std::string>> link_sets(const Routes& routes) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [job, links] : routes) out[job] = std::set<std::string>(links.begin(), links.end());
  return out;
}

nlohmann::ordered_json to_json(const Topology& topology) {
  nlohmann::ordered_json doc;
  auto servers = nlohmann::ordered_json::array();
  for (const auto& s : topology.servers()) {
    servers.push_back({{"id", s.id}, {"gpu_slots", s.gpu_slots}, {"nic_gbps", s.nic_gbps}, {"tor", s.parent}});
  }
  auto switches = nlohmann::ordered_json::array();
  for (const auto& sw : topology.switches()) {
    nlohmann::ordered_json item{{"id", sw.id}};
    if (!sw.parent.empty()) {
      item["parent"] = sw.parent;
      item["uplink_gbps"] = sw.uplink_gbps;
    }
    switches.push_back(std::move(item));
  }
  doc["servers"] = std::move(servers);
  doc["switches"] = std::move(switches);
  return doc;
}

Topology topology_from_json(const nlohmann::json& doc) {
  try {
    std::vector<Server> servers;
    for (const auto& s : doc.at("servers")) {
      servers.push_back({s.at("id").get<std::string>(), s.value("gpu_slots", 1), s.value("nic_gbps", 50.0),
                         s.at("tor").get<std::string>()});
    }
    std::vector<Switch> switches;
    for (const auto& sw : doc.at("switches")) {
      switches.push_back({sw.at("id").get<std::string>(), sw.value("parent", std::string{}),
                          sw.value("uplink_gbps", 0.0)});
    }
    return Topology(std::move(servers), std::move(switches));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad topology: ") + e.what());
  }
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  try {
    return topology_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
}

nlohmann::ordered_json to_json(const Placement& placement) {
  nlohmann::ordered_json doc;
  doc["candidate_id"] = placement.candidate_id;
  nlohmann::ordered_json assignment = nlohmann::ordered_json::object();
  for (const auto& [job, servers] : placement.assignment) assignment[job] = servers;
  doc["assignment"] = std::move(assignment);
  return doc;
}

Placement placement_from_json(const nlohmann::json& doc) {
  try {
    Placement p;
    p.candidate_id = doc.value("candidate_id", doc.value("id", 0));
    for (const auto& [job, servers] : doc.at("assignment").items()) {
      p.assignment[job] = servers.get<std::vector<std::string>>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad placement: ") + e.what());
  }
}

}  // namespace ringshift
