#include "ringshift/affinity.hpp"

#include <deque>
#include <numeric>
#include <sstream>

#include "ringshift/error.hpp"
#include "ringshift/geometry.hpp"

namespace ringshift {

namespace {

Millis euclid_mod(Millis a, Millis m) {
  const Millis r = a % m;
  return r < 0 ? r + m : r;
}

const std::set<std::string>& empty_set() {
  static const std::set<std::string> none;
  return none;
}

}  // namespace

void AffinityGraph::add_job(const std::string& job_id, Millis iter_time_ms) {
  if (iter_time_ms <= 0) throw Error(ErrorCode::InvalidInput, "job " + job_id + ": iteration time must be positive");
  if (links_.contains(job_id)) throw Error(ErrorCode::InvalidInput, job_id + " is already a link vertex");
  jobs_[job_id] = iter_time_ms;
}

void AffinityGraph::add_link(const std::string& link_id, Millis perimeter_ms) {
  if (perimeter_ms <= 0) throw Error(ErrorCode::InvalidInput, "link " + link_id + ": perimeter must be positive");
  if (jobs_.contains(link_id)) throw Error(ErrorCode::InvalidInput, link_id + " is already a job vertex");
  links_[link_id] = perimeter_ms;
}

void AffinityGraph::add_edge(const std::string& job_id, const std::string& link_id, Millis weight_ms) {
  if (!jobs_.contains(job_id)) throw Error(ErrorCode::InvalidInput, "unknown job " + job_id);
  if (!links_.contains(link_id)) throw Error(ErrorCode::InvalidInput, "unknown link " + link_id);
  job_links_[job_id].insert(link_id);
  link_jobs_[link_id].insert(job_id);
  weights_[{job_id, link_id}] = weight_ms;
}

void AffinityGraph::set_weight(const std::string& job_id, const std::string& link_id, Millis weight_ms) {
  auto it = weights_.find({job_id, link_id});
  if (it == weights_.end()) throw Error(ErrorCode::InvalidInput, "no edge " + job_id + " -- " + link_id);
  it->second = weight_ms;
}

void AffinityGraph::set_perimeter(const std::string& link_id, Millis perimeter_ms) {
  if (!links_.contains(link_id)) throw Error(ErrorCode::InvalidInput, "unknown link " + link_id);
  if (perimeter_ms <= 0) throw Error(ErrorCode::InvalidInput, "perimeter must be positive");
  links_[link_id] = perimeter_ms;
}

std::size_t AffinityGraph::edge_count() const { return weights_.size(); }

Millis AffinityGraph::iter_time(const std::string& job_id) const {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::InvalidInput, "unknown job " + job_id);
  return it->second;
}

Millis AffinityGraph::perimeter(const std::string& link_id) const {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw Error(ErrorCode::InvalidInput, "unknown link " + link_id);
  return it->second;
}

Millis AffinityGraph::weight(const std::string& job_id, const std::string& link_id) const {
  auto it = weights_.find({job_id, link_id});
  if (it == weights_.end()) throw Error(ErrorCode::InvalidInput, "no edge " + job_id + " -- " + link_id);
  return it->second;
}

const std::set<std::string>& AffinityGraph::links_of(const std::string& job_id) const {
  auto it = job_links_.find(job_id);
  return it == job_links_.end() ? empty_set() : it->second;
}

const std::set<std::string>& AffinityGraph::jobs_on(const std::string& link_id) const {
  auto it = link_jobs_.find(link_id);
  return it == link_jobs_.end() ? empty_set() : it->second;
}

void AffinityGraph::validate() const {
  for (const auto& [link, p] : links_) {
    if (jobs_on(link).size() < 2) {
      throw Error(ErrorCode::SchemaViolation, "link " + link + " carries fewer than two jobs");
    }
  }
  for (const auto& [job, iter] : jobs_) {
    if (links_of(job).empty()) throw Error(ErrorCode::SchemaViolation, "job " + job + " has no links");
  }
}

AffinityGraph build_graph(const std::map<std::string, std::set<std::string>>& job_routes,
                          const std::map<std::string, Millis>& iter_times) {
  std::map<std::string, std::set<std::string>> carriers;
  for (const auto& [job, links] : job_routes) {
    for (const auto& link : links) carriers[link].insert(job);
  }

  AffinityGraph graph;
  for (const auto& [link, jobs] : carriers) {
    if (jobs.size() < 2) continue;
    std::vector<Millis> iters;
    for (const auto& job : jobs) {
      auto it = iter_times.find(job);
      if (it == iter_times.end()) throw Error(ErrorCode::ProfileMissing, "no iteration time for job " + job);
      iters.push_back(it->second);
      graph.add_job(job, it->second);
    }
    graph.add_link(link, unified_perimeter(iters).perimeter_ms);
    for (const auto& job : jobs) graph.add_edge(job, link, 0);
  }
  return graph;
}

bool has_loop(const AffinityGraph& graph) {
  // Undirected DFS over both vertex classes; any non-tree edge back to a
  // visited vertex closes a cycle.
  std::map<std::string, bool> visited;
  for (const auto& [job, iter] : graph.jobs()) visited["j:" + job] = false;
  for (const auto& [link, p] : graph.links()) visited["l:" + link] = false;

  auto neighbours = [&](const std::string& v) {
    std::vector<std::string> out;
    const auto id = v.substr(2);
    if (v[0] == 'j') {
      for (const auto& l : graph.links_of(id)) out.push_back("l:" + l);
    } else {
      for (const auto& j : graph.jobs_on(id)) out.push_back("j:" + j);
    }
    return out;
  };

  for (const auto& [root, seen] : visited) {
    if (seen) continue;
    struct Frame {
      std::string vertex;
      std::string parent;
    };
    std::vector<Frame> stack{{root, ""}};
    visited[root] = true;
    while (!stack.empty()) {
      const auto frame = stack.back();
      stack.pop_back();
      for (const auto& n : neighbours(frame.vertex)) {
        if (n == frame.parent) continue;
        if (visited[n]) return true;
        visited[n] = true;
        stack.push_back({n, frame.vertex});
      }
    }
  }
  return false;
}

TimeShiftAssignment bfs_time_shifts(const AffinityGraph& graph) {
  if (has_loop(graph)) throw Error(ErrorCode::LoopDetected, "affinity graph has a loop; refusing to traverse");

  TimeShiftAssignment out;
  // Jobs are visited in identifier order, so the first unvisited job of each
  // connected subgraph is its lowest identifier and becomes the reference.
  for (const auto& [root, root_iter] : graph.jobs()) {
    if (out.shifts.contains(root)) continue;
    out.shifts[root] = 0;
    out.reference_of[root] = root;
    std::deque<std::string> queue{root};
    while (!queue.empty()) {
      const auto j = queue.front();
      queue.pop_front();
      for (const auto& l : graph.links_of(j)) {
        for (const auto& k : graph.jobs_on(l)) {
          if (out.shifts.contains(k)) continue;
          const Millis t = out.shifts.at(j) - graph.weight(j, l) + graph.weight(k, l);
          out.shifts[k] = euclid_mod(t, graph.iter_time(k));
          out.reference_of[k] = root;
          queue.push_back(k);
        }
      }
    }
  }
  return out;
}

std::vector<ShiftViolation> verify_assignment(const AffinityGraph& graph, const std::map<std::string, Millis>& shifts,
                                              VerifyMode mode) {
  std::vector<ShiftViolation> violations;
  for (const auto& [link, perimeter] : graph.links()) {
    const auto& on_link = graph.jobs_on(link);
    for (auto m = on_link.begin(); m != on_link.end(); ++m) {
      for (auto n = std::next(m); n != on_link.end(); ++n) {
        auto tm = shifts.find(*m);
        auto tn = shifts.find(*n);
        if (tm == shifts.end() || tn == shifts.end()) {
          throw Error(ErrorCode::InvalidInput, "assignment does not cover jobs on link " + link);
        }
        const Millis modulus = mode == VerifyMode::Perimeter
                                   ? perimeter
                                   : std::gcd(graph.iter_time(*m), graph.iter_time(*n));
        const Millis assigned = euclid_mod(tm->second - tn->second, modulus);
        const Millis wanted = euclid_mod(graph.weight(*m, link) - graph.weight(*n, link), modulus);
        if (assigned != wanted) violations.push_back({link, *m, *n});
      }
    }
  }
  return violations;
}

std::string to_dot(const AffinityGraph& graph) {
  std::ostringstream out;
  out << "graph affinity {\n  rankdir=LR;\n";
  for (const auto& [job, iter] : graph.jobs()) {
    out << "  \"" << job << "\" [shape=circle, label=\"" << job << "\\n" << iter << " ms\"];\n";
  }
  for (const auto& [link, p] : graph.links()) {
    out << "  \"" << link << "\" [shape=box, label=\"" << link << "\\np=" << p << " ms\"];\n";
  }
  for (const auto& [job, iter] : graph.jobs()) {
    for (const auto& link : graph.links_of(job)) {
      out << "  \"" << job << "\" -- \"" << link << "\" [label=\"" << graph.weight(job, link) << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

nlohmann::ordered_json to_json(const AffinityGraph& graph) {
  nlohmann::ordered_json doc;
  auto jobs = nlohmann::ordered_json::array();
  for (const auto& [job, iter] : graph.jobs()) jobs.push_back({{"id", job}, {"iter_time_ms", iter}});
  auto links = nlohmann::ordered_json::array();
  for (const auto& [link, p] : graph.links()) links.push_back({{"id", link}, {"perimeter_ms", p}});
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [job, iter] : graph.jobs()) {
    for (const auto& link : graph.links_of(job)) {
      edges.push_back({{"job", job}, {"link", link}, {"weight_ms", graph.weight(job, link)}});
    }
  }
  doc["jobs"] = std::move(jobs);
  doc["links"] = std::move(links);
  doc["edges"] = std::move(edges);
  return doc;
}

AffinityGraph graph_from_json(const nlohmann::json& doc) {
  AffinityGraph graph;
  try {
    for (const auto& j : doc.at("jobs")) graph.add_job(j.at("id").get<std::string>(), j.at("iter_time_ms").get<Millis>());
    for (const auto& l : doc.at("links")) {
      graph.add_link(l.at("id").get<std::string>(), l.at("perimeter_ms").get<Millis>());
    }
    for (const auto& e : doc.at("edges")) {
      graph.add_edge(e.at("job").get<std::string>(), e.at("link").get<std::string>(),
                     e.value("weight_ms", Millis{0}));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad affinity graph: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad affinity graph: ") + e.what());
  }
  graph.validate();
  return graph;
}

nlohmann::ordered_json to_json(const TimeShiftAssignment& assignment) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json shifts = nlohmann::ordered_json::object();
  for (const auto& [job, t] : assignment.shifts) shifts[job] = t;
  nlohmann::ordered_json refs = nlohmann::ordered_json::object();
  for (const auto& [job, ref] : assignment.reference_of) refs[job] = ref;
  doc["shifts"] = std::move(shifts);
  doc["reference_of"] = std::move(refs);
  return doc;
}

}  // namespace ringshift
