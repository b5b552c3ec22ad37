#include "ringshift/ranker.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

constexpr double kScoreTie = 1e-12;

struct SharedLink {
  std::string id;
  std::vector<std::string> members;
  double capacity = 0.0;
  std::set<std::string> jobs;
};

// Links carrying two or more jobs, optionally merged by identical job set.
std::vector<SharedLink> shared_links(const Routes& routes, const Topology& topology, bool bundle) {
  std::map<std::string, std::set<std::string>> carriers;
  for (const auto& [job, links] : routes) {
    for (const auto& l : links) carriers[l].insert(job);
  }
  std::vector<SharedLink> out;
  std::map<std::set<std::string>, std::size_t> by_jobs;
  for (const auto& [link, jobs] : carriers) {
    if (jobs.size() < 2) continue;
    const double cap = topology.link(link).capacity_gbps;
    if (bundle) {
      auto [it, fresh] = by_jobs.emplace(jobs, out.size());
      if (!fresh) {
        auto& shared = out[it->second];
        shared.members.push_back(link);
        if (cap < shared.capacity) {
          shared.capacity = cap;
          shared.id = link;
        }
        continue;
      }
    }
    out.push_back({link, {link}, cap, jobs});
  }
  std::sort(out.begin(), out.end(), [](const SharedLink& a, const SharedLink& b) { return a.id < b.id; });
  return out;
}

std::size_t multiplicity(const std::vector<std::string>& links, const std::string& link) {
  return static_cast<std::size_t>(std::count(links.begin(), links.end(), link));
}

double aggregate_of(const std::vector<LinkScore>& links, Aggregate mode) {
  if (links.empty()) return 1.0;
  if (mode == Aggregate::Min) {
    double lo = 1.0;
    for (const auto& l : links) lo = std::min(lo, l.solution.score);
    return lo;
  }
  double sum = 0.0;
  for (const auto& l : links) sum += l.solution.score;
  return sum / static_cast<double>(links.size());
}

bool ranks_before(const CandidateEvaluation& a, const CandidateEvaluation& b) {
  if (std::abs(a.aggregate_score - b.aggregate_score) > kScoreTie) return a.aggregate_score > b.aggregate_score;
  if (a.shared_links() != b.shared_links()) return a.shared_links() < b.shared_links();
  return a.candidate_id < b.candidate_id;
}

}  // namespace

std::map<std::string, IterationProfile> resolve_profiles(const std::vector<JobRequest>& jobs,
                                                         const std::map<std::string, IterationProfile>& library) {
  std::map<std::string, IterationProfile> out;
  for (const auto& job : jobs) {
    auto it = library.find(job.kind);
    if (it == library.end()) throw Error(ErrorCode::ProfileMissing, "no profile for job kind " + job.kind);
    out[job.job_id] = it->second;
  }
  return out;
}

IterationProfile scale_demand(const IterationProfile& profile, double factor) {
  auto arcs = profile.arcs();
  for (auto& a : arcs) a.demand_gbps *= factor;
  return IterationProfile(profile.job_kind(), std::move(arcs));
}

CandidateEvaluation score_candidate(const Placement& candidate,
                                    const std::map<std::string, IterationProfile>& job_profiles,
                                    const Topology& topology, const RankOptions& options) {
  candidate.validate(topology);
  CandidateEvaluation eval;
  eval.candidate_id = candidate.candidate_id;

  const auto routes = route(candidate, topology);
  const auto shared = shared_links(routes, topology, options.bundle_links);

  for (const auto& s : shared) {
    for (const auto& job : s.jobs) {
      if (!job_profiles.contains(job)) throw Error(ErrorCode::ProfileMissing, "no profile for job " + job);
      eval.graph.add_job(job, job_profiles.at(job).iter_time_ms());
    }
    eval.graph.add_link(s.id, 1);
    for (const auto& job : s.jobs) eval.graph.add_edge(job, s.id, 0);
  }
  if (has_loop(eval.graph)) {
    eval.discarded = true;
    eval.aggregate_score = 0.0;
    return eval;
  }

  for (const auto& s : shared) {
    LinkJobSet set{s.id, s.capacity, {}};
    for (const auto& job : s.jobs) {
      const auto& profile = job_profiles.at(job);
      const auto m = multiplicity(routes.at(job), s.id);
      set.jobs.push_back({job, m > 1 ? scale_demand(profile, static_cast<double>(m)) : profile});
    }
    auto solution = solve_rotations(set, options.optimizer);
    eval.graph.set_perimeter(s.id, solution.perimeter_ms);
    for (const auto& jr : solution.jobs) eval.graph.set_weight(jr.job_id, s.id, jr.time_shift_ms);
    eval.links.push_back({s.id, s.members, s.capacity, std::move(solution)});
  }
  eval.aggregate_score = aggregate_of(eval.links, options.aggregate);
  return eval;
}

RankedResult rank(const std::vector<Placement>& candidates,
                  const std::map<std::string, IterationProfile>& job_profiles, const Topology& topology,
                  const RankOptions& options) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidInput, "no candidate placements");

  // Evaluations are independent; merged by candidate id below.
  std::vector<CandidateEvaluation> evals;
  evals.reserve(candidates.size());
  for (const auto& c : candidates) evals.push_back(score_candidate(c, job_profiles, topology, options));

  std::vector<std::size_t> order(evals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return !evals[i].discarded; });
  const auto surviving = static_cast<std::size_t>(
      std::count_if(evals.begin(), evals.end(), [](const auto& e) { return !e.discarded; }));
  if (surviving == 0) throw Error(ErrorCode::AllCandidatesCyclic, "every candidate placement has a loop");
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(surviving),
            [&](std::size_t a, std::size_t b) { return ranks_before(evals[a], evals[b]); });
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(surviving), order.end(),
            [&](std::size_t a, std::size_t b) { return evals[a].candidate_id < evals[b].candidate_id; });

  const auto& best = evals[order.front()];
  RankedResult out;
  for (const auto& c : candidates) {
    if (c.candidate_id == best.candidate_id) {
      out.top_placement = c;
      break;
    }
  }
  out.aggregate_score = best.aggregate_score;
  out.graph = best.graph;
  out.links = best.links;
  for (const auto& l : best.links) out.per_link_scores[l.link_id] = l.solution.score;
  out.time_shifts = bfs_time_shifts(best.graph);
  if (!verify_assignment(best.graph, out.time_shifts.shifts).empty()) {
    throw Error(ErrorCode::Internal, "time-shift assignment failed verification");
  }
  for (auto i : order) out.evaluations.push_back(std::move(evals[i]));
  return out;
}

std::vector<Placement> generate_candidates(const std::vector<JobRequest>& jobs, const Topology& topology,
                                           std::size_t n_max, std::uint64_t seed,
                                           const std::map<std::string, int>& occupied) {
  std::map<std::string, int> free_slots;
  int total_free = 0;
  for (const auto& s : topology.servers()) {
    auto it = occupied.find(s.id);
    const int used = it == occupied.end() ? 0 : it->second;
    free_slots[s.id] = std::max(0, s.gpu_slots - used);
    total_free += free_slots[s.id];
  }
  int wanted = 0;
  std::set<std::string> seen_ids;
  for (const auto& j : jobs) {
    if (j.workers < 1) throw Error(ErrorCode::InvalidInput, "job " + j.job_id + " requests no workers");
    if (!seen_ids.insert(j.job_id).second) throw Error(ErrorCode::InvalidInput, "duplicate job " + j.job_id);
    wanted += j.workers;
  }
  if (wanted > total_free) {
    throw Error(ErrorCode::InsufficientCapacity,
                "jobs need " + std::to_string(wanted) + " GPUs, " + std::to_string(total_free) + " free");
  }

  std::vector<std::vector<std::string>> racks;
  for (const auto& [tor, servers] : topology.racks()) racks.push_back(servers);

  // Takes one free slot from the first server of rack r that has one.
  auto take = [](std::map<std::string, int>& slots, const std::vector<std::string>& rack) -> std::string {
    for (const auto& s : rack) {
      if (slots[s] > 0) {
        --slots[s];
        return s;
      }
    }
    return {};
  };
  auto rack_free = [](std::map<std::string, int>& slots, const std::vector<std::string>& rack) {
    int n = 0;
    for (const auto& s : rack) n += slots[s];
    return n;
  };

  auto build = [&](const std::vector<std::size_t>& order, bool spread) {
    auto slots = free_slots;
    Placement p;
    for (const auto& job : jobs) {
      auto& workers = p.assignment[job.job_id];
      std::size_t fit = order.size();
      if (!spread || job.workers == 1) {
        int best = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
          const int f = rack_free(slots, racks[order[k]]);
          if (f >= job.workers && (fit == order.size() || f < best)) {
            fit = k;
            best = f;
          }
        }
      }
      if (fit != order.size()) {
        for (int w = 0; w < job.workers; ++w) workers.push_back(take(slots, racks[order[fit]]));
      } else if (!spread) {
        for (std::size_t k = 0; k < order.size() && static_cast<int>(workers.size()) < job.workers; ++k) {
          while (static_cast<int>(workers.size()) < job.workers) {
            auto s = take(slots, racks[order[k]]);
            if (s.empty()) break;
            workers.push_back(s);
          }
        }
      } else {
        while (static_cast<int>(workers.size()) < job.workers) {
          bool progressed = false;
          for (std::size_t k = 0; k < order.size() && static_cast<int>(workers.size()) < job.workers; ++k) {
            auto s = take(slots, racks[order[k]]);
            if (s.empty()) continue;
            workers.push_back(s);
            progressed = true;
          }
          if (!progressed) break;
        }
      }
      std::sort(workers.begin(), workers.end(), [&](const std::string& a, const std::string& b) {
        return topology.server_index(a) < topology.server_index(b);
      });
    }
    return p;
  };

  std::vector<Placement> out;
  auto offer = [&](const std::vector<std::size_t>& order) {
    for (bool spread : {false, true}) {
      if (out.size() >= n_max) return;
      auto p = build(order, spread);
      if (std::find(out.begin(), out.end(), p) != out.end()) continue;
      p.candidate_id = static_cast<int>(out.size());
      out.push_back(std::move(p));
    }
  };

  std::vector<std::size_t> order(racks.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t r = 0; r < racks.size() && out.size() < n_max; ++r) {
    offer(order);
    std::rotate(order.begin(), order.begin() + 1, order.end());
  }
  std::mt19937_64 rng(seed);
  for (std::size_t attempt = 0; attempt < 4 * n_max && out.size() < n_max; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    offer(order);
  }
  return out;
}

std::vector<JobRequest> jobs_from_json(const nlohmann::json& doc) {
  try {
    const auto& list = doc.is_object() ? doc.at("jobs") : doc;
    std::vector<JobRequest> out;
    for (const auto& j : list) {
      out.push_back({j.at("id").get<std::string>(), j.at("kind").get<std::string>(), j.value("workers", 1)});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad job list: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const RankedResult& result) {
  nlohmann::ordered_json doc;
  doc["top_placement"] = to_json(result.top_placement);
  doc["aggregate_score"] = result.aggregate_score;
  nlohmann::ordered_json links = nlohmann::ordered_json::array();
  for (const auto& l : result.links) {
    auto item = to_json(l.solution);
    item["members"] = l.members;
    links.push_back(std::move(item));
  }
  doc["per_link_scores"] = nlohmann::ordered_json::object();
  for (const auto& [link, s] : result.per_link_scores) doc["per_link_scores"][link] = s;
  doc["links"] = std::move(links);
  doc["time_shifts"] = to_json(result.time_shifts);
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& e : result.evaluations) {
    cands.push_back({{"candidate_id", e.candidate_id},
                     {"discarded", e.discarded},
                     {"aggregate_score", e.aggregate_score},
                     {"shared_links", e.shared_links()}});
  }
  doc["candidates"] = std::move(cands);
  return doc;
}

}  // namespace ringshift
