#pragma once

#include <string>
#include <vector>

#include "ringshift/optimizer.hpp"
#include "ringshift/profiles.hpp"
#include "ringshift/simulator.hpp"
#include "ringshift/topology.hpp"

namespace fixtures {

using namespace ringshift;

// 60 ms and 40 ms jobs, 10 ms Up each at 40 Gbps, on a 50 Gbps link.
// The 60 ms job is listed first so it is the pinned one.
inline LinkJobSet interleave_pair() {
  return {"l1", 50.0, {{"j2", square_wave("j2", 60, 10, 40.0)}, {"j1", square_wave("j1", 40, 10, 40.0)}}};
}

// Two racks of two servers; the ToR uplinks carry `shared_gbps`.
inline Topology dumbbell(double shared_gbps, double nic_gbps = 50.0) {
  std::vector<Server> servers{{"s0", 1, nic_gbps, "tor0"},
                              {"s1", 1, nic_gbps, "tor0"},
                              {"s2", 1, nic_gbps, "tor1"},
                              {"s3", 1, nic_gbps, "tor1"}};
  std::vector<Switch> switches{{"agg0", "", 0.0}, {"tor0", "agg0", shared_gbps}, {"tor1", "agg0", shared_gbps}};
  return Topology(servers, switches);
}

// Dumbbell with three servers per rack, for three cross-rack jobs.
inline Topology dumbbell3(double shared_gbps, double nic_gbps = 50.0) {
  std::vector<Server> servers;
  for (int i = 0; i < 6; ++i) servers.push_back({"s" + std::to_string(i), 1, nic_gbps, i < 3 ? "tor0" : "tor1"});
  std::vector<Switch> switches{{"agg0", "", 0.0}, {"tor0", "agg0", shared_gbps}, {"tor1", "agg0", shared_gbps}};
  return Topology(servers, switches);
}

inline JobSpec pinned(std::string id, std::string kind, std::vector<std::string> servers, std::int64_t iterations) {
  const int workers = static_cast<int>(servers.size());
  return {std::move(id), std::move(kind), workers, iterations, std::move(servers)};
}

// Two identical square-wave jobs sharing one 45 Gbps bottleneck.
inline Trace sync_pair_trace(std::int64_t iterations = 300) {
  Trace t;
  t.profiles.emplace("sq", square_wave("sq", 200, 52, 45.0));
  t.events.push_back({0, TraceEventKind::Arrival, pinned("a", "sq", {"s0", "s2"}, iterations)});
  t.events.push_back({0, TraceEventKind::Arrival, pinned("b", "sq", {"s1", "s3"}, iterations)});
  return t;
}

struct Snapshot {
  std::string name;
  double expected_score;
  Trace trace;
  Topology topology;
};

// Fully compatible pair: their Up arcs fit side by side on a 50 Gbps link.
inline Snapshot snapshot_full(std::int64_t iterations = 300) {
  Trace t;
  t.profiles.emplace("wrn101", square_wave("wrn101", 300, 150, 40.0));
  t.profiles.emplace("vgg16", square_wave("vgg16", 300, 120, 40.0));
  t.events.push_back({0, TraceEventKind::Arrival, pinned("wrn101", "wrn101", {"s0", "s2"}, iterations)});
  t.events.push_back({0, TraceEventKind::Arrival, pinned("vgg16", "vgg16", {"s1", "s3"}, iterations)});
  return {"full", 1.0, std::move(t), dumbbell(50.0)};
}

// Two identical jobs whose Up arcs overlap for at least 100 ms per iteration.
inline Snapshot snapshot_partial(std::int64_t iterations = 300) {
  Trace t;
  t.profiles.emplace("roberta", square_wave("roberta", 200, 150, 35.0));
  t.events.push_back({0, TraceEventKind::Arrival, pinned("roberta-a", "roberta", {"s0", "s2"}, iterations)});
  t.events.push_back({0, TraceEventKind::Arrival, pinned("roberta-b", "roberta", {"s1", "s3"}, iterations)});
  return {"partial", 0.8, std::move(t), dumbbell(50.0)};
}

// Three communication-heavy jobs that overlap almost everywhere.
inline Snapshot snapshot_poor(std::int64_t iterations = 300) {
  Trace t;
  t.profiles.emplace("bert", square_wave("bert", 200, 190, 24.5));
  t.profiles.emplace("vgg19", square_wave("vgg19", 200, 190, 24.5));
  t.profiles.emplace("wrn101", square_wave("wrn101", 200, 190, 24.5));
  t.events.push_back({0, TraceEventKind::Arrival, pinned("bert", "bert", {"s0", "s3"}, iterations)});
  t.events.push_back({0, TraceEventKind::Arrival, pinned("vgg19", "vgg19", {"s1", "s4"}, iterations)});
  t.events.push_back({0, TraceEventKind::Arrival, pinned("wrn101", "wrn101", {"s2", "s5"}, iterations)});
  return {"poor", 0.6, std::move(t), dumbbell3(50.0)};
}

}  // namespace fixtures
