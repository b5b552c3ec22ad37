#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "ringshift/error.hpp"
#include "ringshift/simulator.hpp"

using namespace ringshift;

namespace {

FluidFlow flow(double demand, std::size_t link, int mult = 1) { return {demand, {{link, mult}}}; }

std::int64_t total_iterations(const SimReport& r) {
  std::int64_t n = 0;
  for (const auto& j : r.jobs) n += static_cast<std::int64_t>(j.iteration_ms.size());
  return n;
}

}  // namespace

TEST_CASE("max-min allocation") {
  SUBCASE("under capacity gets full demand") {
    const auto r = max_min_allocation({flow(25, 0)}, {50});
    CHECK(r[0] == 25.0);
  }
  SUBCASE("two equal flows split the link") {
    const auto r = max_min_allocation({flow(45, 0), flow(45, 0)}, {45});
    CHECK(r[0] == doctest::Approx(22.5).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(22.5).epsilon(1e-12));
  }
  SUBCASE("water filling matches the oracle") {
    const auto r = max_min_allocation({flow(10, 0), flow(20, 0), flow(40, 0)}, {45});
    const auto o = oracle::water_fill({10, 20, 40}, 45);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r[i] == doctest::Approx(o[i]));
    CHECK(r[1] == doctest::Approx(17.5));
  }
  SUBCASE("a link crossed twice counts twice") {
    const auto r = max_min_allocation({flow(40, 0, 2)}, {50});
    CHECK(r[0] == doctest::Approx(25.0));
  }
  SUBCASE("a flow is limited by its tightest link") {
    const auto r = max_min_allocation({{40, {{0, 1}, {1, 1}}}, flow(40, 1)}, {10, 50});
    CHECK(r[0] == doctest::Approx(10.0));
    CHECK(r[1] == doctest::Approx(40.0));
  }
  SUBCASE("random instances conserve work and respect capacity") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(1.0, 60.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> demands(5);
      for (auto& x : demands) x = d(rng);
      std::vector<FluidFlow> flows;
      for (double x : demands) flows.push_back(flow(x, 0));
      const double cap = 80.0;
      const auto r = max_min_allocation(flows, {cap});
      const double used = std::accumulate(r.begin(), r.end(), 0.0);
      const double want = std::accumulate(demands.begin(), demands.end(), 0.0);
      CHECK(used == doctest::Approx(std::min(cap, want)));
      const auto o = oracle::water_fill(demands, cap);
      for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r[i] <= demands[i] + 1e-9);
        CHECK(r[i] == doctest::Approx(o[i]));
      }
    }
  }
}

TEST_CASE("offered load and congestion counting") {
  const std::vector<FluidFlow> flows{flow(30, 0), flow(30, 0, 2), flow(5, 1)};
  const auto off = offered_load(flows, 2);
  CHECK(off[0] == 90.0);
  CHECK(off[1] == 5.0);
  std::vector<std::int64_t> events(2, 0);
  count_congestion(off, {90.0, 4.0}, events);
  CHECK(events[0] == 0);
  CHECK(events[1] == 1);
}

TEST_CASE("phase position advances at the achieved rate") {
  const auto p = square_wave("x", 100, 40, 20.0);
  CHECK(advance_position(p, 0.0, 20.0) == 1.0);
  CHECK(advance_position(p, 0.0, 10.0) == 0.5);
  CHECK(advance_position(p, 50.0, 0.0) == 51.0);
}

TEST_CASE("drift tracker") {
  SUBCASE("no jitter never adjusts") {
    DriftTracker d(5.0);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(d.observe(0.0));
  }
  SUBCASE("the threshold itself does not trigger") {
    DriftTracker d(5.0, 0.0);
    CHECK_FALSE(d.observe(5.0));
    CHECK(d.deviation() == 5.0);
    CHECK(d.observe(5.0 + 1e-9));
    CHECK(d.deviation() == 0.0);
  }
  SUBCASE("deviation decays") {
    DriftTracker d(100.0, 0.5);
    d.observe(8.0);
    d.observe(0.0);
    CHECK(d.deviation() == 4.0);
  }
  SUBCASE("non-adjusting trackers keep drifting") {
    DriftTracker d(1.0, 1.0, false);
    for (int i = 0; i < 5; ++i) CHECK_FALSE(d.observe(1.0));
    CHECK(d.deviation() == 5.0);
  }
}

TEST_CASE("percentile interpolates") {
  CHECK(percentile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(percentile({10, 20}, 0.9) == doctest::Approx(19.0));
  CHECK(percentile({7}, 0.99) == 7.0);
  CHECK_THROWS_AS(percentile({}, 0.5), Error);
  CHECK_THROWS_AS(percentile({1.0}, 1.5), Error);
}

TEST_CASE("empty trace gives an empty report") {
  const auto r = run(Trace{}, Topology::testbed());
  CHECK(r.jobs.empty());
  CHECK(r.links.empty());
  CHECK(r.end_ms == 0.0);
}

TEST_CASE("a lone job runs at its dedicated iteration time") {
  Trace t;
  t.profiles.emplace("sq", square_wave("sq", 200, 52, 45.0));
  t.events.push_back({0, TraceEventKind::Arrival, fixtures::pinned("a", "sq", {"s0", "s2"}, 50)});
  const auto r = run(t, fixtures::dumbbell(45.0));
  const auto& j = r.job("a");
  REQUIRE(j.iteration_ms.size() == 50);
  for (double v : j.iteration_ms) CHECK(v == doctest::Approx(200.0));
  for (const auto& l : r.links) CHECK(l.congestion_events == 0);
  CHECK(j.finish_ms == doctest::Approx(10'000.0));
}

TEST_CASE("synchronized square waves congest for the stretched Up arc") {
  const auto r = run(fixtures::sync_pair_trace(100), fixtures::dumbbell(45.0));
  const auto* up = r.link("tor0->agg0");
  REQUIRE(up != nullptr);
  // Each Up arc runs at half rate, so it lasts twice as long.
  CHECK(static_cast<double>(up->congestion_events) / 100.0 == doctest::Approx(104.0).epsilon(0.02));
  CHECK(r.link("s0->tor0")->congestion_events == 0);
  for (const auto& j : r.jobs) {
    for (double v : j.iteration_ms) CHECK(v >= 200.0 - 1e-9);
  }

  SimOptions cassini;
  cassini.scheduler = Scheduler::Cassini;
  const auto c = run(fixtures::sync_pair_trace(100), fixtures::dumbbell(45.0), cassini);
  CHECK(c.link("tor0->agg0")->congestion_events == 0);
  CHECK(c.job("b").time_shift_ms.has_value());
}

TEST_CASE("runs are deterministic for a seed") {
  auto snap = fixtures::snapshot_full(60);
  SimOptions o;
  o.scheduler = Scheduler::Cassini;
  o.jitter_fraction = 0.01;
  o.seed = 9;
  const auto a = to_json(run(snap.trace, snap.topology, o)).dump();
  const auto b = to_json(run(snap.trace, snap.topology, o)).dump();
  CHECK(a == b);
  o.seed = 10;
  CHECK(to_json(run(snap.trace, snap.topology, o)).dump() != a);
}

TEST_CASE("jitter without adjustments never fires") {
  auto snap = fixtures::snapshot_full(60);
  SimOptions o;
  o.scheduler = Scheduler::Cassini;
  const auto r = run(snap.trace, snap.topology, o);
  CHECK(r.adjustments.empty());
}

TEST_CASE("queueing, departures and placement") {
  Trace t;
  t.profiles = builtin_profiles();
  t.events.push_back({0, TraceEventKind::Arrival, {"a", "resnet50", 4, 20, {}}});
  t.events.push_back({10, TraceEventKind::Arrival, {"b", "bert", 2, 20, {}}});
  t.events.push_back({20, TraceEventKind::Departure, {"a", "", 1, 0, {}}});
  const auto topo = fixtures::dumbbell(50.0);
  for (auto s : {Scheduler::Baseline, Scheduler::Cassini}) {
    SimOptions o;
    o.scheduler = s;
    const auto r = run(t, topo, o);
    const auto& a = r.job("a");
    const auto& b = r.job("b");
    CHECK(a.finish_ms == doctest::Approx(20.0));
    CHECK(b.start_ms >= 20.0);
    CHECK(b.iteration_ms.size() == 20);
    CHECK(b.servers.size() == 2);
  }
}

TEST_CASE("trace validation and JSON") {
  auto t = fixtures::sync_pair_trace(10);
  CHECK_NOTHROW(t.validate());
  const auto back = trace_from_json(to_json(t));
  CHECK(back.events.size() == 2);
  CHECK(back.events[1].job.servers == std::vector<std::string>{"s1", "s3"});
  CHECK(back.profiles.at("sq") == t.profiles.at("sq"));

  auto dup = t;
  dup.events.push_back(dup.events[0]);
  CHECK_THROWS_AS(dup.validate(), Error);
  auto backwards = t;
  backwards.events[0].at_ms = 50;
  CHECK_THROWS_AS(backwards.validate(), Error);
  auto ghost = t;
  ghost.events.push_back({100, TraceEventKind::Departure, {"nobody", "", 1, 0, {}}});
  CHECK_THROWS_AS(ghost.validate(), Error);
}

TEST_CASE("generated traces are Poisson-like and reproducible") {
  const auto topo = Topology::testbed();
  TraceGenOptions o;
  o.jobs = 30;
  o.seed = 5;
  const auto a = generate_trace(topo, builtin_profiles(), o);
  const auto b = generate_trace(topo, builtin_profiles(), o);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK_NOTHROW(a.validate());
  CHECK(!a.events.empty());
  CHECK(a.events.size() <= 30);
  for (const auto& e : a.events) {
    CHECK(e.job.iterations >= o.min_iterations);
    CHECK(e.job.iterations <= o.max_iterations);
    CHECK(e.job.workers <= topo.total_gpus());
  }
}

TEST_CASE("report JSON round trip and CSV") {
  const auto r = run(fixtures::sync_pair_trace(5), fixtures::dumbbell(45.0));
  const auto back = report_from_json(to_json(r));
  CHECK(to_json(back).dump() == to_json(r).dump());
  CHECK(total_iterations(back) == 10);
  const auto csv = iterations_csv(r);
  CHECK(csv.rfind("job,iteration,iteration_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK(congestion_csv(r).rfind("link,capacity_gbps,congestion_events,iterations,events_per_iteration\n", 0) == 0);
}
