#include <algorithm>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "ringshift/error.hpp"
#include "ringshift/ranker.hpp"

using namespace ringshift;

namespace {

// Racks of two servers with 50 Gbps uplinks.
Topology racks(int n) { return Topology::two_tier(n, 2, 50.0, 2.0); }

std::map<std::string, IterationProfile> profiles_for(std::initializer_list<std::pair<std::string, IterationProfile>> l) {
  return {l.begin(), l.end()};
}

}  // namespace

TEST_CASE("no shared links gives an empty graph scoring 1") {
  const auto t = racks(3);
  Placement p{0, {{"a", {"s0", "s1"}}, {"b", {"s2", "s3"}}}};
  const auto profiles = profiles_for({{"a", square_wave("a", 100, 50, 40.0)}, {"b", square_wave("b", 100, 50, 40.0)}});
  const auto e = score_candidate(p, profiles, t);
  CHECK_FALSE(e.discarded);
  CHECK(e.graph.empty());
  CHECK(e.aggregate_score == 1.0);
}

TEST_CASE("two jobs sharing two distinct links form a loop") {
  const auto t = fixtures::dumbbell(50.0);
  Placement p{0, {{"a", {"s0", "s2"}}, {"b", {"s1", "s3"}}}};
  const auto profiles = profiles_for({{"a", square_wave("a", 100, 50, 40.0)}, {"b", square_wave("b", 100, 50, 40.0)}});
  RankOptions unbundled;
  unbundled.bundle_links = false;
  CHECK(score_candidate(p, profiles, t, unbundled).discarded);
  // Bundled, the four uplink directions carry the same pair and merge.
  const auto bundled = score_candidate(p, profiles, t);
  CHECK_FALSE(bundled.discarded);
  REQUIRE(bundled.links.size() == 1);
  CHECK(bundled.links[0].members.size() == 4);
}

TEST_CASE("three-job chain yields two link scores") {
  const auto t = racks(4);
  // a spans racks 0-1, b spans racks 1-2; a and b meet on rack 1's uplink.
  Placement p{0, {{"a", {"s0", "s2"}}, {"b", {"s3", "s4"}}, {"c", {"s1"}}}};
  const auto profiles = profiles_for({{"a", square_wave("a", 60, 10, 40.0)},
                                      {"b", square_wave("b", 40, 10, 40.0)},
                                      {"c", square_wave("c", 50, 10, 40.0)}});
  const auto e = score_candidate(p, profiles, t);
  CHECK_FALSE(e.discarded);
  CHECK(e.links.size() == 1);
  CHECK(e.links[0].solution.score == 1.0);

  Placement q{1, {{"a", {"s0", "s2"}}, {"b", {"s3", "s4"}}, {"c", {"s5", "s6"}}}};
  const auto f = score_candidate(q, profiles, t);
  CHECK_FALSE(f.discarded);
  CHECK(f.links.size() == 2);
  CHECK(f.graph.jobs().size() == 3);
}

TEST_CASE("rank prefers compatible candidates and breaks ties by id") {
  const auto t = fixtures::dumbbell(50.0);
  const auto profiles = profiles_for({{"a", IterationProfile("f", {{0, 100, 50.0, PhaseKind::Up}})},
                                      {"b", IterationProfile("f", {{0, 100, 50.0, PhaseKind::Up}})},
                                      {"c", square_wave("c", 100, 50, 40.0)},
                                      {"d", square_wave("d", 100, 50, 40.0)}});
  SUBCASE("compatible candidate wins") {
    Placement bad{0, {{"a", {"s0", "s2"}}, {"b", {"s1", "s3"}}}};
    Placement good{1, {{"c", {"s0", "s2"}}, {"d", {"s1", "s3"}}}};
    auto pc = profiles;
    const auto r = rank({bad, good}, pc, t);
    CHECK(r.top_placement.candidate_id == 1);
    CHECK(r.aggregate_score == 1.0);
    CHECK(verify_assignment(r.graph, r.time_shifts.shifts).empty());
  }
  SUBCASE("identical candidates: lowest id wins, independent of order") {
    std::vector<Placement> same;
    for (int i = 0; i < 4; ++i) same.push_back({i, {{"a", {"s0", "s2"}}, {"c", {"s1", "s3"}}}});
    CHECK(rank(same, profiles, t).top_placement.candidate_id == 0);
    std::reverse(same.begin(), same.end());
    CHECK(rank(same, profiles, t).top_placement.candidate_id == 0);
  }
  SUBCASE("all cyclic") {
    RankOptions unbundled;
    unbundled.bundle_links = false;
    Placement p{0, {{"a", {"s0", "s2"}}, {"c", {"s1", "s3"}}}};
    try {
      rank({p}, profiles, t, unbundled);
      FAIL("expected AllCandidatesCyclic");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllCandidatesCyclic);
    }
  }
  SUBCASE("single job") {
    Placement p{0, {{"a", {"s0", "s2"}}}};
    const auto r = rank({p}, profiles, t);
    CHECK(r.aggregate_score == 1.0);
    CHECK(r.time_shifts.shifts.empty());
  }
  SUBCASE("missing profile") {
    Placement p{0, {{"a", {"s0", "s2"}}, {"zzz", {"s1", "s3"}}}};
    CHECK_THROWS_AS(rank({p}, profiles, t), Error);
  }
}

TEST_CASE("fully compatible pair outranks a poorly compatible trio") {
  const auto t = fixtures::dumbbell3(50.0);
  const auto profiles = profiles_for({{"wrn101", square_wave("wrn101", 300, 150, 40.0)},
                                      {"vgg16", square_wave("vgg16", 300, 120, 40.0)},
                                      {"bert", square_wave("bert", 200, 190, 24.5)},
                                      {"vgg19", square_wave("vgg19", 200, 190, 24.5)},
                                      {"wrn", square_wave("wrn", 200, 190, 24.5)}});
  Placement trio{0, {{"bert", {"s0", "s3"}}, {"vgg19", {"s1", "s4"}}, {"wrn", {"s2", "s5"}}}};
  Placement pair{1, {{"wrn101", {"s0", "s3"}}, {"vgg16", {"s1", "s4"}}}};
  const auto r = rank({trio, pair}, profiles, t);
  CHECK(r.top_placement.candidate_id == 1);
  CHECK(r.aggregate_score == 1.0);
  REQUIRE(r.evaluations.size() == 2);
  CHECK(r.evaluations[1].aggregate_score == doctest::Approx(0.6).epsilon(0.02));
  for (const auto& e : r.evaluations) CHECK(r.aggregate_score >= e.aggregate_score);
}

TEST_CASE("min aggregate uses the worst link") {
  const auto t = racks(4);
  const auto profiles = profiles_for({{"a", square_wave("a", 100, 60, 40.0)},
                                      {"b", square_wave("b", 100, 60, 40.0)},
                                      {"c", square_wave("c", 100, 10, 40.0)}});
  Placement p{0, {{"a", {"s0", "s2"}}, {"b", {"s3", "s4"}}, {"c", {"s5", "s6"}}}};
  RankOptions mean_opt;
  RankOptions min_opt;
  min_opt.aggregate = Aggregate::Min;
  const auto m = score_candidate(p, profiles, t, mean_opt);
  const auto n = score_candidate(p, profiles, t, min_opt);
  double lo = 1.0;
  for (const auto& l : m.links) lo = std::min(lo, l.solution.score);
  CHECK(n.aggregate_score == lo);
  CHECK(m.aggregate_score >= n.aggregate_score);
}

TEST_CASE("candidate generation") {
  SUBCASE("one job, one server") {
    const auto t = Topology::two_tier(1, 1);
    const auto c = generate_candidates({{"a", "k", 1}}, t, 10);
    CHECK(c.size() == 1);
  }
  SUBCASE("packed and cross-rack variants on two small racks") {
    const auto t = fixtures::dumbbell(50.0);
    const auto c = generate_candidates({{"a", "k", 2}, {"b", "k", 2}}, t, 10);
    auto same_rack = [&](const std::vector<std::string>& s) {
      return t.server(s[0]).parent == t.server(s[1]).parent;
    };
    bool packed = false;
    bool crossed = false;
    for (const auto& p : c) {
      p.validate(t);
      if (same_rack(p.assignment.at("a")) && same_rack(p.assignment.at("b"))) packed = true;
      if (!same_rack(p.assignment.at("a")) && !same_rack(p.assignment.at("b"))) crossed = true;
    }
    CHECK(packed);
    CHECK(crossed);
  }
  SUBCASE("cap, distinctness and determinism on the testbed") {
    const auto t = Topology::testbed();
    std::vector<JobRequest> jobs{{"a", "k", 6}, {"b", "k", 3}, {"c", "k", 5}, {"d", "k", 2}};
    const auto c = generate_candidates(jobs, t, 10, 42);
    CHECK(c.size() <= 10);
    CHECK(c.size() >= 2);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c[i].candidate_id == static_cast<int>(i));
      c[i].validate(t);
      for (std::size_t k = i + 1; k < c.size(); ++k) CHECK_FALSE(c[i] == c[k]);
    }
    const auto again = generate_candidates(jobs, t, 10, 42);
    CHECK(again.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(again[i] == c[i]);
  }
  SUBCASE("occupied slots are respected") {
    const auto t = fixtures::dumbbell(50.0);
    const auto c = generate_candidates({{"a", "k", 2}}, t, 10, 0, {{"s0", 1}, {"s1", 1}});
    for (const auto& p : c) {
      for (const auto& s : p.assignment.at("a")) CHECK((s == "s2" || s == "s3"));
    }
  }
  SUBCASE("not enough GPUs") {
    const auto t = fixtures::dumbbell(50.0);
    try {
      generate_candidates({{"a", "k", 5}}, t, 10);
      FAIL("expected InsufficientCapacity");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientCapacity);
    }
  }
}

TEST_CASE("ranked result JSON") {
  const auto t = fixtures::dumbbell(50.0);
  const auto profiles = profiles_for({{"a", square_wave("a", 100, 50, 40.0)}, {"b", square_wave("b", 100, 50, 40.0)}});
  Placement p{0, {{"a", {"s0", "s2"}}, {"b", {"s1", "s3"}}}};
  const auto doc = to_json(rank({p}, profiles, t));
  CHECK(doc["aggregate_score"].get<double>() == 1.0);
  CHECK(doc["time_shifts"]["shifts"]["b"].get<Millis>() == 50);
  CHECK(doc["links"][0]["members"].size() == 4);
}
