#include <algorithm>

#include "doctest.h"
#include "fixtures.hpp"
#include "ringshift/error.hpp"
#include "ringshift/topology.hpp"

using namespace ringshift;

namespace {

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

TEST_CASE("testbed fixture shape") {
  const auto t = Topology::testbed();
  CHECK(t.servers().size() == 24);
  CHECK(t.racks().size() == 6);
  CHECK(t.total_gpus() == 24);
  CHECK(t.oversubscription() == doctest::Approx(2.0));
  CHECK(t.link("tor0->agg0").capacity_gbps == doctest::Approx(100.0));
  CHECK(t.link("s0->tor0").capacity_gbps == 50.0);
}

TEST_CASE("paths through the tree") {
  const auto t = Topology::testbed();
  CHECK(t.path("s0", "s0").empty());
  CHECK(t.path("s0", "s1") == std::vector<std::string>{"s0->tor0", "tor0->s1"});
  CHECK(t.path("s0", "s4") == std::vector<std::string>{"s0->tor0", "tor0->agg0", "agg0->tor1", "tor1->s4"});
}

TEST_CASE("ring routing") {
  const auto t = Topology::testbed();
  SUBCASE("all workers on one server") {
    auto multi = Topology::two_tier(1, 1, 50.0, 1.0, 4);
    Placement p{0, {{"a", {"s0", "s0", "s0"}}}};
    CHECK(route(p, multi).at("a").empty());
  }
  SUBCASE("two workers under one ToR use both server links each way") {
    Placement p{0, {{"a", {"s1", "s0"}}}};
    auto links = route(p, t).at("a");
    std::sort(links.begin(), links.end());
    CHECK(links == std::vector<std::string>{"s0->tor0", "s1->tor0", "tor0->s0", "tor0->s1"});
  }
  SUBCASE("four workers over two racks cross both uplinks") {
    Placement p{0, {{"a", {"s0", "s1", "s4", "s5"}}}};
    const auto links = route(p, t).at("a");
    for (auto l : {"tor0->agg0", "agg0->tor0", "tor1->agg0", "agg0->tor1"}) CHECK(contains(links, l));
    // Ring order s0 s1 s4 s5: each uplink direction is crossed once.
    CHECK(std::count(links.begin(), links.end(), "tor0->agg0") == 1);
    CHECK(route(p, t) == route(p, t));
  }
}

TEST_CASE("placement validation") {
  const auto t = fixtures::dumbbell(45.0);
  Placement over{0, {{"a", {"s0"}}, {"b", {"s0"}}}};
  CHECK_THROWS_AS(over.validate(t), Error);
  Placement empty{0, {{"a", {}}}};
  CHECK_THROWS_AS(empty.validate(t), Error);
  Placement unknown{0, {{"a", {"s9"}}}};
  CHECK_THROWS_AS(unknown.validate(t), Error);
  Placement ok{0, {{"a", {"s0", "s2"}}, {"b", {"s1", "s3"}}}};
  CHECK_NOTHROW(ok.validate(t));
}

TEST_CASE("topology validation") {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Internal;
  };
  CHECK(code([] { Topology({{"s0", 1, 50.0, "nowhere"}}, {{"root", "", 0.0}}); }) == ErrorCode::Disconnected);
  CHECK(code([] { Topology({{"s0", 1, 50.0, "a"}}, {{"a", "", 0.0}, {"b", "", 0.0}}); }) == ErrorCode::Disconnected);
  CHECK(code([] {
          Topology({{"s0", 1, 50.0, "a"}}, {{"r", "", 0.0}, {"a", "b", 10.0}, {"b", "a", 10.0}});
        }) == ErrorCode::Disconnected);
  CHECK(code([] { Topology({{"s0", 1, 50.0, "a"}, {"s0", 1, 50.0, "a"}}, {{"a", "", 0.0}}); }) ==
        ErrorCode::InvalidInput);
}

TEST_CASE("topology and placement JSON round trip") {
  const auto t = fixtures::dumbbell(45.0);
  const auto back = topology_from_json(to_json(t));
  CHECK(back.links().size() == t.links().size());
  CHECK(back.link("tor1->agg0").capacity_gbps == 45.0);

  Placement p{3, {{"a", {"s0", "s2"}}}};
  const auto q = placement_from_json(to_json(p));
  CHECK(q.candidate_id == 3);
  CHECK(q == p);
  CHECK_THROWS_AS(topology_from_json(nlohmann::json::parse(R"({"servers": 3})")), Error);
}
