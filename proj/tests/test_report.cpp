#include "doctest.h"
#include "fixtures.hpp"
#include "ringshift/error.hpp"
#include "ringshift/report.hpp"

using namespace ringshift;

namespace {

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("one report gives one row per job") {
  const auto r = run(fixtures::sync_pair_trace(20), fixtures::dumbbell(45.0));
  const auto s = summarize({r});
  CHECK(s.jobs.size() == 2);
  CHECK(s.comparisons.empty());
  CHECK(lines(jobs_csv(s)) == 3);
  CHECK(s.jobs[0].iterations == 20);
  CHECK(s.jobs[0].p99_ms >= s.jobs[0].p90_ms);
  CHECK(s.jobs[0].p90_ms >= s.jobs[0].dedicated_iter_ms);
  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("baseline and cassini pair adds ratio columns") {
  SimOptions o;
  const auto b = run(fixtures::sync_pair_trace(50), fixtures::dumbbell(45.0), o);
  o.scheduler = Scheduler::Cassini;
  const auto c = run(fixtures::sync_pair_trace(50), fixtures::dumbbell(45.0), o);
  const auto s = summarize({b, c});
  REQUIRE(s.comparisons.size() == 3);
  const auto& pooled = s.comparisons.back();
  CHECK(pooled.job == "*");
  CHECK(pooled.p90_ratio > 1.15);
  CHECK(pooled.baseline_congestion > 0);
  CHECK(pooled.cassini_congestion == 0);
  const auto csv = comparison_csv(s);
  CHECK(csv.find("p90_ratio") != std::string::npos);
  CHECK(to_json(s)["comparisons"].size() == 3);
}

TEST_CASE("snapshot table has job, batch, comm time, score and shift") {
  auto snap = fixtures::snapshot_full(30);
  for (auto& e : snap.trace.events) e.job.tag = "bs" + std::to_string(e.job.id.size());
  SimOptions o;
  o.scheduler = Scheduler::Cassini;
  const auto s = summarize({run(snap.trace, snap.topology, o)});
  const auto csv = snapshot_csv(s);
  CHECK(csv.rfind("scheduler,job,batch,mean_comm_ms,score,time_shift_ms\n", 0) == 0);
  for (const auto& j : s.jobs) {
    CHECK(j.score.has_value());
    CHECK(*j.score == 1.0);
    CHECK(j.time_shift_ms.has_value());
    CHECK(j.mean_comm_ms == doctest::Approx(j.mean_ms - (j.dedicated_iter_ms - (j.job == "wrn101" ? 150 : 120))));
  }
  CHECK(csv.find("wrn101,bs6,") != std::string::npos);
}
