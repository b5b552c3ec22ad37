#include "ringshift/report.hpp"

#include <numeric>
#include <sstream>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::int64_t total_congestion(const SimReport& r) {
  std::int64_t n = 0;
  for (const auto& l : r.links) n += l.congestion_events;
  return n;
}

Comparison compare(std::uint64_t seed, std::string job, const std::vector<double>& base,
                   const std::vector<double>& cas) {
  Comparison c;
  c.seed = seed;
  c.job = std::move(job);
  c.baseline_mean_ms = mean_of(base);
  c.cassini_mean_ms = mean_of(cas);
  c.baseline_p90_ms = percentile(base, 0.9);
  c.cassini_p90_ms = percentile(cas, 0.9);
  c.mean_ratio = c.baseline_mean_ms / c.cassini_mean_ms;
  c.p90_ratio = c.baseline_p90_ms / c.cassini_p90_ms;
  return c;
}

template <class T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

template <class T>
std::string opt_csv(const std::optional<T>& v) {
  if (!v) return "";
  std::ostringstream out;
  out << *v;
  return out.str();
}

}  // namespace

Summary summarize(const std::vector<SimReport>& reports) {
  if (reports.empty()) throw Error(ErrorCode::InvalidInput, "report needs at least one simulation report");
  Summary s;
  std::vector<const SimReport*> baselines;
  std::vector<const SimReport*> cassinis;
  for (const auto& r : reports) {
    for (const auto& j : r.jobs) {
      if (j.iteration_ms.empty()) continue;
      JobSummary row;
      row.scheduler = r.scheduler;
      row.seed = r.seed;
      row.job = j.id;
      row.kind = j.kind;
      row.tag = j.tag;
      row.iterations = j.iteration_ms.size();
      row.mean_ms = mean_of(j.iteration_ms);
      row.p90_ms = percentile(j.iteration_ms, 0.9);
      row.p99_ms = percentile(j.iteration_ms, 0.99);
      row.dedicated_iter_ms = j.dedicated_iter_ms;
      row.mean_comm_ms = row.mean_ms - static_cast<double>(j.compute_ms);
      row.score = j.score;
      row.time_shift_ms = j.time_shift_ms;
      s.jobs.push_back(std::move(row));
    }
    for (const auto& l : r.links) {
      s.links.push_back({r.scheduler, r.seed, l.id, l.congestion_events, l.iterations,
                         l.iterations > 0 ? static_cast<double>(l.congestion_events) / l.iterations : 0.0});
    }
    (r.scheduler == "baseline" ? baselines : cassinis).push_back(&r);
  }

  for (std::size_t i = 0; i < std::min(baselines.size(), cassinis.size()); ++i) {
    const auto& b = *baselines[i];
    const auto& c = *cassinis[i];
    std::vector<double> all_b;
    std::vector<double> all_c;
    for (const auto& jb : b.jobs) {
      if (jb.iteration_ms.empty()) continue;
      const JobReport* jc = nullptr;
      for (const auto& j : c.jobs) {
        if (j.id == jb.id) jc = &j;
      }
      if (jc == nullptr || jc->iteration_ms.empty()) continue;
      s.comparisons.push_back(compare(b.seed, jb.id, jb.iteration_ms, jc->iteration_ms));
      all_b.insert(all_b.end(), jb.iteration_ms.begin(), jb.iteration_ms.end());
      all_c.insert(all_c.end(), jc->iteration_ms.begin(), jc->iteration_ms.end());
    }
    if (all_b.empty()) continue;
    auto pooled = compare(b.seed, "*", all_b, all_c);
    pooled.baseline_congestion = total_congestion(b);
    pooled.cassini_congestion = total_congestion(c);
    s.comparisons.push_back(std::move(pooled));
  }
  return s;
}

nlohmann::ordered_json to_json(const Summary& s) {
  nlohmann::ordered_json doc;
  auto jobs = nlohmann::ordered_json::array();
  for (const auto& j : s.jobs) {
    jobs.push_back({{"scheduler", j.scheduler},
                    {"seed", j.seed},
                    {"job", j.job},
                    {"kind", j.kind},
                    {"tag", j.tag},
                    {"iterations", j.iterations},
                    {"mean_ms", j.mean_ms},
                    {"p90_ms", j.p90_ms},
                    {"p99_ms", j.p99_ms},
                    {"dedicated_iter_ms", j.dedicated_iter_ms},
                    {"mean_comm_ms", j.mean_comm_ms},
                    {"score", opt(j.score)},
                    {"time_shift_ms", opt(j.time_shift_ms)}});
  }
  doc["jobs"] = std::move(jobs);
  auto links = nlohmann::ordered_json::array();
  for (const auto& l : s.links) {
    links.push_back({{"scheduler", l.scheduler},
                     {"seed", l.seed},
                     {"link", l.link},
                     {"congestion_events", l.congestion_events},
                     {"iterations", l.iterations},
                     {"events_per_iteration", l.events_per_iteration}});
  }
  doc["links"] = std::move(links);
  auto cmp = nlohmann::ordered_json::array();
  for (const auto& c : s.comparisons) {
    cmp.push_back({{"seed", c.seed},
                   {"job", c.job},
                   {"baseline_mean_ms", c.baseline_mean_ms},
                   {"baseline_p90_ms", c.baseline_p90_ms},
                   {"cassini_mean_ms", c.cassini_mean_ms},
                   {"cassini_p90_ms", c.cassini_p90_ms},
                   {"mean_ratio", c.mean_ratio},
                   {"p90_ratio", c.p90_ratio},
                   {"baseline_congestion", c.baseline_congestion},
                   {"cassini_congestion", c.cassini_congestion}});
  }
  doc["comparisons"] = std::move(cmp);
  return doc;
}

std::string jobs_csv(const Summary& s) {
  std::ostringstream out;
  out << "scheduler,seed,job,kind,tag,iterations,mean_ms,p90_ms,p99_ms,dedicated_iter_ms\n";
  for (const auto& j : s.jobs) {
    out << j.scheduler << ',' << j.seed << ',' << j.job << ',' << j.kind << ',' << j.tag << ',' << j.iterations << ','
        << j.mean_ms << ',' << j.p90_ms << ',' << j.p99_ms << ',' << j.dedicated_iter_ms << '\n';
  }
  return out.str();
}

std::string links_csv(const Summary& s) {
  std::ostringstream out;
  out << "scheduler,seed,link,congestion_events,iterations,events_per_iteration\n";
  for (const auto& l : s.links) {
    out << l.scheduler << ',' << l.seed << ',' << l.link << ',' << l.congestion_events << ',' << l.iterations << ','
        << l.events_per_iteration << '\n';
  }
  return out.str();
}

std::string comparison_csv(const Summary& s) {
  std::ostringstream out;
  out << "seed,job,baseline_mean_ms,baseline_p90_ms,cassini_mean_ms,cassini_p90_ms,mean_ratio,p90_ratio,"
         "baseline_congestion,cassini_congestion\n";
  for (const auto& c : s.comparisons) {
    out << c.seed << ',' << c.job << ',' << c.baseline_mean_ms << ',' << c.baseline_p90_ms << ',' << c.cassini_mean_ms
        << ',' << c.cassini_p90_ms << ',' << c.mean_ratio << ',' << c.p90_ratio << ',' << c.baseline_congestion << ','
        << c.cassini_congestion << '\n';
  }
  return out.str();
}

std::string snapshot_csv(const Summary& s) {
  std::ostringstream out;
  out << "scheduler,job,batch,mean_comm_ms,score,time_shift_ms\n";
  for (const auto& j : s.jobs) {
    out << j.scheduler << ',' << j.job << ',' << j.tag << ',' << j.mean_comm_ms << ',' << opt_csv(j.score) << ','
        << opt_csv(j.time_shift_ms) << '\n';
  }
  return out.str();
}

}  // namespace ringshift
