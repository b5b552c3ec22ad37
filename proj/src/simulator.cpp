#include "ringshift/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

constexpr double kEps = 1e-9;

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double positive_fmod(double a, double m) {
  double r = std::fmod(a, m);
  if (r < 0) r += m;
  if (r >= m - kEps) r = 0.0;
  return r;
}

// Advances `pos` through one iteration's bins for at most `dt` ms. Up bins
// move at `up_factor` per ms. Stops at the iteration end. Returns time used.
double advance_bins(const std::vector<bool>& up, double& pos, double up_factor, double dt) {
  const double end = static_cast<double>(up.size());
  double used = 0.0;
  while (dt - used > kEps && pos < end) {
    const auto bin = static_cast<std::size_t>(std::floor(pos + kEps));
    if (bin >= up.size()) {
      pos = end;
      break;
    }
    const double factor = up[bin] ? up_factor : 1.0;
    if (factor <= 0.0) return dt;
    const double next = static_cast<double>(bin + 1);
    const double need = (next - pos) / factor;
    if (need <= dt - used + kEps) {
      pos = next;
      used += need;
    } else {
      pos += (dt - used) * factor;
      used = dt;
    }
  }
  return std::min(used, dt);
}

std::string_view to_string(TraceEventKind kind) {
  switch (kind) {
    case TraceEventKind::Arrival: return "arrival";
    case TraceEventKind::Departure: return "departure";
    case TraceEventKind::LeaseExpiry: return "lease_expiry";
  }
  return "arrival";
}

TraceEventKind event_kind_from_string(const std::string& s) {
  if (s == "arrival") return TraceEventKind::Arrival;
  if (s == "departure") return TraceEventKind::Departure;
  if (s == "lease_expiry") return TraceEventKind::LeaseExpiry;
  throw Error(ErrorCode::SchemaViolation, "unknown trace event kind " + s);
}

}  // namespace

// ---- fluid model -----------------------------------------------------------

std::vector<double> max_min_allocation(const std::vector<FluidFlow>& flows,
                                       const std::vector<double>& capacities_gbps) {
  const std::size_t n = flows.size();
  std::vector<double> rate(n, 0.0);
  std::vector<bool> frozen(n, false);
  std::vector<double> residual = capacities_gbps;

  for (std::size_t i = 0; i < n; ++i) {
    if (flows[i].demand_gbps <= 0.0) {
      frozen[i] = true;
    } else if (flows[i].links.empty()) {
      rate[i] = flows[i].demand_gbps;
      frozen[i] = true;
    }
  }

  double level = 0.0;
  for (;;) {
    std::vector<double> weight(residual.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      any = true;
      for (const auto& [l, m] : flows[i].links) weight[l] += m;
    }
    if (!any) break;

    // Largest common increment before a flow is satisfied or a link fills.
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!frozen[i]) step = std::min(step, flows[i].demand_gbps - level);
    }
    for (std::size_t l = 0; l < residual.size(); ++l) {
      if (weight[l] > 0.0) step = std::min(step, std::max(0.0, residual[l]) / weight[l]);
    }
    level += step;
    for (std::size_t l = 0; l < residual.size(); ++l) residual[l] -= step * weight[l];

    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      bool saturated = flows[i].demand_gbps - level <= kEps * std::max(1.0, flows[i].demand_gbps);
      for (const auto& [l, m] : flows[i].links) {
        if (residual[l] <= kEps * std::max(1.0, capacities_gbps[l])) saturated = true;
      }
      if (saturated) {
        rate[i] = std::min(level, flows[i].demand_gbps);
        frozen[i] = true;
      }
    }
  }
  return rate;
}

std::vector<double> offered_load(const std::vector<FluidFlow>& flows, std::size_t link_count) {
  std::vector<double> load(link_count, 0.0);
  for (const auto& f : flows) {
    for (const auto& [l, m] : f.links) load[l] += m * f.demand_gbps;
  }
  return load;
}

void count_congestion(const std::vector<double>& offered_gbps, const std::vector<double>& capacities_gbps,
                      std::vector<std::int64_t>& events) {
  for (std::size_t l = 0; l < offered_gbps.size(); ++l) {
    if (offered_gbps[l] > capacities_gbps[l] * (1.0 + 1e-12)) ++events[l];
  }
}

double advance_position(const IterationProfile& profile, double position_ms, double achieved_gbps, double dt_ms) {
  const auto demand = profile.demand_bins();
  const auto up = profile.up_bins();
  const double iter = static_cast<double>(profile.iter_time_ms());
  double pos = positive_fmod(position_ms, iter);
  double left = dt_ms;
  while (left > kEps) {
    const auto bin = static_cast<std::size_t>(std::floor(pos + kEps)) % up.size();
    const double d = demand[bin];
    const double factor = up[bin] && d > 0.0 ? std::min(1.0, achieved_gbps / d) : 1.0;
    left -= advance_bins(up, pos, factor, left);
    if (pos >= iter - kEps) pos = 0.0;
    if (factor <= 0.0) break;
  }
  return pos;
}

// ---- drift -----------------------------------------------------------------

bool DriftTracker::observe(double jitter_ms) {
  dev_ = rho_ * dev_ + jitter_ms;
  if (adjusting_ && std::abs(dev_) > threshold_) {
    dev_ = 0.0;
    return true;
  }
  return false;
}

// ---- traces ----------------------------------------------------------------

void Trace::validate() const {
  std::set<std::string> arrived;
  Millis last = 0;
  for (const auto& e : events) {
    if (e.at_ms < last) throw Error(ErrorCode::SchemaViolation, "trace event times must be non-decreasing");
    last = e.at_ms;
    if (e.kind == TraceEventKind::Arrival) {
      if (e.job.id.empty()) throw Error(ErrorCode::SchemaViolation, "arrival without job id");
      if (!arrived.insert(e.job.id).second) throw Error(ErrorCode::SchemaViolation, "job " + e.job.id + " arrives twice");
      if (e.job.workers < 1) throw Error(ErrorCode::SchemaViolation, "job " + e.job.id + " needs a worker");
      if (e.job.iterations < 1) throw Error(ErrorCode::SchemaViolation, "job " + e.job.id + " needs an iteration");
      if (!e.job.servers.empty() && static_cast<int>(e.job.servers.size()) != e.job.workers) {
        throw Error(ErrorCode::SchemaViolation, "job " + e.job.id + ": pinned servers must match worker count");
      }
    } else if (e.kind == TraceEventKind::Departure && !arrived.contains(e.job.id)) {
      throw Error(ErrorCode::SchemaViolation, "departure of unknown job " + e.job.id);
    }
  }
}

Trace trace_from_json(const nlohmann::json& doc) {
  Trace trace;
  try {
    if (doc.contains("profiles")) {
      for (const auto& [kind, p] : doc.at("profiles").items()) {
        auto profile = profile_from_json(p);
        trace.profiles.emplace(kind, IterationProfile(kind, profile.arcs()));
      }
    }
    for (const auto& e : doc.at("events")) {
      TraceEvent ev;
      ev.at_ms = e.at("at_ms").get<Millis>();
      ev.kind = event_kind_from_string(e.value("kind", std::string("arrival")));
      if (e.contains("job")) {
        const auto& j = e.at("job");
        ev.job.id = j.at("id").get<std::string>();
        ev.job.kind = j.value("kind", std::string{});
        ev.job.workers = j.value("workers", 1);
        ev.job.iterations = j.value("iterations", std::int64_t{500});
        ev.job.servers = j.value("servers", std::vector<std::string>{});
        ev.job.tag = j.value("tag", std::string{});
      }
      trace.events.push_back(std::move(ev));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad trace: ") + e.what());
  }
  trace.validate();
  return trace;
}

nlohmann::ordered_json to_json(const Trace& trace) {
  nlohmann::ordered_json doc;
  if (!trace.profiles.empty()) {
    doc["profiles"] = nlohmann::ordered_json::object();
    for (const auto& [kind, p] : trace.profiles) doc["profiles"][kind] = to_json(p);
  }
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : trace.events) {
    nlohmann::ordered_json item{{"at_ms", e.at_ms}, {"kind", to_string(e.kind)}};
    if (e.kind == TraceEventKind::Arrival) {
      nlohmann::ordered_json job{{"id", e.job.id}, {"kind", e.job.kind}, {"workers", e.job.workers},
                                 {"iterations", e.job.iterations}};
      if (!e.job.tag.empty()) job["tag"] = e.job.tag;
      if (!e.job.servers.empty()) job["servers"] = e.job.servers;
      item["job"] = std::move(job);
    } else if (e.kind == TraceEventKind::Departure) {
      item["job"] = {{"id", e.job.id}};
    }
    events.push_back(std::move(item));
  }
  doc["events"] = std::move(events);
  return doc;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  try {
    return trace_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
}

std::map<std::string, IterationProfile> builtin_profiles() {
  struct Entry {
    const char* kind;
    Millis iter;
    Millis up;
    double gbps;
  };
  static const Entry entries[] = {
      {"vgg16", 300, 120, 40.0},  {"vgg19", 320, 140, 40.0},    {"wrn101", 300, 150, 40.0},
      {"resnet50", 180, 60, 30.0}, {"bert", 250, 110, 35.0},     {"roberta", 200, 120, 45.0},
      {"gpt2", 400, 180, 45.0},    {"dlrm", 150, 50, 20.0},      {"camembert", 220, 100, 35.0},
      {"xlm", 280, 130, 40.0},
  };
  std::map<std::string, IterationProfile> out;
  for (const auto& e : entries) out.emplace(e.kind, square_wave(e.kind, e.iter, e.up, e.gbps));
  return out;
}

Trace generate_trace(const Topology& topology, const std::map<std::string, IterationProfile>& profiles,
                     const TraceGenOptions& options) {
  if (profiles.empty()) throw Error(ErrorCode::InvalidInput, "trace generation needs at least one profile");
  if (!(options.load > 0.0)) throw Error(ErrorCode::InvalidInput, "load must be positive");
  if (options.min_iterations < 1 || options.max_iterations < options.min_iterations) {
    throw Error(ErrorCode::InvalidInput, "bad iteration range");
  }
  const int gpus = topology.total_gpus();
  std::vector<int> choices;
  for (int w : options.worker_choices) {
    if (w >= 1 && w <= gpus) choices.push_back(w);
  }
  if (choices.empty()) throw Error(ErrorCode::InsufficientCapacity, "no worker count fits the cluster");

  std::vector<std::string> kinds;
  double mean_iter = 0.0;
  for (const auto& [k, p] : profiles) {
    kinds.push_back(k);
    mean_iter += static_cast<double>(p.iter_time_ms());
  }
  mean_iter /= static_cast<double>(kinds.size());
  const double mean_workers = std::accumulate(choices.begin(), choices.end(), 0.0) / choices.size();
  const double mean_iters = 0.5 * static_cast<double>(options.min_iterations + options.max_iterations);
  const double rate_per_ms = options.load * gpus / (mean_workers * mean_iters * mean_iter);

  std::mt19937_64 rng(options.seed);
  std::exponential_distribution<double> gap(rate_per_ms);
  std::uniform_int_distribution<std::size_t> pick_kind(0, kinds.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_workers(0, choices.size() - 1);
  std::uniform_int_distribution<std::int64_t> pick_iters(options.min_iterations, options.max_iterations);

  Trace trace;
  std::vector<std::pair<double, int>> busy;  // projected end, workers
  double t = 0.0;
  int accepted = 0;
  for (int attempt = 0; accepted < options.jobs && attempt < 20 * options.jobs; ++attempt) {
    if (attempt > 0) t += gap(rng);
    const auto& kind = kinds[pick_kind(rng)];
    const int workers = choices[pick_workers(rng)];
    const auto iters = pick_iters(rng);
    std::erase_if(busy, [&](const auto& b) { return b.first <= t; });
    int in_use = 0;
    for (const auto& b : busy) in_use += b.second;
    if (in_use + workers > gpus) continue;
    const auto at = static_cast<Millis>(std::floor(t));
    busy.emplace_back(t + static_cast<double>(iters * profiles.at(kind).iter_time_ms()), workers);
    char id[32];
    std::snprintf(id, sizeof id, "job%03d", accepted);
    trace.events.push_back({at, TraceEventKind::Arrival, {id, kind, workers, iters, {}, {}}});
    ++accepted;
  }
  for (const auto& [k, p] : profiles) trace.profiles.emplace(k, p);
  return trace;
}

// ---- simulation ------------------------------------------------------------

std::string_view to_string(Scheduler scheduler) {
  return scheduler == Scheduler::Cassini ? "cassini" : "baseline";
}

Scheduler scheduler_from_string(const std::string& name) {
  if (name == "baseline") return Scheduler::Baseline;
  if (name == "cassini" || name == "cassini-augmented") return Scheduler::Cassini;
  throw Error(ErrorCode::InvalidInput, "unknown scheduler " + name);
}

const JobReport& SimReport::job(const std::string& id) const {
  for (const auto& j : jobs) {
    if (j.id == id) return j;
  }
  throw Error(ErrorCode::InvalidInput, "no job " + id + " in report");
}

const LinkReport* SimReport::link(const std::string& id) const {
  for (const auto& l : links) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

namespace {

enum class JobState { Queued, Pending, Running, Done };

struct SimJob {
  JobSpec spec;
  IterationProfile profile;
  std::vector<double> demand;
  std::vector<bool> up;
  Millis iter = 0;
  JobState state = JobState::Queued;
  std::vector<std::pair<std::size_t, int>> links;
  double start_at = 0.0;
  double pos = 0.0;
  double idle = 0.0;
  double skipped = 0.0;
  double iter_start = 0.0;
  std::optional<double> anchor;
  bool realign = false;
  std::int64_t done = 0;
  DriftTracker drift{0.0};
  std::mt19937_64 rng;
  std::size_t report = 0;
};

class Simulation {
 public:
  Simulation(const Trace& trace, const Topology& topology, const SimOptions& options)
      : trace_(trace), topo_(topology), opt_(options) {
    library_ = builtin_profiles();
    for (const auto& [k, p] : trace.profiles) library_.insert_or_assign(k, p);
    for (const auto& [id, link] : topo_.links()) {
      link_index_[id] = link_ids_.size();
      link_ids_.push_back(id);
      capacity_.push_back(link.capacity_gbps);
    }
    events_.assign(link_ids_.size(), 0);
    link_iters_.assign(link_ids_.size(), 0);
    link_used_.assign(link_ids_.size(), false);
    report_.scheduler = std::string(to_string(opt_.scheduler));
    report_.seed = opt_.seed;
    report_.jitter_fraction = opt_.jitter_fraction;
  }

  SimReport run() {
    const auto& events = trace_.events;
    std::size_t next = 0;
    Millis now = 0;
    bool schedule = false;
    while (now <= opt_.max_time_ms) {
      while (next < events.size() && events[next].at_ms <= now) {
        handle(events[next]);
        ++next;
        schedule = true;
      }
      if (now > 0 && opt_.epoch_ms > 0 && now % opt_.epoch_ms == 0) schedule = true;
      if ((schedule || reschedule_) && !queue_.empty()) place(now);
      schedule = false;
      reschedule_ = false;

      bool active = false;
      for (auto& j : jobs_) {
        if (j.state == JobState::Pending && j.start_at < static_cast<double>(now + 1) - kEps) {
          j.state = JobState::Running;
          j.idle = std::max(0.0, j.start_at - static_cast<double>(now));
          j.iter_start = j.start_at;
          report_.jobs[j.report].start_ms = round6(j.start_at);
        }
        active = active || j.state == JobState::Pending || j.state == JobState::Running;
      }
      if (!active) {
        if (next >= events.size()) break;
        now = events[next].at_ms;
        continue;
      }
      step(now);
      ++now;
      end_ = static_cast<double>(now);
    }
    return finish();
  }

 private:
  void handle(const TraceEvent& e) {
    if (e.kind == TraceEventKind::Arrival) {
      SimJob job;
      job.spec = e.job;
      auto it = library_.find(e.job.kind);
      if (it == library_.end()) throw Error(ErrorCode::ProfileMissing, "no profile for job kind " + e.job.kind);
      job.profile = it->second;
      job.demand = job.profile.demand_bins();
      job.up = job.profile.up_bins();
      job.iter = job.profile.iter_time_ms();
      job.drift = DriftTracker(opt_.drift_threshold_fraction * static_cast<double>(job.iter), opt_.drift_persistence,
                               false);
      std::seed_seq seq{opt_.seed, static_cast<std::uint64_t>(jobs_.size()), std::uint64_t{0x5eed}};
      job.rng.seed(seq);
      job.report = report_.jobs.size();
      JobReport r;
      r.id = e.job.id;
      r.kind = e.job.kind;
      r.workers = e.job.workers;
      r.arrival_ms = e.at_ms;
      r.tag = e.job.tag;
      r.dedicated_iter_ms = job.iter;
      r.compute_ms = job.profile.compute_time_ms();
      report_.jobs.push_back(std::move(r));
      index_[e.job.id] = jobs_.size();
      queue_.push_back(jobs_.size());
      jobs_.push_back(std::move(job));
    } else if (e.kind == TraceEventKind::Departure) {
      auto& job = jobs_.at(index_.at(e.job.id));
      if (job.state == JobState::Queued) {
        std::erase(queue_, index_.at(e.job.id));
        job.state = JobState::Done;
      } else if (job.state != JobState::Done) {
        retire(job, static_cast<double>(e.at_ms));
      }
    }
  }

  void retire(SimJob& job, double at) {
    job.state = JobState::Done;
    report_.jobs[job.report].finish_ms = round6(at);
    for (const auto& s : report_.jobs[job.report].servers) --occupied_[s];
    reschedule_ = true;
  }

  std::map<std::string, int> free_slots() const {
    std::map<std::string, int> out;
    for (const auto& s : topo_.servers()) {
      auto it = occupied_.find(s.id);
      out[s.id] = s.gpu_slots - (it == occupied_.end() ? 0 : it->second);
    }
    return out;
  }

  void place(Millis now) {
    // Admit queued jobs in arrival order while they fit; smaller jobs may
    // pass a blocked larger one.
    auto slots = free_slots();
    int free_total = 0;
    for (const auto& [s, n] : slots) free_total += n;
    std::vector<std::size_t> admitted;
    std::vector<JobRequest> requests;
    Placement pinned;
    for (auto idx : queue_) {
      const auto& spec = jobs_[idx].spec;
      if (!spec.servers.empty()) {
        auto trial = slots;
        bool fits = true;
        for (const auto& s : spec.servers) {
          if (!topo_.has_server(s)) throw Error(ErrorCode::InvalidInput, "job " + spec.id + " pinned to unknown server " + s);
          if (--trial[s] < 0) fits = false;
        }
        if (!fits) continue;
        slots = std::move(trial);
        free_total -= spec.workers;
        pinned.assignment[spec.id] = spec.servers;
        admitted.push_back(idx);
      } else if (spec.workers <= free_total) {
        free_total -= spec.workers;
        requests.push_back({spec.id, spec.kind, spec.workers});
        admitted.push_back(idx);
      }
    }
    if (admitted.empty()) return;

    std::map<std::string, int> taken = occupied_;
    for (const auto& [job, servers] : pinned.assignment) {
      for (const auto& s : servers) ++taken[s];
    }
    std::vector<Placement> candidates;
    const std::size_t n_max = opt_.scheduler == Scheduler::Cassini ? opt_.n_max : 1;
    if (requests.empty()) {
      candidates.push_back(pinned);
    } else {
      candidates = generate_candidates(requests, topo_, n_max, opt_.seed, taken);
      for (auto& c : candidates) c.assignment.insert(pinned.assignment.begin(), pinned.assignment.end());
    }

    Placement chosen = candidates.front();
    std::optional<RankedResult> ranked;
    if (opt_.scheduler == Scheduler::Cassini) {
      std::map<std::string, IterationProfile> profiles;
      std::vector<Placement> full = candidates;
      for (const auto& j : jobs_) {
        if (j.state == JobState::Pending || j.state == JobState::Running) {
          for (auto& c : full) c.assignment[j.spec.id] = report_.jobs[j.report].servers;
        }
        if (j.state != JobState::Done) profiles.emplace(j.spec.id, j.profile);
      }
      try {
        ranked = rank(full, profiles, topo_, opt_.rank);
        chosen = candidates.at(static_cast<std::size_t>(ranked->top_placement.candidate_id));
        report_.aggregate_scores.push_back(ranked->aggregate_score);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllCandidatesCyclic) throw;
      }
    }

    for (auto idx : admitted) {
      auto& job = jobs_[idx];
      const auto& servers = chosen.assignment.at(job.spec.id);
      Placement single;
      single.assignment[job.spec.id] = servers;
      std::map<std::string, int> mult;
      const auto routes = route(single, topo_);
      for (const auto& l : routes.at(job.spec.id)) ++mult[l];
      job.links.clear();
      for (const auto& [l, m] : mult) {
        job.links.emplace_back(link_index_.at(l), m);
        link_used_[link_index_.at(l)] = true;
      }
      for (const auto& s : servers) ++occupied_[s];
      report_.jobs[job.report].servers = servers;
      job.state = JobState::Pending;
      job.start_at = static_cast<double>(now);
      std::erase(queue_, idx);
    }

    if (!ranked) return;
    for (const auto& [id, shift] : ranked->time_shifts.shifts) {
      auto& job = jobs_[index_.at(id)];
      // Anchors count from the reference job's next iteration boundary when
      // it is already running, so the reference itself keeps its phase.
      const auto& ref_id = ranked->time_shifts.reference_of.at(id);
      const auto& ref = jobs_[index_.at(ref_id)];
      double base = static_cast<double>(now);
      if (ref.state == JobState::Running) base += ref.idle + static_cast<double>(ref.iter) - ref.pos;
      job.anchor = base + static_cast<double>(shift);
      job.drift = DriftTracker(opt_.drift_threshold_fraction * static_cast<double>(job.iter), opt_.drift_persistence,
                               true);
      if (job.state == JobState::Pending) {
        job.start_at = *job.anchor;
      } else {
        job.realign = id != ref_id;
      }
      report_.jobs[job.report].time_shift_ms = shift;
      report_.jobs[job.report].score = ranked->aggregate_score;
      report_.shifts.push_back({now, id, shift});
    }
  }

  void step(Millis now) {
    std::vector<std::size_t> flow_jobs;
    std::vector<FluidFlow> flows;
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      const auto& j = jobs_[i];
      if (j.state != JobState::Running || j.idle > kEps || j.links.empty()) continue;
      const auto bin = static_cast<std::size_t>(std::floor(j.pos + kEps));
      const double d = bin < j.demand.size() ? j.demand[bin] : 0.0;
      if (d <= 0.0) continue;
      flow_jobs.push_back(i);
      flows.push_back({d, j.links});
    }

    std::vector<std::pair<std::size_t, double>> key;
    for (std::size_t k = 0; k < flows.size(); ++k) key.emplace_back(flow_jobs[k], flows[k].demand_gbps);
    if (key != cached_key_) {
      cached_rates_ = max_min_allocation(flows, capacity_);
      cached_key_ = std::move(key);
      cached_offered_ = offered_load(flows, capacity_.size());
    }
    count_congestion(cached_offered_, capacity_, events_);

    std::vector<double> factor(jobs_.size(), 1.0);
    for (std::size_t k = 0; k < flows.size(); ++k) {
      factor[flow_jobs[k]] = std::min(1.0, cached_rates_[k] / flows[k].demand_gbps);
    }
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      if (jobs_[i].state == JobState::Running) advance(jobs_[i], static_cast<double>(now), factor[i]);
    }
  }

  void advance(SimJob& j, double t, double up_factor) {
    double left = 1.0;
    while (left > kEps && j.state == JobState::Running) {
      if (j.idle > kEps) {
        const double d = std::min(j.idle, left);
        j.idle -= d;
        left -= d;
        t += d;
        continue;
      }
      const double used = advance_bins(j.up, j.pos, up_factor, left);
      left -= used;
      t += used;
      if (j.pos >= static_cast<double>(j.iter) - kEps) complete_iteration(j, t);
    }
  }

  void complete_iteration(SimJob& j, double t) {
    auto& r = report_.jobs[j.report];
    r.iteration_ms.push_back(round6(t - j.iter_start + j.skipped));
    j.skipped = 0.0;
    ++j.done;
    for (const auto& [l, m] : j.links) ++link_iters_[l];
    if (j.done >= j.spec.iterations) {
      retire(j, t);
      return;
    }
    j.pos = 0.0;
    const double iter = static_cast<double>(j.iter);
    if (j.realign && j.anchor) {
      j.idle += positive_fmod(*j.anchor - t, iter);
      j.realign = false;
    }
    if (opt_.jitter_fraction > 0.0) {
      std::normal_distribution<double> noise(0.0, opt_.jitter_fraction * iter);
      const double before = j.drift.deviation();
      const double jitter = noise(j.rng);
      const double raw = opt_.drift_persistence * before + jitter;
      if (j.drift.observe(jitter)) report_.adjustments.push_back({round6(t), j.spec.id, round6(raw)});
      const double delta = j.drift.deviation() - before;
      if (delta > 0.0) {
        j.idle += delta;
      } else {
        const double skip = std::min(-delta, iter - 1.0);
        j.pos = skip;
        j.skipped = skip;
      }
    }
    j.iter_start = t + j.idle;
  }

  SimReport finish() {
    report_.end_ms = end_;
    for (std::size_t l = 0; l < link_ids_.size(); ++l) {
      if (!link_used_[l]) continue;
      report_.links.push_back({link_ids_[l], capacity_[l], events_[l], link_iters_[l]});
    }
    return std::move(report_);
  }

  const Trace& trace_;
  const Topology& topo_;
  SimOptions opt_;
  std::map<std::string, IterationProfile> library_;
  std::vector<std::string> link_ids_;
  std::map<std::string, std::size_t> link_index_;
  std::vector<double> capacity_;
  std::vector<std::int64_t> events_;
  std::vector<std::int64_t> link_iters_;
  std::vector<bool> link_used_;
  std::vector<SimJob> jobs_;
  std::map<std::string, std::size_t> index_;
  std::deque<std::size_t> queue_;
  std::map<std::string, int> occupied_;
  bool reschedule_ = false;
  double end_ = 0.0;
  std::vector<std::pair<std::size_t, double>> cached_key_{{SIZE_MAX, 0.0}};
  std::vector<double> cached_rates_;
  std::vector<double> cached_offered_;
  SimReport report_;
};

}  // namespace

SimReport run(const Trace& trace, const Topology& topology, const SimOptions& options) {
  trace.validate();
  if (options.jitter_fraction < 0.0) throw Error(ErrorCode::InvalidInput, "jitter must be non-negative");
  Simulation sim(trace, topology, options);
  return sim.run();
}

// ---- reports ---------------------------------------------------------------

nlohmann::ordered_json to_json(const SimReport& report) {
  nlohmann::ordered_json doc;
  doc["scheduler"] = report.scheduler;
  doc["seed"] = report.seed;
  doc["jitter_fraction"] = report.jitter_fraction;
  doc["end_ms"] = report.end_ms;
  auto jobs = nlohmann::ordered_json::array();
  for (const auto& j : report.jobs) {
    nlohmann::ordered_json item{{"id", j.id},
                                {"kind", j.kind},
                                {"workers", j.workers},
                                {"servers", j.servers},
                                {"arrival_ms", j.arrival_ms},
                                {"start_ms", j.start_ms},
                                {"finish_ms", j.finish_ms},
                                {"tag", j.tag},
                                {"dedicated_iter_ms", j.dedicated_iter_ms},
                                {"compute_ms", j.compute_ms}};
    item["time_shift_ms"] = j.time_shift_ms ? nlohmann::ordered_json(*j.time_shift_ms) : nlohmann::ordered_json();
    item["score"] = j.score ? nlohmann::ordered_json(*j.score) : nlohmann::ordered_json();
    item["iteration_ms"] = j.iteration_ms;
    jobs.push_back(std::move(item));
  }
  doc["jobs"] = std::move(jobs);
  auto links = nlohmann::ordered_json::array();
  for (const auto& l : report.links) {
    links.push_back({{"id", l.id},
                     {"capacity_gbps", l.capacity_gbps},
                     {"congestion_events", l.congestion_events},
                     {"iterations", l.iterations}});
  }
  doc["links"] = std::move(links);
  auto shifts = nlohmann::ordered_json::array();
  for (const auto& s : report.shifts) shifts.push_back({{"at_ms", s.at_ms}, {"job", s.job}, {"shift_ms", s.shift_ms}});
  doc["time_shifts"] = std::move(shifts);
  auto adjustments = nlohmann::ordered_json::array();
  for (const auto& a : report.adjustments) {
    adjustments.push_back({{"at_ms", a.at_ms}, {"job", a.job}, {"deviation_ms", a.deviation_ms}});
  }
  doc["adjustments"] = std::move(adjustments);
  doc["aggregate_scores"] = report.aggregate_scores;
  return doc;
}

SimReport report_from_json(const nlohmann::json& doc) {
  try {
    SimReport r;
    r.scheduler = doc.at("scheduler").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.jitter_fraction = doc.value("jitter_fraction", 0.0);
    r.end_ms = doc.value("end_ms", 0.0);
    for (const auto& j : doc.at("jobs")) {
      JobReport jr;
      jr.id = j.at("id").get<std::string>();
      jr.kind = j.value("kind", std::string{});
      jr.workers = j.value("workers", 0);
      jr.servers = j.value("servers", std::vector<std::string>{});
      jr.arrival_ms = j.value("arrival_ms", Millis{0});
      jr.start_ms = j.value("start_ms", -1.0);
      jr.finish_ms = j.value("finish_ms", -1.0);
      jr.tag = j.value("tag", std::string{});
      jr.dedicated_iter_ms = j.value("dedicated_iter_ms", Millis{0});
      jr.compute_ms = j.value("compute_ms", Millis{0});
      if (j.contains("time_shift_ms") && !j.at("time_shift_ms").is_null()) {
        jr.time_shift_ms = j.at("time_shift_ms").get<Millis>();
      }
      if (j.contains("score") && !j.at("score").is_null()) jr.score = j.at("score").get<double>();
      jr.iteration_ms = j.at("iteration_ms").get<std::vector<double>>();
      r.jobs.push_back(std::move(jr));
    }
    for (const auto& l : doc.value("links", nlohmann::json::array())) {
      r.links.push_back({l.at("id").get<std::string>(), l.value("capacity_gbps", 0.0),
                         l.at("congestion_events").get<std::int64_t>(), l.value("iterations", std::int64_t{0})});
    }
    for (const auto& s : doc.value("time_shifts", nlohmann::json::array())) {
      r.shifts.push_back({s.at("at_ms").get<Millis>(), s.at("job").get<std::string>(), s.at("shift_ms").get<Millis>()});
    }
    for (const auto& a : doc.value("adjustments", nlohmann::json::array())) {
      r.adjustments.push_back(
          {a.at("at_ms").get<double>(), a.at("job").get<std::string>(), a.at("deviation_ms").get<double>()});
    }
    r.aggregate_scores = doc.value("aggregate_scores", std::vector<double>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad simulation report: ") + e.what());
  }
}

std::string iterations_csv(const SimReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "job,iteration,iteration_ms\n";
  for (const auto& j : report.jobs) {
    for (std::size_t k = 0; k < j.iteration_ms.size(); ++k) out << j.id << ',' << k << ',' << j.iteration_ms[k] << '\n';
  }
  return out.str();
}

std::string congestion_csv(const SimReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << "link,capacity_gbps,congestion_events,iterations,events_per_iteration\n";
  for (const auto& l : report.links) {
    const double per = l.iterations > 0 ? static_cast<double>(l.congestion_events) / l.iterations : 0.0;
    out << l.id << ',' << l.capacity_gbps << ',' << l.congestion_events << ',' << l.iterations << ',' << per << '\n';
  }
  return out.str();
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "percentile of an empty sample");
  if (q < 0.0 || q > 1.0) throw Error(ErrorCode::InvalidInput, "percentile rank must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace ringshift
