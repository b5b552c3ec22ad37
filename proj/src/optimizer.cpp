#include "ringshift/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

constexpr double kScoreEps = 1e-12;

void validate(const LinkJobSet& link, std::size_t max_jobs) {
  if (!(link.capacity_gbps > 0.0) || !std::isfinite(link.capacity_gbps)) {
    throw Error(ErrorCode::InvalidInput, "link capacity must be positive");
  }
  if (link.jobs.empty()) throw Error(ErrorCode::InvalidInput, "link carries no jobs");
  if (link.jobs.size() > max_jobs) {
    throw Error(ErrorCode::InvalidInput, "link " + link.link_id + " carries " +
                                             std::to_string(link.jobs.size()) + " jobs; max is " +
                                             std::to_string(max_jobs));
  }
}

// Score of base + circle delayed by shift, without materializing the sum.
double score_with(std::span<const double> base, std::span<const double> circle, Millis shift,
                  double capacity, ScoreMode mode) {
  const std::size_t n = base.size();
  const auto s = static_cast<std::size_t>(shift) % n;
  double acc = 0.0;
  auto visit = [&](double demand) {
    const double e = demand > capacity ? demand - capacity : 0.0;
    if (mode == ScoreMode::Mean) {
      acc += e;
    } else {
      acc = std::max(acc, e);
    }
  };
  for (std::size_t t = 0; t < s; ++t) visit(base[t] + circle[n - s + t]);
  for (std::size_t t = s; t < n; ++t) visit(base[t] + circle[t - s]);
  if (mode == ScoreMode::Mean) return 1.0 - acc / (static_cast<double>(n) * capacity);
  return 1.0 - acc / capacity;
}

struct SearchSpace {
  const LinkCircles& circles;
  std::vector<std::vector<RotationStep>> steps;  // per job
  double capacity;
  ScoreMode mode;

  std::size_t size() const { return steps.size(); }
  std::size_t perimeter() const { return static_cast<std::size_t>(circles.perimeter.perimeter_ms); }
  Millis shift(std::size_t job, std::size_t idx) const { return steps[job][idx].shift_ms; }

  std::vector<double> partial_sum(const std::vector<std::size_t>& choice, std::size_t skip) const {
    std::vector<double> total(perimeter(), 0.0);
    for (std::size_t j = 0; j < size(); ++j) {
      if (j == skip) continue;
      accumulate_shifted(total, circles.circles[j].demand, shift(j, choice[j]));
    }
    return total;
  }

  double evaluate(const std::vector<std::size_t>& choice) const {
    const auto last = size() - 1;
    auto base = partial_sum(choice, last);
    return score_with(base, circles.circles[last].demand, shift(last, choice[last]), capacity, mode);
  }
};

bool lex_less(const SearchSpace& space, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (space.shift(j, a[j]) != space.shift(j, b[j])) return space.shift(j, a[j]) < space.shift(j, b[j]);
  }
  return false;
}

// Depth-first enumeration in lexicographic order; only strict improvements
// replace the incumbent, so ties keep the lexicographically smallest vector.
void exhaustive(const SearchSpace& space, std::size_t depth, std::vector<double>& base,
                std::vector<std::size_t>& choice, double& best, std::vector<std::size_t>& best_choice) {
  const auto n = space.size();
  const auto& circle = space.circles.circles[depth].demand;
  if (depth == n - 1) {
    for (std::size_t i = 0; i < space.steps[depth].size(); ++i) {
      const double s = score_with(base, circle, space.shift(depth, i), space.capacity, space.mode);
      if (s > best + kScoreEps) {
        best = s;
        choice[depth] = i;
        best_choice = choice;
      }
    }
    return;
  }
  std::vector<double> next(base.size());
  for (std::size_t i = 0; i < space.steps[depth].size(); ++i) {
    std::copy(base.begin(), base.end(), next.begin());
    accumulate_shifted(next, circle, space.shift(depth, i));
    choice[depth] = i;
    exhaustive(space, depth + 1, next, choice, best, best_choice);
  }
}

std::pair<double, std::vector<std::size_t>> coordinate_descent(const SearchSpace& space,
                                                               std::vector<std::size_t> choice) {
  double current = space.evaluate(choice);
  for (int pass = 0; pass < 1000; ++pass) {
    bool improved = false;
    for (std::size_t j = 1; j < space.size(); ++j) {
      const auto base = space.partial_sum(choice, j);
      std::size_t best_idx = choice[j];
      double best = current;
      for (std::size_t i = 0; i < space.steps[j].size(); ++i) {
        const double s = score_with(base, space.circles.circles[j].demand, space.shift(j, i),
                                    space.capacity, space.mode);
        if (s > best + kScoreEps || (std::abs(s - best) <= kScoreEps && i < best_idx)) {
          best = s;
          best_idx = i;
        }
      }
      if (best > current + kScoreEps) improved = true;
      choice[j] = best_idx;
      current = best;
    }
    if (!improved) break;
  }
  return {current, choice};
}

}  // namespace

const JobRotation& RotationSolution::job(const std::string& job_id) const {
  for (const auto& j : jobs) {
    if (j.job_id == job_id) return j;
  }
  throw Error(ErrorCode::InvalidInput, "job " + job_id + " is not on link " + link_id);
}

std::map<std::string, double> RotationSolution::rotations() const {
  std::map<std::string, double> out;
  for (const auto& j : jobs) out[j.job_id] = j.rotation_rad;
  return out;
}

std::map<std::string, Millis> RotationSolution::time_shifts() const {
  std::map<std::string, Millis> out;
  for (const auto& j : jobs) out[j.job_id] = j.time_shift_ms;
  return out;
}

LinkCircles build_circles(const LinkJobSet& link, const PerimeterOptions& options) {
  std::vector<Millis> iters;
  iters.reserve(link.jobs.size());
  for (const auto& j : link.jobs) iters.push_back(j.profile.iter_time_ms());
  LinkCircles out{unified_perimeter(iters, options), {}};
  for (std::size_t i = 0; i < link.jobs.size(); ++i) {
    const auto bins = resample_demand(link.jobs[i].profile, out.perimeter.iter_times_ms[i]);
    out.circles.push_back(tile(std::span<const double>(bins), out.perimeter.perimeter_ms));
  }
  return out;
}

double excess(double demand_gbps, double capacity_gbps) {
  return demand_gbps > capacity_gbps ? demand_gbps - capacity_gbps : 0.0;
}

double score_demand(std::span<const double> total_demand, double capacity_gbps, ScoreMode mode) {
  if (total_demand.empty()) return 1.0;
  double acc = 0.0;
  for (const auto d : total_demand) {
    const double e = excess(d, capacity_gbps);
    acc = mode == ScoreMode::Mean ? acc + e : std::max(acc, e);
  }
  if (mode == ScoreMode::Mean) return 1.0 - acc / (static_cast<double>(total_demand.size()) * capacity_gbps);
  return 1.0 - acc / capacity_gbps;
}

double score(const LinkJobSet& link, std::span<const double> rotations_rad, const OptimizerOptions& options) {
  validate(link, std::max(options.max_jobs, link.jobs.size()));
  if (rotations_rad.size() != link.jobs.size()) {
    throw Error(ErrorCode::InvalidInput, "one rotation per job is required");
  }
  const auto circles = build_circles(link, options.perimeter);
  for (std::size_t i = 0; i < rotations_rad.size(); ++i) {
    const double bound = kTwoPi / static_cast<double>(circles.circles[i].repetitions);
    if (rotations_rad[i] < 0.0 || rotations_rad[i] > bound + 1e-12) {
      throw Error(ErrorCode::InvalidInput, "rotation of " + link.jobs[i].job_id + " is outside [0, 2pi/r]");
    }
  }
  const auto total = overlay_angles(circles.circles, rotations_rad);
  return score_demand(total, link.capacity_gbps, options.mode);
}

RotationSolution solve_rotations(const LinkJobSet& link, const OptimizerOptions& options) {
  validate(link, options.max_jobs);
  const auto circles = build_circles(link, options.perimeter);
  const Millis p = circles.perimeter.perimeter_ms;

  SearchSpace space{circles, {}, link.capacity_gbps, options.mode};
  space.steps.push_back({RotationStep{0.0, 0}});
  for (std::size_t j = 1; j < link.jobs.size(); ++j) {
    space.steps.push_back(rotation_steps(options.precision_deg, p, circles.perimeter.iter_times_ms[j]));
  }

  std::vector<std::size_t> best_choice(space.size(), 0);
  double best = -std::numeric_limits<double>::infinity();
  if (space.size() == 1) {
    best = space.evaluate(best_choice);
  } else if (space.size() <= options.exhaustive_max_jobs) {
    std::vector<double> base(static_cast<std::size_t>(p), 0.0);
    accumulate_shifted(base, circles.circles[0].demand, 0);
    std::vector<std::size_t> choice(space.size(), 0);
    exhaustive(space, 1, base, choice, best, best_choice);
  } else {
    std::mt19937_64 rng(options.seed);
    std::vector<std::vector<std::size_t>> starts{std::vector<std::size_t>(space.size(), 0)};
    for (int r = 0; r < options.restarts; ++r) {
      std::vector<std::size_t> start(space.size(), 0);
      for (std::size_t j = 1; j < space.size(); ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, space.steps[j].size() - 1);
        start[j] = pick(rng);
      }
      starts.push_back(std::move(start));
    }
    for (const auto& start : starts) {
      auto [s, choice] = coordinate_descent(space, start);
      if (s > best + kScoreEps || (std::abs(s - best) <= kScoreEps && lex_less(space, choice, best_choice))) {
        best = s;
        best_choice = std::move(choice);
      }
    }
    // Re-evaluate on the full grid so the reported score is exact.
    best = space.evaluate(best_choice);
  }

  RotationSolution solution;
  solution.link_id = link.link_id;
  solution.capacity_gbps = link.capacity_gbps;
  solution.perimeter_ms = p;
  solution.quantum_ms = circles.perimeter.quantum_ms;
  solution.rounded = circles.perimeter.rounded;
  solution.precision_deg = options.precision_deg;
  solution.score = best;
  for (std::size_t j = 0; j < space.size(); ++j) {
    const auto& step = space.steps[j][best_choice[j]];
    const Millis iter = circles.perimeter.iter_times_ms[j];
    solution.jobs.push_back({link.jobs[j].job_id, iter, circles.circles[j].repetitions, step.angle_rad,
                             step.shift_ms, step.shift_ms % iter});
  }
  return solution;
}

Millis rotation_to_timeshift(double delta_rad, Millis perimeter_ms, Millis iter_time_ms) {
  if (perimeter_ms <= 0 || iter_time_ms <= 0) throw Error(ErrorCode::InvalidInput, "non-positive period");
  const auto raw = static_cast<Millis>(std::llround(delta_rad / kTwoPi * static_cast<double>(perimeter_ms)));
  const Millis r = raw % iter_time_ms;
  return r < 0 ? r + iter_time_ms : r;
}

nlohmann::ordered_json to_json(const RotationSolution& solution) {
  nlohmann::ordered_json doc;
  doc["link_id"] = solution.link_id;
  doc["capacity_gbps"] = solution.capacity_gbps;
  doc["perimeter_ms"] = solution.perimeter_ms;
  doc["quantum_ms"] = solution.quantum_ms;
  doc["rounded"] = solution.rounded;
  doc["precision_deg"] = solution.precision_deg;
  doc["score"] = solution.score;
  auto jobs = nlohmann::ordered_json::array();
  for (const auto& j : solution.jobs) {
    nlohmann::ordered_json item;
    item["job_id"] = j.job_id;
    item["iter_time_ms"] = j.iter_time_ms;
    item["repetitions"] = j.repetitions;
    item["rotation_rad"] = j.rotation_rad;
    item["rotation_deg"] = j.rotation_rad * 180.0 / std::numbers::pi;
    item["time_shift_ms"] = j.time_shift_ms;
    jobs.push_back(std::move(item));
  }
  doc["jobs"] = std::move(jobs);
  return doc;
}

}  // namespace ringshift
