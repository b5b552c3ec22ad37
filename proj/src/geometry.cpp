#include "ringshift/geometry.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "ringshift/error.hpp"

namespace ringshift {

namespace {

Millis euclid_mod(Millis a, Millis m) {
  const Millis r = a % m;
  return r < 0 ? r + m : r;
}

Millis round_to_quantum(Millis value, Millis quantum) {
  const Millis rounded = (value + quantum / 2) / quantum * quantum;
  return std::max(rounded, quantum);
}

}  // namespace

Millis lcm_checked(Millis a, Millis b, Millis cap) {
  const Millis g = std::gcd(a, b);
  const Millis step = a / g;
  if (step > cap / b) return cap + 1;
  return step * b;
}

PerimeterResult unified_perimeter(std::span<const Millis> iter_times, const PerimeterOptions& options) {
  if (iter_times.empty()) throw Error(ErrorCode::InvalidInput, "need at least one iteration time");
  for (const auto t : iter_times) {
    if (t <= 0) throw Error(ErrorCode::InvalidInput, "iteration times must be positive");
  }
  if (options.base_quantum_ms < 1) throw Error(ErrorCode::InvalidInput, "time quantum must be >= 1 ms");

  std::vector<Millis> quanta{options.base_quantum_ms};
  for (const auto q : options.fallback_quanta) {
    if (q > options.base_quantum_ms) quanta.push_back(q);
  }

  for (const auto q : quanta) {
    PerimeterResult result;
    result.quantum_ms = q;
    result.rounded = q != options.base_quantum_ms;
    Millis lcm = 1;
    for (const auto t : iter_times) {
      const Millis r = q == 1 ? t : round_to_quantum(t, q);
      result.iter_times_ms.push_back(r);
      lcm = lcm_checked(lcm, r, options.cap_ms);
      if (lcm > options.cap_ms) break;
    }
    if (lcm <= options.cap_ms) {
      result.perimeter_ms = lcm;
      return result;
    }
  }
  throw Error(ErrorCode::PerimeterOverflow,
              "LCM of iteration times exceeds " + std::to_string(options.cap_ms) + " ms even after rounding");
}

std::vector<double> resample_demand(const IterationProfile& profile, Millis iter_time_ms) {
  auto source = profile.demand_bins();
  if (iter_time_ms == profile.iter_time_ms()) return source;
  if (iter_time_ms <= 0) throw Error(ErrorCode::InvalidInput, "iteration time must be positive");
  std::vector<double> out(static_cast<std::size_t>(iter_time_ms));
  const auto src_len = static_cast<long double>(source.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto idx = static_cast<std::size_t>(static_cast<long double>(b) * src_len /
                                              static_cast<long double>(iter_time_ms));
    out[b] = source[std::min(idx, source.size() - 1)];
  }
  return out;
}

UnifiedCircle tile(std::span<const double> iteration_demand, Millis perimeter_ms) {
  const auto iter = static_cast<Millis>(iteration_demand.size());
  if (iter <= 0 || perimeter_ms <= 0) throw Error(ErrorCode::InvalidInput, "empty demand or perimeter");
  if (perimeter_ms % iter != 0) {
    throw Error(ErrorCode::NotDivisible, "perimeter " + std::to_string(perimeter_ms) +
                                             " is not a multiple of iteration time " + std::to_string(iter));
  }
  UnifiedCircle circle;
  circle.perimeter_ms = perimeter_ms;
  circle.iter_time_ms = iter;
  circle.repetitions = perimeter_ms / iter;
  circle.demand.reserve(static_cast<std::size_t>(perimeter_ms));
  for (Millis r = 0; r < circle.repetitions; ++r) {
    circle.demand.insert(circle.demand.end(), iteration_demand.begin(), iteration_demand.end());
  }
  return circle;
}

UnifiedCircle tile(const IterationProfile& profile, Millis perimeter_ms) {
  const auto bins = profile.demand_bins();
  return tile(std::span<const double>(bins), perimeter_ms);
}

Millis angle_to_shift_ms(double alpha_rad, Millis perimeter_ms) {
  const auto raw = std::llround(alpha_rad / kTwoPi * static_cast<double>(perimeter_ms));
  return euclid_mod(static_cast<Millis>(raw), perimeter_ms);
}

double shift_to_angle(Millis shift_ms, Millis perimeter_ms) {
  return kTwoPi * static_cast<double>(shift_ms) / static_cast<double>(perimeter_ms);
}

double rotated_demand(const UnifiedCircle& circle, double alpha_rad, Millis t) {
  if (t < 0 || t >= circle.perimeter_ms) throw Error(ErrorCode::InvalidInput, "position outside the circle");
  const Millis shift = angle_to_shift_ms(alpha_rad, circle.perimeter_ms);
  return circle.demand[static_cast<std::size_t>(euclid_mod(t - shift, circle.perimeter_ms))];
}

void accumulate_shifted(std::span<double> total, std::span<const double> circle, Millis shift_ms) {
  const auto p = static_cast<Millis>(total.size());
  const auto s = static_cast<std::size_t>(euclid_mod(shift_ms, p));
  // total[t] += circle[(t - s) mod p], split to avoid a modulo per bin.
  const std::size_t n = total.size();
  for (std::size_t t = 0; t < s; ++t) total[t] += circle[n - s + t];
  for (std::size_t t = s; t < n; ++t) total[t] += circle[t - s];
}

std::vector<double> overlay(std::span<const UnifiedCircle> circles, std::span<const Millis> shifts_ms) {
  if (circles.empty()) return {};
  if (circles.size() != shifts_ms.size()) {
    throw Error(ErrorCode::InvalidInput, "one shift per circle is required");
  }
  const Millis p = circles.front().perimeter_ms;
  for (const auto& c : circles) {
    if (c.perimeter_ms != p) throw Error(ErrorCode::PerimeterMismatch, "circles must share a perimeter");
  }
  std::vector<double> total(static_cast<std::size_t>(p), 0.0);
  for (std::size_t i = 0; i < circles.size(); ++i) {
    accumulate_shifted(total, circles[i].demand, shifts_ms[i]);
  }
  return total;
}

std::vector<double> overlay_angles(std::span<const UnifiedCircle> circles,
                                   std::span<const double> rotations_rad) {
  std::vector<Millis> shifts;
  shifts.reserve(rotations_rad.size());
  const Millis p = circles.empty() ? 1 : circles.front().perimeter_ms;
  for (const auto a : rotations_rad) shifts.push_back(angle_to_shift_ms(a, p));
  return overlay(circles, shifts);
}

std::vector<RotationStep> rotation_steps(double precision_deg, Millis perimeter_ms, Millis iter_time_ms) {
  if (!(precision_deg > 0.0)) throw Error(ErrorCode::InvalidInput, "precision must be positive");
  const double steps_per_turn = 360.0 / precision_deg;
  if (std::abs(steps_per_turn - std::round(steps_per_turn)) > 1e-9) {
    throw Error(ErrorCode::InvalidInput, "precision must divide 360 degrees");
  }
  std::vector<RotationStep> out;
  std::set<Millis> seen;
  const auto turns = static_cast<long long>(std::llround(steps_per_turn));
  for (long long k = 0; k < turns; ++k) {
    const long double exact =
        static_cast<long double>(k) * static_cast<long double>(perimeter_ms) / static_cast<long double>(turns);
    if (exact >= static_cast<long double>(iter_time_ms)) break;  // rotation bound 2*pi/r
    const auto shift = static_cast<Millis>(std::llround(exact));
    if (shift >= iter_time_ms || !seen.insert(shift).second) continue;
    out.push_back({kTwoPi * static_cast<double>(k) / static_cast<double>(turns), shift});
  }
  return out;
}

}  // namespace ringshift
