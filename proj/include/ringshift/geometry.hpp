#pragma once

// Communication circles. A job's periodic demand is laid on a circle whose
// perimeter is its iteration time; jobs sharing a link are tiled onto a
// unified circle whose perimeter is the LCM of their iteration times.
// Everything is evaluated on a 1 ms time grid; angles are only a
// presentation of positions on that grid (alpha = 2*pi*t/p).

#include <numbers>
#include <span>
#include <vector>

#include "ringshift/profiles.hpp"

namespace ringshift {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct CommCircle {
  Millis perimeter_ms = 0;
  std::vector<PhaseArc> arcs;

  explicit CommCircle(const IterationProfile& profile)
      : perimeter_ms(profile.iter_time_ms()), arcs(profile.arcs()) {}

  double arc_angle(const PhaseArc& arc) const {
    return kTwoPi * static_cast<double>(arc.duration_ms) / static_cast<double>(perimeter_ms);
  }
};

struct UnifiedCircle {
  Millis perimeter_ms = 0;
  Millis iter_time_ms = 0;
  Millis repetitions = 1;
  /// Demand per 1 ms bin over [0, perimeter).
  std::vector<double> demand;
};

struct PerimeterOptions {
  Millis cap_ms = 3'600'000;
  /// Coarser quanta tried in order when the exact LCM exceeds the cap.
  std::vector<Millis> fallback_quanta = {2, 5, 10};
  /// Base quantum; iteration times are rounded to it before the LCM.
  Millis base_quantum_ms = 1;
};

struct PerimeterResult {
  Millis perimeter_ms = 0;
  /// Quantum actually applied (base quantum unless the cap forced rounding).
  Millis quantum_ms = 1;
  /// Iteration times after rounding, in input order.
  std::vector<Millis> iter_times_ms;
  bool rounded = false;
};

Millis lcm_checked(Millis a, Millis b, Millis cap);

PerimeterResult unified_perimeter(std::span<const Millis> iter_times,
                                  const PerimeterOptions& options = {});

/// Stretches or shrinks a profile's demand onto `iter_time_ms` bins.
std::vector<double> resample_demand(const IterationProfile& profile, Millis iter_time_ms);

UnifiedCircle tile(const IterationProfile& profile, Millis perimeter_ms);
/// Tiles pre-binned demand whose length divides the perimeter.
UnifiedCircle tile(std::span<const double> iteration_demand, Millis perimeter_ms);

/// Converts between rotation angles and positions on a perimeter.
Millis angle_to_shift_ms(double alpha_rad, Millis perimeter_ms);
double shift_to_angle(Millis shift_ms, Millis perimeter_ms);

/// Demand of `circle` rotated by `alpha_rad`, evaluated at position t.
double rotated_demand(const UnifiedCircle& circle, double alpha_rad, Millis t);

/// Pointwise sum of circles delayed by the given shifts (ms).
std::vector<double> overlay(std::span<const UnifiedCircle> circles, std::span<const Millis> shifts_ms);
/// Same, with rotations given as angles.
std::vector<double> overlay_angles(std::span<const UnifiedCircle> circles,
                                   std::span<const double> rotations_rad);

/// Adds `circle` delayed by `shift_ms` into `total`.
void accumulate_shifted(std::span<double> total, std::span<const double> circle, Millis shift_ms);

/// Discrete angles of the evaluation grid, one per time bin.
struct AngleGrid {
  Millis perimeter_ms = 0;

  std::size_t bin_count() const { return static_cast<std::size_t>(perimeter_ms); }
  double angle(std::size_t bin) const {
    return kTwoPi * static_cast<double>(bin) / static_cast<double>(perimeter_ms);
  }
};

/// One rotation candidate: a grid angle and the shift it lands on.
struct RotationStep {
  double angle_rad = 0.0;
  Millis shift_ms = 0;
};

/// Rotations k*precision within [0, 2*pi/r), deduplicated by landing shift.
std::vector<RotationStep> rotation_steps(double precision_deg, Millis perimeter_ms, Millis iter_time_ms);

}  // namespace ringshift
