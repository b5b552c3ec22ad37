#pragma once

// Iteration profiles: one job's bandwidth demand over a single steady-state
// training iteration, segmented into Up (communication) and Down arcs.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ringshift {

using Millis = std::int64_t;

struct BandwidthSample {
  double t_ms = 0.0;
  double bw_gbps = 0.0;
};

enum class PhaseKind { Up, Down };

struct PhaseArc {
  Millis start_ms = 0;
  Millis duration_ms = 0;
  double demand_gbps = 0.0;
  PhaseKind kind = PhaseKind::Down;

  Millis end_ms() const { return start_ms + duration_ms; }
  friend bool operator==(const PhaseArc&, const PhaseArc&) = default;
};

class IterationProfile {
 public:
  IterationProfile() = default;
  /// Validates that `arcs` tile [0, iter_time) exactly.
  IterationProfile(std::string job_kind, std::vector<PhaseArc> arcs);

  const std::string& job_kind() const { return job_kind_; }
  Millis iter_time_ms() const { return iter_time_ms_; }
  const std::vector<PhaseArc>& arcs() const { return arcs_; }
  /// Total Down duration.
  Millis compute_time_ms() const;
  Millis comm_time_ms() const { return iter_time_ms_ - compute_time_ms(); }

  /// Demand at each 1 ms bin of the iteration (step interpolation).
  std::vector<double> demand_bins() const;
  /// Up/Down membership at each 1 ms bin.
  std::vector<bool> up_bins() const;

  /// Builds a profile from per-bin demand, merging equal neighbours.
  static IterationProfile from_bins(std::string job_kind,
                                    std::span<const double> bins,
                                    double up_threshold_gbps);

  friend bool operator==(const IterationProfile&, const IterationProfile&) = default;

 private:
  std::string job_kind_;
  Millis iter_time_ms_ = 0;
  std::vector<PhaseArc> arcs_;
};

struct ProfileOptions {
  std::string job_kind = "job";
  double up_threshold_gbps = 1.0;
  /// Minimum normalized autocorrelation at the detected period.
  double period_confidence = 0.8;
  /// Circular median window applied before thresholding; <=1 disables.
  int smoothing_window = 5;
};

/// Step-interpolates raw samples onto a 1 ms grid starting at the first sample.
std::vector<double> resample_1ms(std::span<const BandwidthSample> raw);

/// Period of a 1 ms series by normalized autocorrelation, or nullopt when no
/// peak reaches `confidence`.
std::optional<Millis> detect_period(std::span<const double> series, double confidence);

/// Averages the series over complete and partial repetitions of `period`.
std::vector<double> fold(std::span<const double> series, Millis period);

/// Maximal runs above/below the threshold of one folded iteration.
std::vector<PhaseArc> segment_phases(std::span<const double> folded,
                                     double up_threshold_gbps,
                                     int smoothing_window = 5);

IterationProfile parse_profile(std::span<const BandwidthSample> raw,
                               std::optional<Millis> iter_time_hint,
                               const ProfileOptions& options = {});

/// Reads `t_ms,bw_gbps` CSV (optional header) or a JSON array of samples.
std::vector<BandwidthSample> read_samples(const std::string& path);
std::vector<BandwidthSample> parse_samples_csv(const std::string& text);
std::vector<BandwidthSample> parse_samples_json(const nlohmann::json& doc);

nlohmann::ordered_json to_json(const IterationProfile& profile);
IterationProfile profile_from_json(const nlohmann::json& doc);
IterationProfile load_profile(const std::string& path);

std::string_view to_string(PhaseKind kind);

/// One Up arc of `up_ms` at `up_gbps` starting at `up_start_ms`, Down
/// (at `down_gbps`) elsewhere.
IterationProfile square_wave(std::string job_kind, Millis iter_time_ms, Millis up_ms, double up_gbps,
                             Millis up_start_ms = 0, double down_gbps = 0.0);

}  // namespace ringshift
