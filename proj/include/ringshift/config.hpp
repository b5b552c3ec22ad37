#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "ringshift/optimizer.hpp"
#include "ringshift/profiles.hpp"
#include "ringshift/ranker.hpp"

namespace ringshift {

struct Config {
  double precision_deg = 5.0;
  Millis time_quantum_ms = 1;
  Millis lcm_cap_ms = 3'600'000;
  double up_threshold_gbps = 1.0;
  Aggregate aggregate = Aggregate::Mean;
  std::uint64_t seed = 0;

  /// Throws InvalidInput unless the precision divides 360 and the quantum is >= 1.
  void validate() const;

  OptimizerOptions optimizer() const;
  RankOptions rank() const;
  ProfileOptions profile() const;
};

/// Values given on the command line; unset fields fall through to the file.
struct ConfigOverrides {
  std::optional<double> precision_deg;
  std::optional<Millis> time_quantum_ms;
  std::optional<Millis> lcm_cap_ms;
  std::optional<double> up_threshold_gbps;
  std::optional<Aggregate> aggregate;
  std::optional<std::uint64_t> seed;
};

/// Unknown keys are a SchemaViolation.
Config config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const Config& config);
Config load_config(const std::string& path);

/// Defaults, then the file (if any), then overrides; validated.
Config resolve_config(const std::optional<std::string>& path, const ConfigOverrides& overrides);

std::string_view to_string(Aggregate aggregate);
Aggregate aggregate_from_string(const std::string& name);

}  // namespace ringshift
