#include "ringshift/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ringshift/error.hpp"

namespace ringshift {

void Config::validate() const {
  if (!(precision_deg > 0.0) || precision_deg > 360.0) {
    throw Error(ErrorCode::InvalidInput, "precision_deg must be in (0, 360]");
  }
  const double steps = 360.0 / precision_deg;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    throw Error(ErrorCode::InvalidInput, "precision_deg must divide 360");
  }
  if (time_quantum_ms < 1) throw Error(ErrorCode::InvalidInput, "time_quantum_ms must be >= 1");
  if (lcm_cap_ms < time_quantum_ms) throw Error(ErrorCode::InvalidInput, "lcm_cap_ms must be >= time_quantum_ms");
  if (!(up_threshold_gbps >= 0.0)) throw Error(ErrorCode::InvalidInput, "up_threshold_gbps must be >= 0");
}

OptimizerOptions Config::optimizer() const {
  OptimizerOptions o;
  o.precision_deg = precision_deg;
  o.seed = seed;
  o.perimeter.base_quantum_ms = time_quantum_ms;
  o.perimeter.cap_ms = lcm_cap_ms;
  return o;
}

RankOptions Config::rank() const {
  RankOptions r;
  r.optimizer = optimizer();
  r.aggregate = aggregate;
  return r;
}

ProfileOptions Config::profile() const {
  ProfileOptions p;
  p.up_threshold_gbps = up_threshold_gbps;
  return p;
}

std::string_view to_string(Aggregate aggregate) { return aggregate == Aggregate::Min ? "min" : "mean"; }

Aggregate aggregate_from_string(const std::string& name) {
  if (name == "mean") return Aggregate::Mean;
  if (name == "min") return Aggregate::Min;
  throw Error(ErrorCode::InvalidInput, "aggregate must be mean or min, got " + name);
}

Config config_from_json(const nlohmann::json& doc) {
  static const std::set<std::string> known{"precision_deg", "time_quantum_ms", "lcm_cap_ms",
                                           "up_threshold_gbps", "aggregate", "seed"};
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::SchemaViolation, "unknown config key " + key);
  }
  Config c;
  try {
    c.precision_deg = doc.value("precision_deg", c.precision_deg);
    c.time_quantum_ms = doc.value("time_quantum_ms", c.time_quantum_ms);
    c.lcm_cap_ms = doc.value("lcm_cap_ms", c.lcm_cap_ms);
    c.up_threshold_gbps = doc.value("up_threshold_gbps", c.up_threshold_gbps);
    if (doc.contains("aggregate")) c.aggregate = aggregate_from_string(doc.at("aggregate").get<std::string>());
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad config: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json to_json(const Config& c) {
  return {{"precision_deg", c.precision_deg}, {"time_quantum_ms", c.time_quantum_ms},
          {"lcm_cap_ms", c.lcm_cap_ms},       {"up_threshold_gbps", c.up_threshold_gbps},
          {"aggregate", to_string(c.aggregate)}, {"seed", c.seed}};
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open config " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, "config " + path + " is not JSON: " + e.what());
  }
  return config_from_json(doc);
}

Config resolve_config(const std::optional<std::string>& path, const ConfigOverrides& o) {
  Config c = path ? load_config(*path) : Config{};
  if (o.precision_deg) c.precision_deg = *o.precision_deg;
  if (o.time_quantum_ms) c.time_quantum_ms = *o.time_quantum_ms;
  if (o.lcm_cap_ms) c.lcm_cap_ms = *o.lcm_cap_ms;
  if (o.up_threshold_gbps) c.up_threshold_gbps = *o.up_threshold_gbps;
  if (o.aggregate) c.aggregate = *o.aggregate;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

}  // namespace ringshift
