#include "ringshift/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ringshift/error.hpp"

namespace ringshift {

std::string_view to_string(PhaseKind kind) {
  return kind == PhaseKind::Up ? "up" : "down";
}

IterationProfile::IterationProfile(std::string job_kind, std::vector<PhaseArc> arcs)
    : job_kind_(std::move(job_kind)), arcs_(std::move(arcs)) {
  if (arcs_.empty()) {
    throw Error(ErrorCode::InvalidInput, "profile needs at least one arc");
  }
  Millis cursor = 0;
  for (const auto& arc : arcs_) {
    if (arc.start_ms != cursor) {
      throw Error(ErrorCode::InvalidInput, "profile arcs must tile the iteration without gaps");
    }
    if (arc.duration_ms <= 0) {
      throw Error(ErrorCode::InvalidInput, "profile arc duration must be positive");
    }
    if (!std::isfinite(arc.demand_gbps) || arc.demand_gbps < 0.0) {
      throw Error(ErrorCode::InvalidInput, "profile arc demand must be finite and non-negative");
    }
    cursor += arc.duration_ms;
  }
  iter_time_ms_ = cursor;
}

Millis IterationProfile::compute_time_ms() const {
  Millis total = 0;
  for (const auto& arc : arcs_) {
    if (arc.kind == PhaseKind::Down) total += arc.duration_ms;
  }
  return total;
}

std::vector<double> IterationProfile::demand_bins() const {
  std::vector<double> bins(static_cast<std::size_t>(iter_time_ms_));
  for (const auto& arc : arcs_) {
    std::fill_n(bins.begin() + arc.start_ms, arc.duration_ms, arc.demand_gbps);
  }
  return bins;
}

std::vector<bool> IterationProfile::up_bins() const {
  std::vector<bool> bins(static_cast<std::size_t>(iter_time_ms_), false);
  for (const auto& arc : arcs_) {
    if (arc.kind == PhaseKind::Up) {
      std::fill_n(bins.begin() + arc.start_ms, arc.duration_ms, true);
    }
  }
  return bins;
}

IterationProfile IterationProfile::from_bins(std::string job_kind, std::span<const double> bins,
                                             double up_threshold_gbps) {
  std::vector<PhaseArc> arcs;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto kind = bins[i] >= up_threshold_gbps ? PhaseKind::Up : PhaseKind::Down;
    if (!arcs.empty() && arcs.back().kind == kind && arcs.back().demand_gbps == bins[i]) {
      ++arcs.back().duration_ms;
      continue;
    }
    arcs.push_back({static_cast<Millis>(i), 1, bins[i], kind});
  }
  return IterationProfile(std::move(job_kind), std::move(arcs));
}

std::vector<double> resample_1ms(std::span<const BandwidthSample> raw) {
  if (raw.empty()) return {};
  const double t0 = raw.front().t_ms;
  double tail = 1.0;
  if (raw.size() >= 2) {
    std::vector<double> gaps;
    gaps.reserve(raw.size() - 1);
    for (std::size_t i = 1; i < raw.size(); ++i) gaps.push_back(raw[i].t_ms - raw[i - 1].t_ms);
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    tail = gaps[gaps.size() / 2];
  }
  const auto count = static_cast<std::size_t>(std::floor(raw.back().t_ms - t0 + tail + 1e-9));
  std::vector<double> grid(std::max<std::size_t>(count, 1));
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < grid.size(); ++b) {
    const double at = t0 + static_cast<double>(b) + 1e-9;
    while (cursor + 1 < raw.size() && raw[cursor + 1].t_ms <= at) ++cursor;
    grid[b] = raw[cursor].bw_gbps;
  }
  return grid;
}

namespace {

// Pearson correlation between x[0, n-lag) and x[lag, n).
double lagged_correlation(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size() - lag;
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += x[i];
    mean_b += x[i + lag];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - mean_a;
    const double b = x[i + lag] - mean_b;
    cov += a * b;
    var_a += a * a;
    var_b += b * b;
  }
  if (var_a <= 0.0 || var_b <= 0.0) return 0.0;
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace

std::optional<Millis> detect_period(std::span<const double> series, double confidence) {
  const std::size_t n = series.size();
  if (n < 4) return std::nullopt;
  const std::size_t max_lag = n / 2;
  std::vector<double> r(max_lag + 2, 0.0);
  r[0] = 1.0;
  for (std::size_t lag = 1; lag <= max_lag + 1 && lag < n - 1; ++lag) {
    r[lag] = lagged_correlation(series, lag);
  }

  // Skip the main lobe around lag 0.
  std::size_t start = 1;
  while (start < max_lag && r[start + 1] < r[start]) ++start;

  double best = -1.0;
  for (std::size_t lag = start; lag <= max_lag; ++lag) best = std::max(best, r[lag]);
  if (best < confidence) return std::nullopt;

  // Smallest local peak close to the best one, so multiples of the period lose.
  for (std::size_t lag = std::max<std::size_t>(start, 1); lag <= max_lag; ++lag) {
    const bool peak = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (peak && r[lag] >= best - 0.05 && r[lag] >= confidence) {
      return static_cast<Millis>(lag);
    }
  }
  return std::nullopt;
}

std::vector<double> fold(std::span<const double> series, Millis period) {
  if (period <= 0) throw Error(ErrorCode::InvalidInput, "fold period must be positive");
  const auto p = static_cast<std::size_t>(period);
  std::vector<double> sum(p, 0.0);
  std::vector<int> count(p, 0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum[i % p] += series[i];
    ++count[i % p];
  }
  for (std::size_t b = 0; b < p; ++b) {
    if (count[b] > 0) sum[b] /= count[b];
  }
  return sum;
}

std::vector<PhaseArc> segment_phases(std::span<const double> folded, double up_threshold_gbps,
                                     int smoothing_window) {
  const std::size_t n = folded.size();
  if (n == 0) return {};

  std::vector<double> level(folded.begin(), folded.end());
  if (smoothing_window > 1 && n >= static_cast<std::size_t>(smoothing_window)) {
    const int half = smoothing_window / 2;
    std::vector<double> window(static_cast<std::size_t>(2 * half + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = -half; k <= half; ++k) {
        const auto idx = (static_cast<std::ptrdiff_t>(i) + k + static_cast<std::ptrdiff_t>(n)) %
                         static_cast<std::ptrdiff_t>(n);
        window[static_cast<std::size_t>(k + half)] = folded[static_cast<std::size_t>(idx)];
      }
      std::nth_element(window.begin(), window.begin() + half, window.end());
      level[i] = window[static_cast<std::size_t>(half)];
    }
  }

  std::vector<PhaseArc> arcs;
  double run_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = level[i] >= up_threshold_gbps ? PhaseKind::Up : PhaseKind::Down;
    if (arcs.empty() || arcs.back().kind != kind) {
      if (!arcs.empty()) arcs.back().demand_gbps = run_sum / static_cast<double>(arcs.back().duration_ms);
      arcs.push_back({static_cast<Millis>(i), 0, 0.0, kind});
      run_sum = 0.0;
    }
    ++arcs.back().duration_ms;
    run_sum += folded[i];
  }
  arcs.back().demand_gbps = run_sum / static_cast<double>(arcs.back().duration_ms);
  return arcs;
}

IterationProfile parse_profile(std::span<const BandwidthSample> raw,
                               std::optional<Millis> iter_time_hint,
                               const ProfileOptions& options) {
  if (raw.empty()) throw Error(ErrorCode::EmptySeries, "sample series is empty");
  if (raw.size() < 2) throw Error(ErrorCode::InvalidInput, "need at least two samples");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& s = raw[i];
    if (!std::isfinite(s.t_ms) || s.t_ms < 0.0) {
      throw Error(ErrorCode::InvalidInput, "sample time must be finite and non-negative");
    }
    if (!std::isfinite(s.bw_gbps) || s.bw_gbps < 0.0) {
      throw Error(ErrorCode::InvalidInput, "sample bandwidth must be finite and non-negative");
    }
    if (i > 0 && s.t_ms <= raw[i - 1].t_ms) {
      throw Error(ErrorCode::InvalidInput, "sample times must be strictly increasing");
    }
  }

  const auto grid = resample_1ms(raw);
  Millis period = 0;
  if (iter_time_hint) {
    if (*iter_time_hint <= 0) throw Error(ErrorCode::InvalidInput, "iteration time hint must be positive");
    period = *iter_time_hint;
  } else {
    const auto detected = detect_period(grid, options.period_confidence);
    if (!detected) {
      throw Error(ErrorCode::NonPeriodic,
                  "no autocorrelation peak above confidence; pass an iteration time hint");
    }
    period = *detected;
  }
  if (static_cast<Millis>(grid.size()) < period) {
    throw Error(ErrorCode::InvalidInput, "series is shorter than one iteration");
  }

  const auto folded = fold(grid, period);
  return IterationProfile(options.job_kind,
                          segment_phases(folded, options.up_threshold_gbps, options.smoothing_window));
}

std::vector<BandwidthSample> parse_samples_csv(const std::string& text) {
  std::vector<BandwidthSample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": expected t_ms,bw_gbps");
    }
    try {
      std::size_t used = 0;
      const double t = std::stod(line.substr(0, comma), &used);
      const double bw = std::stod(line.substr(comma + 1));
      samples.push_back({t, bw});
    } catch (const std::invalid_argument&) {
      if (samples.empty() && line_no == 1) continue;  // header
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": not numeric");
    }
  }
  return samples;
}

std::vector<BandwidthSample> parse_samples_json(const nlohmann::json& doc) {
  const auto& arr = doc.is_object() && doc.contains("samples") ? doc.at("samples") : doc;
  if (!arr.is_array()) throw Error(ErrorCode::SchemaViolation, "samples must be a JSON array");
  std::vector<BandwidthSample> samples;
  samples.reserve(arr.size());
  try {
    for (const auto& item : arr) {
      if (item.is_array() && item.size() == 2) {
        samples.push_back({item[0].get<double>(), item[1].get<double>()});
      } else {
        samples.push_back({item.at("t_ms").get<double>(), item.at("bw_gbps").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad sample: ") + e.what());
  }
  return samples;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<BandwidthSample> read_samples(const std::string& path) {
  const auto text = slurp(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    try {
      return parse_samples_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
    }
  }
  return parse_samples_csv(text);
}

nlohmann::ordered_json to_json(const IterationProfile& profile) {
  nlohmann::ordered_json doc;
  doc["job_kind"] = profile.job_kind();
  doc["iter_time_ms"] = profile.iter_time_ms();
  doc["compute_time_ms"] = profile.compute_time_ms();
  auto arcs = nlohmann::ordered_json::array();
  for (const auto& arc : profile.arcs()) {
    nlohmann::ordered_json a;
    a["start_ms"] = arc.start_ms;
    a["duration_ms"] = arc.duration_ms;
    a["demand_gbps"] = arc.demand_gbps;
    a["kind"] = to_string(arc.kind);
    arcs.push_back(std::move(a));
  }
  doc["arcs"] = std::move(arcs);
  return doc;
}

IterationProfile profile_from_json(const nlohmann::json& doc) {
  try {
    std::vector<PhaseArc> arcs;
    for (const auto& a : doc.at("arcs")) {
      const auto kind = a.at("kind").get<std::string>();
      if (kind != "up" && kind != "down") {
        throw Error(ErrorCode::SchemaViolation, "arc kind must be \"up\" or \"down\"");
      }
      arcs.push_back({a.at("start_ms").get<Millis>(), a.at("duration_ms").get<Millis>(),
                      a.at("demand_gbps").get<double>(), kind == "up" ? PhaseKind::Up : PhaseKind::Down});
    }
    IterationProfile profile(doc.at("job_kind").get<std::string>(), std::move(arcs));
    if (doc.contains("iter_time_ms") && doc.at("iter_time_ms").get<Millis>() != profile.iter_time_ms()) {
      throw Error(ErrorCode::SchemaViolation, "iter_time_ms does not match the sum of arc durations");
    }
    return profile;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bad profile: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaViolation) throw;
    throw Error(ErrorCode::SchemaViolation, std::string("bad profile: ") + e.what());
  }
}

IterationProfile load_profile(const std::string& path) {
  try {
    return profile_from_json(nlohmann::json::parse(slurp(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
}

IterationProfile square_wave(std::string job_kind, Millis iter_time_ms, Millis up_ms, double up_gbps,
                             Millis up_start_ms, double down_gbps) {
  if (up_ms <= 0 || up_ms > iter_time_ms || up_start_ms < 0 || up_start_ms + up_ms > iter_time_ms) {
    throw Error(ErrorCode::InvalidInput, "Up arc does not fit inside the iteration");
  }
  std::vector<PhaseArc> arcs;
  if (up_start_ms > 0) arcs.push_back({0, up_start_ms, down_gbps, PhaseKind::Down});
  arcs.push_back({up_start_ms, up_ms, up_gbps, PhaseKind::Up});
  const Millis tail = iter_time_ms - up_start_ms - up_ms;
  if (tail > 0) arcs.push_back({up_start_ms + up_ms, tail, down_gbps, PhaseKind::Down});
  return IterationProfile(std::move(job_kind), std::move(arcs));
}

}  // namespace ringshift
