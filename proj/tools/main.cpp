#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ringshift/affinity.hpp"
#include "ringshift/config.hpp"
#include "ringshift/error.hpp"
#include "ringshift/geometry.hpp"
#include "ringshift/optimizer.hpp"
#include "ringshift/profiles.hpp"
#include "ringshift/ranker.hpp"
#include "ringshift/report.hpp"
#include "ringshift/simulator.hpp"
#include "ringshift/topology.hpp"

namespace fs = std::filesystem;
using namespace ringshift;

namespace {

// Knobs shared by every subcommand.
struct Common {
  std::optional<std::string> config;
  ConfigOverrides over;
  std::string aggregate;

  void add_to(CLI::App* cmd, bool optimizer_knobs) {
    cmd->add_option("--config", config, "JSON config file");
    cmd->add_option("--seed", over.seed, "random seed");
    if (optimizer_knobs) {
      cmd->add_option("--precision", over.precision_deg, "rotation precision in degrees (divides 360)");
      cmd->add_option("--quantum", over.time_quantum_ms, "time quantum in ms");
      cmd->add_option("--lcm-cap", over.lcm_cap_ms, "perimeter cap in ms");
      cmd->add_option("--aggregate", aggregate, "link score aggregate: mean or min");
    }
  }

  Config resolve() {
    if (!aggregate.empty()) over.aggregate = aggregate_from_string(aggregate);
    return resolve_config(config, over);
  }
};

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + out);
  f << text;
}

std::string dump(const nlohmann::ordered_json& doc) { return doc.dump(2) + "\n"; }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, path + " is not JSON: " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_capacity(const std::string& spec) {
  const auto eq = spec.find('=');
  const std::string value = eq == std::string::npos ? spec : spec.substr(eq + 1);
  if (eq != std::string::npos && spec.substr(0, eq) != "capacity") {
    throw Error(ErrorCode::InvalidInput, "--link expects capacity=GBPS");
  }
  try {
    std::size_t used = 0;
    const double c = std::stod(value, &used);
    if (used != value.size() || !(c > 0.0)) throw std::invalid_argument(value);
    return c;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidInput, "bad link capacity " + value);
  }
}

// Profiles from a directory (or single file), keyed by kind and by file stem.
std::map<std::string, IterationProfile> load_profile_library(const std::string& where) {
  std::map<std::string, IterationProfile> lib;
  std::vector<fs::path> files;
  if (fs::is_directory(where)) {
    for (const auto& e : fs::directory_iterator(where)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(where);
  }
  for (const auto& f : files) {
    auto p = load_profile(f.string());
    lib.emplace(f.stem().string(), p);
    lib.emplace(p.job_kind(), p);
  }
  return lib;
}

Topology topology_or_testbed(const std::string& path) {
  return path.empty() ? Topology::testbed() : load_topology(path);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Interleave the communication phases of training jobs that share network links."};
  app.name("ringshift");
  app.require_subcommand(1);

  // profiles import
  auto* profiles = app.add_subcommand("profiles", "bandwidth traces to iteration profiles");
  profiles->require_subcommand(1);
  Common profiles_common;
  std::string samples_path;
  std::optional<Millis> iter_hint;
  std::optional<double> threshold;
  std::string kind = "job";
  std::string profiles_out;
  auto* import = profiles->add_subcommand("import", "parse a CSV or JSON bandwidth trace");
  import->add_option("file", samples_path, "t_ms,bw_gbps CSV or JSON samples")->required();
  import->add_option("--iter-time", iter_hint, "iteration time hint in ms");
  import->add_option("--threshold", threshold, "Up threshold in Gbps");
  import->add_option("--kind", kind, "job kind label");
  import->add_option("--out", profiles_out, "output file");
  profiles_common.add_to(import, false);

  // geometry show
  auto* geometry = app.add_subcommand("geometry", "unified circles");
  geometry->require_subcommand(1);
  Common geometry_common;
  std::string geometry_profile;
  Millis perimeter = 0;
  std::string geometry_out;
  auto* show = geometry->add_subcommand("show", "binned demand of a profile tiled onto a perimeter, as CSV");
  show->add_option("profile", geometry_profile, "profile JSON")->required();
  show->add_option("--perimeter", perimeter, "perimeter in ms (default: the iteration time)");
  show->add_option("--out", geometry_out, "output file");
  geometry_common.add_to(show, false);

  // score
  auto* score_cmd = app.add_subcommand("score", "best rotations for jobs sharing one link");
  Common score_common;
  std::string link_spec;
  std::string profile_list;
  std::string score_out;
  score_cmd->add_option("--link", link_spec, "capacity=GBPS")->required();
  score_cmd->add_option("--profiles", profile_list, "comma-separated profile files")->required();
  score_cmd->add_option("--out", score_out, "output file");
  score_common.add_to(score_cmd, true);

  // affinity shifts / dot
  auto* affinity = app.add_subcommand("affinity", "affinity graphs");
  affinity->require_subcommand(1);
  Common affinity_common;
  std::string graph_path;
  std::string affinity_out;
  auto* shifts = affinity->add_subcommand("shifts", "unique time shifts by traversal");
  shifts->add_option("--graph", graph_path, "graph JSON")->required();
  shifts->add_option("--out", affinity_out, "output file");
  affinity_common.add_to(shifts, false);
  auto* dot = affinity->add_subcommand("dot", "graph in DOT format");
  dot->add_option("--graph", graph_path, "graph JSON")->required();
  dot->add_option("--out", affinity_out, "output file");
  affinity_common.add_to(dot, false);

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "rank candidate placements");
  Common rank_common;
  std::string cluster_path;
  std::string jobs_path;
  std::string profiles_dir;
  std::string candidates_path;
  std::size_t n_max = 10;
  bool unbundled = false;
  std::string rank_out;
  rank_cmd->add_option("--cluster", cluster_path, "topology JSON")->required();
  rank_cmd->add_option("--jobs", jobs_path, "jobs JSON")->required();
  rank_cmd->add_option("--profiles", profiles_dir, "profile directory or file (default: built-in catalog)");
  rank_cmd->add_option("--candidates", candidates_path, "candidate placements JSON (default: generated)");
  rank_cmd->add_option("--n-max", n_max, "candidates to generate");
  rank_cmd->add_flag("--no-bundle", unbundled, "keep parallel links with identical jobs apart");
  rank_cmd->add_option("--out", rank_out, "output file");
  rank_common.add_to(rank_cmd, true);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a trace through the cluster simulator");
  Common sim_common;
  std::string trace_path;
  std::string topology_path;
  std::string scheduler = "baseline";
  double jitter = 0.0;
  Millis epoch = 600'000;
  std::size_t sim_n_max = 10;
  std::string sim_out;
  std::string csv_prefix;
  simulate->add_option("--trace", trace_path, "trace JSON")->required();
  simulate->add_option("--topology", topology_path, "topology JSON (default: 24-server testbed)");
  simulate->add_option("--scheduler", scheduler, "baseline or cassini");
  simulate->add_option("--jitter", jitter, "per-iteration jitter std as a fraction of iteration time");
  simulate->add_option("--epoch-ms", epoch, "scheduling epoch in ms");
  simulate->add_option("--n-max", sim_n_max, "candidates per scheduling round");
  simulate->add_option("--out", sim_out, "report JSON file");
  simulate->add_option("--csv", csv_prefix, "also write PREFIX_iterations.csv and PREFIX_congestion.csv");
  sim_common.add_to(simulate, true);

  // report
  auto* report_cmd = app.add_subcommand("report", "summary tables over simulation reports");
  Common report_common;
  std::vector<std::string> report_paths;
  std::string format = "json";
  std::string table = "jobs";
  std::string report_out;
  report_cmd->add_option("reports", report_paths, "report JSON files")->required();
  report_cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  report_cmd->add_option("--table", table, "csv table: jobs, links, comparison or snapshot")
      ->check(CLI::IsMember({"jobs", "links", "comparison", "snapshot"}));
  report_cmd->add_option("--out", report_out, "output file");
  report_common.add_to(report_cmd, false);

  // trace generate
  auto* trace = app.add_subcommand("trace", "synthetic traces");
  trace->require_subcommand(1);
  Common trace_common;
  TraceGenOptions gen;
  std::string gen_topology;
  std::string gen_out;
  auto* generate = trace->add_subcommand("generate", "Poisson arrivals over the built-in catalog");
  generate->add_option("--topology", gen_topology, "topology JSON (default: 24-server testbed)");
  generate->add_option("--jobs", gen.jobs, "number of arrivals");
  generate->add_option("--load", gen.load, "target busy-GPU fraction");
  generate->add_option("--min-iterations", gen.min_iterations, "shortest job");
  generate->add_option("--max-iterations", gen.max_iterations, "longest job");
  generate->add_option("--out", gen_out, "output file");
  trace_common.add_to(generate, false);

  // topology testbed
  auto* topology = app.add_subcommand("topology", "cluster topologies");
  topology->require_subcommand(1);
  int racks = 6;
  int per_rack = 4;
  double nic = 50.0;
  double oversub = 2.0;
  int gpus = 1;
  std::string topo_out;
  auto* two_tier = topology->add_subcommand("two-tier", "ToR/aggregation tree (defaults: the 24-server testbed)");
  two_tier->add_option("--racks", racks, "racks");
  two_tier->add_option("--per-rack", per_rack, "servers per rack");
  two_tier->add_option("--nic", nic, "NIC Gbps");
  two_tier->add_option("--oversubscription", oversub, "ToR uplink oversubscription");
  two_tier->add_option("--gpus", gpus, "GPU slots per server");
  two_tier->add_option("--out", topo_out, "output file");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  const std::string first = argv[1];
  if (!first.starts_with("-") && app.get_subcommand_no_throw(first) == nullptr) {
    throw Error(ErrorCode::UnknownCommand, "unknown command " + first);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const bool unknown = dynamic_cast<const CLI::ExtrasError*>(&e) != nullptr ||
                         dynamic_cast<const CLI::RequiredError*>(&e) != nullptr;
    nlohmann::ordered_json diag{{"code", unknown ? "UnknownCommand" : "InvalidInput"}, {"message", e.what()}};
    std::cerr << diag.dump() << "\n";
    return 2;
  }

  if (*import) {
    const auto cfg = profiles_common.resolve();
    auto opts = cfg.profile();
    if (threshold) opts.up_threshold_gbps = *threshold;
    opts.job_kind = kind;
    const auto samples = read_samples(samples_path);
    emit(dump(to_json(parse_profile(samples, iter_hint, opts))), profiles_out);
  } else if (*show) {
    geometry_common.resolve();
    const auto p = load_profile(geometry_profile);
    const auto circle = tile(p, perimeter > 0 ? perimeter : p.iter_time_ms());
    std::ostringstream out;
    out << "t_ms,demand_gbps\n";
    for (std::size_t t = 0; t < circle.demand.size(); ++t) out << t << ',' << circle.demand[t] << '\n';
    emit(out.str(), geometry_out);
  } else if (*score_cmd) {
    const auto cfg = score_common.resolve();
    LinkJobSet set{"link", parse_capacity(link_spec), {}};
    for (const auto& f : split(profile_list, ',')) set.jobs.push_back({fs::path(f).stem().string(), load_profile(f)});
    auto opt = cfg.optimizer();
    emit(dump(to_json(solve_rotations(set, opt))), score_out);
  } else if (*shifts) {
    affinity_common.resolve();
    const auto g = graph_from_json(read_json(graph_path));
    const auto a = bfs_time_shifts(g);
    auto doc = to_json(a);
    auto violations = nlohmann::ordered_json::array();
    for (const auto& v : verify_assignment(g, a.shifts)) {
      violations.push_back({{"link", v.link_id}, {"job_m", v.job_m}, {"job_n", v.job_n}});
    }
    doc["violations"] = std::move(violations);
    emit(dump(doc), affinity_out);
  } else if (*dot) {
    affinity_common.resolve();
    emit(to_dot(graph_from_json(read_json(graph_path))), affinity_out);
  } else if (*rank_cmd) {
    const auto cfg = rank_common.resolve();
    const auto topo = load_topology(cluster_path);
    const auto jobs = jobs_from_json(read_json(jobs_path));
    const auto library = profiles_dir.empty() ? builtin_profiles() : load_profile_library(profiles_dir);
    const auto job_profiles = resolve_profiles(jobs, library);
    std::vector<Placement> candidates;
    if (candidates_path.empty()) {
      candidates = generate_candidates(jobs, topo, n_max, cfg.seed);
    } else {
      const auto doc = read_json(candidates_path);
      if (!doc.is_array()) throw Error(ErrorCode::SchemaViolation, "candidates must be a JSON array");
      for (const auto& c : doc) candidates.push_back(placement_from_json(c));
    }
    auto opts = cfg.rank();
    opts.bundle_links = !unbundled;
    emit(dump(to_json(rank(candidates, job_profiles, topo, opts))), rank_out);
  } else if (*simulate) {
    const auto cfg = sim_common.resolve();
    auto t = load_trace(trace_path);
    for (auto& [k, p] : builtin_profiles()) t.profiles.emplace(k, p);
    SimOptions o;
    o.scheduler = scheduler_from_string(scheduler);
    o.seed = cfg.seed;
    o.jitter_fraction = jitter;
    o.epoch_ms = epoch;
    o.n_max = sim_n_max;
    o.rank = cfg.rank();
    const auto r = run(t, topology_or_testbed(topology_path), o);
    emit(dump(to_json(r)), sim_out);
    if (!csv_prefix.empty()) {
      emit(iterations_csv(r), csv_prefix + "_iterations.csv");
      emit(congestion_csv(r), csv_prefix + "_congestion.csv");
    }
  } else if (*report_cmd) {
    report_common.resolve();
    std::vector<SimReport> reports;
    for (const auto& p : report_paths) reports.push_back(report_from_json(read_json(p)));
    const auto s = summarize(reports);
    if (format == "json") {
      emit(dump(to_json(s)), report_out);
    } else if (table == "jobs") {
      emit(jobs_csv(s), report_out);
    } else if (table == "links") {
      emit(links_csv(s), report_out);
    } else if (table == "comparison") {
      emit(comparison_csv(s), report_out);
    } else {
      emit(snapshot_csv(s), report_out);
    }
  } else if (*generate) {
    const auto cfg = trace_common.resolve();
    gen.seed = cfg.seed;
    emit(dump(to_json(generate_trace(topology_or_testbed(gen_topology), builtin_profiles(), gen))), gen_out);
  } else if (*two_tier) {
    emit(dump(to_json(Topology::two_tier(racks, per_rack, nic, oversub, gpus))), topo_out);
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    nlohmann::ordered_json diag{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    std::cerr << diag.dump() << "\n";
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    nlohmann::ordered_json diag{{"code", "Internal"}, {"message", e.what()}};
    std::cerr << diag.dump() << "\n";
    return 1;
  }
}
