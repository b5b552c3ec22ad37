#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ringshift/affinity.hpp"
#include "ringshift/config.hpp"
#include "ringshift/error.hpp"
#include "ringshift/optimizer.hpp"
#include "ringshift/profiles.hpp"
#include "ringshift/ranker.hpp"
#include "ringshift/report.hpp"
#include "ringshift/simulator.hpp"
#include "ringshift/topology.hpp"

namespace py = pybind11;
using namespace ringshift;

namespace {

// Python objects cross the boundary as JSON.
// The json helpers are leaked so they outlive interpreter shutdown.
std::string dumps(const py::object& obj) {
  static auto* fn = new py::object(py::module_::import("json").attr("dumps"));
  return (*fn)(obj).cast<std::string>();
}

nlohmann::json to_native(const py::object& obj) { return nlohmann::json::parse(dumps(obj)); }

// Keeps the caller's key order.
nlohmann::ordered_json to_native_ordered(const py::object& obj) { return nlohmann::ordered_json::parse(dumps(obj)); }

template <class J>
py::object to_python(const J& doc) {
  static auto* fn = new py::object(py::module_::import("json").attr("loads"));
  return (*fn)(doc.dump());
}

Config config_for(double precision, std::uint64_t seed, const std::string& aggregate) {
  ConfigOverrides o;
  o.precision_deg = precision;
  o.seed = seed;
  o.aggregate = aggregate_from_string(aggregate);
  return resolve_config(std::nullopt, o);
}

std::map<std::string, IterationProfile> profile_map(const py::object& obj) {
  std::map<std::string, IterationProfile> out;
  if (obj.is_none()) return builtin_profiles();
  const auto doc = to_native(obj);
  for (const auto& [k, v] : doc.items()) out.emplace(k, profile_from_json(v));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compatibility scoring, time shifts, ranking and simulation.";

  // Kept alive for the life of the interpreter.
  static PyObject* error = py::exception<Error>(m, "RingshiftError").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "import_profile",
      [](const std::vector<std::pair<double, double>>& samples, std::optional<Millis> iter_time,
         double threshold_gbps, const std::string& kind) {
        std::vector<BandwidthSample> raw;
        raw.reserve(samples.size());
        for (const auto& [t, bw] : samples) raw.push_back({t, bw});
        ProfileOptions o;
        o.up_threshold_gbps = threshold_gbps;
        o.job_kind = kind;
        return to_python(to_json(parse_profile(raw, iter_time, o)));
      },
      py::arg("samples"), py::arg("iter_time") = py::none(), py::arg("threshold_gbps") = 1.0,
      py::arg("kind") = "job", "Iteration profile from (t_ms, gbps) samples.");

  m.def(
      "square_wave",
      [](const std::string& kind, Millis iter_ms, Millis up_ms, double up_gbps, Millis up_start_ms) {
        return to_python(to_json(square_wave(kind, iter_ms, up_ms, up_gbps, up_start_ms)));
      },
      py::arg("kind"), py::arg("iter_ms"), py::arg("up_ms"), py::arg("up_gbps"), py::arg("up_start_ms") = 0);

  m.def(
      "score",
      [](const py::object& profiles, double capacity_gbps, double precision_deg, std::uint64_t seed) {
        LinkJobSet set{"link", capacity_gbps, {}};
        const auto doc = to_native_ordered(profiles);
        for (const auto& [id, p] : doc.items()) {
          set.jobs.push_back({id, profile_from_json(nlohmann::json::parse(p.dump()))});
        }
        return to_python(to_json(solve_rotations(set, config_for(precision_deg, seed, "mean").optimizer())));
      },
      py::arg("profiles"), py::arg("capacity_gbps"), py::arg("precision_deg") = 5.0, py::arg("seed") = 0,
      "Best rotations for jobs sharing one link; profiles maps job id to profile. Order is kept.");

  m.def(
      "time_shifts",
      [](const py::object& graph) {
        const auto g = graph_from_json(to_native(graph));
        const auto a = bfs_time_shifts(g);
        auto doc = to_json(a);
        doc["violations"] = verify_assignment(g, a.shifts).size();
        return to_python(doc);
      },
      py::arg("graph"));

  m.def(
      "rank",
      [](const py::object& topology, const py::object& jobs, const py::object& profiles,
         const py::object& candidates, std::size_t n_max, double precision_deg, std::uint64_t seed,
         const std::string& aggregate) {
        const auto topo = topology_from_json(to_native(topology));
        const auto reqs = jobs_from_json(to_native(jobs));
        const auto cfg = config_for(precision_deg, seed, aggregate);
        std::vector<Placement> cands;
        if (candidates.is_none()) {
          cands = generate_candidates(reqs, topo, n_max, seed);
        } else {
          for (const auto& c : to_native(candidates)) cands.push_back(placement_from_json(c));
        }
        return to_python(to_json(rank(cands, resolve_profiles(reqs, profile_map(profiles)), topo, cfg.rank())));
      },
      py::arg("topology"), py::arg("jobs"), py::arg("profiles") = py::none(), py::arg("candidates") = py::none(),
      py::arg("n_max") = 10, py::arg("precision_deg") = 5.0, py::arg("seed") = 0, py::arg("aggregate") = "mean");

  m.def(
      "simulate",
      [](const py::object& trace, const py::object& topology, const std::string& scheduler, std::uint64_t seed,
         double jitter) {
        auto t = trace_from_json(to_native(trace));
        for (auto& [k, p] : builtin_profiles()) t.profiles.emplace(k, p);
        SimOptions o;
        o.scheduler = scheduler_from_string(scheduler);
        o.seed = seed;
        o.jitter_fraction = jitter;
        const auto topo = topology.is_none() ? Topology::testbed() : topology_from_json(to_native(topology));
        SimReport r;
        {
          py::gil_scoped_release release;
          r = run(t, topo, o);
        }
        return to_python(to_json(r));
      },
      py::arg("trace"), py::arg("topology") = py::none(), py::arg("scheduler") = "baseline", py::arg("seed") = 0,
      py::arg("jitter") = 0.0);

  m.def(
      "summarize",
      [](const py::list& reports) {
        std::vector<SimReport> rs;
        for (const auto& r : reports) rs.push_back(report_from_json(to_native(py::reinterpret_borrow<py::object>(r))));
        return to_python(to_json(summarize(rs)));
      },
      py::arg("reports"));

  m.def("max_min_allocation", &max_min_allocation, py::arg("flows"), py::arg("capacities_gbps"));
  py::class_<FluidFlow>(m, "FluidFlow")
      .def(py::init([](double demand, std::vector<std::pair<std::size_t, int>> links) {
             return FluidFlow{demand, std::move(links)};
           }),
           py::arg("demand_gbps"), py::arg("links"))
      .def_readwrite("demand_gbps", &FluidFlow::demand_gbps)
      .def_readwrite("links", &FluidFlow::links);

  m.def("testbed", [] { return to_python(to_json(Topology::testbed())); });
  m.def(
      "two_tier",
      [](int racks, int per_rack, double nic_gbps, double oversubscription, int gpu_slots) {
        return to_python(to_json(Topology::two_tier(racks, per_rack, nic_gbps, oversubscription, gpu_slots)));
      },
      py::arg("racks"), py::arg("per_rack"), py::arg("nic_gbps") = 50.0, py::arg("oversubscription") = 2.0,
      py::arg("gpu_slots") = 1);
  m.def("builtin_profiles", [] {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [k, p] : builtin_profiles()) doc[k] = to_json(p);
    return to_python(doc);
  });
}
