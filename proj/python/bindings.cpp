#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "feedsim/config.hpp"
#include "feedsim/engine.hpp"
#include "feedsim/errors.hpp"
#include "feedsim/metrics.hpp"
#include "feedsim/opinion.hpp"
#include "feedsim/population.hpp"

namespace py = pybind11;
using namespace feedsim;

namespace {

// JSON crosses the boundary as text; the Python wrapper handles dicts.
SimConfig config_from_text(const std::string& text, const std::string& base_dir) {
  return parse_config(nlohmann::json::parse(text), base_dir);
}

WeightedDigraph digraph(std::size_t n, const std::vector<std::tuple<AgentId, AgentId, double>>& edges) {
  std::vector<WeightedEdge> e;
  e.reserve(edges.size());
  for (const auto& [s, d, w] : edges) e.push_back({s, d, w});
  return WeightedDigraph(n, std::move(e));
}

std::vector<std::tuple<std::int64_t, std::string, std::string, double>> rows(const std::vector<MetricRow>& in) {
  std::vector<std::tuple<std::int64_t, std::string, std::string, double>> out;
  out.reserve(in.size());
  for (const auto& r : in) out.emplace_back(r.day, r.metric, r.scope, r.value);
  return out;
}

}  // namespace

PYBIND11_MODULE(_feedsim, m) {
  m.doc() = "Agent-based simulation of recommender-driven negativity and polarization";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

  m.def("wrap_opinion", &wrap_opinion);
  m.def("circ_dist", [](double a, double b) { return circ_dist(Opinion(a), Opinion(b)); });
  m.def("signed_delta", [](double a, double b) { return signed_delta(Opinion(a), Opinion(b)); });
  m.def("update_opinion", [](double self, double author, double lambda) {
    return update_opinion(Opinion(self), Opinion(author), lambda).value();
  });
  m.def("engagement_prob", [](double delta, double scale) {
    return engagement_prob(AcceptanceCurve::exponential(scale), delta);
  }, py::arg("delta"), py::arg("scale") = 0.2);
  m.def("sample_daily_counts", [](double scale, std::uint64_t seed, std::size_t count) {
    Rng rng(seed);
    std::vector<long> out(count);
    for (auto& x : out) x = sample_daily_count(scale, rng);
    return out;
  }, py::arg("scale"), py::arg("seed"), py::arg("count") = 1);
  m.def("barabasi_albert_edges", [](std::size_t n, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    return barabasi_albert_edges(n, k, rng);
  });

  m.def("directed_modularity", [](std::size_t n, const std::vector<std::tuple<AgentId, AgentId, double>>& edges,
                                  const Partition& p, double resolution) {
    return directed_modularity(digraph(n, edges), p, resolution);
  }, py::arg("n"), py::arg("edges"), py::arg("partition"), py::arg("resolution") = 1.0);
  m.def("detect_communities", [](std::size_t n, const std::vector<std::tuple<AgentId, AgentId, double>>& edges,
                                 std::uint64_t seed, double resolution, int restarts) {
    LeidenOptions opt;
    opt.resolution = resolution;
    opt.restarts = restarts;
    return detect_communities(digraph(n, edges), seed, opt);
  }, py::arg("n"), py::arg("edges"), py::arg("seed") = 0, py::arg("resolution") = 1.0, py::arg("restarts") = 10);
  m.def("gamma_overexposure", [](std::uint64_t imp, std::uint64_t neg_imp, std::uint64_t pool, std::uint64_t neg_pool) {
    return gamma_overexposure({imp, neg_imp, pool, neg_pool});
  });

  m.def("validate_config", [](const std::string& text, const std::string& base_dir) {
    const auto cfg = config_from_text(text, base_dir);
    cfg.master_seed();
    return cfg.tree.dump();
  }, py::arg("config_json"), py::arg("base_dir") = "");
  m.def("config_hash", [](const std::string& text) { return config_hash(merge_config(nlohmann::json::parse(text))); });

  m.def("run", [](const std::string& text, const std::filesystem::path& out_root, const std::string& base_dir) {
    const auto cfg = config_from_text(text, base_dir);
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run_simulation(cfg, {out_root, "", std::nullopt, std::nullopt});
    }
    return py::make_tuple(r.dir, r.summary.dump());
  }, py::arg("config_json"), py::arg("out_root"), py::arg("base_dir") = "");

  py::class_<Simulation>(m, "Simulation")
      .def(py::init([](const std::string& text, const std::string& base_dir) {
             return Simulation(config_from_text(text, base_dir));
           }),
           py::arg("config_json"), py::arg("base_dir") = "")
      .def("step", &Simulation::step, py::call_guard<py::gil_scoped_release>())
      .def("run", &Simulation::run, py::arg("days"), py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("day", &Simulation::day)
      .def_property_readonly("num_agents", &Simulation::num_agents)
      .def_property_readonly("num_edges", [](const Simulation& s) { return s.graph().num_edges(); })
      .def("opinions", [](const Simulation& s) {
        std::vector<double> out;
        for (const auto& o : s.opinions()) out.push_back(o.value());
        return out;
      })
      .def("in_degrees", [](const Simulation& s) {
        std::vector<std::size_t> out;
        for (AgentId i = 0; i < s.num_agents(); ++i) out.push_back(s.graph().in_degree(i));
        return out;
      })
      .def("gamma", [](const Simulation& s) { return s.gamma().per_agent; })
      .def("last_totals", [](const Simulation& s) {
        const auto& t = s.last_totals();
        py::dict d;
        d["published"] = t.published;
        d["impressions"] = t.impressions;
        d["reads"] = t.reads;
        d["retweets"] = t.retweets;
        d["opinion_updates"] = t.opinion_updates;
        d["rewires"] = t.rewires;
        d["rewire_fallbacks"] = t.rewire_fallbacks;
        return d;
      })
      .def("metrics", [](const Simulation& s, bool communities) { return rows(s.metrics(communities)); },
           py::arg("communities") = false)
      .def("summary_json", [](const Simulation& s) { return s.summary().dump(); })
      .def("checkpoint", [](const Simulation& s) {
        std::ostringstream out;
        s.save_checkpoint(out);
        return py::bytes(out.str());
      })
      .def_static("restore", [](const py::bytes& blob, const std::string& text, const std::string& base_dir) {
        std::istringstream in{std::string(blob)};
        return Simulation::load_checkpoint(in, config_from_text(text, base_dir));
      }, py::arg("blob"), py::arg("config_json"), py::arg("base_dir") = "");
}
