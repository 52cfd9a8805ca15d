#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bubblekit/boundary.hpp"
#include "bubblekit/closedform.hpp"
#include "bubblekit/errors.hpp"
#include "bubblekit/io.hpp"
#include "bubblekit/pathlab.hpp"
#include "bubblekit/pdesolve.hpp"
#include "bubblekit/runner.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace py = pybind11;
using namespace bubblekit;

namespace {

py::array_t<double> array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

nlohmann::json to_json(const py::object& obj) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(obj).cast<std::string>());
}

RunConfig config_of(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) return load_config(obj.cast<std::string>());
  return parse_config(to_json(obj));
}

py::dict report_dict(const Report& r) {
  py::dict d;
  d["header"] = r.header;
  d["rows"] = r.rows;
  d["summary"] = r.summary;
  std::vector<std::string> files;
  for (const auto& f : r.files) files.push_back(f.string());
  d["files"] = files;
  return d;
}

McOptions mc_options(std::size_t paths, std::size_t steps, std::uint64_t seed, const std::string& monitoring) {
  McOptions mc;
  mc.n_paths = paths;
  mc.steps = steps;
  mc.seed = seed;
  if (monitoring == "discrete") {
    mc.monitoring = Monitoring::Discrete;
  } else if (monitoring != "bridge") {
    throw ConfigError("monitoring: expected 'bridge' or 'discrete', got '" + monitoring + "'");
  }
  return mc;
}

py::dict estimate_dict(const McEstimate& e) {
  py::dict d;
  d["mean"] = e.mean;
  d["stderr"] = e.std_error;
  d["n"] = e.n;
  return d;
}

py::dict path_dict(const PathBundle& p) {
  py::dict d;
  d["t"] = array(std::vector<double>(p.grid.nodes().begin(), p.grid.nodes().end()));
  d["x"] = array(p.x);
  d["jstar"] = array(p.jstar);
  d["truncated_at"] = p.truncated_at ? py::cast(*p.truncated_at) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pricing under price bubbles: smooth maps, reflected simulation, boundary schemes, oracles.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<SmoothMap>(m, "SmoothMap")
      .def("__call__", &SmoothMap::operator())
      .def("d1", &SmoothMap::d1)
      .def("d2", &SmoothMap::d2)
      .def("d3", &SmoothMap::d3)
      .def("inverse", &SmoothMap::inverse)
      .def_property_readonly("domain", [](const SmoothMap& f) { return py::make_tuple(f.domain().lo, f.domain().hi); })
      .def_property_readonly("range", [](const SmoothMap& f) { return py::make_tuple(f.range().lo, f.range().hi); })
      .def_property_readonly("descriptor", &SmoothMap::descriptor)
      .def("__repr__", [](const SmoothMap& f) { return "SmoothMap(" + f.descriptor() + ")"; });

  m.def("power_law_map", &power_law_map, py::arg("alpha"), py::arg("xi") = 0.0);
  m.def("log_map", &log_map, py::arg("xi") = 0.0);
  m.def("reciprocal_map", &reciprocal_map);
  m.def("affine_map", &affine_map, py::arg("slope"), py::arg("offset"));
  m.def("mobius_map", [](double a, double b, double c, double d) { return mobius_map({a, b, c, d}); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));
  m.def("compose", &compose, py::arg("outer"), py::arg("inner"));
  m.def("map_from_json", [](const py::object& spec) { return map_from_json(to_json(spec), "map"); },
        "Map from the config description, e.g. {'kind': 'power_law', 'alpha': -1}.");
  m.def("pre_schwarzian", &pre_schwarzian, py::arg("f"), py::arg("x"));
  m.def("schwarzian", &schwarzian, py::arg("f"), py::arg("x"));
  m.def(
      "schwarzian_process",
      [](const SmoothMap& f, const std::vector<double>& t, const std::vector<double>& x) {
        const auto s = schwarzian_process(f, t, x);
        return py::make_tuple(array(s.values), s.exit_index ? py::cast(*s.exit_index) : py::none());
      },
      py::arg("f"), py::arg("t"), py::arg("x"),
      "Schwarzian process of f along a sampled path; returns (values, exit_index).");

  py::class_<PayoffSpec>(m, "Payoff")
      .def_static("forward", &PayoffSpec::forward)
      .def_static("bond", &PayoffSpec::bond)
      .def_static("call", &PayoffSpec::call, py::arg("strike"))
      .def_static("table", &PayoffSpec::table, py::arg("y"), py::arg("h"))
      .def("__call__", &PayoffSpec::operator())
      .def_property_readonly("descriptor", &PayoffSpec::descriptor);

  py::class_<SigmaSpec>(m, "Sigma")
      .def_static("power", &SigmaSpec::power, py::arg("c"), py::arg("p"))
      .def_static("from_map", &SigmaSpec::from_map, py::arg("f"))
      .def("__call__", &SigmaSpec::operator())
      .def_property_readonly("descriptor", &SigmaSpec::descriptor);
  m.def("is_strict_local_martingale", &is_strict_local_martingale, py::arg("sigma"));
  m.def("f_from_sigma", &f_from_sigma, py::arg("sigma"));

  const auto mc_args = [] {
    return std::make_tuple(py::arg("paths") = 100000, py::arg("steps") = 2048, py::arg("seed") = 1,
                           py::arg("monitoring") = "bridge");
  };
  {
    auto [p, s, sd, mon] = mc_args();
    m.def(
        "price_fundraiser_mc",
        [](const SmoothMap& f, double x0, double j0, double T, const PayoffSpec& h, std::size_t paths,
           std::size_t steps, std::uint64_t seed, const std::string& monitoring) {
          const auto mc = mc_options(paths, steps, seed, monitoring);
          FundraiserMc r;
          {
            py::gil_scoped_release release;
            r = price_fundraiser_mc(f, x0, j0, T, h, mc);
          }
          py::dict d = estimate_dict(r.price);
          d["phi"] = estimate_dict(r.phi);
          d["psi"] = estimate_dict(r.psi);
          d["contact_fraction"] = r.contact_fraction;
          return d;
        },
        py::arg("f"), py::arg("x0"), py::arg("j0"), py::arg("T"), py::arg("payoff"), p, s, sd, mon);
  }
  {
    auto [p, s, sd, mon] = mc_args();
    m.def(
        "price_investor_mc",
        [](const SmoothMap& f, double x0, double T, const PayoffSpec& h, std::size_t paths, std::size_t steps,
           std::uint64_t seed, const std::string& monitoring) {
          return estimate_dict(price_investor_mc(f, x0, T, h, mc_options(paths, steps, seed, monitoring)));
        },
        py::arg("f"), py::arg("x0"), py::arg("T"), py::arg("payoff"), p, s, sd, mon);
  }
  {
    auto [p, s, sd, mon] = mc_args();
    m.def(
        "fundraiser_delta_mc",
        [](const SmoothMap& f, double x0, double j0, double T, const PayoffSpec& h, double bump,
           std::size_t paths, std::size_t steps, std::uint64_t seed, const std::string& monitoring) {
          return estimate_dict(fundraiser_delta_mc(f, x0, j0, T, h, bump, mc_options(paths, steps, seed, monitoring)));
        },
        py::arg("f"), py::arg("x0"), py::arg("j0"), py::arg("T"), py::arg("payoff"), py::arg("bump") = 0.05, p, s,
        sd, mon);
  }
  {
    auto [p, s, sd, mon] = mc_args();
    m.def(
        "estimate_theta",
        [](const SmoothMap& f, double j, const std::vector<double>& taus, const PayoffSpec& h, std::size_t paths,
           std::size_t steps, std::uint64_t seed, const std::string& monitoring) {
          const auto t = estimate_theta(f, j, taus, h, mc_options(paths, steps, seed, monitoring));
          py::dict d;
          d["j"] = t.j;
          d["tau"] = array(t.taus);
          d["theta"] = array(t.theta);
          d["stderr"] = array(t.std_error);
          return d;
        },
        py::arg("f"), py::arg("j"), py::arg("taus"), py::arg("payoff"), p, s, sd, mon,
        "Fundraiser boundary values Θ(τ, j) from one reflected ensemble.");
  }

  m.def("simulate_skorokhod",
        [](const SmoothMap& f, double x0, double j0, double T, std::size_t steps, std::uint64_t seed,
           std::uint64_t index) { return path_dict(simulate_skorokhod(f, x0, j0, TimeGrid::uniform(T, steps), seed, index)); },
        py::arg("f"), py::arg("x0"), py::arg("j0"), py::arg("T"), py::arg("steps"), py::arg("seed") = 1,
        py::arg("index") = 0);
  m.def("simulate_bessel3_dual",
        [](double x0, double j0, double T, std::size_t steps, std::uint64_t seed, std::uint64_t index) {
          return path_dict(simulate_bessel3_dual(x0, j0, TimeGrid::uniform(T, steps), seed, index));
        },
        py::arg("x0"), py::arg("j0"), py::arg("T"), py::arg("steps"), py::arg("seed") = 1, py::arg("index") = 0);

  m.def("oracle", [](const std::string& name, double x, double j, double T) {
    return evaluate_oracle(parse_oracle(name), x, j, T);
  }, py::arg("case"), py::arg("x"), py::arg("j") = 1.0, py::arg("T") = 1.0);
  m.def("oracle_cases", [] {
    std::vector<std::string> names;
    for (auto c : all_oracles()) names.emplace_back(oracle_name(c));
    return names;
  });
  m.def("normal_cdf", &normal_cdf);

  // Config-driven runs mirror the command-line subcommands. `config` is a dict or a path.
  m.def("resolve_config", [](const py::object& c) {
    return py::module_::import("json").attr("loads")(config_of(c).resolved.dump());
  });
  m.def("config_hash", [](const py::object& c) { return hex64(config_of(c).hash()); });
  m.def("run_price", [](const py::object& c) { return report_dict(run_price(config_of(c))); });
  m.def("run_theta", [](const py::object& c) { return report_dict(run_theta(config_of(c))); });
  m.def("run_simulate", [](const py::object& c) { return report_dict(run_simulate(config_of(c))); });
  m.def("run_compare_schemes", [](const py::object& c) { return report_dict(run_compare_schemes(config_of(c))); });
  m.def("run_convergence", [](const py::object& c) { return report_dict(run_convergence(config_of(c))); });
}
