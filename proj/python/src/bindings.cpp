#include <pybind11/pybind11.h>
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nftrack/errors.hpp"
#include "nftrack/harness.hpp"

namespace py = pybind11;
using namespace nftrack;

namespace {

py::dict scheme_dict(const SchemeResult& r) {
  py::dict d;
  d["scheme"] = r.scheme;
  d["rmse_x"] = r.rmse_x;
  d["rmse_y"] = r.rmse_y;
  d["rmse_psi"] = r.rmse_psi;
  d["rmse_pos"] = r.rmse_pos;
  d["nmse"] = r.nmse;
  d["avg_rmse_pos"] = r.avg_rmse_pos;
  d["avg_rmse_psi"] = r.avg_rmse_psi;
  d["avg_nmse"] = r.avg_nmse;
  d["n_trials"] = r.n_trials;
  d["n_diverged"] = r.n_diverged;
  d["trial_avg_rmse_pos"] = r.trial_avg_rmse_pos;
  return d;
}

std::vector<CombinerSpec> parse_schemes(const ScenarioConfig& cfg, const std::vector<std::string>& names) {
  std::vector<CombinerSpec> out;
  for (const auto& n : names) out.push_back(CombinerSpec::parse(n, cfg.n_rf, cfg.array.n_b));
  return out;
}

}  // namespace

PYBIND11_MODULE(_nftrack, m) {
  m.doc() = "Near-field pose tracking with hybrid analog combiners";
  m.attr("__version__") = NFTRACK_VERSION;

  auto base = py::register_exception<Error>(m, "NftrackError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<AssumptionViolated>(m, "AssumptionViolated", base.ptr());
  py::register_exception<SingularMatrix>(m, "SingularMatrix", base.ptr());
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());

  py::class_<ArrayConfig>(m, "ArrayConfig")
      .def(py::init([](int n_b, int n_m, double f, std::optional<double> d_b, std::optional<double> d_m) {
             return ArrayConfig::make(n_b, n_m, f, d_b, d_m);
           }),
           py::arg("n_b"), py::arg("n_m"), py::arg("carrier_freq_hz") = 28e9, py::arg("d_b") = py::none(),
           py::arg("d_m") = py::none())
      .def_readonly("n_b", &ArrayConfig::n_b)
      .def_readonly("n_m", &ArrayConfig::n_m)
      .def_readonly("carrier_freq", &ArrayConfig::carrier_freq)
      .def_readonly("wavelength", &ArrayConfig::wavelength)
      .def_readonly("d_b", &ArrayConfig::d_b)
      .def_readonly("d_m", &ArrayConfig::d_m)
      .def_property_readonly("bs_indices", &ArrayConfig::bs_indices)
      .def_property_readonly("ms_indices", &ArrayConfig::ms_indices);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](double x, double y, double psi) { return Pose{x, y, psi}; }), py::arg("x"), py::arg("y"),
           py::arg("psi"))
      .def_readwrite("x", &Pose::x)
      .def_readwrite("y", &Pose::y)
      .def_readwrite("psi", &Pose::psi)
      .def_property_readonly("range", &Pose::range)
      .def("__repr__", [](const Pose& p) {
        std::ostringstream os;
        os << "Pose(" << p.x << ", " << p.y << ", " << p.psi << ")";
        return os.str();
      });

  py::class_<MsState>(m, "MsState")
      .def(py::init([](double x, double y, double psi, double v, double omega) {
             return MsState{x, y, psi, v, omega};
           }),
           py::arg("x"), py::arg("y"), py::arg("psi"), py::arg("v"), py::arg("omega"))
      .def_readwrite("x", &MsState::x)
      .def_readwrite("y", &MsState::y)
      .def_readwrite("psi", &MsState::psi)
      .def_readwrite("v", &MsState::v)
      .def_readwrite("omega", &MsState::omega)
      .def("vec", &MsState::vec)
      .def("pose", &MsState::pose);

  py::class_<GeometrySummary>(m, "GeometrySummary")
      .def_readonly("r", &GeometrySummary::r)
      .def_readonly("theta", &GeometrySummary::theta)
      .def_readonly("eta", &GeometrySummary::eta)
      .def_readonly("d_m_eff", &GeometrySummary::d_m_eff)
      .def_readonly("d_fresnel", &GeometrySummary::d_fresnel);

  m.def("channel_matrix", [](const Pose& p, const ArrayConfig& c) { return channel_matrix(p, c); });
  m.def("channel_derivatives", [](const Pose& p, const ArrayConfig& c) {
    const ChannelDerivatives d = channel_derivatives(p, c);
    return py::make_tuple(d.j_x, d.j_y, d.j_psi);
  });
  m.def("channel_derivatives_asymptotic", [](const Pose& p, const ArrayConfig& c) {
    const ChannelDerivatives d = channel_derivatives_asymptotic(p, c);
    return py::make_tuple(d.j_x, d.j_y, d.j_psi);
  });
  m.def("geometry_summary", &geometry_summary);
  m.def("fresnel_distance", &fresnel_distance);

  m.def("ctrv_transition", &ctrv_transition, py::arg("state"), py::arg("tau"));
  m.def("ctrv_jacobian", &ctrv_jacobian, py::arg("state"), py::arg("tau"));

  m.def(
      "combiner_random",
      [](int n_rf, int n_b, std::uint64_t seed) {
        Rng rng(seed);
        return combiner_random(rng, n_rf, n_b).matrix();
      },
      py::arg("n_rf"), py::arg("n_b"), py::arg("seed"));
  m.def(
      "combiner_qom",
      [](const Pose& p, const ArrayConfig& c, int n_rf, const std::string& ordering) {
        QomOrdering o = QomOrdering::mixed_edge_center;
        if (ordering == "center_first") o = QomOrdering::center_first;
        else if (ordering == "edge_first") o = QomOrdering::edge_first;
        else if (ordering != "mixed") throw InvalidArgument("unknown ordering " + ordering);
        return combiner_qom(p, c, n_rf, o).matrix();
      },
      py::arg("pose"), py::arg("cfg"), py::arg("n_rf"), py::arg("ordering") = "mixed");
  m.def("qom_resolution", &qom_resolution);

  m.def(
      "avg_fisher",
      [](const Pose& p, const ArrayConfig& c, const CMatrix& q, double p_m, double noise_power) {
        const Combiner comb = Combiner::from_matrix(q, false);
        const AvgFisher f = avg_fisher(channel_derivatives(p, c), comb, p_m, noise_power, c.n_m);
        return py::make_tuple(f.f_x, f.f_y, f.f_psi);
      },
      py::arg("pose"), py::arg("cfg"), py::arg("q"), py::arg("p_m"), py::arg("noise_power"));
  m.def(
      "fisher_scaling_bounds",
      [](const Pose& p, const ArrayConfig& c, double p_m, double noise_power) {
        const FisherBounds b = fisher_scaling_bounds(p, c, p_m, noise_power);
        return py::make_tuple(b.position, b.orientation);
      },
      py::arg("pose"), py::arg("cfg"), py::arg("p_m"), py::arg("noise_power"));
  m.def("dbm_to_watts", &dbm_to_watts);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_static("desk", &ScenarioConfig::desk)
      .def_static("full_scale", &ScenarioConfig::full_scale)
      .def_static("from_json", &scenario_from_json)
      .def_static("load", &load_scenario)
      .def("to_json", &scenario_to_json)
      .def_readwrite("k_steps", &ScenarioConfig::k_steps)
      .def_readwrite("n_trials", &ScenarioConfig::n_trials)
      .def_readwrite("n_rf", &ScenarioConfig::n_rf)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("p_m_dbm", &ScenarioConfig::p_m_dbm)
      .def_readwrite("noise_power_dbm", &ScenarioConfig::noise_power_dbm)
      .def_readwrite("threads", &ScenarioConfig::threads)
      .def_readwrite("initial_state", &ScenarioConfig::initial_state)
      .def_readonly("array", &ScenarioConfig::array)
      .def_property_readonly("hash", &config_hash);

  m.def(
      "run_campaign",
      [](const ScenarioConfig& cfg, const std::vector<std::string>& schemes) {
        CampaignResult r;
        {
          py::gil_scoped_release release;
          r = run_campaign(cfg, parse_schemes(cfg, schemes));
        }
        py::dict out;
        for (const auto& s : r.schemes) out[py::str(s.scheme)] = scheme_dict(s);
        return py::make_tuple(out, campaign_csv(r));
      },
      py::arg("cfg"), py::arg("schemes"),
      "Runs a tracking campaign. Returns (per-scheme metrics, CSV text).");
  m.def(
      "run_crb",
      [](const ScenarioConfig& cfg, const std::string& policy, int samples) {
        std::vector<CrbRow> rows;
        const CombinerKind kind = parse_combiner_kind(policy);
        {
          py::gil_scoped_release release;
          rows = run_crb(cfg, kind, samples);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["k"] = r.k;
          d["bcrb_x"] = r.bcrb_x;
          d["bcrb_y"] = r.bcrb_y;
          d["bcrb_psi"] = r.bcrb_psi;
          d["position_trace"] = r.position_trace;
          out.append(d);
        }
        return out;
      },
      py::arg("cfg"), py::arg("policy") = "fd", py::arg("samples") = 100);
}
