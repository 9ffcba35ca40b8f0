#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "obsrisk/cli.hpp"
#include "obsrisk/dynamics.hpp"
#include "obsrisk/errors.hpp"
#include "obsrisk/evaluation.hpp"
#include "obsrisk/numerics.hpp"
#include "obsrisk/scenario_io.hpp"

namespace py = pybind11;
using namespace obsrisk;

namespace {

BackendSpec make_backend(const std::string& backend, std::int64_t n_samples,
                         std::uint64_t seed, double abs_tol, unsigned threads) {
  BackendSpec b;
  b.quadrature.abs_tol = abs_tol;
  if (backend == "quad") {
    b.method = Method::kQuadrature;
  } else if (backend == "exact") {
    b.method = Method::kExactEnumeration;
  } else if (backend == "mc") {
    b.method = Method::kMonteCarlo;
    b.monte_carlo.n_samples = n_samples;
    b.monte_carlo.seed = seed;
    b.monte_carlo.threads = threads;
  } else {
    throw py::value_error("backend must be 'quad', 'mc' or 'exact'");
  }
  return b;
}

Comparator make_comparator(const std::string& c) {
  if (c == "ge") return Comparator::kGreaterEqual;
  if (c == "gt") return Comparator::kGreater;
  throw py::value_error("comparator must be 'ge' or 'gt'");
}

py::list intervals_of(const TreatedSet& s) {
  py::list out;
  if (s.is_discrete()) {
    for (double p : s.points()) out.append(py::make_tuple(p, p));
  } else {
    for (const auto& iv : s.intervals()) out.append(py::make_tuple(iv.lo, iv.hi));
  }
  return out;
}

// Keyword arguments shared by every population-level operation.
#define OBSRISK_BACKEND_ARGS                                               \
  py::kw_only(), py::arg("backend") = "quad",                              \
      py::arg("n_samples") = 1'000'000, py::arg("seed") = 0,               \
      py::arg("abs_tol") = 1e-9, py::arg("threads") = 1

}  // namespace

PYBIND11_MODULE(_obsrisk, m) {
  m.doc() = "Deployment of observable-outcome risk scores: causal evaluation core";

  auto base = py::register_exception<Error>(m, "ObsriskError");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<InconsistencyError>(m, "InconsistencyError", base.ptr());
  py::register_exception<numerics::NumericFailure>(m, "NumericFailure", base.ptr());

  py::class_<Estimate>(m, "Estimate")
      .def_readonly("value", &Estimate::value)
      .def_readonly("error_bound", &Estimate::error_bound)
      .def_property_readonly(
          "backend", [](const Estimate& e) { return numerics::to_string(e.backend); })
      .def("__repr__", [](const Estimate& e) {
        std::ostringstream os;
        os.precision(12);
        os << "Estimate(value=" << e.value << ", error_bound=" << e.error_bound
           << ", backend='" << numerics::to_string(e.backend) << "')";
        return os.str();
      });

  py::class_<Expression>(m, "Expression")
      .def(py::init([](const std::string& s) { return parse_expression(s); }),
           py::arg("source"))
      .def("evaluate", &Expression::evaluate, py::arg("x"), py::arg("u") = 0.0)
      .def("__call__", &Expression::evaluate, py::arg("x"), py::arg("u") = 0.0)
      .def("__str__", &Expression::to_string)
      .def("__repr__",
           [](const Expression& e) { return "Expression('" + e.to_string() + "')"; })
      .def("__eq__", [](const Expression& a, const Expression& b) { return a == b; })
      .def_property_readonly("uses_u", [](const Expression& e) {
        return e.references(Variable::kU);
      });

  py::class_<ScenarioModel>(m, "ScenarioModel")
      .def_property_readonly("name", &ScenarioModel::name)
      .def_property_readonly("mu0", &ScenarioModel::mu0)
      .def_property_readonly("mu1", &ScenarioModel::mu1)
      .def_property_readonly("pi0", &ScenarioModel::pi0)
      .def_property_readonly("metadata", &ScenarioModel::metadata)
      .def_property_readonly("is_discrete",
                             [](const ScenarioModel& s) { return s.x_law().is_discrete(); })
      .def("with_pi0", [](const ScenarioModel& s, const std::string& e) {
        return s.with_pi0(parse_expression(e));
      });

  py::class_<RiskScore>(m, "RiskScore")
      .def("__call__", &RiskScore::operator(), py::arg("x"))
      .def_property_readonly("generation", &RiskScore::generation);

  py::class_<Policy>(m, "Policy")
      .def_static(
          "stochastic",
          [](const std::string& e) { return Policy::stochastic(parse_expression(e)); },
          py::arg("propensity"))
      .def_static(
          "threshold",
          [](const RiskScore& s, double theta, const std::string& cmp) {
            return Policy::threshold(s, theta, make_comparator(cmp));
          },
          py::arg("score"), py::arg("theta"), py::arg("comparator") = "ge")
      .def_property_readonly("is_threshold", &Policy::is_threshold)
      .def_property_readonly("generation", &Policy::generation)
      .def("propensity", &Policy::propensity, py::arg("x"), py::arg("u") = 0.0);

  m.def("load_scenario", &load_scenario, py::arg("name_or_path"));
  m.def("parse_scenario", [](const std::string& text) { return parse_scenario(text); },
        py::arg("text"));
  m.def("dump_scenario", &dump_scenario, py::arg("model"));
  m.def("builtin_scenarios", &builtin_scenario_names);

  m.def("baseline_policy", &baseline_policy, py::arg("model"));
  m.def("treat_none_policy", &treat_none_policy);
  m.def("treat_all_policy", &treat_all_policy);
  m.def("optimal_policy", &pointwise_optimal_policy, py::arg("model"));
  m.def("score_from", &score_from, py::arg("model"), py::arg("policy"));
  m.def(
      "optimal_rule",
      [](const ScenarioModel& s, double x, std::optional<double> u) {
        return optimal_rule(s, x, u);
      },
      py::arg("model"), py::arg("x"), py::arg("u") = py::none());
  m.def(
      "potential_mean",
      [](const ScenarioModel& s, int arm, double x, std::optional<double> u) {
        if (arm != 0 && arm != 1) throw py::value_error("arm must be 0 or 1");
        return potential_mean(s, arm == 1 ? Arm::kTreated : Arm::kControl, x, u);
      },
      py::arg("model"), py::arg("arm"), py::arg("x"), py::arg("u") = py::none());

  m.def(
      "mean_outcome",
      [](const ScenarioModel& s, const Policy& p, const std::string& b,
         std::int64_t n, std::uint64_t seed, double tol, unsigned threads) {
        return mean_outcome(s, p, make_backend(b, n, seed, tol, threads));
      },
      py::arg("model"), py::arg("policy"), OBSRISK_BACKEND_ARGS);
  m.def(
      "delta",
      [](const ScenarioModel& s, const Policy& p0, const Policy& p1,
         const std::string& b, std::int64_t n, std::uint64_t seed, double tol,
         unsigned threads) {
        return delta(s, p0, p1, make_backend(b, n, seed, tol, threads));
      },
      py::arg("model"), py::arg("policy0"), py::arg("policy1"),
      OBSRISK_BACKEND_ARGS);
  m.def(
      "optimal_value",
      [](const ScenarioModel& s, const std::string& b, std::int64_t n,
         std::uint64_t seed, double tol, unsigned threads) {
        return optimal_value(s, make_backend(b, n, seed, tol, threads));
      },
      py::arg("model"), OBSRISK_BACKEND_ARGS);
  m.def(
      "treated_set",
      [](const ScenarioModel& s, const Policy& p) {
        return intervals_of(treated_set(s, p));
      },
      py::arg("model"), py::arg("policy"));
  m.def(
      "sweep_theta",
      [](const ScenarioModel& s, const std::vector<double>& thetas,
         const std::string& cmp, const std::string& b, std::int64_t n,
         std::uint64_t seed, double tol, unsigned threads) {
        py::list out;
        for (const auto& r : sweep_theta(s, baseline_policy(s), thetas,
                                         make_comparator(cmp),
                                         make_backend(b, n, seed, tol, threads))) {
          py::dict row;
          row["theta"] = r.theta;
          row["delta"] = r.delta;
          row["mean_outcome_t1"] = r.mean_outcome_t1;
          row["treated_mass"] = r.treated_mass;
          out.append(row);
        }
        return out;
      },
      py::arg("model"), py::arg("thetas"), py::arg("comparator") = "ge",
      OBSRISK_BACKEND_ARGS);
  m.def(
      "check_assumptions",
      [](const ScenarioModel& s) {
        const AssumptionReport r = check_assumptions(s, baseline_policy(s));
        py::dict d;
        d["positivity_t0"] = r.positivity_t0;
        d["frechet_lower_treatment_helps"] = r.frechet_lower_treatment_helps;
        d["frechet_lower_treatment_hurts"] = r.frechet_lower_treatment_hurts;
        d["notes"] = r.notes;
        return d;
      },
      py::arg("model"));
  m.def(
      "iterate_deployment",
      [](const ScenarioModel& s, double theta, const std::string& cmp,
         int horizon, const std::string& b, std::int64_t n, std::uint64_t seed,
         double tol, unsigned threads) {
        const DeploymentTrace tr =
            iterate_deployment(s, baseline_policy(s), theta, make_comparator(cmp),
                               horizon, make_backend(b, n, seed, tol, threads));
        py::list steps;
        for (const auto& st : tr.steps) {
          py::dict d;
          d["t"] = st.t;
          d["mean_outcome"] = st.mean_outcome;
          d["treated"] = st.treated ? py::object(intervals_of(*st.treated))
                                    : py::object(py::none());
          steps.append(d);
        }
        py::dict out;
        out["steps"] = steps;
        out["cycle"] = tr.cycle ? py::object(py::make_tuple(tr.cycle->start,
                                                            tr.cycle->period))
                                : py::object(py::none());
        return out;
      },
      py::arg("model"), py::arg("theta"), py::arg("comparator") = "ge",
      py::arg("horizon") = 10, OBSRISK_BACKEND_ARGS);
  m.def(
      "expertise_experiment",
      [](const ScenarioModel& s, const std::string& pi0_skilled, double theta,
         const std::string& cmp, const std::string& b, std::int64_t n,
         std::uint64_t seed, double tol, unsigned threads) {
        const ExpertiseComparison c = expertise_experiment(
            s, s.pi0(), parse_expression(pi0_skilled), theta, make_comparator(cmp),
            make_backend(b, n, seed, tol, threads));
        py::dict d;
        d["e0"] = c.e0;
        d["e0_star"] = c.e0_star;
        d["e1"] = c.e1;
        d["e1_star"] = c.e1_star;
        d["inversion"] = c.inversion;
        d["notes"] = c.notes;
        return d;
      },
      py::arg("model"), py::arg("pi0_skilled"), py::arg("theta"),
      py::arg("comparator") = "ge", OBSRISK_BACKEND_ARGS);

  // Numerics over Python callables run single-threaded under the GIL.
  m.def(
      "integrate",
      [](const std::function<double(double)>& f, double lo, double hi,
         double abs_tol) {
        numerics::QuadratureSpec spec;
        spec.abs_tol = abs_tol;
        return numerics::integrate(f, CovariateLaw::uniform(lo, hi), spec);
      },
      py::arg("f"), py::arg("lo") = 0.0, py::arg("hi") = 1.0,
      py::arg("abs_tol") = 1e-9);
  m.def(
      "mc_mean",
      [](const std::function<double(double)>& f, double lo, double hi,
         std::int64_t n, std::uint64_t seed) {
        numerics::MonteCarloSpec spec;
        spec.n_samples = n;
        spec.seed = seed;
        return numerics::mc_mean(f, CovariateLaw::uniform(lo, hi), spec);
      },
      py::arg("f"), py::arg("lo") = 0.0, py::arg("hi") = 1.0,
      py::arg("n_samples") = 100'000, py::arg("seed") = 0);
  m.def("find_roots", &numerics::find_roots, py::arg("f"), py::arg("lo"),
        py::arg("hi"), py::arg("tol") = 1e-12,
        py::arg("scan_cells") = numerics::kDefaultScanCells);
  m.def(
      "maximize_1d",
      [](const std::function<double(double)>& f, double lo, double hi, double tol) {
        const auto r = numerics::maximize_1d(f, lo, hi, tol);
        return py::make_tuple(r.argmax, r.value);
      },
      py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 1e-10);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
