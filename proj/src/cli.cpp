#include "obsrisk/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "obsrisk/dynamics.hpp"
#include "obsrisk/errors.hpp"
#include "obsrisk/evaluation.hpp"
#include "obsrisk/scenario_io.hpp"

namespace obsrisk::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string scenario = "toy";
  std::string backend = "quad";
  std::int64_t n_samples = 1'000'000;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  double abs_tol = 1e-9;
  std::string format = "csv";
  std::string out_path;

  std::string policy = "baseline";
  double theta_min = 0.0;
  double theta_max = 0.30;
  int steps = 31;
  std::optional<double> theta;
  std::optional<std::string> comparator;
  int horizon = 10;
  std::optional<std::string> pi0_skilled;
};

double round12(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

BackendSpec backend_from(const Options& o) {
  BackendSpec b;
  b.quadrature.abs_tol = o.abs_tol;
  if (o.backend == "quad") {
    b.method = Method::kQuadrature;
  } else if (o.backend == "exact") {
    b.method = Method::kExactEnumeration;
  } else {
    if (!o.seed) throw UsageError("--seed is required with --backend mc");
    b.method = Method::kMonteCarlo;
    b.monte_carlo.n_samples = o.n_samples;
    b.monte_carlo.seed = *o.seed;
    b.monte_carlo.threads = o.threads;
  }
  return b;
}

double metadata_number(const ScenarioModel& m, const std::string& key) {
  const auto it = m.metadata().find(key);
  if (it == m.metadata().end()) {
    throw UsageError("--" + key + " is required for scenario '" + m.name() +
                     "'");
  }
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ValidationError("scenario metadata '" + key + "' is not a number");
  }
}

double theta_of(const Options& o, const ScenarioModel& m) {
  return o.theta ? *o.theta : metadata_number(m, "theta");
}

Comparator comparator_of(const Options& o, const ScenarioModel& m) {
  std::string c = "ge";
  if (o.comparator) {
    c = *o.comparator;
  } else if (auto it = m.metadata().find("comparator");
             it != m.metadata().end()) {
    c = it->second;
  }
  if (c == "ge") return Comparator::kGreaterEqual;
  if (c == "gt") return Comparator::kGreater;
  throw UsageError("comparator must be 'ge' or 'gt'");
}

Policy policy_from(const std::string& spec, const ScenarioModel& model) {
  if (spec == "baseline") return baseline_policy(model);
  if (spec == "treat-none") return treat_none_policy();
  if (spec == "treat-all") return treat_all_policy();
  if (spec == "optimal") return pointwise_optimal_policy(model);
  if (spec.rfind("expr:", 0) == 0) {
    return Policy::stochastic(parse_expression(spec.substr(5)));
  }
  if (spec.rfind("threshold:", 0) == 0) {
    std::string rest = spec.substr(10);
    Comparator cmp = Comparator::kGreaterEqual;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      const std::string c = rest.substr(colon + 1);
      if (c == "gt") {
        cmp = Comparator::kGreater;
      } else if (c != "ge") {
        throw UsageError("threshold comparator must be 'ge' or 'gt'");
      }
      rest = rest.substr(0, colon);
    }
    double theta = 0.0;
    try {
      std::size_t used = 0;
      theta = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
    } catch (const std::exception&) {
      throw UsageError("bad threshold value '" + rest + "'");
    }
    return Policy::threshold(score_from(model, baseline_policy(model)), theta,
                             cmp);
  }
  throw UsageError(
      "--policy must be baseline, treat-none, treat-all, optimal, "
      "threshold:<theta>[:ge|gt] or expr:<expression>");
}

ordered_json estimate_json(const Estimate& e) {
  ordered_json j;
  j["value"] = round12(e.value);
  j["error_bound"] = round12(e.error_bound);
  j["backend"] = numerics::to_string(e.backend);
  return j;
}

ordered_json set_json(const TreatedSet& s) {
  ordered_json arr = ordered_json::array();
  if (s.is_discrete()) {
    for (double p : s.points()) arr.push_back(round12(p));
  } else {
    for (const auto& iv : s.intervals()) {
      arr.push_back({round12(iv.lo), round12(iv.hi)});
    }
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Commands. Each writes its report to `os` and returns the exit code.

int cmd_validate(const Options& o, std::ostream& os) {
  const ScenarioModel model = load_scenario(o.scenario);
  const AssumptionReport r =
      check_assumptions(model, baseline_policy(model), backend_from(o));
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    j["status"] = r.positivity_t0 ? "pass" : "fail";
    j["positivity_t0"] = r.positivity_t0;
    ordered_json w = ordered_json::array();
    for (const auto& p : r.witnesses) {
      ordered_json item;
      item["x"] = round12(p.x);
      item["u"] = p.u ? ordered_json(round12(*p.u)) : ordered_json(nullptr);
      item["propensity"] = round12(p.propensity);
      w.push_back(std::move(item));
    }
    j["witnesses"] = std::move(w);
    j["frechet_lower_treatment_helps"] =
        round12(r.frechet_lower_treatment_helps);
    j["frechet_lower_treatment_hurts"] =
        round12(r.frechet_lower_treatment_hurts);
    j["notes"] = r.notes;
    os << j.dump(2) << '\n';
  } else {
    os << "item,value,detail\n";
    os << "positivity_t0," << (r.positivity_t0 ? "pass" : "fail") << ",\n";
    for (const auto& p : r.witnesses) {
      std::string where = "x=" + format_number(p.x);
      if (p.u) where += " u=" + format_number(*p.u);
      os << "witness," << format_number(p.propensity) << ',' << where << '\n';
    }
    os << "frechet_lower_treatment_helps,"
       << format_number(r.frechet_lower_treatment_helps) << ",\n";
    os << "frechet_lower_treatment_hurts,"
       << format_number(r.frechet_lower_treatment_hurts) << ",\n";
    for (const auto& n : r.notes) os << "note,," << csv_field(n) << '\n';
  }
  return r.positivity_t0 ? kExitOk : kExitValidation;
}

int cmd_evaluate(const Options& o, std::ostream& os) {
  const ScenarioModel model = load_scenario(o.scenario);
  const Policy policy = policy_from(o.policy, model);
  const BackendSpec backend = backend_from(o);
  const auto strata = default_strata(model);
  const EvaluationReport r = evaluate(model, policy, backend, strata);
  const Estimate d = delta(model, baseline_policy(model), policy, backend);
  const double regret_err =
      r.mean_outcome.error_bound + r.optimal_value.error_bound;
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    j["policy"] = o.policy;
    j["mean_outcome"] = estimate_json(r.mean_outcome);
    j["optimal_value"] = estimate_json(r.optimal_value);
    j["regret"] = round12(r.regret);
    j["regret_error_bound"] = round12(regret_err);
    j["delta_vs_baseline"] = estimate_json(d);
    ordered_json rows = ordered_json::array();
    for (const auto& s : r.strata) {
      ordered_json item;
      item["stratum"] = s.label;
      item["conditional_mean"] = estimate_json(s.conditional_mean);
      rows.push_back(std::move(item));
    }
    j["strata"] = std::move(rows);
    os << j.dump(2) << '\n';
    return kExitOk;
  }
  const auto row = [&](const std::string& name, const Estimate& e) {
    os << csv_field(name) << ',' << format_number(e.value) << ','
       << format_number(e.error_bound) << ',' << numerics::to_string(e.backend)
       << '\n';
  };
  os << "quantity,value,error_bound,backend\n";
  row("mean_outcome", r.mean_outcome);
  row("optimal_value", r.optimal_value);
  row("regret", {r.regret, regret_err, r.mean_outcome.backend});
  row("delta_vs_baseline", d);
  for (const auto& s : r.strata) row("stratum:" + s.label, s.conditional_mean);
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& os) {
  if (o.steps < 2) throw UsageError("--steps must be >= 2");
  if (!(o.theta_min < o.theta_max)) {
    throw UsageError("--theta-min must be below --theta-max");
  }
  const ScenarioModel model = load_scenario(o.scenario);
  const BackendSpec backend = backend_from(o);
  std::vector<double> thetas;
  for (int i = 0; i < o.steps; ++i) {
    thetas.push_back(i == o.steps - 1
                         ? o.theta_max
                         : o.theta_min + (o.theta_max - o.theta_min) * i /
                                             (o.steps - 1));
  }
  const auto rows = sweep_theta(model, baseline_policy(model), thetas,
                                comparator_of(o, model), backend);
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
      ordered_json item;
      item["theta"] = round12(r.theta);
      item["delta"] = round12(r.delta.value);
      item["delta_err"] = round12(r.delta.error_bound);
      item["mean_outcome_t1"] = round12(r.mean_outcome_t1.value);
      item["treated_mass"] = round12(r.treated_mass);
      item["backend"] = numerics::to_string(r.delta.backend);
      arr.push_back(std::move(item));
    }
    j["rows"] = std::move(arr);
    os << j.dump(2) << '\n';
    return kExitOk;
  }
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << format_number(r.theta) << ',' << format_number(r.delta.value) << ','
       << format_number(r.delta.error_bound) << ','
       << format_number(r.mean_outcome_t1.value) << ','
       << format_number(r.treated_mass) << '\n';
  }
  return kExitOk;
}

int cmd_regions(const Options& o, std::ostream& os) {
  const ScenarioModel model = load_scenario(o.scenario);
  const Policy policy =
      Policy::threshold(score_from(model, baseline_policy(model)),
                        theta_of(o, model), comparator_of(o, model));
  const auto reports = regions(model, policy);
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    j["theta"] = round12(policy.theta());
    ordered_json arr = ordered_json::array();
    for (const auto& r : reports) {
      ordered_json item;
      item["u"] = r.u ? ordered_json(round12(*r.u)) : ordered_json(nullptr);
      item["optimal"] = set_json(r.optimal);
      item["treated"] = set_json(r.treated);
      item["under_treated"] = set_json(r.under_treated);
      item["over_treated"] = set_json(r.over_treated);
      arr.push_back(std::move(item));
    }
    j["regions"] = std::move(arr);
    os << j.dump(2) << '\n';
    return kExitOk;
  }
  os << "region,u,lo,hi\n";
  for (const auto& r : reports) {
    const std::string u = r.u ? format_number(*r.u) : "";
    const auto emit = [&](const char* name, const TreatedSet& s) {
      if (s.is_discrete()) {
        for (double p : s.points()) {
          os << name << ',' << u << ',' << format_number(p) << ','
             << format_number(p) << '\n';
        }
        return;
      }
      for (const auto& iv : s.intervals()) {
        os << name << ',' << u << ',' << format_number(iv.lo) << ','
           << format_number(iv.hi) << '\n';
      }
    };
    emit("optimal", r.optimal);
    emit("treated", r.treated);
    emit("under_treated", r.under_treated);
    emit("over_treated", r.over_treated);
  }
  return kExitOk;
}

std::string decision_summary(const DeploymentStep& s,
                             const CovariateLaw& law) {
  if (!s.treated) return "stochastic";
  const double m = s.treated->mass(law);
  if (s.treated->empty()) return "treat-none";
  if (std::fabs(m - 1.0) <= 1e-12) return "treat-all";
  return "treat-partial";
}

std::string cycle_note(const DeploymentTrace& tr, int t) {
  if (!tr.cycle) return "";
  const Cycle c = *tr.cycle;
  if (t == c.start) return "start period=" + std::to_string(c.period);
  if (t >= c.start + c.period) {
    return "repeat of t=" + std::to_string(c.start + (t - c.start) % c.period);
  }
  return "";
}

int cmd_iterate(const Options& o, std::ostream& os) {
  if (o.horizon < 1) throw UsageError("--horizon must be >= 1");
  const ScenarioModel model = load_scenario(o.scenario);
  const DeploymentTrace tr =
      iterate_deployment(model, baseline_policy(model), theta_of(o, model),
                         comparator_of(o, model), o.horizon, backend_from(o));
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    ordered_json arr = ordered_json::array();
    for (const auto& s : tr.steps) {
      ordered_json item;
      item["t"] = s.t;
      item["decision"] = decision_summary(s, model.x_law());
      item["treated"] =
          s.treated ? set_json(*s.treated) : ordered_json(nullptr);
      item["mean_outcome"] = estimate_json(s.mean_outcome);
      arr.push_back(std::move(item));
    }
    j["steps"] = std::move(arr);
    if (tr.cycle) {
      j["cycle"] = {{"start", tr.cycle->start}, {"period", tr.cycle->period}};
    } else {
      j["cycle"] = nullptr;
    }
    os << j.dump(2) << '\n';
    return kExitOk;
  }
  os << "t,decision,treated_mass,mean_outcome,mean_outcome_err,cycle\n";
  for (const auto& s : tr.steps) {
    os << s.t << ',' << decision_summary(s, model.x_law()) << ','
       << (s.treated ? format_number(s.treated->mass(model.x_law())) : "")
       << ',' << format_number(s.mean_outcome.value) << ','
       << format_number(s.mean_outcome.error_bound) << ','
       << cycle_note(tr, s.t) << '\n';
  }
  return kExitOk;
}

int cmd_expertise(const Options& o, std::ostream& os) {
  const ScenarioModel model = load_scenario(o.scenario);
  std::string skilled;
  if (o.pi0_skilled) {
    skilled = *o.pi0_skilled;
  } else if (auto it = model.metadata().find("pi0_skilled");
             it != model.metadata().end()) {
    skilled = it->second;
  } else {
    throw UsageError("--pi0-skilled is required for scenario '" +
                     model.name() + "'");
  }
  const ExpertiseComparison c = expertise_experiment(
      model, model.pi0(), parse_expression(skilled), theta_of(o, model),
      comparator_of(o, model), backend_from(o));
  if (o.format == "json") {
    ordered_json j;
    j["scenario"] = model.name();
    j["pi0_base"] = c.base_scenario.pi0().to_string();
    j["pi0_skilled"] = c.skilled_scenario.pi0().to_string();
    j["e0"] = estimate_json(c.e0);
    j["e0_star"] = estimate_json(c.e0_star);
    j["e1"] = estimate_json(c.e1);
    j["e1_star"] = estimate_json(c.e1_star);
    j["skill_base"] =
        c.skill_base ? ordered_json(round12(*c.skill_base)) : ordered_json(nullptr);
    j["skill_skilled"] = c.skill_skilled ? ordered_json(round12(*c.skill_skilled))
                                         : ordered_json(nullptr);
    j["inversion"] = c.inversion;
    j["notes"] = c.notes;
    os << j.dump(2) << '\n';
    return kExitOk;
  }
  os << "quantity,value,error_bound\n";
  const auto row = [&](const char* name, const Estimate& e) {
    os << name << ',' << format_number(e.value) << ','
       << format_number(e.error_bound) << '\n';
  };
  row("e0", c.e0);
  row("e0_star", c.e0_star);
  row("e1", c.e1);
  row("e1_star", c.e1_star);
  if (c.skill_base) os << "skill_base," << format_number(*c.skill_base) << ",\n";
  if (c.skill_skilled) {
    os << "skill_skilled," << format_number(*c.skill_skilled) << ",\n";
  }
  os << "inversion," << (c.inversion ? "true" : "false") << ",\n";
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("scenario,--scenario", o.scenario,
                  "Built-in scenario name or path to a scenario JSON file")
      ->capture_default_str();
  sub->add_option("--backend", o.backend, "Numeric backend")
      ->check(CLI::IsMember({"quad", "mc", "exact"}))
      ->capture_default_str();
  sub->add_option("--n-samples", o.n_samples, "Monte Carlo sample count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Monte Carlo seed (required with mc)");
  sub->add_option("--threads", o.threads,
                  "Monte Carlo worker threads (0 = all cores)")
      ->capture_default_str();
  sub->add_option("--abs-tol", o.abs_tol, "Quadrature absolute tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub->add_option("--out", o.out_path, "Write output to this file");
}

void add_threshold_flags(CLI::App* sub, Options& o) {
  sub->add_option("theta,--theta", o.theta, "Risk-score threshold in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--cmp", o.comparator, "Threshold comparator")
      ->check(CLI::IsMember({"ge", "gt"}));
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Options o;
  CLI::App app{
      "Simulates deploying observable-outcome risk scores into the decision "
      "process that generated their training data.",
      "obsrisk"};
  app.require_subcommand(1);

  CLI::App* validate = app.add_subcommand(
      "validate", "Check positivity and Frechet bounds for a scenario");
  add_common(validate, o);

  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Mean outcome, optimal value and regret of a policy");
  add_common(evaluate_cmd, o);
  evaluate_cmd
      ->add_option("--policy", o.policy,
                   "baseline | treat-none | treat-all | optimal | "
                   "threshold:<theta>[:ge|gt] | expr:<expression>")
      ->capture_default_str();

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Delta of deploying threshold(s, theta) over a theta grid");
  add_common(sweep, o);
  sweep->add_option("theta-min,--theta-min", o.theta_min)
      ->capture_default_str();
  sweep->add_option("theta-max,--theta-max", o.theta_max)
      ->capture_default_str();
  sweep->add_option("steps,--steps", o.steps, "Grid points (>= 2)")
      ->capture_default_str();
  sweep->add_option("--cmp", o.comparator, "Threshold comparator")
      ->check(CLI::IsMember({"ge", "gt"}));

  CLI::App* regions_cmd = app.add_subcommand(
      "regions", "Optimal, treated, under- and over-treated regions");
  add_common(regions_cmd, o);
  add_threshold_flags(regions_cmd, o);

  CLI::App* iterate = app.add_subcommand(
      "iterate", "Retrain-redeploy loop with cycle detection");
  add_common(iterate, o);
  add_threshold_flags(iterate, o);
  iterate->add_option("--horizon", o.horizon, "Steps including t = 0")
      ->capture_default_str();

  CLI::App* expertise = app.add_subcommand(
      "expertise", "Compare a baseline and a more skilled decision process");
  add_common(expertise, o);
  add_threshold_flags(expertise, o);
  expertise->add_option("--pi0-skilled", o.pi0_skilled,
                        "Baseline propensity expression of the skilled system");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::ostringstream buffer;
  int code = kExitOk;
  try {
    if (validate->parsed()) {
      code = cmd_validate(o, buffer);
    } else if (evaluate_cmd->parsed()) {
      code = cmd_evaluate(o, buffer);
    } else if (sweep->parsed()) {
      code = cmd_sweep(o, buffer);
    } else if (regions_cmd->parsed()) {
      code = cmd_regions(o, buffer);
    } else if (iterate->parsed()) {
      code = cmd_iterate(o, buffer);
    } else {
      code = cmd_expertise(o, buffer);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kNumericFailure:
      case ErrorKind::kInconsistency:
        return kExitNumeric;
      default:
        return kExitValidation;
    }
  }

  if (o.out_path.empty()) {
    out << buffer.str();
  } else {
    std::ofstream file(o.out_path, std::ios::binary);
    if (!file) {
      err << "error: cannot write '" << o.out_path << "'\n";
      return kExitValidation;
    }
    file << buffer.str();
  }
  return code;
}

}  // namespace obsrisk::cli
