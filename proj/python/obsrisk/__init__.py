"""Causal evaluation of risk scores deployed into the process that generated their training data."""

from ._obsrisk import (
    DomainError,
    Estimate,
    Expression,
    InconsistencyError,
    NumericFailure,
    ObsriskError,
    ParseError,
    Policy,
    RangeError,
    RiskScore,
    ScenarioModel,
    ValidationError,
    baseline_policy,
    builtin_scenarios,
    check_assumptions,
    delta,
    dump_scenario,
    expertise_experiment,
    find_roots,
    integrate,
    iterate_deployment,
    load_scenario,
    maximize_1d,
    mc_mean,
    mean_outcome,
    optimal_policy,
    optimal_rule,
    optimal_value,
    parse_scenario,
    potential_mean,
    run_cli,
    score_from,
    sweep_theta,
    treat_all_policy,
    treat_none_policy,
    treated_set,
)

__all__ = [name for name in dir() if not name.startswith("_")]
