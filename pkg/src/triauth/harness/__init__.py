from .matrix import (
    ComparisonMatrix,
    ScenarioResult,
    load_fixtures,
    run_matrix,
    run_scenario,
    scenarios,
    write_outputs,
)
from .scenarios import CRITERIA, MECHANISMS, SCRIPTS, Environment, Scenario

__all__ = [
    "CRITERIA",
    "MECHANISMS",
    "SCRIPTS",
    "ComparisonMatrix",
    "Environment",
    "Scenario",
    "ScenarioResult",
    "load_fixtures",
    "run_matrix",
    "run_scenario",
    "scenarios",
    "write_outputs",
]
