"""Command-line front end."""

from .builtins import BUILTINS
from .main import main
from .report import RunResult, SweepResult, run_scenario, sweep_scenario
from .scenario import Expectation, ProgramSpec, ScenarioError, ScenarioSpec, parse_scenario

__all__ = [
    "BUILTINS", "Expectation", "ProgramSpec", "RunResult", "ScenarioError", "ScenarioSpec",
    "SweepResult", "main", "parse_scenario", "run_scenario", "sweep_scenario",
]
