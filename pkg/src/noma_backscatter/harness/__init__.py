"""Scenario library, Monte-Carlo runner and run comparison."""

from .scenarios import ConfigError, ScenarioConfig, builtin, list_scenarios, load_config
from .runner import run_scenario, run_trace, summarize, write_outputs
from .compare import compare_runs, paired_deltas
