from .config import ConfigError, ScenarioConfig, format_config, load_config, parse_config
from .experiments import SummaryStats, run_los_study, run_sweep, summarize
from .io import emit_results
from .runner import Policy, TrialRecord, prepare_trial, run_trial, run_trials

__all__ = [
    "ConfigError", "ScenarioConfig", "format_config", "load_config", "parse_config",
    "SummaryStats", "run_los_study", "run_sweep", "summarize", "emit_results",
    "Policy", "TrialRecord", "prepare_trial", "run_trial", "run_trials",
]
