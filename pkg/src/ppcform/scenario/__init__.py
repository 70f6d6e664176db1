from .config import (ConfigParseError, ConfigValidationError, ScenarioConfig, load_config,
                     paper_scenario)
from .metrics import RunMetrics, compute_metrics
from .sim import RunResult, Simulation, SimulationAbort, Trace, formation_plan_eval, run

__all__ = ["ConfigParseError", "ConfigValidationError", "ScenarioConfig", "load_config",
           "paper_scenario", "RunMetrics", "compute_metrics", "RunResult", "Simulation",
           "SimulationAbort", "Trace", "formation_plan_eval", "run"]
