"""Online acting and planning for a simulated object-collection robot."""

from .domain import build_collection_domain
from .engine import ActingEngine, EngineFault, QueueTriple, TraceLog
from .harness import TrialReport, replay, run, run_trial
from .planner import Planner, cluster_rollouts, select_method_instance
from .refinement import Domain, MethodDefinition, TaskSignature, applicable_instances
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict, shipped_scenarios
from .state import WorldState
from .utility import TraceStep, UtilityParams, utility

__all__ = [
    "ActingEngine", "Domain", "EngineFault", "MethodDefinition", "Planner", "QueueTriple",
    "Scenario", "ScenarioError", "TaskSignature", "TraceLog", "TraceStep", "UtilityParams",
    "WorldState", "applicable_instances", "build_collection_domain", "cluster_rollouts",
    "TrialReport", "load_scenario", "replay", "run", "run_trial", "scenario_from_dict",
    "select_method_instance", "shipped_scenarios", "utility",
]

__version__ = "0.1.0"
