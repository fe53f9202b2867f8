"""Two-layer AUV mission planning: ant colony routing over a waypoint graph and
firefly B-spline path planning through a synthetic dynamic ocean."""

from .aco_router import AcoConfig, MissionPlan, plan_mission
from .ffa_planner import FfaConfig, PlanResult, plan_path, replan
from .scenario import Scenario, bundled, run_scenario
from .synchron import MissionConfig, MissionLog, run_mission

__version__ = "0.1.0"

__all__ = [
    "AcoConfig", "FfaConfig", "MissionConfig", "MissionLog", "MissionPlan", "PlanResult", "Scenario",
    "bundled", "plan_mission", "plan_path", "replan", "run_mission", "run_scenario",
]
