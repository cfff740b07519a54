"""Cost-optimal tabletop rearrangement with lazy buffer allocation."""

from .baselines import BruteForceOracle, OracleTooLarge, brute_force_oracle, greedy_sampling_search, orla_action_search
from .cost import CostBreakdown, plan_cost
from .harness import generate_disc_instance, generate_shape_instance, run_benchmark, verify_plan
from .model import Action, Arrangement, Disc, Gridded, Instance, Plan, Pose, Prism, Scenario, Table
from .planner import RearrangementPlanner, check_instance
from .search import SearchConfig, SearchResult, plan_search
from .stability import AlwaysStable, SupportPolygonStability

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AlwaysStable",
    "Arrangement",
    "BruteForceOracle",
    "CostBreakdown",
    "Disc",
    "Gridded",
    "Instance",
    "OracleTooLarge",
    "Plan",
    "Pose",
    "Prism",
    "RearrangementPlanner",
    "Scenario",
    "SearchConfig",
    "SearchResult",
    "SupportPolygonStability",
    "Table",
    "brute_force_oracle",
    "check_instance",
    "generate_disc_instance",
    "generate_shape_instance",
    "greedy_sampling_search",
    "orla_action_search",
    "plan_cost",
    "plan_search",
    "run_benchmark",
    "verify_plan",
]
