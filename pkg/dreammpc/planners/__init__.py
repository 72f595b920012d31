"""Action selection: policy-only, MPPI and gradient-based Dream-MPC."""

from dreammpc.planners.candidates import (
    CandidateSet,
    ReusePlan,
    gaussian_candidates,
    init_with_reuse,
    rollout_policy_candidates,
)
from dreammpc.planners.dream_mpc import dream_mpc_plan, grad_ascent_step
from dreammpc.planners.mppi import MPPIWarmStart, mppi_plan, mppi_refit
from dreammpc.planners.objective import CandidatePlan, ObjectiveOptions, evaluate_plans, objective
from dreammpc.planners.policy import policy_only_act
from dreammpc.planners.registry import Planner, build_planner

__all__ = [
    "CandidatePlan",
    "CandidateSet",
    "MPPIWarmStart",
    "ObjectiveOptions",
    "Planner",
    "ReusePlan",
    "build_planner",
    "dream_mpc_plan",
    "evaluate_plans",
    "gaussian_candidates",
    "grad_ascent_step",
    "init_with_reuse",
    "mppi_plan",
    "mppi_refit",
    "objective",
    "policy_only_act",
    "rollout_policy_candidates",
]
