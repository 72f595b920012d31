"""Stateful planner objects keyed by ``PlannerKind``.

A planner owns whatever it carries between environment steps (the reuse plan or
the MPPI warm start) and must be ``reset()`` at every episode start. ``last_plan``
holds the (H+1, A) sequence behind the most recent action, when there is one.
"""

import logging
from typing import Protocol

import numpy as np

from dreammpc.model.models import PlanDiagnostics, PlannerConfig, PlannerKind
from dreammpc.planners.candidates import ReusePlan
from dreammpc.planners.dream_mpc import dream_mpc_plan
from dreammpc.planners.mppi import MPPIWarmStart, mppi_plan
from dreammpc.planners.policy import policy_only_act
from dreammpc.worldmodel.world_model import EvalCounter

logger = logging.getLogger(__name__)


class Planner(Protocol):
    kind: PlannerKind

    def reset(self) -> None: ...

    def act(
        self, z: np.ndarray, rng: np.random.Generator, eval_mode: bool
    ) -> tuple[np.ndarray, PlanDiagnostics]: ...


class PolicyPlanner:
    """Acts with the policy prior; deterministic in evaluation."""

    kind = PlannerKind.POLICY

    def __init__(self, model, config: PlannerConfig):
        self.model = model
        self.config = config
        self.last_plan = None

    def reset(self) -> None:
        pass

    def act(self, z, rng, eval_mode):
        counter = EvalCounter()
        action = policy_only_act(self.model, z, eval_mode, rng, counter)
        return action, PlanDiagnostics(planner=self.kind, policy_evals=counter.policy_evals)


class DreamMPCPlanner:
    kind = PlannerKind.DREAM_MPC

    def __init__(self, model, config: PlannerConfig):
        self.model = model
        self.config = config
        self.reuse = ReusePlan.empty()
        self.last_plan: np.ndarray | None = None

    def reset(self) -> None:
        self.reuse = ReusePlan.empty()

    def act(self, z, rng, eval_mode):
        action, self.reuse, diagnostics = dream_mpc_plan(
            self.model, z, self.config, self.reuse, rng, EvalCounter()
        )
        if diagnostics.fallback:
            self.last_plan = None
        else:
            tail = self.reuse.shifted[diagnostics.chosen_index, :-1]
            self.last_plan = np.concatenate([action[None], tail], axis=0)
        return action, diagnostics


class MPPIPlanner:
    kind = PlannerKind.MPPI

    def __init__(self, model, config: PlannerConfig):
        self.model = model
        self.config = config
        self.warm_start: MPPIWarmStart | None = None
        self.last_plan: np.ndarray | None = None

    def reset(self) -> None:
        self.warm_start = None

    def act(self, z, rng, eval_mode):
        action, self.warm_start, diagnostics = mppi_plan(
            self.model, z, self.config, self.warm_start, rng, EvalCounter(), eval_mode=eval_mode
        )
        self.last_plan = None if self.warm_start is None else self.warm_start.mean.copy()
        return action, diagnostics


_PLANNERS = {
    PlannerKind.POLICY: PolicyPlanner,
    PlannerKind.DREAM_MPC: DreamMPCPlanner,
    PlannerKind.MPPI: MPPIPlanner,
}


def build_planner(kind: PlannerKind | str, model, config: PlannerConfig) -> Planner:
    """Instantiate the planner for ``kind`` around ``model``."""
    kind = PlannerKind(kind)
    logger.debug("Building %s planner (H=%d)", kind.value, config.horizon)
    return _PLANNERS[kind](model, config)
