"""Estimator-style front end for the planners."""

from __future__ import annotations

from dataclasses import asdict
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import Instance, MalformedInstanceError, Plan, validate_arrangement
from .search import PLANNERS, SearchConfig, SearchResult, plan_search
from .stability import make_oracle


def check_instance(instance) -> Instance:
    """Raise MalformedInstanceError unless both arrangements are physically valid."""
    if not isinstance(instance, Instance):
        raise TypeError(f"expected an Instance, got {type(instance).__name__}")
    for name, arr in (("initial", instance.initial), ("goal", instance.goal)):
        report = validate_arrangement(arr, instance)
        if not report.valid:
            raise MalformedInstanceError(f"{name} arrangement invalid: {'; '.join(report.violations)}")
    return instance


def check_instances(X) -> list[Instance]:
    if isinstance(X, Instance):
        X = [X]
    return [check_instance(x) for x in X]


class RearrangementPlanner(BaseEstimator):
    """Plans pick-n-place sequences for rearrangement instances.

    ``fit`` only validates the configuration (there is nothing to learn);
    ``predict`` maps instances to plans, with None for instances that were not
    solved within the budget.

    Parameters
    ----------
    planner : {"orla-full", "orla-action", "greedy-sampling"}
    allocator : {"sampling", "grid-optimal"}
        How pending buffers are given concrete poses.
    stability : {"always", "support-polygon"}
    """

    def __init__(
        self,
        planner="orla-full",
        allocator="sampling",
        stability="always",
        samples_per_round=10,
        expansion_step=None,
        orientation_count=8,
        grid_resolution=0.05,
        stack_buffers=False,
        timeout=300.0,
        max_expansions=None,
        seed=0,
    ):
        self.planner = planner
        self.allocator = allocator
        self.stability = stability
        self.samples_per_round = samples_per_round
        self.expansion_step = expansion_step
        self.orientation_count = orientation_count
        self.grid_resolution = grid_resolution
        self.stack_buffers = stack_buffers
        self.timeout = timeout
        self.max_expansions = max_expansions
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.planner not in PLANNERS:
            raise ValueError(f"planner must be one of {PLANNERS}, got {self.planner!r}")
        if self.samples_per_round < 1 or self.orientation_count < 1:
            raise ValueError("samples_per_round and orientation_count must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        self.config_ = SearchConfig(
            planner=self.planner,
            allocator=self.allocator,
            samples_per_round=self.samples_per_round,
            expansion_step=self.expansion_step,
            orientation_count=self.orientation_count,
            grid_resolution=self.grid_resolution,
            stack_buffers=self.stack_buffers,
            timeout=self.timeout,
            max_expansions=self.max_expansions,
            seed=self.seed,
        )
        self.oracle_ = make_oracle(self.stability)
        return self

    def plan(self, instance: Instance) -> SearchResult:
        check_is_fitted(self, "config_")
        return plan_search(check_instance(instance), self.config_, self.oracle_)

    def predict(self, X: Iterable[Instance]) -> list[Plan | None]:
        check_is_fitted(self, "config_")
        self.results_ = [plan_search(inst, self.config_, self.oracle_) for inst in check_instances(X)]
        return [r.plan for r in self.results_]

    def score(self, X, y=None) -> float:
        """Fraction of instances solved."""
        plans = self.predict(X)
        return float(np.mean([p is not None for p in plans])) if plans else 0.0

    def config_dict(self) -> dict:
        check_is_fitted(self, "config_")
        return asdict(self.config_)
