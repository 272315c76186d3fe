"""Scheduler estimators with a scikit-learn style interface.

``fit(instance)`` solves the instance and stores the results in trailing
underscore attributes; hyper-parameters are constructor arguments, so
``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import time

from sklearn.base import BaseEstimator

from .auctions import solve_cbba, solve_psi, solve_ssi
from .dcop import DEFAULT_MEMORY_CAP
from .exact import solve_exact
from .greedy import solve_greedy
from .model import Instance, Schedule, total_reward, validate_schedule
from .runtime import MessageBus, MetricsLog
from .sdcop import solve_sdcop


def check_instance(P: object) -> Instance:
    if not isinstance(P, Instance):
        raise TypeError(f"expected an Instance, got {type(P).__name__}")
    return P


class Scheduler(BaseEstimator):
    """Base class.  After ``fit``: ``schedule_``, ``reward_``, ``metrics_``,
    ``verdict_``, ``bus_`` and ``trace_hash_``."""

    name = ""

    def _solve(self, P: Instance, bus: MessageBus) -> Schedule:
        raise NotImplementedError

    def fit(self, X: Instance, y: None = None) -> Scheduler:
        P = check_instance(X)
        bus = MessageBus()
        t0 = time.perf_counter()
        schedule = self._solve(P, bus)
        elapsed = time.perf_counter() - t0
        self.schedule_ = schedule
        self.reward_ = total_reward(P, schedule)
        self.verdict_ = validate_schedule(P, schedule)
        self.bus_ = bus
        self.metrics_ = MetricsLog(bus.metrics.message_count, bus.metrics.message_bytes,
                                   elapsed, self.reward_)
        self.trace_hash_ = bus.trace_hash()
        return self

    def fit_predict(self, X: Instance, y: None = None) -> Schedule:
        return self.fit(X).schedule_

    def score(self, X: Instance, y: None = None) -> float:
        """Total reward of the fitted schedule on ``X``."""
        return total_reward(check_instance(X), self.schedule_)


class GreedyScheduler(Scheduler):
    name = "greedy"

    def __init__(self, debug: bool = False):
        self.debug = debug

    def _solve(self, P, bus):
        return solve_greedy(P, debug=self.debug)


class ExactScheduler(Scheduler):
    name = "exact"

    def __init__(self, budget: float = 60.0, priority_boost: float | None = None):
        self.budget = budget
        self.priority_boost = priority_boost

    def _solve(self, P, bus):
        return solve_exact(P, budget=self.budget, priority_boost=self.priority_boost)


class PsiScheduler(Scheduler):
    name = "psi"

    def __init__(self, max_displaced: int | None = 1):
        self.max_displaced = max_displaced

    def _solve(self, P, bus):
        return solve_psi(P, bus=bus, max_displaced=self.max_displaced).schedule


class SsiScheduler(Scheduler):
    name = "ssi"

    def __init__(self, max_displaced: int | None = 1):
        self.max_displaced = max_displaced

    def _solve(self, P, bus):
        return solve_ssi(P, bus=bus, max_displaced=self.max_displaced).schedule


class CbbaScheduler(Scheduler):
    name = "cbba"

    def __init__(self, max_displaced: int | None = 1, max_rounds: int = 200):
        self.max_displaced = max_displaced
        self.max_rounds = max_rounds

    def _solve(self, P, bus):
        return solve_cbba(P, bus=bus, max_displaced=self.max_displaced,
                          max_rounds=self.max_rounds).schedule


class SdcopScheduler(Scheduler):
    name = "s_dcop"

    def __init__(self, memory_cap: int = DEFAULT_MEMORY_CAP, debug: bool = False):
        self.memory_cap = memory_cap
        self.debug = debug

    def _solve(self, P, bus):
        return solve_sdcop(P, bus=bus, memory_cap=self.memory_cap, debug=self.debug).schedule


ALGORITHMS: dict[str, type[Scheduler]] = {
    cls.name: cls
    for cls in (GreedyScheduler, ExactScheduler, PsiScheduler, SsiScheduler, CbbaScheduler,
                SdcopScheduler)
}
DISTRIBUTED = ("psi", "ssi", "cbba", "s_dcop")


def make_scheduler(name: str, **params) -> Scheduler:
    try:
        cls = ALGORITHMS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    return cls(**params)
