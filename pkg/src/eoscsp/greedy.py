"""Priority-then-start-time greedy insertion over per-satellite tracks."""

from __future__ import annotations

from bisect import bisect_left, insort
from typing import Iterable, NamedTuple

from .model import (
    EPS,
    Instance,
    Observation,
    Schedule,
    ScheduleError,
    TimeWindow,
    grants_for,
    observation_domains,
)


class Slot(NamedTuple):
    start: float
    observation: str
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


class Board:
    """Ordered tracks of every satellite, seeded with the instance's
    pre-allocated entries.

    Each track is sorted by start time and its length never exceeds the
    satellite capacity.  Distributed solvers share one board as the
    satellites' common plan; the board never records who placed what.
    """

    def __init__(self, instance: Instance, debug: bool = False):
        self.instance = instance
        self.debug = debug
        self.tracks: dict[str, list[Slot]] = {s.id: [] for s in instance.satellites}
        self._where: dict[str, str] = {}
        for f in instance.fixed:
            self._add(f.satellite, Slot(f.start, f.observation, f.duration))

    def copy(self) -> Board:
        other = Board.__new__(Board)
        other.instance = self.instance
        other.debug = self.debug
        other.tracks = {s: list(t) for s, t in self.tracks.items()}
        other._where = dict(self._where)
        return other

    def __contains__(self, obs_id: object) -> bool:
        return obs_id in self._where

    def count(self, satellite: str) -> int:
        return len(self.tracks[satellite])

    def residual(self, satellite: str) -> int:
        return self.instance.satellite[satellite].capacity - self.count(satellite)

    def start_of(self, obs_id: str) -> float:
        return next(sl.start for sl in self.tracks[self._where[obs_id]] if sl.observation == obs_id)

    def _add(self, satellite: str, slot: Slot) -> None:
        insort(self.tracks[satellite], slot)
        self._where[slot.observation] = satellite

    def insert(self, obs: Observation, start: float) -> None:
        if obs.id in self._where:
            raise ScheduleError(f"{obs.id} already on the board")
        self._add(obs.satellite, Slot(start, obs.id, obs.duration))
        if self.debug:
            self.check(obs.satellite)

    def remove(self, obs_id: str) -> None:
        sat = self._where.pop(obs_id)
        self.tracks[sat] = [sl for sl in self.tracks[sat] if sl.observation != obs_id]

    def check(self, satellite: str) -> None:
        """Re-verify separation and capacity of one track."""
        sat = self.instance.satellite[satellite]
        track = self.tracks[satellite]
        if len(track) > sat.capacity:
            raise ScheduleError(f"{satellite} over capacity")
        for a, b in zip(track, track[1:]):
            if b.start - a.end < sat.transition(a.observation, b.observation) - EPS:
                raise ScheduleError(f"{a.observation} and {b.observation} too close")

    def earliest_start(
        self, obs: Observation, window: TimeWindow, skip: frozenset[str] = frozenset()
    ) -> tuple[int, float] | None:
        """Earliest start of ``obs`` in ``window`` between existing slots,
        ignoring the slots in ``skip``.  Returns ``(index, start)`` where
        ``index`` is the insertion position in the filtered track."""
        sat = self.instance.satellite[obs.satellite]
        track = self.tracks[obs.satellite]
        if skip:
            track = [sl for sl in track if sl.observation not in skip]
        # a gap whose successor starts before the window cannot hold obs
        first = bisect_left(track, window.start, key=lambda sl: sl.start)
        for i in range(first, len(track) + 1):
            if i > 0 and track[i - 1].start > window.end:
                break
            t = window.start
            if i > 0:
                prev = track[i - 1]
                t = max(t, prev.end + sat.transition(prev.observation, obs.id))
            if t + obs.duration > window.end + EPS:
                continue
            if i == len(track):
                upper, end = window.end, t + obs.duration
            else:
                nxt = track[i]
                upper, end = nxt.start, t + obs.duration + sat.transition(obs.id, nxt.observation)
            if t < end <= upper + EPS:
                return i, t
        return None

    def first_slot(
        self, obs: Observation, domains: Iterable[tuple[str, TimeWindow]]
    ) -> tuple[str, float] | None:
        """Place ``obs`` in the first domain and track gap that fit, mutating
        the board.  Full satellites are skipped."""
        for sid, window in domains:
            if self.count(sid) >= self.instance.satellite[sid].capacity:
                continue
            found = self.earliest_start(obs, window)
            if found is not None:
                self.insert(obs, found[1])
                return sid, found[1]
        return None

    def entries(self) -> dict[str, float]:
        return {sl.observation: sl.start for t in self.tracks.values() for sl in t}


def sort_observations(observations: Iterable[Observation]) -> list[Observation]:
    return sorted(observations, key=lambda o: (o.priority, o.window.start, o.id))


def greedy_fill(
    P: Instance,
    board: Board,
    observations: Iterable[Observation],
    *,
    allow_grants: bool = True,
    done: set[str] | None = None,
) -> Schedule:
    """Run the greedy loop for ``observations`` on an existing board.

    ``done`` holds request ids that are already served; it is updated in
    place.
    """
    done = set() if done is None else done
    entries: dict[str, float] = {}
    grants: set[tuple[str, str]] = set()
    for obs in sort_observations(observations):
        if obs.request in done:
            continue
        placed = board.first_slot(obs, observation_domains(P, obs, allow_grants=allow_grants))
        if placed is None:
            continue
        entries[obs.id] = placed[1]
        grants |= grants_for(P, obs, placed[1])
        done.add(obs.request)
    return Schedule(entries, grants)


def solve_greedy(P: Instance, *, allow_grants: bool = True, debug: bool = False) -> Schedule:
    """Greedy baseline.  Observations of open requests are taken by increasing
    ``(priority, window start, id)`` and each goes to the first slot that fits;
    once a request is served its sibling opportunities are dropped."""
    board = Board(P, debug=debug)
    open_ids = {r.id for r in P.open_requests}
    pending = [o for o in P.observations if o.request in open_ids]
    return greedy_fill(P, board, pending, allow_grants=allow_grants, done=set(P.fixed_requests))
