"""Exclusive-user planning agents shared by the auction and DCOP solvers.

An agent keeps its own plan on the board shared by all users and can price
a foreign observation: the cheapest way to fit it into one of its exclusive
windows, possibly by dropping some of its own lower-value observations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .greedy import Board, Slot, greedy_fill
from .model import (
    EPS,
    Instance,
    Observation,
    Schedule,
    ScheduleError,
    TimeWindow,
    grants_for,
    observation_domains,
    validate_schedule,
)


class MergeError(ScheduleError):
    pass


@dataclass(frozen=True)
class Hosting:
    """A way to run ``observation`` from ``start`` after dropping ``displaced``."""

    observation: str
    start: float
    displaced: tuple[str, ...]
    cost: float
    window: TimeWindow


def _gap_start(sat, track: list[Slot], i: int, j: int, obs: Observation,
               window: TimeWindow) -> float | None:
    """Earliest start of ``obs`` in ``window`` between ``track[i-1]`` and ``track[j]``."""
    t = window.start
    if i > 0:
        prev = track[i - 1]
        t = max(t, prev.end + sat.transition(prev.observation, obs.id))
    if t + obs.duration > window.end + EPS:
        return None
    if j < len(track):
        nxt = track[j]
        if t + obs.duration + sat.transition(obs.id, nxt.observation) > nxt.start + EPS:
            return None
    return t


def best_hosting(
    board: Board,
    obs: Observation,
    windows: Iterable[TimeWindow],
    removable: Mapping[str, float],
    max_displaced: int | None = None,
) -> Hosting | None:
    """Cheapest placement of ``obs`` inside one of ``windows``.

    Only board entries listed in ``removable`` (id -> reward) may be
    dropped.  The observation ends up between two surviving neighbours, so
    every option is a contiguous run of removed entries around the gap plus,
    if the satellite is full, the cheapest other removable entries.  Ties go
    to fewer removals, then the earlier start.
    """
    sat = board.instance.satellite[obs.satellite]
    track = board.tracks[obs.satellite]
    tau = sat.max_transition
    spare = sorted((r, o) for o, r in removable.items() if board._where.get(o) == obs.satellite)
    best: tuple | None = None
    for w in windows:
        if w.length < obs.duration - EPS:
            continue
        # only entries near the window can block it
        zone = [k for k, sl in enumerate(track)
                if sl.end + tau > w.start - EPS and sl.start < w.end + tau + EPS]
        lo = zone[0] if zone else next((k for k, sl in enumerate(track) if sl.start > w.start),
                                       len(track))
        hi = zone[-1] + 1 if zone else lo
        for i in range(lo, hi + 1):
            cost = 0.0
            for j in range(i, hi + 1):
                if j > i:
                    victim = track[j - 1].observation
                    if victim not in removable:
                        break
                    cost += removable[victim]
                block = j - i
                if max_displaced is not None and block > max_displaced:
                    break
                t = _gap_start(sat, track, i, j, obs, w)
                if t is None:
                    continue
                extra = len(track) - block + 1 - sat.capacity
                removed = [sl.observation for sl in track[i:j]]
                total = cost
                if extra > 0:
                    inside = set(removed)
                    more = [o for _, o in spare if o not in inside][:extra]
                    if len(more) < extra:
                        continue
                    if max_displaced is not None and block + extra > max_displaced:
                        continue
                    removed += more
                    total += sum(removable[o] for o in more)
                key = (total, len(removed), t, tuple(sorted(removed)))
                if best is None or key < best[0]:
                    best = (key, Hosting(obs.id, t, tuple(sorted(removed)), total, w))
    return None if best is None else best[1]


def fits(board: Board, obs: Observation, start: float, window: TimeWindow) -> bool:
    """Whether ``obs`` can start at ``start`` on the board as it is now."""
    sat = board.instance.satellite[obs.satellite]
    if board.count(obs.satellite) >= sat.capacity:
        return False
    if start < window.start - EPS or start + obs.duration > window.end + EPS:
        return False
    track = board.tracks[obs.satellite]
    i = next((k for k, sl in enumerate(track) if sl.start > start), len(track))
    return _gap_start(sat, track, i, i, obs, TimeWindow(start, window.end)) is not None


def merge_award(
    M: Schedule,
    placement: tuple[str, float],
    displaced: Iterable[str] = (),
    P: Instance | None = None,
    user: str | None = None,
) -> Schedule:
    """Add an awarded placement to a user's plan after dropping ``displaced``.

    With ``P`` given, the result is validated and a :class:`MergeError`
    raised if it breaks a hard constraint.  With ``user`` given the
    exclusive-window grant is recorded.
    """
    displaced = tuple(displaced)
    missing = [o for o in displaced if o not in M]
    if missing:
        raise MergeError(f"displaced observations not in the plan: {missing}")
    obs_id, start = placement
    out = M.without(displaced)
    if obs_id in out:
        raise MergeError(f"{obs_id} already planned")
    grants = set(out.grants)
    if P is not None and user is not None:
        obs = P.observation[obs_id]
        grants |= {g for g in grants_for(P, obs, start) if g[1] == user}
    elif user is not None:
        grants.add((obs_id, user))
    out = Schedule({**out.entries, obs_id: start}, grants)
    if P is not None:
        verdict = validate_schedule(P, out)
        if not verdict.ok:
            raise MergeError(str(verdict.violations[0]))
    return out


class ExclusiveAgent:
    """Planner of one exclusive user, working on the shared board."""

    def __init__(self, P: Instance, user: str, board: Board, max_displaced: int | None = 1):
        self.P = P
        self.user = P.user[user]
        self.id = user
        self.board = board
        self.max_displaced = max_displaced
        self.plan = Schedule()
        self.hosted: set[str] = set()
        self._own = [o for o in P.observations
                     if o.owner == user and o.request not in P.fixed_requests]
        self.served: set[str] = set()

    def local_solve(self) -> Schedule:
        """Greedy plan of the user's own requests inside its exclusives."""
        placed = greedy_fill(self.P, self.board, self._own, done=self.served)
        self.plan = self.plan | placed
        return placed

    def hosting_windows(self, obs: Observation) -> list[TimeWindow]:
        out = []
        for ex in self.user.exclusives_on(obs.satellite):
            w = ex.intersection(obs.window)
            if w is not None and w.length >= obs.duration - EPS:
                out.append(w)
        return out

    def can_host(self, request: str) -> bool:
        return any(self.hosting_windows(self.P.observation[o])
                   for o in self.P.request[request].opportunities)

    def removable(self) -> dict[str, float]:
        return {o: self.P.observation[o].reward for o in self.plan.entries if o not in self.hosted}

    def price(self, obs: Observation, windows: list[TimeWindow] | None = None,
              max_displaced: int | None = -1) -> Hosting | None:
        if max_displaced == -1:
            max_displaced = self.max_displaced
        windows = self.hosting_windows(obs) if windows is None else windows
        if not windows:
            return None
        return best_hosting(self.board, obs, windows, self.removable(), max_displaced)

    def best_offer(self, request: str) -> tuple[float, Hosting] | None:
        """Highest-value hosting for a foreign request; ``None`` if no
        option has positive value.  Value is reward minus displaced reward."""
        best = None
        for oid in self.P.request[request].opportunities:
            obs = self.P.observation[oid]
            h = self.price(obs)
            if h is None:
                continue
            value = obs.reward - h.cost
            if value <= EPS:
                continue
            key = (-value, h.start, oid)
            if best is None or key < best[0]:
                best = (key, (value, h))
        return None if best is None else best[1]

    def commit(self, hosting: Hosting) -> list[str]:
        """Apply a hosting to the board and the plan; returns the ids of own
        requests that lost their observation."""
        obs = self.P.observation[hosting.observation]
        for o in hosting.displaced:
            if o not in self.plan or o in self.hosted:
                raise MergeError(f"{o} is not an own planned observation of {self.id}")
        for o in hosting.displaced:
            self.board.remove(o)
        if not fits(self.board, obs, hosting.start, hosting.window):
            for o in hosting.displaced:
                self.board.insert(self.P.observation[o], self.plan.entries[o])
            raise MergeError(f"{obs.id} no longer fits at {hosting.start:g}")
        self.board.insert(obs, hosting.start)
        self.plan = merge_award(self.plan, (obs.id, hosting.start), hosting.displaced,
                                user=self.id)
        self.hosted.add(obs.id)
        lost = [self.P.observation[o].request for o in hosting.displaced]
        self.served -= set(lost)
        return lost

    def reinsert(self, requests: Iterable[str]) -> Schedule:
        """Try to place own requests again wherever they still fit."""
        want = set(requests)
        pending = [o for o in self._own if o.request in want]
        placed = greedy_fill(self.P, self.board, pending, done=self.served)
        self.plan = self.plan | placed
        return placed

    def host(self, request: str) -> tuple[float, Hosting] | None:
        """Re-price ``request`` against the current plan and commit the best
        offer, re-planning displaced own requests."""
        offer = self.best_offer(request)
        if offer is None:
            return None
        lost = self.commit(offer[1])
        self.reinsert(lost)
        return offer

    def merge(self, placement: Hosting) -> Hosting | None:
        """Insert an awarded observation exactly at its bid start, dropping
        the cheapest set of own observations in the way.  Declines (returns
        ``None``) when that loses as much reward as the award brings."""
        obs = self.P.observation[placement.observation]
        slot = TimeWindow(placement.start, placement.start + obs.duration)
        h = best_hosting(self.board, obs, [slot], self.removable(), None)
        if h is None or obs.reward - h.cost <= EPS:
            return None
        self.reinsert(self.commit(h))
        return h

    def foreign_entries(self) -> dict[str, float]:
        return {o: t for o, t in self.plan.entries.items() if o in self.hosted}


def make_agents(P: Instance, board: Board, max_displaced: int | None = 1) -> dict[str, ExclusiveAgent]:
    """One agent per exclusive user, each with its local greedy plan, built
    in user-id order."""
    agents = {u.id: ExclusiveAgent(P, u.id, board, max_displaced) for u in P.exclusive_users}
    for uid in sorted(agents):
        agents[uid].local_solve()
    return agents


def residual_pass(P: Instance, board: Board, served: set[str]) -> Schedule:
    """Central planner fills what is left outside every exclusive window."""
    central = P.central_user.id
    done = set(served) | set(P.fixed_requests)
    pending = [o for o in P.observations if o.owner == central and o.request not in done]
    return greedy_fill(P, board, pending, allow_grants=False, done=done)


def assemble(P: Instance, board: Board, agents: Mapping[str, ExclusiveAgent]) -> Schedule:
    """Final schedule: every non-fixed board entry, with the agents' grants."""
    fixed = {f.observation for f in P.fixed}
    entries = {o: t for o, t in board.entries().items() if o not in fixed}
    grants = set()
    for a in agents.values():
        grants |= {g for g in a.plan.grants if g[0] in entries}
    return Schedule(entries, grants)


def observation_payload(obs: Observation) -> dict:
    return {"id": obs.id, "satellite": obs.satellite, "start": obs.window.start,
            "end": obs.window.end, "duration": obs.duration, "reward": obs.reward}


def request_payload(P: Instance, request: str, opportunities: Iterable[str] | None = None) -> dict:
    r = P.request[request]
    opps = r.opportunities if opportunities is None else opportunities
    return {"request": r.id, "reward": r.reward,
            "opportunities": [observation_payload(P.observation[o]) for o in opps]}
