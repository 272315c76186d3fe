"""Domain model for constellation scheduling with exclusive orbit portions.

An :class:`Instance` bundles satellites, users, requests and observation
opportunities.  Exactly one user (the central planner) owns no exclusive
window; every other user holds a set of exclusive windows on satellites,
inside which it alone decides what gets observed.

All records are frozen.  Sub-problem helpers (:func:`restrict_to_user`,
:func:`outside_exclusives`, ...) return new instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping

EPS = 1e-9

SCHEMA_VERSION = 1


class InstanceError(ValueError):
    """Raised when an instance breaks a structural invariant."""


class ScheduleError(ValueError):
    """Raised when a schedule cannot be applied to an instance."""


@dataclass(frozen=True, order=True)
class TimeWindow:
    start: float
    end: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        if not self.start <= self.end:
            raise InstanceError(f"window start {self.start} after end {self.end}")

    @property
    def length(self) -> float:
        return self.end - self.start

    def contains(self, other: TimeWindow) -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: TimeWindow) -> bool:
        """True when the two windows share a segment of positive length."""
        return self.start < other.end and other.start < self.end

    def intersects(self, other: TimeWindow) -> bool:
        """Closed-interval intersection (touching endpoints count)."""
        return self.start <= other.end and other.start <= self.end

    def intersection(self, other: TimeWindow) -> TimeWindow | None:
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        return TimeWindow(lo, hi) if lo <= hi else None


@dataclass(frozen=True)
class Satellite:
    """A satellite with its orbit plan horizon, capacity and transition times.

    Transition times are pair dependent: ``transition_overrides`` holds
    ``(from_obs, to_obs, seconds)`` triples, every other ordered pair uses
    ``transition_time``.
    """

    id: str
    horizon: TimeWindow
    capacity: int
    transition_time: float = 1.0
    transition_overrides: tuple[tuple[str, str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.capacity < 0:
            raise InstanceError(f"satellite {self.id}: negative capacity")
        if self.transition_time < 0 or any(v < 0 for _, _, v in self.transition_overrides):
            raise InstanceError(f"satellite {self.id}: negative transition time")
        object.__setattr__(
            self, "transition_overrides", tuple(sorted(self.transition_overrides))
        )

    @cached_property
    def _transitions(self) -> dict[tuple[str, str], float]:
        return {(o, p): v for o, p, v in self.transition_overrides}

    def transition(self, o: str, p: str) -> float:
        """Minimum idle time between the end of ``o`` and the start of ``p``."""
        return self._transitions.get((o, p), self.transition_time)

    @cached_property
    def max_transition(self) -> float:
        return max([self.transition_time, *(v for _, _, v in self.transition_overrides)])


@dataclass(frozen=True, order=True)
class Exclusive:
    satellite: str
    window: TimeWindow


@dataclass(frozen=True)
class User:
    id: str
    exclusives: tuple[Exclusive, ...] = ()
    priority: int = 1

    def __post_init__(self) -> None:
        if self.priority < 1:
            raise InstanceError(f"user {self.id}: priority must be positive")
        object.__setattr__(self, "exclusives", tuple(sorted(self.exclusives)))

    @property
    def is_exclusive(self) -> bool:
        return bool(self.exclusives)

    def exclusives_on(self, satellite: str) -> list[TimeWindow]:
        return [e.window for e in self.exclusives if e.satellite == satellite]


@dataclass(frozen=True)
class Request:
    id: str
    window: TimeWindow
    duration: float
    reward: float
    owner: str
    opportunities: tuple[str, ...]
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise InstanceError(f"request {self.id}: duration must be positive")
        if not self.opportunities:
            raise InstanceError(f"request {self.id}: no observation opportunity")
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "opportunities", tuple(sorted(self.opportunities)))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class Observation:
    id: str
    window: TimeWindow
    duration: float
    request: str
    reward: float
    satellite: str
    owner: str
    priority: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "reward", float(self.reward))

    @property
    def latest_start(self) -> float:
        return self.window.end - self.duration


@dataclass(frozen=True, order=True)
class FixedEntry:
    """A pre-allocated observation that solvers must leave in place.

    The record is self-contained so it stays meaningful after the
    instance is restricted to a subset of its observations.
    """

    observation: str
    satellite: str
    start: float
    duration: float
    request: str


@dataclass(frozen=True)
class Schedule:
    """Start times per observation plus the exclusive-window grants.

    A grant ``(observation, user)`` records that ``user`` accepted the
    foreign ``observation`` inside one of its exclusive windows.
    """

    entries: Mapping[str, float] = field(default_factory=dict)
    grants: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(sorted(self.entries.items())))
        object.__setattr__(self, "grants", frozenset(self.grants))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, obs_id: object) -> bool:
        return obs_id in self.entries

    def __or__(self, other: Schedule) -> Schedule:
        clash = {o for o in self.entries.keys() & other.entries.keys()
                 if self.entries[o] != other.entries[o]}
        if clash:
            raise ScheduleError(f"conflicting start times for {sorted(clash)}")
        return Schedule({**self.entries, **other.entries}, self.grants | other.grants)

    def without(self, obs_ids: Iterable[str]) -> Schedule:
        drop = set(obs_ids)
        return Schedule(
            {o: t for o, t in self.entries.items() if o not in drop},
            {g for g in self.grants if g[0] not in drop},
        )

    def to_dict(self) -> dict:
        return {
            "format": "eoscsp-schedule",
            "version": SCHEMA_VERSION,
            "entries": [{"observation": o, "start": t} for o, t in self.entries.items()],
            "grants": [{"observation": o, "user": u} for o, u in sorted(self.grants)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Schedule:
        return cls(
            {e["observation"]: float(e["start"]) for e in data.get("entries", [])},
            {(g["observation"], g["user"]) for g in data.get("grants", [])},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _by_id(records: Iterable, kind: str) -> dict:
    out: dict = {}
    for rec in records:
        if rec.id in out and out[rec.id] != rec:
            raise InstanceError(f"duplicate {kind} id {rec.id!r} with differing content")
        out[rec.id] = rec
    return out


@dataclass(frozen=True)
class Instance:
    satellites: tuple[Satellite, ...]
    users: tuple[User, ...]
    requests: tuple[Request, ...] = ()
    observations: tuple[Observation, ...] = ()
    fixed: tuple[FixedEntry, ...] = ()

    def __post_init__(self) -> None:
        for name, kind in (("satellites", "satellite"), ("users", "user"),
                           ("requests", "request"), ("observations", "observation")):
            recs = _by_id(getattr(self, name), kind)
            object.__setattr__(self, name, tuple(recs[k] for k in sorted(recs)))
        object.__setattr__(self, "fixed", tuple(sorted(set(self.fixed))))
        self._check()

    # lookups -------------------------------------------------------------
    @cached_property
    def satellite(self) -> dict[str, Satellite]:
        return {s.id: s for s in self.satellites}

    @cached_property
    def user(self) -> dict[str, User]:
        return {u.id: u for u in self.users}

    @cached_property
    def request(self) -> dict[str, Request]:
        return {r.id: r for r in self.requests}

    @cached_property
    def observation(self) -> dict[str, Observation]:
        return {o.id: o for o in self.observations}

    @cached_property
    def exclusive_users(self) -> tuple[User, ...]:
        return tuple(u for u in self.users if u.is_exclusive)

    @cached_property
    def central_user(self) -> User:
        return next(u for u in self.users if not u.is_exclusive)

    @cached_property
    def exclusives_by_satellite(self) -> dict[str, list[tuple[TimeWindow, str]]]:
        """Sorted ``(window, owner)`` pairs per satellite."""
        out: dict[str, list[tuple[TimeWindow, str]]] = {s.id: [] for s in self.satellites}
        for u in self.users:
            for e in u.exclusives:
                out[e.satellite].append((e.window, u.id))
        for lst in out.values():
            lst.sort()
        return out

    @cached_property
    def fixed_requests(self) -> frozenset[str]:
        return frozenset(f.request for f in self.fixed)

    @property
    def open_requests(self) -> tuple[Request, ...]:
        """Requests not already fulfilled by a pre-allocated observation."""
        return tuple(r for r in self.requests if r.id not in self.fixed_requests)

    def residual_capacity(self, satellite: str) -> int:
        used = sum(1 for f in self.fixed if f.satellite == satellite)
        return self.satellite[satellite].capacity - used

    # invariants ----------------------------------------------------------
    def _check(self) -> None:
        sats, users = self.satellite, self.user
        if self.users and sum(1 for u in self.users if not u.is_exclusive) != 1:
            raise InstanceError("exactly one user must own no exclusive window")
        for u in self.users:
            for e in u.exclusives:
                if e.satellite not in sats:
                    raise InstanceError(f"user {u.id}: unknown satellite {e.satellite}")
                if not sats[e.satellite].horizon.contains(e.window):
                    raise InstanceError(f"user {u.id}: exclusive outside horizon of {e.satellite}")
        for s, lst in self.exclusives_by_satellite.items():
            for (w1, u1), (w2, u2) in zip(lst, lst[1:]):
                if w1.overlaps(w2):
                    raise InstanceError(f"exclusives of {u1} and {u2} overlap on {s}")
        obs = self.observation
        for r in self.requests:
            if r.owner not in users:
                raise InstanceError(f"request {r.id}: unknown owner {r.owner}")
            for oid in r.opportunities:
                if oid not in obs:
                    raise InstanceError(f"request {r.id}: unknown observation {oid}")
                if obs[oid].request != r.id:
                    raise InstanceError(f"observation {oid} does not point back to {r.id}")
        reqs = self.request
        for o in self.observations:
            r = reqs.get(o.request)
            if r is None:
                raise InstanceError(f"observation {o.id}: unknown request {o.request}")
            if o.id not in r.opportunities:
                raise InstanceError(f"observation {o.id} missing from {r.id} opportunities")
            if o.satellite not in sats:
                raise InstanceError(f"observation {o.id}: unknown satellite {o.satellite}")
            if not sats[o.satellite].horizon.contains(o.window):
                raise InstanceError(f"observation {o.id}: window outside satellite horizon")
            if o.window.length < o.duration - EPS:
                raise InstanceError(f"observation {o.id}: window shorter than duration")
            if o.duration != r.duration:
                raise InstanceError(f"observation {o.id}: duration differs from request")
            if o.owner != r.owner:
                raise InstanceError(f"observation {o.id}: owner differs from request")
            if o.priority != users[o.owner].priority:
                raise InstanceError(f"observation {o.id}: priority differs from owner")
        for f in self.fixed:
            if f.satellite not in sats:
                raise InstanceError(f"fixed entry {f.observation}: unknown satellite")

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "eoscsp-instance",
            "version": SCHEMA_VERSION,
            "satellites": [
                {
                    "id": s.id,
                    "horizon": [s.horizon.start, s.horizon.end],
                    "capacity": s.capacity,
                    "transition": {
                        "default": s.transition_time,
                        "pairs": [list(p) for p in s.transition_overrides],
                    },
                }
                for s in self.satellites
            ],
            "users": [
                {
                    "id": u.id,
                    "priority": u.priority,
                    "exclusives": [
                        {"satellite": e.satellite, "window": [e.window.start, e.window.end]}
                        for e in u.exclusives
                    ],
                }
                for u in self.users
            ],
            "requests": [
                {
                    "id": r.id,
                    "window": [r.window.start, r.window.end],
                    "duration": r.duration,
                    "reward": r.reward,
                    "owner": r.owner,
                    "position": list(r.position),
                    "opportunities": list(r.opportunities),
                }
                for r in self.requests
            ],
            "observations": [
                {
                    "id": o.id,
                    "window": [o.window.start, o.window.end],
                    "duration": o.duration,
                    "request": o.request,
                    "reward": o.reward,
                    "satellite": o.satellite,
                    "owner": o.owner,
                    "priority": o.priority,
                }
                for o in self.observations
            ],
            "fixed": [
                {"observation": f.observation, "satellite": f.satellite, "start": f.start,
                 "duration": f.duration, "request": f.request}
                for f in self.fixed
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Instance:
        if data.get("format", "eoscsp-instance") != "eoscsp-instance":
            raise InstanceError(f"not an instance document: {data.get('format')!r}")
        return cls(
            satellites=tuple(
                Satellite(
                    id=s["id"],
                    horizon=TimeWindow(*map(float, s["horizon"])),
                    capacity=int(s["capacity"]),
                    transition_time=float(s.get("transition", {}).get("default", 0.0)),
                    transition_overrides=tuple(
                        (a, b, float(v)) for a, b, v in s.get("transition", {}).get("pairs", [])
                    ),
                )
                for s in data["satellites"]
            ),
            users=tuple(
                User(
                    id=u["id"],
                    priority=int(u.get("priority", 1)),
                    exclusives=tuple(
                        Exclusive(e["satellite"], TimeWindow(*map(float, e["window"])))
                        for e in u.get("exclusives", [])
                    ),
                )
                for u in data["users"]
            ),
            requests=tuple(
                Request(
                    id=r["id"],
                    window=TimeWindow(*map(float, r["window"])),
                    duration=float(r["duration"]),
                    reward=float(r["reward"]),
                    owner=r["owner"],
                    opportunities=tuple(r["opportunities"]),
                    position=tuple(r.get("position", (0.0, 0.0, 0.0))),
                )
                for r in data.get("requests", [])
            ),
            observations=tuple(
                Observation(
                    id=o["id"],
                    window=TimeWindow(*map(float, o["window"])),
                    duration=float(o["duration"]),
                    request=o["request"],
                    reward=float(o["reward"]),
                    satellite=o["satellite"],
                    owner=o["owner"],
                    priority=int(o.get("priority", 1)),
                )
                for o in data.get("observations", [])
            ),
            fixed=tuple(
                FixedEntry(f["observation"], f["satellite"], float(f["start"]),
                           float(f["duration"]), f["request"])
                for f in data.get("fixed", [])
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Instance:
        return cls.from_dict(json.loads(text))


def load_instance(path: str | Path) -> Instance:
    return Instance.from_json(Path(path).read_text())


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(instance.to_json())


def load_schedule(path: str | Path) -> Schedule:
    data = json.loads(Path(path).read_text())
    if data.get("format", "eoscsp-schedule") != "eoscsp-schedule":
        raise ScheduleError(f"not a schedule document: {data.get('format')!r}")
    return Schedule.from_dict(data)


def save_schedule(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(schedule.to_json())


# ---------------------------------------------------------------------------
# sub-problems


def _subset(P: Instance, requests: Iterable[Request]) -> Instance:
    reqs = tuple(requests)
    keep = {oid for r in reqs for oid in r.opportunities}
    return replace(P, requests=reqs,
                   observations=tuple(o for o in P.observations if o.id in keep))


def restrict_to_user(P: Instance, user: str) -> Instance:
    """Requests and observations owned by ``user``; satellites, users and
    pre-allocations are kept."""
    if user not in P.user:
        raise KeyError(f"unknown user {user!r}")
    return _subset(P, (r for r in P.requests if r.owner == user))


def restrict_to_request(P: Instance, request: str) -> Instance:
    if request not in P.request:
        raise KeyError(f"unknown request {request!r}")
    return _subset(P, [P.request[request]])


def free_windows(P: Instance, satellite: str, window: TimeWindow) -> list[TimeWindow]:
    """Parts of ``window`` not covered by any exclusive on ``satellite``."""
    out: list[TimeWindow] = []
    cursor = window.start
    for ex, _ in P.exclusives_by_satellite.get(satellite, []):
        if ex.end <= cursor:
            continue
        if ex.start >= window.end:
            break
        if ex.start > cursor:
            out.append(TimeWindow(cursor, ex.start))
        cursor = max(cursor, ex.end)
    if cursor < window.end:
        out.append(TimeWindow(cursor, window.end))
    return out


def observation_domains(
    P: Instance, obs: Observation, *, allow_grants: bool = True
) -> list[tuple[str, TimeWindow]]:
    """Candidate ``(satellite, window)`` placements for ``obs``.

    Exclusive users may only observe inside their own exclusive windows.
    The central planner's observations use their whole window when grants
    are allowed, otherwise only the parts outside every exclusive.
    Windows too short for the observation are dropped.
    """
    owner = P.user.get(obs.owner)
    if owner is not None and owner.is_exclusive:
        parts = [w for ex in owner.exclusives_on(obs.satellite)
                 if (w := ex.intersection(obs.window)) is not None]
    elif allow_grants:
        parts = [obs.window]
    else:
        parts = free_windows(P, obs.satellite, obs.window)
    return [(obs.satellite, w) for w in sorted(parts) if w.length >= obs.duration - EPS]


def grants_for(P: Instance, obs: Observation, start: float) -> set[tuple[str, str]]:
    """Grants needed to run ``obs`` from ``start``: one per foreign exclusive
    window it overlaps."""
    span = TimeWindow(start, start + obs.duration)
    return {
        (obs.id, owner)
        for ex, owner in P.exclusives_by_satellite.get(obs.satellite, [])
        if owner != obs.owner and ex.overlaps(span)
    }


def outside_exclusives(P: Instance) -> Instance:
    """Keep observations that fit in a non-exclusive part of their window."""
    keep = {
        o.id
        for o in P.observations
        if any(w.length >= o.duration - EPS for w in free_windows(P, o.satellite, o.window))
    }
    reqs = []
    for r in P.requests:
        opps = tuple(oid for oid in r.opportunities if oid in keep)
        if opps:
            reqs.append(replace(r, opportunities=opps))
    return replace(P, requests=tuple(reqs),
                   observations=tuple(o for o in P.observations if o.id in keep))


def with_preallocation(P: Instance, M: Schedule) -> Instance:
    """Freeze the entries of ``M``: they keep their slot and capacity, and the
    requests they fulfil leave the open request set."""
    verdict = validate_schedule(P, M)
    if not verdict.ok:
        raise ScheduleError(f"cannot pre-allocate an invalid schedule: {verdict.violations[0]}")
    new = [
        FixedEntry(oid, P.observation[oid].satellite, t, P.observation[oid].duration,
                   P.observation[oid].request)
        for oid, t in M.entries.items()
    ]
    return replace(P, fixed=P.fixed + tuple(new))


def union(P: Instance, Q: Instance) -> Instance:
    """Componentwise union; shared ids must denote identical records."""
    fixed = {f.observation: f for f in P.fixed}
    for f in Q.fixed:
        if fixed.setdefault(f.observation, f) != f:
            raise InstanceError(f"fixed entry {f.observation} differs between operands")
    return Instance(
        satellites=P.satellites + Q.satellites,
        users=P.users + Q.users,
        requests=P.requests + Q.requests,
        observations=P.observations + Q.observations,
        fixed=tuple(fixed.values()),
    )


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    observations: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"({self.rule}) {self.message}"


@dataclass(frozen=True)
class Verdict:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)


def validate_schedule(P: Instance, M: Schedule) -> Verdict:
    """Check every hard constraint and the exclusive-window contract.

    Rules: (a) start inside the observation window, (b) satellite capacity,
    (c) one observation per request, (d) separation between consecutive
    observations of a satellite, (e) exclusive users stay inside their own
    exclusives, (f) foreign observations inside an exclusive need a grant.
    Pre-allocated entries of ``P`` take part in (b), (c) and (d).
    """
    out: list[Violation] = []
    tracks: dict[str, list[tuple[float, str, float]]] = {s.id: [] for s in P.satellites}
    per_request: dict[str, list[str]] = {}
    for f in P.fixed:
        tracks.setdefault(f.satellite, []).append((f.start, f.observation, f.duration))
        per_request.setdefault(f.request, []).append(f.observation)

    for oid, t in M.entries.items():
        o = P.observation.get(oid)
        if o is None:
            out.append(Violation("a", f"unknown observation {oid}", (oid,)))
            continue
        if t < o.window.start - EPS or t > o.latest_start + EPS:
            out.append(Violation("a", f"{oid} starts at {t}, outside "
                                      f"[{o.window.start}, {o.latest_start}]", (oid,)))
        tracks[o.satellite].append((t, oid, o.duration))
        per_request.setdefault(o.request, []).append(oid)

        span = TimeWindow(t, t + o.duration)
        owner = P.user[o.owner]
        if owner.is_exclusive and not any(
            ex.start - EPS <= span.start and span.end <= ex.end + EPS
            for ex in owner.exclusives_on(o.satellite)
        ):
            out.append(Violation("e", f"{oid} of {o.owner} outside its exclusive windows", (oid,)))
        for ex, holder in P.exclusives_by_satellite[o.satellite]:
            if holder == o.owner or not ex.overlaps(span):
                continue
            if ex.end - span.start <= EPS or span.end - ex.start <= EPS:
                continue
            if (oid, holder) not in M.grants:
                out.append(Violation("f", f"{oid} inside exclusive of {holder} without grant",
                                     (oid,)))

    for rid, oids in sorted(per_request.items()):
        if len(oids) > 1:
            out.append(Violation("c", f"request {rid} served {len(oids)} times",
                                 tuple(sorted(oids))))

    for sid, track in tracks.items():
        sat = P.satellite[sid]
        if len(track) > sat.capacity:
            out.append(Violation("b", f"{sid} holds {len(track)} > {sat.capacity}"))
        track.sort()
        for (t1, o1, d1), (t2, o2, _) in zip(track, track[1:]):
            gap = d1 + sat.transition(o1, o2)
            if t2 - t1 < gap - EPS:
                out.append(Violation("d", f"{o2} starts {t2 - t1:g}s after {o1} on {sid}, "
                                          f"needs {gap:g}s", (o1, o2)))
    return Verdict(tuple(out))


def total_reward(P: Instance, M: Schedule) -> float:
    return float(sum(P.observation[o].reward for o in M.entries))

