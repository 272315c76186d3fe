"""Exact solving: the big-M MILP (exported as CPLEX LP text) and a
branch-and-bound search for desk-sized instances."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .model import (
    EPS,
    Instance,
    Observation,
    Schedule,
    grants_for,
    observation_domains,
)


def default_priority_boost(P: Instance) -> float:
    """One more than the best total reward the central planner could earn."""
    central = P.central_user.id if P.users else None
    return 1.0 + sum(max(0.0, r.reward) for r in P.open_requests if r.owner == central)


def boosted_rewards(P: Instance, priority_boost: float | None = None) -> dict[str, float]:
    boost = default_priority_boost(P) if priority_boost is None else priority_boost
    return {
        o.id: o.reward + (boost if P.user[o.owner].is_exclusive else 0.0)
        for o in P.observations
    }


def delta_max(P: Instance, satellite: str, o: Observation, p: Observation) -> float:
    """Big-M of the separation row requiring ``p`` after ``o``."""
    sat = P.satellite[satellite]
    return o.window.end - p.window.start + o.duration + sat.transition(o.id, p.id)


# ---------------------------------------------------------------------------
# MILP model


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[float, str], ...]
    sense: str  # "<=", ">=" or "="
    rhs: float


@dataclass
class MilpModel:
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)
    continuous: list[str] = field(default_factory=list)

    def add(self, name: str, terms, sense: str, rhs: float) -> None:
        self.rows.append(Row(name, tuple(terms), sense, float(rhs)))


def _x(s: str, o: str) -> str:
    return f"x_{s}_{o}"


def _t(s: str, o: str) -> str:
    return f"t_{s}_{o}"


def _b(s: str, o: str, p: str) -> str:
    return f"b_{s}_{o}_{p}"


def build_milp(P: Instance, priority_boost: float | None = None, strict: bool = False) -> MilpModel:
    """Instantiate the scheduling MILP for every satellite and observation pair.

    Exclusive users' observations get ``priority_boost`` added to their
    reward.  With ``strict`` the model also keeps every observation out of
    foreign exclusives (by tightening start-time bounds to the earliest
    admissible sub-window), keeps starts within ``[start, end - duration]``
    and adds one cross-satellite row per request.
    """
    boost = default_priority_boost(P) if priority_boost is None else priority_boost
    if boost < 0:
        raise ValueError("priority_boost must be non-negative")
    m = MilpModel()
    obs = P.observations
    sats = P.satellites
    admissible: dict[str, list] = {}
    if strict:
        # exclusive users' domains ignore allow_grants; the planner's shrink
        # to the parts outside every exclusive
        admissible = {o.id: observation_domains(P, o, allow_grants=False) for o in obs}
    for s in sats:
        for o in obs:
            gain = o.reward + (boost if P.user[o.owner].is_exclusive else 0.0)
            m.objective[_x(s.id, o.id)] = gain
            m.binaries.append(_x(s.id, o.id))
            m.continuous.append(_t(s.id, o.id))
            lo, hi = o.window.start, o.window.end
            if strict:
                doms = admissible[o.id]
                lo, hi = (doms[0][1].start, doms[0][1].end - o.duration) if doms else (lo, lo)
            m.bounds[_t(s.id, o.id)] = (lo, hi)
        for o in obs:
            for p in obs:
                if o.id != p.id:
                    m.binaries.append(_b(s.id, o.id, p.id))

    for s in sats:
        for i, o in enumerate(obs):
            for p in obs[i + 1:]:
                bop, bpo = _b(s.id, o.id, p.id), _b(s.id, p.id, o.id)
                tag = f"{s.id}_{o.id}_{p.id}"
                m.add(f"c1_{tag}", [(1, bop), (1, bpo), (1, _x(s.id, o.id))], "<=", 2)
                m.add(f"c2_{tag}", [(1, bop), (1, bpo), (1, _x(s.id, p.id))], "<=", 2)
                m.add(f"c3_{tag}", [(1, bop), (1, bpo)], "<=", 1)
                dm = delta_max(P, s.id, o, p)
                if dm > 0:
                    m.add(f"c4_{tag}",
                          [(1, _t(s.id, p.id)), (-1, _t(s.id, o.id)), (dm, bop)],
                          ">=", s.transition(o.id, p.id) + o.duration)
                dm = delta_max(P, s.id, p, o)
                if dm > 0:
                    m.add(f"c5_{tag}",
                          [(1, _t(s.id, o.id)), (-1, _t(s.id, p.id)), (dm, bpo)],
                          ">=", s.transition(p.id, o.id) + p.duration)
        m.add(f"cap_{s.id}", [(1, _x(s.id, o.id)) for o in obs], "<=", P.residual_capacity(s.id))
        for r in P.requests:
            m.add(f"req_{s.id}_{r.id}", [(1, _x(s.id, oid)) for oid in r.opportunities], "<=", 1)
        for o in obs:
            if o.satellite != s.id:
                m.add(f"off_{s.id}_{o.id}", [(1, _x(s.id, o.id))], "=", 0)
    if strict:
        for r in P.requests:
            m.add(f"once_{r.id}",
                  [(1, _x(s.id, oid)) for s in sats for oid in r.opportunities], "<=", 1)
        for o in obs:
            if not admissible[o.id]:
                m.add(f"deny_{o.id}", [(1, _x(o.satellite, o.id))], "=", 0)
    return m


def _num(v: float) -> str:
    return f"{v:.12g}"


def _terms(terms, width: int = 8) -> list[str]:
    chunks = []
    for i in range(0, len(terms), width):
        part = " ".join(
            f"{'-' if c < 0 else '+'} {'' if abs(c) == 1 else _num(abs(c)) + ' '}{v}"
            for c, v in terms[i:i + width]
        )
        chunks.append(part)
    return chunks or ["0"]


def format_lp(m: MilpModel, name: str = "eoscsp") -> str:
    lines = [f"\\ {name}", "Maximize"]
    obj = _terms([(c, v) for v, c in m.objective.items()])
    lines.append(f" obj: {obj[0]}")
    lines += [f"   {c}" for c in obj[1:]]
    lines.append("Subject To")
    for row in m.rows:
        body = _terms(list(row.terms))
        lines.append(f" {row.name}: {body[0]}")
        lines += [f"   {c}" for c in body[1:]]
        lines.append(f"   {row.sense} {_num(row.rhs)}")
    lines.append("Bounds")
    for var, (lo, hi) in m.bounds.items():
        lines.append(f" {_num(lo)} <= {var} <= {_num(hi)}")
    lines.append("Binaries")
    lines += [f" {v}" for v in m.binaries]
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(m: MilpModel, path: str | Path) -> None:
    Path(path).write_text(format_lp(m))


# ---------------------------------------------------------------------------
# branch and bound


class ExactBudgetExceeded(RuntimeError):
    """The time budget ran out before optimality was proven."""

    def __init__(self, incumbent: Schedule, message: str = "exact search budget exhausted"):
        super().__init__(message)
        self.incumbent = incumbent


@dataclass(frozen=True)
class _Item:
    id: str
    duration: float
    domains: tuple[tuple[float, float], ...]  # windows the observation must fit in


def _earliest(item: _Item, t: float) -> float | None:
    for lo, hi in item.domains:
        s = max(lo, t)
        if s + item.duration <= hi + EPS:
            return s
    return None


def _sequence(items: tuple[_Item, ...], transition,
              deadline: float = float("inf")) -> dict[str, float] | None:
    """Start times for some feasible ordering of ``items`` or None.

    Dynamic programme over subsets, one layer per subset size: for each
    reachable (subset, last item) keep the earliest start of the last item,
    which dominates later starts.  Raises :class:`TimeoutError` once
    ``deadline`` (monotonic clock) has passed.
    """
    n = len(items)
    if n == 0:
        return {}
    layer: dict[tuple[int, int], float] = {}
    for i, it in enumerate(items):
        s = _earliest(it, float("-inf"))
        if s is not None:
            layer[(1 << i, i)] = s
    layers = [layer]
    parents: list[dict[tuple[int, int], int]] = [{}]
    for _ in range(n - 1):
        nxt: dict[tuple[int, int], float] = {}
        back: dict[tuple[int, int], int] = {}
        for k, ((mask, last), t) in enumerate(sorted(layer.items())):
            if k & 0xFF == 0 and time.monotonic() > deadline:
                raise TimeoutError
            a = items[last]
            for j in range(n):
                if mask >> j & 1:
                    continue
                b = items[j]
                s = _earliest(b, t + a.duration + transition(a.id, b.id))
                key = (mask | 1 << j, j)
                if s is not None and s < nxt.get(key, float("inf")):
                    nxt[key] = s
                    back[key] = last
        if not nxt:
            return None
        layer = nxt
        layers.append(layer)
        parents.append(back)
    last = min((i for _, i in layer), key=lambda i: (layer[((1 << n) - 1, i)], items[i].id))
    out: dict[str, float] = {}
    mask = (1 << n) - 1
    for depth in range(n - 1, -1, -1):
        out[items[last].id] = layers[depth][(mask, last)]
        prev = parents[depth].get((mask, last), -1)
        mask &= ~(1 << last)
        last = prev
    return out


def solve_exact(
    P: Instance, budget: float = 60.0, priority_boost: float | None = None
) -> Schedule:
    """Maximum boosted-reward valid schedule by depth-first branch and bound.

    The objective is the pair (boosted reward, raw reward), compared
    lexicographically, where exclusive users' observations carry the
    priority boost.  Requests are branched in decreasing value order over
    "serve with opportunity k" then "leave open"; each satellite's chosen
    set is checked for a feasible sequence.  The bound adds the best value
    of every request still undecided.
    """
    boosted = boosted_rewards(P, priority_boost)
    deadline = time.monotonic() + budget

    fixed_items: dict[str, list[_Item]] = {s.id: [] for s in P.satellites}
    for f in P.fixed:
        fixed_items[f.satellite].append(_Item(f.observation, f.duration,
                                              ((f.start, f.start + f.duration),)))

    options: list[tuple[float, float, str, list[tuple[Observation, _Item]]]] = []
    for r in P.open_requests:
        opts = []
        for oid in r.opportunities:
            o = P.observation[oid]
            doms = observation_domains(P, o)
            if doms:
                opts.append((o, _Item(o.id, o.duration, tuple((w.start, w.end) for _, w in doms))))
        opts = [(o, it) for o, it in opts if boosted[o.id] > 0]
        if opts:
            top = max(opts, key=lambda x: (boosted[x[0].id], x[0].reward))[0]
            options.append((boosted[top.id], top.reward, r.id, opts))
    options.sort(key=lambda x: (-x[0], -x[1], x[2]))

    n = len(options)
    rem_b = [0.0] * (n + 1)
    rem_r = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        rem_b[i] = rem_b[i + 1] + options[i][0]
        rem_r[i] = rem_r[i + 1] + max(o.reward for o, _ in options[i][3])

    caps = {s.id: P.residual_capacity(s.id) for s in P.satellites}
    chosen: dict[str, list[_Item]] = {s.id: [] for s in P.satellites}

    @lru_cache(maxsize=None)
    def feasible(sat: str, ids: frozenset) -> dict[str, float] | None:
        items = tuple(sorted(fixed_items[sat] + [it for it in candidates[sat] if it.id in ids],
                             key=lambda it: it.id))
        return _sequence(items, P.satellite[sat].transition, deadline)

    candidates: dict[str, list[_Item]] = {s.id: [] for s in P.satellites}
    for _, _, _, opts in options:
        for o, it in opts:
            candidates[o.satellite].append(it)

    best: list = [(float("-inf"), float("-inf")), {}]
    nodes = [0]

    def snapshot() -> dict[str, float]:
        starts: dict[str, float] = {}
        for sat, items in chosen.items():
            seq = feasible(sat, frozenset(it.id for it in items))
            starts.update({k: v for k, v in seq.items() if k in {it.id for it in items}})
        return starts

    def search(i: int, cur_b: float, cur_r: float) -> None:
        nodes[0] += 1
        if nodes[0] % 512 == 0 and time.monotonic() > deadline:
            raise ExactBudgetExceeded(_finish(P, best[1]))
        bb, br = best[0]
        if (cur_b, cur_r) > (bb, br):
            best[0] = (cur_b, cur_r)
            best[1] = snapshot()
            bb, br = best[0]
        if i == n:
            return
        ub_b, ub_r = cur_b + rem_b[i], cur_r + rem_r[i]
        if ub_b < bb or (ub_b == bb and ub_r <= br):
            return
        for o, it in options[i][3]:
            lst = chosen[o.satellite]
            if len(lst) >= caps[o.satellite]:
                continue
            lst.append(it)
            if feasible(o.satellite, frozenset(x.id for x in lst)) is not None:
                search(i + 1, cur_b + boosted[o.id], cur_r + o.reward)
            lst.pop()
        search(i + 1, cur_b, cur_r)

    try:
        search(0, 0.0, 0.0)
    except TimeoutError:
        raise ExactBudgetExceeded(_finish(P, best[1])) from None
    return _finish(P, best[1])


def _finish(P: Instance, starts: dict[str, float]) -> Schedule:
    grants: set[tuple[str, str]] = set()
    for oid, t in starts.items():
        grants |= grants_for(P, P.observation[oid], t)
    return Schedule(starts, grants)


__all__ = [
    "ExactBudgetExceeded",
    "MilpModel",
    "Row",
    "boosted_rewards",
    "build_milp",
    "default_priority_boost",
    "delta_max",
    "export_lp",
    "format_lp",
    "solve_exact",
]
