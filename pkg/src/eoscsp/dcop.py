"""Discrete constraint optimization: problem container, DPOP and brute force.

Costs are minimized; hard constraints use ``inf``.  DPOP runs over a DFS
pseudo-tree, sending one UTIL table up and one VALUE assignment down each
tree edge through the message bus.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Mapping, Sequence

import numpy as np

from .runtime import MessageBus

INF = math.inf
DEFAULT_MEMORY_CAP = 2**20


class DcopError(ValueError):
    pass


class DcopMemoryError(MemoryError):
    pass


@dataclass(frozen=True)
class Constraint:
    name: str
    scope: tuple[str, ...]
    cost: Callable[..., float]
    hard: bool = False

    def table(self, domains: Mapping[str, Sequence]) -> np.ndarray:
        shape = tuple(len(domains[v]) for v in self.scope)
        out = np.empty(shape, dtype=float)
        for idx in itertools.product(*(range(n) for n in shape)):
            out[idx] = self.cost(*(domains[v][k] for v, k in zip(self.scope, idx)))
        return out


@dataclass
class DcopProblem:
    agents: tuple[str, ...]
    owner: dict[str, str]
    domains: dict[str, tuple[Hashable, ...]]
    constraints: list[Constraint] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.agents = tuple(self.agents)
        self.domains = {v: tuple(d) for v, d in self.domains.items()}
        if set(self.owner) != set(self.domains):
            raise DcopError("every variable needs exactly one owner and one domain")
        for v, a in self.owner.items():
            if a not in self.agents:
                raise DcopError(f"variable {v} owned by unknown agent {a}")
            if not self.domains[v]:
                raise DcopError(f"variable {v} has an empty domain")
        for c in self.constraints:
            unknown = [v for v in c.scope if v not in self.domains]
            if unknown or not c.scope:
                raise DcopError(f"constraint {c.name} has a bad scope {c.scope}")

    @property
    def variables(self) -> list[str]:
        return sorted(self.domains)

    def total_cost(self, assignment: Mapping[str, Hashable]) -> float:
        return float(sum(c.cost(*(assignment[v] for v in c.scope)) for c in self.constraints))

    def to_dict(self) -> dict:
        return {
            "agents": list(self.agents),
            "variables": [{"name": v, "owner": self.owner[v], "domain": list(self.domains[v])}
                          for v in self.variables],
            "constraints": [
                {"name": c.name, "scope": list(c.scope), "hard": c.hard,
                 "table": [x if math.isfinite(x) else "inf"
                           for x in c.table(self.domains).ravel().tolist()]}
                for c in self.constraints
            ],
        }


@dataclass(frozen=True)
class DcopSolution:
    assignment: dict[str, Hashable]
    cost: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.cost)


@dataclass
class PseudoTree:
    parent: dict[str, str | None]
    children: dict[str, list[str]]
    pseudo_parents: dict[str, list[str]]
    depth: dict[str, int]
    order: list[str]

    @property
    def roots(self) -> list[str]:
        return [v for v in self.order if self.parent[v] is None]

    @property
    def tree_edges(self) -> list[tuple[str, str]]:
        return [(p, v) for v in self.order if (p := self.parent[v]) is not None]

    @property
    def back_edges(self) -> list[tuple[str, str]]:
        return [(a, v) for v in self.order for a in self.pseudo_parents[v]]


def build_pseudo_tree(problem: DcopProblem) -> PseudoTree:
    """DFS pseudo-tree; each component is rooted at its highest-degree
    variable (lowest id on ties) and neighbours are visited by id."""
    nbrs: dict[str, set[str]] = {v: set() for v in problem.domains}
    for c in problem.constraints:
        for a, b in itertools.combinations(set(c.scope), 2):
            nbrs[a].add(b)
            nbrs[b].add(a)
    parent: dict[str, str | None] = {}
    depth: dict[str, int] = {}
    order: list[str] = []
    remaining = sorted(problem.domains, key=lambda v: (-len(nbrs[v]), v))
    for root in remaining:
        if root in parent:
            continue
        parent[root], depth[root] = None, 0
        order.append(root)
        stack = [(root, iter(sorted(nbrs[root])))]
        while stack:
            node, it = stack[-1]
            nxt = next((v for v in it if v not in parent), None)
            if nxt is None:
                stack.pop()
                continue
            parent[nxt], depth[nxt] = node, depth[node] + 1
            order.append(nxt)
            stack.append((nxt, iter(sorted(nbrs[nxt]))))
    children: dict[str, list[str]] = {v: [] for v in order}
    for v in order:
        if parent[v] is not None:
            children[parent[v]].append(v)
    pseudo = {
        v: sorted((a for a in nbrs[v] if depth[a] < depth[v] and a != parent[v]),
                  key=lambda a: depth[a])
        for v in order
    }
    return PseudoTree(parent, children, pseudo, depth, order)


def _expand(table: np.ndarray, scope: Sequence[str], dims: Sequence[str]) -> np.ndarray:
    """View ``table`` over ``scope`` as broadcastable against ``dims``."""
    if len(set(scope)) != len(scope):
        raise DcopError(f"repeated variable in scope {tuple(scope)}")
    perm = sorted(range(len(scope)), key=lambda k: dims.index(scope[k]))
    table = np.transpose(table, perm)
    it = iter(table.shape)
    return table.reshape([next(it) if d in scope else 1 for d in dims])


def _table_payload(table: np.ndarray) -> list:
    return [x if math.isfinite(x) else "inf" for x in table.ravel().tolist()]


def solve_dpop(
    problem: DcopProblem,
    *,
    bus: MessageBus | None = None,
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> DcopSolution:
    """Exact DPOP.  Raises :class:`DcopMemoryError` when a UTIL table would
    exceed ``memory_cap`` entries; an infinite cost means infeasible."""
    tree = build_pseudo_tree(problem)
    if bus is None:
        bus = MessageBus(problem.agents)
    else:
        bus.register(*problem.agents)
    doms = problem.domains

    local: dict[str, list[Constraint]] = {v: [] for v in tree.order}
    for c in problem.constraints:
        local[max(c.scope, key=lambda v: (tree.depth[v], v))].append(c)

    util_in: dict[str, list[tuple[list[str], np.ndarray]]] = {v: [] for v in tree.order}
    joint: dict[str, tuple[list[str], np.ndarray]] = {}
    for x in reversed(tree.order):
        parts = [(list(c.scope), c.table(doms)) for c in local[x]] + util_in[x]
        sep = {v for scope, _ in parts for v in scope} - {x}
        dims = [x] + sorted(sep, key=lambda v: (tree.depth[v], v))
        size = math.prod(len(doms[v]) for v in dims)
        if size > memory_cap:
            raise DcopMemoryError(f"UTIL table of {x} needs {size} entries > cap {memory_cap}")
        acc = np.zeros([len(doms[v]) for v in dims])
        for scope, table in parts:
            acc = acc + _expand(table, scope, dims)
        joint[x] = (dims, acc)
        p = tree.parent[x]
        if p is not None:
            msg = acc.min(axis=0)
            util_in[p].append((dims[1:], msg))
            bus.send(problem.owner[x], problem.owner[p], "dcop-util",
                     {"from": x, "to": p, "separator": dims[1:], "table": _table_payload(msg)})
    bus.next_round()

    assignment: dict[str, Hashable] = {}
    cost = 0.0
    for x in tree.order:
        dims, acc = joint[x]
        idx = tuple(doms[v].index(assignment[v]) for v in dims[1:])
        column = acc[(slice(None),) + idx]
        k = int(np.argmin(column))
        assignment[x] = doms[x][k]
        if tree.parent[x] is None:
            cost += float(column[k])
        for c in tree.children[x]:
            ctx = {v: assignment[v] for v in joint[c][0][1:]}
            bus.send(problem.owner[x], problem.owner[c], "dcop-value",
                     {"from": x, "to": c, "context": ctx})
    bus.next_round()
    # recompute with the constraint set so that rounding in the tables cannot drift
    total = problem.total_cost(assignment) if math.isfinite(cost) else INF
    return DcopSolution(assignment, total)


def solve_exhaustive(problem: DcopProblem, *, cap: int = DEFAULT_MEMORY_CAP) -> DcopSolution:
    """Brute-force minimum; ties go to the lexicographically first assignment
    in variable-id order and domain order."""
    names = problem.variables
    size = math.prod(len(problem.domains[v]) for v in names)
    if size > cap:
        raise DcopMemoryError(f"{size} assignments exceed cap {cap}")
    best: tuple[float, dict[str, Any]] | None = None
    for values in itertools.product(*(problem.domains[v] for v in names)):
        a = dict(zip(names, values))
        c = problem.total_cost(a)
        if best is None or c < best[0]:
            best = (c, a)
    assert best is not None
    return DcopSolution(best[1], best[0])
