"""Sequential per-request DCOP coordination among exclusive users.

For each central request, the users whose exclusives touch one of its
opportunity windows build a small DCOP: one binary variable per
(exclusive, observation) pair, at most one host per request and per
observation, and no satellite beyond its residual capacity.  Setting a
variable to 1 costs the revision price of hosting minus the hosted reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .agents import (
    EPS,
    ExclusiveAgent,
    Hosting,
    assemble,
    best_hosting,
    make_agents,
    request_payload,
    residual_pass,
)
from .auctions import AuctionResult, central_order
from .dcop import (
    DEFAULT_MEMORY_CAP,
    INF,
    Constraint,
    DcopProblem,
    solve_dpop,
)
from .greedy import Board
from .model import Instance, Schedule, validate_schedule
from .runtime import MessageBus


def pi(o: str, M_u: Schedule, u: str, P: Instance) -> float:
    """Least own reward ``u`` must drop from ``M_u`` to host ``o`` in one of
    its exclusives; ``inf`` when no revision makes room."""
    obs = P.observation[o]
    board = Board(P)
    for oid, t in M_u.entries.items():
        board.insert(P.observation[oid], t)
    removable = {oid: P.observation[oid].reward for oid in M_u.entries
                 if P.observation[oid].owner == u}
    windows = [w for ex in P.user[u].exclusives_on(obs.satellite)
               if (w := ex.intersection(obs.window)) is not None]
    h = best_hosting(board, obs, windows, removable, None)
    return INF if h is None else h.cost


@dataclass
class RequestDcopContext:
    request: str
    eligible_agents: list[str]
    candidate_obs: dict[str, list[str]]
    residual_capacity: dict[str, int]
    pi_table: dict[str, float] = field(default_factory=dict)
    hostings: dict[str, Hosting] = field(default_factory=dict)
    variables: dict[str, tuple[str, int, str]] = field(default_factory=dict)


def _var(user: str, k: int, obs: str) -> str:
    return f"x[{user}#{k},{obs}]"


def _at_most(limit: int):
    def cost(*values: int) -> float:
        return 0.0 if sum(values) <= limit else INF
    return cost


def _unary(price: float):
    def cost(x: int) -> float:
        return price if x else 0.0
    return cost


def build_request_dcop(
    P: Instance, r: str, board: Board, agents: Mapping[str, ExclusiveAgent]
) -> tuple[DcopProblem | None, RequestDcopContext]:
    """DCOP for request ``r`` against the current plans; ``None`` when no
    exclusive user can take part."""
    eligible: dict[str, list[str]] = {}
    variables: dict[str, tuple[str, int, str]] = {}
    for uid in sorted(agents):
        user = P.user[uid]
        for oid in P.request[r].opportunities:
            obs = P.observation[oid]
            for k, ex in enumerate(user.exclusives):
                if ex.satellite == obs.satellite and ex.window.intersects(obs.window):
                    variables[_var(uid, k, oid)] = (uid, k, oid)
                    eligible.setdefault(uid, [])
                    if oid not in eligible[uid]:
                        eligible[uid].append(oid)
    sats = sorted({P.observation[o].satellite for o in P.request[r].opportunities})
    ctx = RequestDcopContext(r, sorted(eligible), eligible,
                             {s: board.residual(s) for s in sats}, variables=variables)
    if not variables:
        return None, ctx

    constraints: list[Constraint] = []
    for name, (uid, k, oid) in variables.items():
        obs = P.observation[oid]
        ex = P.user[uid].exclusives[k]
        w = ex.window.intersection(obs.window)
        h = None
        if w is not None and w.length >= obs.duration - EPS:
            h = best_hosting(board, obs, [w], agents[uid].removable(), None)
        ctx.pi_table[name] = INF if h is None else h.cost
        if h is not None:
            ctx.hostings[name] = h
        constraints.append(Constraint(f"pi:{name}", (name,), _unary(ctx.pi_table[name] - obs.reward)))

    names = sorted(variables)
    if len(names) > 1:
        constraints.append(Constraint(f"one-per-request:{r}", tuple(names), _at_most(1), True))
    for s in sats:
        on_s = tuple(n for n in names if P.observation[variables[n][2]].satellite == s)
        if on_s and ctx.residual_capacity[s] < len(on_s):
            constraints.append(Constraint(f"capacity:{s}", on_s,
                                          _at_most(max(ctx.residual_capacity[s], 0)), True))
    for oid in P.request[r].opportunities:
        same = tuple(n for n in names if variables[n][2] == oid)
        if len(same) > 1:
            constraints.append(Constraint(f"one-host:{oid}", same, _at_most(1), True))

    problem = DcopProblem(
        agents=tuple(ctx.eligible_agents),
        owner={n: variables[n][0] for n in names},
        domains={n: (0, 1) for n in names},
        constraints=constraints,
    )
    return problem, ctx


def build_dcop(r: str, schedules: Mapping[str, Schedule], P: Instance,
               ) -> tuple[DcopProblem | None, RequestDcopContext]:
    """Build the DCOP for ``r`` from per-user plans."""
    board = Board(P)
    agents = {}
    for u in P.exclusive_users:
        agents[u.id] = ExclusiveAgent(P, u.id, board, None)
    for uid, M in schedules.items():
        for oid, t in M.entries.items():
            board.insert(P.observation[oid], t)
        if uid in agents:
            agents[uid].plan = M
            agents[uid].hosted = {o for o in M.entries if P.observation[o].owner != uid}
    return build_request_dcop(P, r, board, agents)


def solve_sdcop(
    P: Instance,
    *,
    bus: MessageBus | None = None,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    debug: bool = False,
    dumps: list | None = None,
) -> AuctionResult:
    """Sequential DCOP solver.

    Central requests are handled one by one in due-date order; the winning
    user commits the placement priced in the DCOP, then every exclusive user
    reports its foreign placements.  ``dumps`` collects each request's DCOP
    as a dict when given.
    """
    bus = bus if bus is not None else MessageBus()
    u0 = P.central_user.id
    bus.register(u0, *(u.id for u in P.exclusive_users))
    board = Board(P, debug=debug)
    agents = make_agents(P, board, None)
    awarded: dict[str, str] = {}

    for r in central_order(P):
        problem, ctx = build_request_dcop(P, r, board, agents)
        if problem is None:
            continue
        payload = request_payload(P, r)
        for uid in ctx.eligible_agents:
            bus.send(u0, uid, "announce", payload)
        bus.next_round()
        for uid in ctx.eligible_agents:
            bus.deliver(uid)
        if dumps is not None:
            dumps.append({"request": r, "dcop": problem.to_dict()})
        solution = solve_dpop(problem, bus=bus, memory_cap=memory_cap)
        for uid in ctx.eligible_agents:
            bus.deliver(uid)
        chosen = [n for n, v in solution.assignment.items() if v == 1]
        if solution.feasible and solution.cost < -EPS and chosen:
            (name,) = chosen
            uid = ctx.variables[name][0]
            lost = agents[uid].commit(ctx.hostings[name])
            agents[uid].reinsert(lost)
            awarded[r] = uid
        for uid in sorted(agents):
            placed = agents[uid].foreign_entries()
            bus.send(uid, u0, "plan-report",
                     {"placements": [[o, t] for o, t in sorted(placed.items())]})
        bus.next_round()
        bus.deliver(u0)
        if debug:
            verdict = validate_schedule(P, assemble(P, board, agents))
            if not verdict.ok:
                raise AssertionError(f"after {r}: {verdict.violations[0]}")

    served = {P.observation[o].request for a in agents.values() for o in a.hosted}
    residual_pass(P, board, served)
    return AuctionResult(assemble(P, board, agents), bus, awarded)

