"""Auction-based sharing of central requests among exclusive users.

All three protocols start the same way: every exclusive user plans its own
requests inside its exclusives, then bids on central requests by pricing
them against that plan.  Winners host the request in their exclusive
window.  Each protocol ends with a plan report per user and a residual
greedy pass by the central planner outside every exclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents import (
    EPS,
    ExclusiveAgent,
    Hosting,
    assemble,
    make_agents,
    request_payload,
    residual_pass,
)
from .greedy import Board
from .model import Instance, Schedule
from .runtime import MessageBus


class ConvergenceError(RuntimeError):
    pass


@dataclass
class AuctionResult:
    schedule: Schedule
    bus: MessageBus
    awarded: dict[str, str] = field(default_factory=dict)
    rounds: int = 0


def central_order(P: Instance) -> list[str]:
    """Open central requests by due date (latest window end), then id."""
    central = P.central_user.id
    reqs = [r for r in P.open_requests if r.owner == central]
    return [r.id for r in sorted(reqs, key=lambda r: (r.window.end, r.id))]


def _setup(P: Instance, bus: MessageBus | None, max_displaced: int | None):
    bus = bus if bus is not None else MessageBus()
    bus.register(P.central_user.id, *(u.id for u in P.exclusive_users))
    board = Board(P)
    return bus, board, make_agents(P, board, max_displaced)


def _bid_payload(request: str, value: float, hosting: Hosting, satellite: str) -> dict:
    # displaced observations stay private to the bidder
    return {"request": request, "value": value, "observation": hosting.observation,
            "satellite": satellite, "start": hosting.start}


def _pick(bids: list[tuple[float, str]]) -> str:
    """Highest value wins; ties go to the lowest user id."""
    return min(bids, key=lambda b: (-b[0], b[1]))[1]


def _finish(P: Instance, bus: MessageBus, board: Board, agents: dict[str, ExclusiveAgent],
            awarded: dict[str, str], rounds: int = 0) -> AuctionResult:
    u0 = P.central_user.id
    for uid in sorted(agents):
        placed = agents[uid].foreign_entries()
        bus.send(uid, u0, "plan-report",
                 {"placements": [[o, t] for o, t in sorted(placed.items())]})
    bus.next_round()
    bus.deliver(u0)
    served = {P.observation[o].request for a in agents.values() for o in a.hosted}
    residual_pass(P, board, served)
    return AuctionResult(assemble(P, board, agents), bus, awarded, rounds)


def solve_psi(P: Instance, *, bus: MessageBus | None = None,
              max_displaced: int | None = 1) -> AuctionResult:
    """Parallel single-item auction.

    Every user prices every central request against the same initial plan
    and sends all its bids at once.  Awards follow due-date order and the
    winner inserts the observation at the start it bid, dropping whatever
    own observations now conflict with it.  An award that no longer has
    positive value is declined and left to the residual pass.
    """
    bus, board, agents = _setup(P, bus, max_displaced)
    u0 = P.central_user.id
    order = central_order(P)
    announce = {"requests": [request_payload(P, r) for r in order]}
    for uid in sorted(agents):
        bus.send(u0, uid, "announce", announce)
    bus.next_round()

    bids: dict[str, list[tuple[float, str]]] = {r: [] for r in order}
    placements: dict[tuple[str, str], Hosting] = {}
    for uid in sorted(agents):
        bus.deliver(uid)
        mine = []
        for r in order:
            offer = agents[uid].best_offer(r)
            if offer is not None:
                value, h = offer
                mine.append(_bid_payload(r, value, h, P.observation[h.observation].satellite))
                bids[r].append((value, uid))
                placements[(uid, r)] = h
        if mine:
            bus.send(uid, u0, "bid", {"bids": mine})
    bus.next_round()
    bus.deliver(u0)

    awarded: dict[str, str] = {}
    for r in order:
        if not bids[r]:
            continue
        winner = _pick(bids[r])
        placement = placements[(winner, r)]
        bus.send(u0, winner, "award", {"request": r, "observation": placement.observation,
                                       "start": placement.start})
        if agents[winner].merge(placement) is not None:
            awarded[r] = winner
    bus.next_round()
    for uid in agents:
        bus.deliver(uid)
    return _finish(P, bus, board, agents, awarded)


def solve_ssi(P: Instance, *, bus: MessageBus | None = None,
              max_displaced: int | None = 1) -> AuctionResult:
    """Sequential single-item auction: one request at a time, in due-date
    order, each priced against the plans left by the previous awards."""
    bus, board, agents = _setup(P, bus, max_displaced)
    u0 = P.central_user.id
    awarded: dict[str, str] = {}
    for r in central_order(P):
        payload = request_payload(P, r)
        for uid in sorted(agents):
            bus.send(u0, uid, "announce", payload)
        bus.next_round()
        bids = []
        for uid in sorted(agents):
            bus.deliver(uid)
            offer = agents[uid].best_offer(r)
            if offer is None:
                continue
            value, h = offer
            bus.send(uid, u0, "bid", _bid_payload(r, value, h, P.observation[h.observation].satellite))
            bids.append((value, uid, h))
        bus.next_round()
        bus.deliver(u0)
        if not bids:
            continue
        winner = _pick([(v, u) for v, u, _ in bids])
        hosting = next(h for _, u, h in bids if u == winner)
        bus.send(u0, winner, "award", {"request": r, "observation": hosting.observation,
                                       "start": hosting.start})
        bus.next_round()
        bus.deliver(winner)
        lost = agents[winner].commit(hosting)
        agents[winner].reinsert(lost)
        awarded[r] = winner
    return _finish(P, bus, board, agents, awarded)


# ---------------------------------------------------------------------------
# consensus-based bundle algorithm


def _beats(y1: float, z1: str | None, y2: float, z2: str | None) -> bool:
    """Bid ``(y1, z1)`` beats ``(y2, z2)``: higher value, lower id on ties."""
    if z1 is None:
        return False
    if z2 is None:
        return y1 > 0
    return y1 > y2 + EPS or (abs(y1 - y2) <= EPS and z1 < z2)


class CbbaAgent:
    """Bundle builder and consensus table of one exclusive user.

    Bundles are evaluated on a private copy of the board that holds the
    user's tentative placements.  Marginal values are capped by the values
    already in the bundle so that later items never look more attractive
    than earlier ones, which keeps the auction convergent.
    """

    def __init__(self, agent: ExclusiveAgent, items: list[str], neighbours: list[str]):
        self.agent = agent
        self.id = agent.id
        self.items = items
        self.neighbours = neighbours
        self.shared: dict[str, set[str]] = {}
        self.bundle: list[str] = []
        self.hostings: dict[str, Hosting] = {}
        self.y: dict[str, float] = {j: 0.0 for j in items}
        self.z: dict[str, str | None] = {j: None for j in items}
        self.stamp: dict[str, int] = {}
        self._base = agent.board
        self._view: ExclusiveAgent | None = None

    def _rebuild(self) -> None:
        view = ExclusiveAgent(self.agent.P, self.id, self._base.copy(), self.agent.max_displaced)
        view.plan = self.agent.plan
        view.hosted = set(self.agent.hosted)
        for j in self.bundle:
            view.commit(self.hostings[j])
        self._view = view

    def state(self) -> tuple:
        return (tuple(self.bundle), tuple(sorted(self.z.items(), key=lambda kv: kv[0])),
                tuple(sorted(self.y.items())))

    def build_bundle(self) -> None:
        if self._view is None:
            self._rebuild()
        view = self._view
        cap = min((self.y[j] for j in self.bundle), default=float("inf"))
        while True:
            best = None
            for j in self.items:
                if j in self.bundle:
                    continue
                offer = view.best_offer(j)
                if offer is None:
                    continue
                value = min(offer[0], cap)
                if not _beats(value, self.id, self.y[j], self.z[j]) and self.z[j] != self.id:
                    continue
                key = (-value, j)
                if best is None or key < best[0]:
                    best = (key, j, value, offer[1])
            if best is None:
                return
            _, j, value, hosting = best
            view.commit(hosting)
            self.bundle.append(j)
            self.hostings[j] = hosting
            self.y[j], self.z[j] = value, self.id
            cap = min(cap, value)

    def release(self) -> None:
        """Drop the first item we were outbid on and everything after it."""
        cut = next((n for n, j in enumerate(self.bundle) if self.z[j] != self.id), None)
        if cut is None:
            return
        for j in self.bundle[cut + 1:]:
            if self.z[j] == self.id:
                self.y[j], self.z[j] = 0.0, None
        for j in self.bundle[cut:]:
            self.hostings.pop(j, None)
        self.bundle = self.bundle[:cut]
        self._view = None

    def message_for(self, k: str) -> dict:
        common = sorted(self.shared[k])
        return {
            "winners": [[j, self.z[j], self.y[j]] for j in common if self.z[j] is not None],
            "stamps": dict(sorted(self.stamp.items())),
        }

    def consensus(self, sender: str, msg: dict, now: int) -> None:
        """Update/reset/leave rules of the CBBA consensus table."""
        i, k = self.id, sender
        theirs = {j: (z, y) for j, z, y in msg["winners"]}
        s_k = msg["stamps"]
        for j in sorted(self.shared.get(k, ())):
            zk, yk = theirs.get(j, (None, 0.0))
            zi, yi = self.z[j], self.y[j]

            def update():
                self.z[j], self.y[j] = zk, yk

            def reset():
                self.z[j], self.y[j] = None, 0.0

            def newer(m):
                return s_k.get(m, -1) > self.stamp.get(m, -1)

            if zk == k:
                if zi == i:
                    if _beats(yk, zk, yi, zi):
                        update()
                elif zi == k or zi is None:
                    update()
                elif newer(zi) or _beats(yk, zk, yi, zi):
                    update()
            elif zk == i:
                if zi == k:
                    reset()
                elif zi not in (i, None) and newer(zi):
                    reset()
            elif zk is not None:
                if zi == i:
                    if newer(zk) and _beats(yk, zk, yi, zi):
                        update()
                elif zi == k:
                    if newer(zk):
                        update()
                    else:
                        reset()
                elif zi == zk:
                    if newer(zk):
                        update()
                elif zi is None:
                    if newer(zk):
                        update()
                else:
                    if newer(zi) and newer(zk):
                        update()
                    elif newer(zk) and _beats(yk, zk, yi, zi):
                        update()
                    elif newer(zi) and not newer(zk):
                        reset()
            else:
                if zi == k:
                    update()
                elif zi not in (i, None) and newer(zi):
                    reset()
        self.stamp[k] = now
        for m, t in s_k.items():
            if m != i and t > self.stamp.get(m, -1):
                self.stamp[m] = t


def solve_cbba(P: Instance, *, bus: MessageBus | None = None, max_displaced: int | None = 1,
               max_rounds: int = 200) -> AuctionResult:
    """Consensus-based bundle auction among the users that can host each
    central request.  Users exchange winner tables with the users they share
    candidate requests with until no bundle or winner changes."""
    bus, board, agents = _setup(P, bus, max_displaced)
    u0 = P.central_user.id
    order = central_order(P)
    candidates = {r: [u for u in sorted(agents) if agents[u].can_host(r)] for r in order}
    items = {u: [r for r in order if u in candidates[r]] for u in agents}

    for uid in sorted(agents):
        if not items[uid]:
            continue
        payload = {"requests": [
            request_payload(P, r, [o for o in P.request[r].opportunities
                                   if agents[uid].hosting_windows(P.observation[o])])
            for r in items[uid]]}
        bus.send(u0, uid, "announce", payload)
    bus.next_round()

    cbba: dict[str, CbbaAgent] = {}
    for uid in sorted(agents):
        bus.deliver(uid)
        if not items[uid]:
            continue
        mine = set(items[uid])
        shared = {k: mine & set(items[k]) for k in agents if k != uid}
        shared = {k: s for k, s in shared.items() if s}
        cbba[uid] = CbbaAgent(agents[uid], items[uid], sorted(shared))
        cbba[uid].shared = shared

    rounds = 0
    previous = {u: a.state() for u, a in cbba.items()}
    for rnd in range(1, max_rounds + 1):
        for uid, a in cbba.items():
            for env in bus.deliver(uid):
                a.consensus(env.sender, env.body(), rnd)
            a.release()
            a.build_bundle()
        for uid, a in cbba.items():
            for k in a.neighbours:
                bus.send(uid, k, "bundle-state", a.message_for(k))
        bus.next_round()
        current = {u: a.state() for u, a in cbba.items()}
        if current == previous:
            break
        previous = current
        rounds = rnd
    else:
        diverging = sorted(u for u in cbba if cbba[u].state() != previous.get(u))
        raise ConvergenceError(f"no consensus after {max_rounds} rounds; still changing: {diverging}")
    for uid in cbba:
        bus.deliver(uid)

    awarded: dict[str, str] = {}
    for uid in sorted(cbba):
        for r in cbba[uid].bundle:
            if r in awarded:
                continue
            if agents[uid].host(r) is not None:
                awarded[r] = uid
    return _finish(P, bus, board, agents, awarded, rounds)
