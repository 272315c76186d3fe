"""Seeded random instances for the two experiment regimes.

``conflicting`` packs four exclusive users and a busy central planner on
three small satellites over five minutes; ``realistic`` spreads larger
order books over eight satellites and six hours, with every observation
window inside some exclusive.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import (
    Exclusive,
    Instance,
    Observation,
    Request,
    Satellite,
    TimeWindow,
    User,
    free_windows,
)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    seed: int = 0
    satellite_count: int = 3
    satellite_capacity: int = 20
    horizon: TimeWindow = TimeWindow(0.0, 300.0)
    exclusive_user_count: int = 4
    requests_per_exclusive_user: tuple[int, int] = (2, 2)
    exclusives_per_user: int = 8
    exclusive_duration: tuple[float, float] = (15, 20)
    central_request_count: tuple[int, int] = (8, 8)
    opportunities_per_request: int = 10
    observation_duration: float = 5
    observation_window_duration: tuple[float, float] = (10, 20)
    exclusive_reward: tuple[float, ...] = (10, 20, 30, 40, 50)
    central_reward: tuple[int, int] = (1, 5)
    transition_time: float = 1
    windows_only_inside_exclusives: bool = False
    exclusive_priority: int = 1
    central_priority: int = 2
    max_retries: int = 1000
    scale: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        for name in ("requests_per_exclusive_user", "exclusive_duration",
                     "central_request_count", "observation_window_duration",
                     "central_reward"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range {lo}..{hi}")
        if not self.exclusive_reward:
            raise ValueError("exclusive_reward: empty set")
        if self.observation_duration <= 0 or self.exclusive_duration[0] <= 0:
            raise ValueError("durations must be positive")
        if self.observation_window_duration[0] < self.observation_duration:
            raise ValueError("observation windows shorter than the observation")
        if self.satellite_count < 1 or self.opportunities_per_request < 1:
            raise ValueError("need at least one satellite and one opportunity")


def _draw(rng: random.Random, lo: float, hi: float) -> float:
    if float(lo).is_integer() and float(hi).is_integer():
        return float(rng.randint(int(lo), int(hi)))
    return rng.uniform(lo, hi)


def _place(rng: random.Random, span: TimeWindow, length: float) -> TimeWindow:
    start = _draw(rng, span.start, span.end - length)
    return TimeWindow(start, start + length)


def _exclusives(params: GenerationParams, rng: random.Random, sats: list[str]) -> dict:
    taken: dict[str, list[TimeWindow]] = {s: [] for s in sats}
    out: dict[str, list[Exclusive]] = {}
    for k in range(1, params.exclusive_user_count + 1):
        uid = f"u{k}"
        out[uid] = []
        for _ in range(params.exclusives_per_user):
            for _attempt in range(params.max_retries):
                sat = sats[rng.randrange(len(sats))]
                length = min(_draw(rng, *params.exclusive_duration), params.horizon.length)
                w = _place(rng, params.horizon, length)
                if not any(w.overlaps(o) for o in taken[sat]):
                    taken[sat].append(w)
                    out[uid].append(Exclusive(sat, w))
                    break
            else:
                raise GenerationError(
                    f"could not place an exclusive for {uid} in {params.max_retries} attempts"
                )
    return out


def generate(params: GenerationParams) -> Instance:
    """Draw an instance; identical params give an identical instance."""
    rng = random.Random(params.seed)
    sat_ids = [f"s{i}" for i in range(params.satellite_count)]
    satellites = tuple(
        Satellite(s, params.horizon, params.satellite_capacity, float(params.transition_time))
        for s in sat_ids
    )
    excl = _exclusives(params, rng, sat_ids)
    users = [User("u0", (), params.central_priority)]
    users += [User(uid, tuple(ex), params.exclusive_priority) for uid, ex in excl.items()]
    skeleton = Instance(satellites, tuple(users))
    all_exclusives = [e for uid in excl for e in excl[uid]]
    dur = float(params.observation_duration)

    requests: list[Request] = []
    observations: list[Observation] = []

    def add_request(owner: str, j: int, reward: float, windows: list[tuple[str, TimeWindow]],
                    priority: int) -> None:
        rid = f"r{owner[1:]}_{j}"
        obs = [
            Observation(f"o{owner[1:]}_{j}_{k}", w, dur, rid, reward, sat, owner, priority)
            for k, (sat, w) in enumerate(windows)
        ]
        hull = TimeWindow(min(w.start for _, w in windows), max(w.end for _, w in windows))
        position = (round(rng.uniform(-90, 90), 4), round(rng.uniform(-180, 180), 4), 0.0)
        requests.append(Request(rid, hull, dur, reward, owner,
                                tuple(o.id for o in obs), position))
        observations.extend(obs)

    def window_in(ex: Exclusive) -> tuple[str, TimeWindow]:
        length = min(_draw(rng, *params.observation_window_duration), ex.window.length)
        return ex.satellite, _place(rng, ex.window, length)

    for uid, exs in excl.items():
        for j in range(int(_draw(rng, *params.requests_per_exclusive_user))):
            reward = float(rng.choice(params.exclusive_reward))
            wins = [window_in(exs[rng.randrange(len(exs))])
                    for _ in range(params.opportunities_per_request)]
            add_request(uid, j, reward, wins, params.exclusive_priority)

    for j in range(int(_draw(rng, *params.central_request_count))):
        reward = _draw(rng, *params.central_reward)
        wins = []
        for _ in range(params.opportunities_per_request):
            sat = sat_ids[rng.randrange(len(sat_ids))]
            inside = params.windows_only_inside_exclusives or rng.random() < 0.5
            length = _draw(rng, *params.observation_window_duration)
            gaps = [g for g in free_windows(skeleton, sat, params.horizon) if g.length >= length]
            if gaps and (not inside or not all_exclusives):
                # gaps weighted by how many start positions they offer
                weights = [g.length - length + 1 for g in gaps]
                gap = rng.choices(gaps, weights=weights)[0]
                wins.append((sat, _place(rng, gap, length)))
                continue
            pool = [e for e in all_exclusives if e.satellite == sat] or all_exclusives
            if not pool:
                raise GenerationError("no exclusive window to host an observation")
            wins.append(window_in(pool[rng.randrange(len(pool))]))
        add_request("u0", j, reward, wins, params.central_priority)

    return Instance(satellites, tuple(users), tuple(requests), tuple(observations))


CONFLICTING_SCALES = range(10)
REALISTIC_SCALES = range(5)


def conflicting_preset(scale: int, seed: int = 0) -> GenerationParams:
    """Highly conflicting regime; ``scale`` 0..9 sweeps 2..20 requests per
    exclusive user and four times as many central requests."""
    if scale not in CONFLICTING_SCALES:
        raise ValueError(f"conflicting scale must be in 0..{CONFLICTING_SCALES[-1]}, got {scale}")
    per_user = 2 + 2 * scale
    return GenerationParams(
        seed=seed,
        requests_per_exclusive_user=(per_user, per_user),
        central_request_count=(4 * per_user, 4 * per_user),
        scale=scale,
    )


def realistic_preset(scale: int, seed: int = 0) -> GenerationParams:
    """Large order books; ``scale`` 0..4 sweeps 20..100 requests per exclusive
    user and 25..250 central requests."""
    if scale not in REALISTIC_SCALES:
        raise ValueError(f"realistic scale must be in 0..{REALISTIC_SCALES[-1]}, got {scale}")
    per_user = 20 + 20 * scale
    central = int(round(25 + 225 * scale / 4))
    return GenerationParams(
        seed=seed,
        satellite_count=8,
        satellite_capacity=500,
        horizon=TimeWindow(0.0, 21600.0),
        exclusive_user_count=5,
        requests_per_exclusive_user=(per_user, per_user),
        exclusives_per_user=10,
        exclusive_duration=(300, 600),
        central_request_count=(central, central),
        opportunities_per_request=5,
        observation_duration=20,
        observation_window_duration=(40, 60),
        windows_only_inside_exclusives=True,
        scale=scale,
    )


PRESETS = {"conflicting": conflicting_preset, "realistic": realistic_preset}
PRESET_SCALES = {"conflicting": CONFLICTING_SCALES, "realistic": REALISTIC_SCALES}


def sample_scenario() -> Instance:
    """Three satellites, two exclusive users and the central planner, each
    request with two opportunities; satellites hold at most four
    observations.  A central observation sits inside ``u1``'s exclusive on
    ``s0``."""
    h = TimeWindow(0.0, 100.0)
    sats = tuple(Satellite(s, h, 4, 1.0) for s in ("s0", "s1", "s2"))
    users = (
        User("u0", (), 2),
        User("u1", (Exclusive("s0", TimeWindow(10, 30)), Exclusive("s1", TimeWindow(20, 40))), 1),
        User("u2", (Exclusive("s0", TimeWindow(50, 70)), Exclusive("s2", TimeWindow(30, 50))), 1),
    )
    layout = {
        # request: (owner, reward, [(satellite, start, end), ...])
        "r1_0": ("u1", 30.0, [("s0", 12, 25), ("s1", 22, 35)]),
        "r2_0": ("u2", 20.0, [("s0", 52, 65), ("s2", 32, 45)]),
        "r2_1": ("u2", 40.0, [("s0", 55, 70), ("s2", 35, 50)]),
        "r0_0": ("u0", 3.0, [("s0", 15, 28), ("s1", 60, 80)]),
        "r0_1": ("u0", 2.0, [("s1", 70, 90), ("s2", 75, 95)]),
        "r0_2": ("u0", 5.0, [("s2", 0, 15), ("s0", 80, 95)]),
    }
    prio = {u.id: u.priority for u in users}
    requests, observations = [], []
    for rid, (owner, reward, wins) in layout.items():
        j = rid.split("_")[1]
        obs = [
            Observation(f"o{owner[1:]}_{j}_{k}", TimeWindow(a, b), 5.0, rid, reward, s, owner,
                        prio[owner])
            for k, (s, a, b) in enumerate(wins)
        ]
        hull = TimeWindow(min(o.window.start for o in obs), max(o.window.end for o in obs))
        requests.append(Request(rid, hull, 5.0, reward, owner, tuple(o.id for o in obs)))
        observations += obs
    return Instance(sats, users, tuple(requests), tuple(observations))
