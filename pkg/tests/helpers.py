"""Small instance builders shared by the tests."""

from __future__ import annotations

import random

from eoscsp.generate import GenerationParams, generate
from eoscsp.model import (
    Exclusive,
    Instance,
    Observation,
    Request,
    Satellite,
    TimeWindow,
    User,
)


def build(satellites, users, requests, *, horizon=(0.0, 100.0), transition=1.0) -> Instance:
    """Compact constructor.

    satellites: {id: capacity}
    users: {id: [(satellite, start, end), ...]}; "u0" is added when absent
    requests: [(request_id, owner, reward, duration, [(satellite, start, end), ...])]
    """
    h = TimeWindow(*horizon)
    sats = tuple(Satellite(s, h, cap, transition) for s, cap in satellites.items())
    users = dict(users)
    users.setdefault("u0", [])
    us = tuple(
        User(u, tuple(Exclusive(s, TimeWindow(a, b)) for s, a, b in ex), 2 if not ex else 1)
        for u, ex in users.items()
    )
    prio = {u.id: u.priority for u in us}
    reqs, obs = [], []
    for rid, owner, reward, dur, wins in requests:
        ids = []
        for k, (s, a, b) in enumerate(wins):
            oid = f"{rid}.{k}"
            ids.append(oid)
            obs.append(Observation(oid, TimeWindow(a, b), dur, rid, reward, s, owner, prio[owner]))
        hull = TimeWindow(min(w[1] for w in wins), max(w[2] for w in wins))
        reqs.append(Request(rid, hull, dur, reward, owner, tuple(ids)))
    return Instance(sats, us, tuple(reqs), tuple(obs))


def small_instance(seed: int, max_obs: int) -> Instance:
    """Random instance with at most ``max_obs`` observations."""
    rng = random.Random(seed)
    attempt = seed
    while True:
        params = GenerationParams(
            seed=attempt,
            satellite_count=rng.randint(1, 2),
            satellite_capacity=rng.randint(1, 4),
            horizon=TimeWindow(0, 60),
            exclusive_user_count=rng.randint(0, 2),
            requests_per_exclusive_user=(1, 2),
            exclusives_per_user=rng.randint(1, 2),
            exclusive_duration=(8, 15),
            central_request_count=(1, 3),
            opportunities_per_request=rng.randint(1, 2),
            observation_duration=4,
            observation_window_duration=(5, 12),
            central_reward=(1, 5),
        )
        P = generate(params)
        if len(P.observations) <= max_obs:
            return P
        attempt += 100_000
