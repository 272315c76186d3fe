import pytest
from hypothesis import given, settings, strategies as st

from eoscsp.generate import (
    GenerationError,
    GenerationParams,
    conflicting_preset,
    generate,
    realistic_preset,
)
from eoscsp.model import TimeWindow


def inside_or_outside(P):
    """Every window sits fully inside one exclusive or touches none."""
    for o in P.observations:
        exs = [ex for ex, _ in P.exclusives_by_satellite.get(o.satellite, [])]
        inside = [ex for ex in exs if ex.contains(o.window)]
        overlapping = [ex for ex in exs if ex.overlaps(o.window)]
        if not (len(inside) == 1 or not overlapping):
            return False
    return True


def test_conflicting_seed_zero_shape():
    P = generate(conflicting_preset(0, 0))
    assert len(P.satellites) == 3
    assert all(s.capacity == 20 for s in P.satellites)
    assert all(s.horizon == TimeWindow(0, 300) for s in P.satellites)
    assert all(s.transition("a", "b") == 1 for s in P.satellites)
    assert len(P.exclusive_users) == 4


def test_realistic_seed_zero_shape():
    P = generate(realistic_preset(0, 0))
    assert len(P.satellites) == 8
    assert all(s.capacity == 500 for s in P.satellites)
    assert all(s.horizon == TimeWindow(0, 21600) for s in P.satellites)
    assert len(P.exclusive_users) == 5
    assert {o.duration for o in P.observations} == {20}


def test_same_seed_same_json():
    a = generate(conflicting_preset(1, 7)).to_json()
    b = generate(conflicting_preset(1, 7)).to_json()
    assert a == b
    assert a != generate(conflicting_preset(1, 8)).to_json()


@pytest.mark.parametrize("scale,per_user,central", [(0, 2, 8), (9, 20, 80)])
def test_conflicting_sweep_ends(scale, per_user, central):
    p = conflicting_preset(scale)
    assert p.requests_per_exclusive_user == (per_user, per_user)
    assert p.central_request_count == (central, central)
    P = generate(p)
    owners = [r.owner for r in P.requests]
    assert owners.count("u0") == central
    assert all(owners.count(u.id) == per_user for u in P.exclusive_users)


def test_conflicting_parameters():
    p = conflicting_preset(3)
    assert p.exclusive_duration == (15, 20)
    assert p.observation_window_duration == (10, 20)
    assert p.observation_duration == 5
    assert p.opportunities_per_request == 10


def test_reward_grids():
    P = generate(conflicting_preset(4, 2))
    for r in P.requests:
        if r.owner == "u0":
            assert r.reward in {1, 2, 3, 4, 5}
        else:
            assert r.reward in {10, 20, 30, 40, 50}


def test_realistic_sweep_start_and_windows():
    p = realistic_preset(0)
    assert p.requests_per_exclusive_user == (20, 20)
    assert p.central_request_count == (25, 25)
    assert realistic_preset(4).central_request_count == (250, 250)
    P = generate(p)
    for ex in (e for u in P.exclusive_users for e in u.exclusives):
        assert 300 <= ex.window.length <= 600
    for o in P.observations:
        assert any(ex.contains(o.window) for ex, _ in P.exclusives_by_satellite[o.satellite])


@pytest.mark.parametrize("maker,bad", [(conflicting_preset, 10), (conflicting_preset, -1),
                                       (realistic_preset, 5)])
def test_scale_out_of_sweep(maker, bad):
    with pytest.raises(ValueError):
        maker(bad)


def test_invalid_ranges_rejected():
    with pytest.raises(ValueError):
        GenerationParams(exclusive_duration=(20, 10))
    with pytest.raises(ValueError):
        GenerationParams(observation_duration=0)


def test_packing_failure_is_reported():
    p = GenerationParams(satellite_count=1, horizon=TimeWindow(0, 30), exclusive_user_count=3,
                         exclusives_per_user=2, exclusive_duration=(15, 15), max_retries=50)
    with pytest.raises(GenerationError):
        generate(p)


def test_no_exclusive_users():
    p = GenerationParams(exclusive_user_count=0, central_request_count=(5, 5))
    P = generate(p)
    assert P.exclusive_users == () and len(P.requests) == 5


@given(st.integers(0, 9), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_generated_instances_hold_invariants(scale, seed):
    P = generate(conflicting_preset(scale, seed))
    for windows in P.exclusives_by_satellite.values():
        spans = sorted(w for w, _ in windows)
        assert all(not a.overlaps(b) for a, b in zip(spans, spans[1:]))
    assert inside_or_outside(P)
    for o in P.observations:
        if o.owner != "u0":
            assert any(ex.contains(o.window) for ex in P.user[o.owner].exclusives_on(o.satellite))
