import json

import pytest
from hypothesis import given, settings, strategies as st

from eoscsp.generate import conflicting_preset, generate
from eoscsp.greedy import solve_greedy
from eoscsp.model import (
    Exclusive,
    Instance,
    InstanceError,
    Observation,
    Request,
    Satellite,
    Schedule,
    ScheduleError,
    TimeWindow,
    User,
    outside_exclusives,
    restrict_to_request,
    restrict_to_user,
    total_reward,
    union,
    validate_schedule,
    with_preallocation,
)

from helpers import build, small_instance


def rules(P, M):
    return sorted({v.rule for v in validate_schedule(P, M)})


# --- types -----------------------------------------------------------------


def test_time_window_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        TimeWindow(5, 4)


def test_time_window_overlap_needs_positive_length():
    a = TimeWindow(0, 10)
    assert a.overlaps(TimeWindow(5, 15))
    assert not a.overlaps(TimeWindow(10, 20))
    assert a.intersects(TimeWindow(10, 20))
    assert a.intersection(TimeWindow(10, 20)) == TimeWindow(10, 10)
    assert a.intersection(TimeWindow(11, 20)) is None


def test_overlapping_exclusives_on_one_satellite_rejected():
    with pytest.raises(InstanceError):
        build({"s0": 4}, {"u1": [("s0", 0, 20)], "u2": [("s0", 10, 30)]}, [])


def test_touching_exclusives_are_fine():
    P = build({"s0": 4}, {"u1": [("s0", 0, 20)], "u2": [("s0", 20, 30)]}, [])
    assert [u.id for u in P.exclusive_users] == ["u1", "u2"]


def test_exactly_one_central_user():
    h = TimeWindow(0, 10)
    sats = (Satellite("s0", h, 1),)
    with pytest.raises(InstanceError):
        Instance(sats, (User("u0", (), 2), User("u9", (), 2)))
    with pytest.raises(InstanceError):
        Instance(sats, (User("u1", (Exclusive("s0", TimeWindow(0, 5)),), 1),))


def test_observation_window_outside_horizon_rejected():
    with pytest.raises(InstanceError):
        build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 90, 120)])])


def test_observation_window_shorter_than_duration_rejected():
    with pytest.raises((InstanceError, ValueError)):
        build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 0, 4)])])


def test_unknown_satellite_rejected():
    with pytest.raises(InstanceError):
        build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s9", 0, 10)])])


def test_observation_priority_follows_owner():
    h = TimeWindow(0, 100)
    with pytest.raises(InstanceError):
        Instance(
            (Satellite("s0", h, 2),),
            (User("u0", (), 2),),
            (Request("r", TimeWindow(0, 10), 5, 1, "u0", ("o",)),),
            (Observation("o", TimeWindow(0, 10), 5, "r", 1, "s0", "u0", 1),),
        )


# --- sub-problems ----------------------------------------------------------


def test_restrict_to_user_in_sample_scenario(scenario):
    P2 = restrict_to_user(scenario, "u2")
    assert [r.id for r in P2.requests] == ["r2_0", "r2_1"]
    assert [o.id for o in P2.observations] == ["o2_0_0", "o2_0_1", "o2_1_0", "o2_1_1"]
    assert P2.satellites == scenario.satellites and P2.users == scenario.users


def test_restrict_to_user_without_requests_is_empty():
    P = build({"s0": 4}, {"u1": [("s0", 0, 20)]}, [("r", "u0", 1, 5, [("s0", 30, 40)])])
    P1 = restrict_to_user(P, "u1")
    assert P1.requests == () and P1.observations == ()


def test_restrict_unknown_ids_raise(scenario):
    with pytest.raises(KeyError):
        restrict_to_user(scenario, "nobody")
    with pytest.raises(KeyError):
        restrict_to_request(scenario, "nothing")


def test_restrict_to_request_keeps_its_opportunities(scenario):
    Pr = restrict_to_request(scenario, "r0_0")
    assert [r.id for r in Pr.requests] == ["r0_0"]
    assert len(Pr.observations) == 2


def test_restrict_to_request_with_ten_opportunities():
    P = generate(conflicting_preset(0, 0))
    r = P.requests[0]
    assert len(restrict_to_request(P, r.id).observations) == 10


def test_user_restrictions_union_back_to_the_instance(scenario):
    parts = [restrict_to_user(scenario, u.id) for u in scenario.users]
    whole = parts[0]
    for p in parts[1:]:
        whole = union(whole, p)
    assert {r.id for r in whole.requests} == {r.id for r in scenario.requests}
    assert {o.id for o in whole.observations} == {o.id for o in scenario.observations}


def test_bid_subproblem_is_user_plus_request(scenario):
    sub = union(restrict_to_user(scenario, "u1"), restrict_to_request(scenario, "r0_0"))
    assert [r.id for r in sub.requests] == ["r0_0", "r1_0"]


def test_union_identity_and_idempotence(scenario):
    empty = Instance(scenario.satellites, scenario.users)
    assert union(scenario, empty) == scenario
    assert union(scenario, scenario) == scenario


def test_union_rejects_conflicting_records(scenario):
    other = build({"s0": 9}, {}, [])
    with pytest.raises(InstanceError):
        union(scenario, other)


def test_outside_exclusives_partial_overlap_kept():
    P = build({"s0": 4}, {"u1": [("s0", 0, 20)]}, [("r", "u0", 1, 5, [("s0", 10, 30)])])
    assert [o.id for o in outside_exclusives(P).observations] == ["r.0"]


def test_outside_exclusives_too_short_remainder_dropped():
    P = build({"s0": 4}, {"u1": [("s0", 0, 20)]}, [("r", "u0", 1, 5, [("s0", 10, 24)])])
    assert outside_exclusives(P).observations == ()
    assert outside_exclusives(P).requests == ()


def test_outside_exclusives_without_exclusives_is_identity():
    P = build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 10, 24)])])
    assert outside_exclusives(P) == P


def test_outside_exclusives_of_realistic_instance_is_empty():
    from eoscsp.generate import realistic_preset

    P = generate(realistic_preset(0, 0))
    assert outside_exclusives(P).observations == ()


@given(st.integers(0, 300))
@settings(max_examples=30, deadline=None)
def test_outside_exclusives_idempotent(seed):
    P = small_instance(seed, 12)
    once = outside_exclusives(P)
    assert outside_exclusives(once) == once


def test_preallocation_consumes_capacity():
    P = build({"s0": 4}, {}, [(f"r{i}", "u0", 1, 5, [("s0", 0, 100)]) for i in range(4)])
    M = Schedule({"r0.0": 0, "r1.0": 10, "r2.0": 20})
    Q = with_preallocation(P, M)
    assert Q.residual_capacity("s0") == 1
    assert [r.id for r in Q.open_requests] == ["r3"]


def test_preallocation_of_empty_schedule_is_identity(scenario):
    assert with_preallocation(scenario, Schedule()) == scenario


def test_preallocation_of_everything_leaves_nothing_open(scenario):
    assert with_preallocation(scenario, solve_greedy(scenario)).open_requests == ()


def test_preallocation_rejects_invalid_schedule(scenario):
    with pytest.raises(ScheduleError):
        with_preallocation(scenario, Schedule({"o1_0_0": 0.0}))


@given(st.integers(0, 300))
@settings(max_examples=30, deadline=None)
def test_preallocation_never_increases_residual_capacity(seed):
    P = small_instance(seed, 12)
    Q = with_preallocation(P, solve_greedy(P))
    for s in P.satellites:
        assert Q.residual_capacity(s.id) <= P.residual_capacity(s.id)


# --- validation ------------------------------------------------------------


def test_sample_solution_is_valid(scenario):
    M = solve_greedy(scenario)
    assert validate_schedule(scenario, M).ok
    assert all(len(t) <= 4 for t in [[o for o in M.entries
                                       if scenario.observation[o].satellite == s.id]
                                      for s in scenario.satellites])


def test_start_outside_window_is_rule_a():
    P = build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 10, 20)])])
    assert rules(P, Schedule({"r.0": 16})) == ["a"]
    assert rules(P, Schedule({"r.0": 15})) == []
    assert rules(P, Schedule({"r.0": 9})) == ["a"]


def test_capacity_is_rule_b():
    P = build({"s0": 1}, {}, [("r", "u0", 1, 5, [("s0", 0, 50)]),
                              ("q", "u0", 1, 5, [("s0", 0, 50)])])
    assert rules(P, Schedule({"r.0": 0, "q.0": 20})) == ["b"]


def test_two_observations_of_one_request_is_rule_c():
    P = build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 0, 50), ("s0", 0, 50)])])
    assert rules(P, Schedule({"r.0": 0, "r.1": 20})) == ["c"]


def test_separation_boundary_is_rule_d():
    P = build({"s0": 4}, {}, [("r", "u0", 1, 5, [("s0", 0, 50)]),
                              ("q", "u0", 1, 5, [("s0", 0, 50)])])
    assert rules(P, Schedule({"r.0": 0, "q.0": 6})) == []
    assert rules(P, Schedule({"r.0": 0, "q.0": 6 - 1e-6})) == ["d"]


def test_exclusive_observation_outside_own_window_is_rule_e():
    P = build({"s0": 4}, {"u1": [("s0", 10, 20)]}, [("r", "u1", 10, 5, [("s0", 0, 30)])])
    assert rules(P, Schedule({"r.0": 12})) == []
    assert rules(P, Schedule({"r.0": 18})) == ["e"]


def test_foreign_observation_in_exclusive_needs_grant():
    P = build({"s0": 4}, {"u1": [("s0", 10, 20)]}, [("r", "u0", 1, 5, [("s0", 0, 30)])])
    assert rules(P, Schedule({"r.0": 12})) == ["f"]
    assert rules(P, Schedule({"r.0": 12}, {("r.0", "u1")})) == []
    # touching the window edge is not an intrusion
    assert rules(P, Schedule({"r.0": 20})) == []


def test_total_reward():
    P = build({"s0": 4}, {}, [("r", "u0", 10, 5, [("s0", 0, 50)]),
                              ("q", "u0", 3, 5, [("s0", 0, 50)])])
    assert total_reward(P, Schedule()) == 0
    assert total_reward(P, Schedule({"r.0": 0, "q.0": 10})) == 13


# --- serialization ---------------------------------------------------------


@given(st.integers(0, 50))
@settings(max_examples=15, deadline=None)
def test_instance_json_round_trip(seed):
    P = generate(conflicting_preset(seed % 3, seed))
    text = P.to_json()
    Q = Instance.from_json(text)
    assert Q == P
    assert Q.to_json() == text


def test_schedule_json_round_trip(scenario):
    M = solve_greedy(scenario)
    again = Schedule.from_dict(json.loads(M.to_json()))
    assert again == M


def test_schedule_merge_rejects_conflicting_starts():
    with pytest.raises(ScheduleError):
        Schedule({"a": 1.0}) | Schedule({"a": 2.0})
