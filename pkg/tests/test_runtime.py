import json

import pytest

from eoscsp.runtime import (
    BROADCAST,
    MessageBus,
    NonQuiescence,
    UnknownRecipient,
    decode,
    encode,
    run_rounds,
)


def test_one_message_counts_its_bytes():
    bus = MessageBus(["a", "b"])
    payload = {"x": "y" * 92}
    assert len(encode(payload)) == 100
    (env,) = bus.send("a", "b", "bid", payload)
    assert env.size == 100
    assert (bus.metrics.message_count, bus.metrics.message_bytes) == (1, 100)


def test_broadcast_counts_once_per_recipient():
    bus = MessageBus(["u0", "u1", "u2", "u3"])
    out = bus.send("u0", BROADCAST, "announce", {"r": 1})
    assert [e.to for e in out] == ["u1", "u2", "u3"]
    assert bus.metrics.message_count == 3
    assert bus.metrics.message_bytes == 3 * out[0].size


def test_unknown_recipient_and_kind():
    bus = MessageBus(["a"])
    with pytest.raises(UnknownRecipient):
        bus.send("a", "ghost", "bid", {})
    with pytest.raises(ValueError):
        bus.send("a", "a", "gossip", {})
    with pytest.raises(UnknownRecipient):
        bus.deliver("ghost")


def test_delivery_order_is_round_then_sender_then_fifo():
    bus = MessageBus(["a", "b", "c"])
    bus.send("c", "a", "bid", {"n": 1})
    bus.send("b", "a", "bid", {"n": 2})
    bus.send("c", "a", "bid", {"n": 3})
    bus.next_round()
    bus.send("b", "a", "bid", {"n": 4})
    assert [e.body()["n"] for e in bus.deliver("a")] == [2, 1, 3, 4]
    assert bus.deliver("a") == []


def test_metrics_equal_sum_over_trace():
    bus = MessageBus(["a", "b", "c"])
    bus.send("a", BROADCAST, "announce", {"k": [1, 2, 3]})
    bus.send("b", "a", "bid", {"v": 1.5})
    assert bus.metrics.message_count == len(bus.trace)
    assert bus.metrics.message_bytes == sum(e.size for e in bus.trace)


def test_infinity_is_encoded_as_text():
    assert encode({"c": float("inf")}) == b'{"c":"inf"}'
    assert decode(encode([1, 2])) == [1, 2]


class Echo:
    """Sends one message to a peer for ``times`` rounds."""

    def __init__(self, id, peer, times):
        self.id, self.peer, self.times = id, peer, times
        self.seen = 0

    def step(self, round, inbox):
        self.seen += len(inbox)
        if round <= self.times:
            return [(self.peer, "bundle-state", {"round": round})]
        return []


def test_zero_agents_is_immediately_quiet():
    assert run_rounds(MessageBus(), []) == 0


def test_rounds_until_quiet():
    bus = MessageBus(["a", "b"])
    a, b = Echo("a", "b", 3), Echo("b", "a", 1)
    assert run_rounds(bus, [a, b]) == 4
    assert (a.seen, b.seen) == (1, 3)
    assert bus.metrics.message_count == 4


def test_round_cap_raises():
    bus = MessageBus(["a", "b"])
    with pytest.raises(NonQuiescence):
        run_rounds(bus, [Echo("a", "b", 100)], max_rounds=5)


def test_until_stops_early():
    bus = MessageBus(["a", "b"])
    assert run_rounds(bus, [Echo("a", "b", 100)], until=lambda r: r == 2) == 2


def test_trace_hash_is_stable(tmp_path):
    def run():
        bus = MessageBus(["a", "b"])
        run_rounds(bus, [Echo("a", "b", 2), Echo("b", "a", 2)])
        return bus

    one, two = run(), run()
    assert one.trace_hash() == two.trace_hash()
    one.export_trace(tmp_path / "t.jsonl")
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert [json.loads(x)["kind"] for x in lines] == ["bundle-state"] * 4
