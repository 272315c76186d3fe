"""Round-synchronous simulated message bus with byte and count accounting.

Every message between logical agents goes through :meth:`MessageBus.send`,
so the metrics are exactly the sum over the recorded trace.  Payloads are
serialized to compact JSON with sorted keys; ``size`` is the byte length of
that encoding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence

KINDS = ("announce", "bid", "award", "bundle-state", "dcop-util", "dcop-value", "plan-report")
BROADCAST = "*"


class UnknownRecipient(KeyError):
    pass


class NonQuiescence(RuntimeError):
    pass


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def encode(payload: Any) -> bytes:
    """Canonical byte encoding used for sizes and the trace."""
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":")).encode()


def decode(payload: bytes) -> Any:
    return json.loads(payload)


@dataclass(frozen=True)
class Envelope:
    sender: str
    to: str
    kind: str
    payload: bytes
    round: int = 0
    seq: int = 0

    @property
    def size(self) -> int:
        return len(self.payload)

    def body(self) -> Any:
        return decode(self.payload)

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "round": self.round,
            "from": self.sender,
            "to": self.to,
            "kind": self.kind,
            "size": self.size,
            "payload": self.payload.decode(),
        }


@dataclass
class MetricsLog:
    message_count: int = 0
    message_bytes: int = 0
    wall_time: float = 0.0
    reward: float = 0.0

    def as_row(self, algorithm: str, seed: int, n_observations: int) -> dict:
        return {
            "algorithm": algorithm,
            "seed": seed,
            "n_observations": n_observations,
            "reward": self.reward,
            "time_s": self.wall_time,
            "msg_count": self.message_count,
            "msg_bytes": self.message_bytes,
        }


class MessageBus:
    """Point-to-point queues between registered agents.

    A broadcast to ``"*"`` expands into one envelope per registered agent
    other than the sender, and is counted as that many messages.  Inboxes
    are drained in ``(round, sender, seq)`` order.
    """

    def __init__(self, agents: Iterable[str] = ()):
        self.agents: list[str] = []
        self._queues: dict[str, list[Envelope]] = {}
        self.trace: list[Envelope] = []
        self.metrics = MetricsLog()
        self.round = 0
        self._seq = 0
        self.register(*agents)

    def register(self, *agents: str) -> None:
        for a in agents:
            if a not in self._queues:
                self.agents.append(a)
                self._queues[a] = []

    def send(self, sender: str, to: str, kind: str, payload: Any) -> list[Envelope]:
        if kind not in KINDS:
            raise ValueError(f"unknown message kind {kind!r}")
        targets = [a for a in self.agents if a != sender] if to == BROADCAST else [to]
        data = encode(payload)
        out = []
        for target in targets:
            if target not in self._queues:
                raise UnknownRecipient(target)
            env = Envelope(sender, target, kind, data, self.round, self._seq)
            self._seq += 1
            self._queues[target].append(env)
            self.trace.append(env)
            self.metrics.message_count += 1
            self.metrics.message_bytes += env.size
            out.append(env)
        return out

    def deliver(self, agent: str) -> list[Envelope]:
        if agent not in self._queues:
            raise UnknownRecipient(agent)
        inbox = sorted(self._queues[agent], key=lambda e: (e.round, e.sender, e.seq))
        self._queues[agent] = []
        return inbox

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def next_round(self) -> int:
        self.round += 1
        return self.round

    def trace_lines(self) -> list[str]:
        return [json.dumps(e.to_record(), sort_keys=True) for e in self.trace]

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.trace_lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def export_trace(self, path: str | Path) -> None:
        lines = self.trace_lines()
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


class RoundAgent(Protocol):
    id: str

    def step(self, round: int, inbox: Sequence[Envelope]) -> Iterable[tuple[str, str, Any]]:
        """Consume this round's inbox and return ``(to, kind, payload)`` messages."""


def run_rounds(
    bus: MessageBus,
    agents: Sequence[RoundAgent],
    *,
    max_rounds: int = 1000,
    until: Callable[[int], bool] | None = None,
) -> int:
    """Run synchronous rounds; messages sent in a round are read in the next.

    Stops when ``until(round)`` is true after a round, or, without ``until``,
    when a round sends nothing and no message is pending.  Returns the
    number of rounds executed.
    """
    ordered = sorted(agents, key=lambda a: a.id)
    if not ordered:
        return 0
    for r in range(1, max_rounds + 1):
        outgoing: list[tuple[str, str, str, Any]] = []
        for agent in ordered:
            inbox = bus.deliver(agent.id)
            outgoing += [(agent.id, to, kind, body) for to, kind, body in agent.step(r, inbox)]
        for sender, to, kind, body in outgoing:
            bus.send(sender, to, kind, body)
        bus.next_round()
        if until is not None:
            if until(r):
                return r
        elif not outgoing and not bus.pending():
            return r
    raise NonQuiescence(f"no quiescence after {max_rounds} rounds")
