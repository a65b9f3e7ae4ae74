"""Deterministic in-process message network.

Components never share state; they exchange Messages through a Network
that delivers them in (delivery_time, sender, sequence) order.  With a
fixed per-network latency this preserves per-sender FIFO, and the global
order is reproducible regardless of how handlers interleave their sends.
"""

import heapq
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ConfigError


class MessageKind(Enum):
    TRANSFER = "transfer"
    FUND_AUCTIONEER = "fund_auctioneer"
    QUERY_PROGRESS = "query_progress"
    PROGRESS_REPORT = "progress_report"
    ADVERTISE = "advertise"
    LOOKUP = "lookup"
    LOOKUP_RESULT = "lookup_result"
    KILL_CHILD = "kill_child"
    SPAWN_CHILD = "spawn_child"


@dataclass
class Message:
    sender: str
    recipient: str
    kind: MessageKind
    payload: dict = field(default_factory=dict)
    delivery_time: float = 0.0
    seq: int = 0


class Network:
    """Priority-queue message fabric with optional latency and loss.

    Handlers registered per component id are invoked at delivery time and
    may send further messages; a zero-latency send from inside a handler
    is delivered within the same pump, so chains settle before simulated
    time advances.
    """

    def __init__(self, latency: float = 0.0, drop_probability: float = 0.0,
                 seed: int = 0):
        if latency < 0:
            raise ConfigError("latency must be >= 0")
        if not 0.0 <= drop_probability < 1.0:
            raise ConfigError("drop_probability must be in [0, 1)")
        self.latency = latency
        self.drop_probability = drop_probability
        self._rng = np.random.default_rng(seed)
        self._queue = []
        self._seq_by_sender = {}
        self._handlers = {}
        self.sent = 0
        self.dropped = 0
        self.undeliverable = 0

    def register(self, component_id: str, handler) -> None:
        self._handlers[component_id] = handler

    def unregister(self, component_id: str) -> None:
        self._handlers.pop(component_id, None)

    def send(self, now: float, sender: str, recipient: str,
             kind: MessageKind, payload: dict | None = None) -> None:
        self.sent += 1
        if self.drop_probability and self._rng.random() < self.drop_probability:
            self.dropped += 1
            return
        seq = self._seq_by_sender.get(sender, 0)
        self._seq_by_sender[sender] = seq + 1
        msg = Message(sender=sender, recipient=recipient, kind=kind,
                      payload=payload or {},
                      delivery_time=now + self.latency, seq=seq)
        heapq.heappush(self._queue, (msg.delivery_time, msg.sender, msg.seq,
                                     msg))
    def pump(self, now: float) -> int:
        """Deliver everything due at or before now; returns the count.

        Messages to unregistered components (dead hosts) are counted and
        discarded, never raised: a crashed recipient must not take the
        rest of the system down with it.
        """
        delivered = 0
        while self._queue and self._queue[0][0] <= now:
            _, _, _, msg = heapq.heappop(self._queue)
            handler = self._handlers.get(msg.recipient)
            if handler is None:
                self.undeliverable += 1
                continue
            handler(msg)
            delivered += 1
        return delivered
