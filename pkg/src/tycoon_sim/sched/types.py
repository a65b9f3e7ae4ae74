"""Value types shared by the scheduling algorithms."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class PriceMode(Enum):
    """How the auction winner is charged."""

    FIRST_PRICE = "first"
    SECOND_PRICE = "second"


@dataclass
class AgentAccount:
    """One funded agent competing for timeslices.

    ``requested_cpu_seconds`` is the amount of CPU the agent wants per
    funding interval, denominated in timeslices.  The per-slice price an
    agent offers is ``balance / requested_cpu_seconds``, so an agent that
    wants less CPU for the same money offers more per slice.
    """

    agent_id: int | str
    balance: float
    expected_funding_interval: float = 1.0
    requested_cpu_seconds: float = 1.0


@dataclass
class PSProcess:
    """A process under proportional-share scheduling."""

    process_id: int | str
    weight: float
    virtual_time: float = 0.0


@dataclass
class Reservation:
    """A prepaid claim to ``fraction`` of the next ``period`` slices."""

    agent_id: int | str
    fraction: float
    period: int
    quoted_price: float
    accepted_at: int = 0
    slices_elapsed: int = 0
    slices_won: int = 0

    def active(self) -> bool:
        return self.slices_elapsed < self.period

    def behind(self) -> bool:
        """True when the upcoming slice is needed to stay on target."""
        target = math.ceil(self.fraction * (self.slices_elapsed + 1))
        return self.active() and self.slices_won < target


class PriceStats:
    """Sliding window of recent clearing prices.

    Keeps running sums so mean and sample standard deviation are O(1) to
    read.  The stddev is 0.0 while fewer than two prices are retained.
    """

    def __init__(self, window_size: int = 1000):
        if window_size < 1:
            raise ValueError("window_size must be positive")
        self.window_size = window_size
        self._window: deque[float] = deque()
        self._sum = 0.0
        self._sumsq = 0.0

    def __len__(self) -> int:
        return len(self._window)

    def observe(self, price: float) -> None:
        """Append a clearing price, evicting the oldest beyond the window."""
        if len(self._window) == self.window_size:
            old = self._window.popleft()
            self._sum -= old
            self._sumsq -= old * old
        self._window.append(price)
        self._sum += price
        self._sumsq += price * price

    @property
    def mean(self) -> float:
        if not self._window:
            return 0.0
        return self._sum / len(self._window)

    @property
    def stddev(self) -> float:
        n = len(self._window)
        if n < 2:
            return 0.0
        var = (self._sumsq - self._sum * self._sum / n) / (n - 1)
        return math.sqrt(max(var, 0.0))

    def snapshot(self) -> list[float]:
        return list(self._window)


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs for the per-slice auction."""

    timeslice_length: float = 0.010
    price_mode: PriceMode = PriceMode.FIRST_PRICE
    reservation_capacity: float = 0.5
    price_window: int = 1000
