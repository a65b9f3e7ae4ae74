"""Weighted proportional-share scheduling via per-process virtual time.

Every process carries a virtual time that advances by
``timeslice_length / weight`` whenever it runs, so lighter processes age
faster and the long-run slice counts converge to weight shares.  The next
slice goes to the runnable process with the smallest virtual time, ties
to the lowest process id.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from ..errors import UndefinedShareError, UnknownProcessError
from .types import PSProcess


def share(processes: Sequence[PSProcess], process_id) -> float:
    """Target long-run CPU share of one process: weight over total weight."""
    total = 0.0
    target = None
    for p in processes:
        total += p.weight
        if p.process_id == process_id:
            target = p
    if target is None:
        raise UnknownProcessError(f"no process {process_id!r}")
    return target.weight / total


def select_winner(runnable: Iterable[PSProcess]) -> PSProcess | None:
    """Runnable process with minimum virtual time; None when all sleep."""
    winner = None
    for p in runnable:
        if winner is None or (p.virtual_time, p.process_id) < (
            winner.virtual_time,
            winner.process_id,
        ):
            winner = p
    return winner


def advance(process: PSProcess, timeslice_length: float) -> None:
    """Account one slice of service to the process."""
    process.virtual_time += timeslice_length / process.weight


def scheduling_error(
    actual: Mapping, intended: Mapping
) -> float:
    """Sum of per-process relative share deviations.

    Both maps must cover the same process ids and every intended share
    must be positive; a zero intended share has no relative error.
    """
    if set(actual) != set(intended):
        raise UnknownProcessError(
            f"share maps disagree: {sorted(set(actual) ^ set(intended))!r}"
        )
    total = 0.0
    for pid, target in intended.items():
        if target <= 0:
            raise UndefinedShareError(f"intended share of {pid!r} is {target}")
        total += abs(actual[pid] - target) / target
    return total
