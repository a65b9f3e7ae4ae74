"""Parent and child agent logic: budgeting, monitoring, replacement.

A parent agent turns a job description (credits, deadline, host count)
into a per-host spending rate, keeps one child agent per host, and
replaces children whose performance per credit falls well behind their
siblings'.  Children hold a lump of funds at their host's auctioneer and
ask for more when it runs out.
"""

import math
import statistics
from dataclasses import dataclass

from ..errors import InsufficientBalanceError, InvalidSpecError
from .bank import BankLedger, bank_transfer


@dataclass
class ParentAgentSpec:
    total_credits: float
    deadline_minutes: float
    num_hosts: int
    performance_cost_threshold: float = 0.5


@dataclass
class ChildAgentState:
    host: str
    funds_held: float = 0.0   # credits currently at the auctioneer
    progress: float = 0.0     # work units completed so far
    cost: float = 0.0         # credits spent so far


def parent_budget(spec: ParentAgentSpec) -> float:
    """Spending rate in credits per host per minute."""
    if spec.num_hosts <= 0 or spec.deadline_minutes <= 0:
        raise InvalidSpecError("num_hosts and deadline must be positive")
    return spec.total_credits / (spec.num_hosts * spec.deadline_minutes)


def _ratio(child: ChildAgentState) -> float:
    # No spend yet means no evidence of underperformance.
    return child.progress / child.cost if child.cost > 0 else math.inf


def parent_monitor_and_replace(children: list, threshold: float,
                               candidate_hosts: list, rng) -> list:
    """Replacement decisions: list of (child, new_host) pairs.

    A child is replaced when its progress/cost ratio drops below
    threshold times the sibling median.  Replacement hosts are drawn
    uniformly from the candidates not already in use; when the median is
    not yet finite (nobody has spent anything) there is no baseline to
    judge against and nothing happens.
    """
    if not children:
        return []
    ratios = [_ratio(c) for c in children]
    med = statistics.median(ratios)
    if not math.isfinite(med):
        return []
    in_use = {c.host for c in children}
    free = [h for h in candidate_hosts if h not in in_use]
    actions = []
    for child, ratio in zip(children, ratios):
        if ratio >= threshold * med:
            continue
        if not free:
            break
        pick = free.pop(int(rng.integers(len(free))))
        actions.append((child, pick))
    return actions


def child_fund_auctioneer(child: ChildAgentState, ledger: BankLedger,
                          lump: int, parent_account: str,
                          escrow_account: str) -> bool:
    """Move a lump (micro-credits) from the parent into host escrow.

    Returns False when the parent cannot cover the lump; the child is
    then starving and it is the caller's job to report that, not crash.
    """
    if lump == 0:
        return False
    try:
        bank_transfer(ledger, parent_account, escrow_account, lump)
    except InsufficientBalanceError:
        return False
    child.funds_held += lump / 1_000_000
    return True
