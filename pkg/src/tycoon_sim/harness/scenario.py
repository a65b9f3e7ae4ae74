"""End-to-end scenario: parents fund children that bid on real hosts.

Every host wraps the auction scheduler; every credit movement goes
through the bank, with a per-(host, child) escrow account settled to the
provider as slices are charged.  Parents provision hosts through the
locator, monitor progress per cost, and replace laggards or silent
(dead) hosts.  The whole thing is driven by one slice-granularity clock
and is deterministic per seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InsufficientBalanceError
from ..sched.auction import AuctionShareScheduler
from ..sched.types import AgentAccount, PriceMode, SchedulerConfig
from .agents import (ChildAgentState, ParentAgentSpec, parent_budget,
                     parent_monitor_and_replace)
from .bank import (MICRO, BankLedger, FundingPolicy, PolicyKind,
                   apply_funding_policy, bank_transfer, credits_to_micro,
                   micro_to_credits)
from .messages import MessageKind, Network
from .sls import ServiceLocator


@dataclass
class ParentJob:
    total_credits: float = 4.0
    deadline_minutes: float = 2.0
    num_hosts: int = 2
    performance_cost_threshold: float = 0.5


@dataclass
class ScenarioConfig:
    num_hosts: int = 3
    parents: tuple = (ParentJob(), ParentJob())
    duration: float = 60.0
    timeslice_length: float = 0.010
    policy_kind: PolicyKind = PolicyKind.CLOSED_LOOP
    # Lone bidders must still pay for slices or cost statistics starve,
    # so scenarios default to first-price auctions.
    price_mode: PriceMode = PriceMode.FIRST_PRICE
    funding_chunk_minutes: float = 0.25
    refresh_fraction: float = 0.25
    advertise_interval: float = 2.0
    sls_ttl: float = 5.0
    monitor_interval: float = 5.0
    report_timeout: float = 12.0
    migration_overhead: float = 5.0
    message_latency: float = 0.0
    drop_probability: float = 0.0
    # Relative work produced per slice on each host; shorter than
    # num_hosts pads with 1.0.
    host_speeds: tuple = ()
    # (time, host_index) pairs: the host vanishes at that instant.
    kill_hosts: tuple = ()
    # Open-loop knobs: per-parent income per funding interval, and the
    # administrator pool that pays for it.
    funding_interval: float = 5.0
    open_loop_income: float = 0.5
    admin_pool: float = 100.0
    audit_every_slice: bool = False
    rng_seed: int = 42

    def validate(self) -> None:
        if self.num_hosts <= 0 or not self.parents:
            raise ConfigError("need at least one host and one parent")
        if self.duration <= 0 or self.timeslice_length <= 0:
            raise ConfigError("duration and timeslice must be > 0")
        if not 0 < self.refresh_fraction < 1:
            raise ConfigError("refresh_fraction must be in (0,1)")


@dataclass
class ScenarioReport:
    duration: float
    per_parent: dict
    per_host: dict
    replacements: list
    starvation_events: int
    ledger_ok: bool
    no_negative_balances: bool
    total_issued: int
    final_total: int
    messages_sent: int
    messages_dropped: int


class _HostNode:
    """One provider: an auction scheduler plus escrow settlement."""

    def __init__(self, sim, index: int):
        self.sim = sim
        self.host_id = f"host:{index}"
        self.provider_account = f"provider:{index}"
        self.index = index
        self.speed = (sim.config.host_speeds[index]
                      if index < len(sim.config.host_speeds) else 1.0)
        self.sched = AuctionShareScheduler(SchedulerConfig(
            timeslice_length=sim.config.timeslice_length,
            price_mode=sim.config.price_mode))
        self.alive = True
        self.children: dict[str, dict] = {}
        self._tombstones: set[str] = set()
        self._next_agent_id = 0
        self.slices_alive = 0
        self.slices_won = 0

    def _ensure_child(self, child_key: str) -> dict:
        # Funding can arrive ahead of the spawn message; open the seat
        # with placeholder terms and let SPAWN_CHILD fill them in.
        rec = self.children.get(child_key)
        if rec is None:
            chunk = self.sim.config.funding_chunk_minutes * 60.0
            agent = AgentAccount(
                agent_id=self._next_agent_id, balance=0.0,
                expected_funding_interval=chunk,
                requested_cpu_seconds=chunk / self.sim.config.timeslice_length)
            self._next_agent_id += 1
            self.sched.add_agent(agent, runnable=False)
            rec = {"agent": agent, "progress": 0.0, "spent": 0.0,
                   "settled_micro": 0, "activate_at": 0.0, "active": False}
            self.children[child_key] = rec
        return rec

    def handle(self, msg) -> None:
        kind, p = msg.kind, msg.payload
        if kind is MessageKind.SPAWN_CHILD:
            rec = self._ensure_child(p["child_key"])
            rec["activate_at"] = p["activate_at"]
        elif kind is MessageKind.FUND_AUCTIONEER:
            if p["child_key"] in self._tombstones:
                # Funding raced a kill; the credits stay parked in the
                # escrow account where the sweep can still collect them.
                return
            rec = self._ensure_child(p["child_key"])
            self.sched.fund(rec["agent"].agent_id,
                            micro_to_credits(p["amount"]))
        elif kind is MessageKind.KILL_CHILD:
            self._tombstones.add(p["child_key"])
            rec = self.children.pop(p["child_key"], None)
            if rec is not None:
                self.sched.set_runnable(rec["agent"].agent_id, False)
        elif kind is MessageKind.QUERY_PROGRESS:
            self.sim.network.send(
                self.sim.now, self.host_id, msg.sender,
                MessageKind.PROGRESS_REPORT,
                {"child_key": p["child_key"], "host": self.host_id,
                 **self._stats(p["child_key"])})

    def _stats(self, child_key: str) -> dict:
        rec = self.children.get(child_key)
        if rec is None:
            return {"progress": 0.0, "cost": 0.0, "funds": 0.0,
                    "known": False}
        return {"progress": rec["progress"], "spent": rec["spent"],
                "funds": rec["agent"].balance, "known": True}

    def run_slice(self) -> None:
        if not self.alive:
            return
        now = self.sim.now
        for key, rec in self.children.items():
            if not rec["active"] and now >= rec["activate_at"]:
                rec["active"] = True
                self.sched.set_runnable(rec["agent"].agent_id, True)
        self.slices_alive += 1
        result = self.sched.run_slice()
        if result.winner is None:
            return
        self.slices_won += 1
        for key, rec in self.children.items():
            if rec["agent"].agent_id == result.winner:
                rec["progress"] += self.speed * self.sim.config.timeslice_length
                rec["spent"] += result.payment
                # Settle whole micro-credits of the spend into the
                # provider account; the fractional tail stays in escrow.
                due = int(math.floor(rec["spent"] * MICRO))
                delta = due - rec["settled_micro"]
                if delta > 0:
                    rec["settled_micro"] = due
                    self.sim.network.send(
                        now, self.host_id, "bank", MessageKind.TRANSFER,
                        {"from": f"escrow:{self.index}:{key}",
                         "to": self.provider_account, "amount": delta})
                break

    def advertise(self) -> None:
        if self.alive:
            self.sim.network.send(self.sim.now, self.host_id, "sls",
                                  MessageKind.ADVERTISE,
                                  {"host": self.host_id,
                                   "resources": {"speed": self.speed},
                                   "ttl": self.sim.config.sls_ttl})

    def kill(self) -> None:
        self.alive = False
        self.sim.network.unregister(self.host_id)


class _ParentNode:
    """One user: budgets a job, provisions hosts, replaces laggards."""

    def __init__(self, sim, index: int, job: ParentJob):
        self.sim = sim
        self.parent_id = f"parent:{index}"
        self.account = f"user:{index}"
        self.index = index
        self.spec = ParentAgentSpec(
            total_credits=job.total_credits,
            deadline_minutes=job.deadline_minutes,
            num_hosts=job.num_hosts,
            performance_cost_threshold=job.performance_cost_threshold)
        self.rate_per_host_min = parent_budget(self.spec)
        self.lump_micro = credits_to_micro(
            self.rate_per_host_min * sim.config.funding_chunk_minutes)
        self.remaining_micro = credits_to_micro(job.total_credits)
        self.children: dict[str, dict] = {}
        self.retired_progress = 0.0
        self.retired_spent = 0.0
        self.known_hosts: list[str] = []
        self.starvation_events = 0
        self.funded_micro = 0
        self.reclaimed_micro = 0
        self._child_serial = 0
        self._provisioned = False
        self._decide_pending = False

    def handle(self, msg) -> None:
        kind, p = msg.kind, msg.payload
        if kind is MessageKind.LOOKUP_RESULT:
            self.known_hosts = [e["host"] for e in p["entries"]]
            if not self._provisioned and self.known_hosts:
                self._provisioned = True
                self._initial_placement()
        elif kind is MessageKind.PROGRESS_REPORT:
            rec = self.children.get(p["child_key"])
            if rec is None or not p.get("known", False):
                return
            rec["state"].progress = p["progress"]
            rec["state"].cost = p["spent"]
            rec["state"].funds_held = p["funds"]
            rec["last_report"] = self.sim.now
            if p["funds"] * MICRO < self.lump_micro * self.sim.config.refresh_fraction:
                self._fund(p["child_key"], rec["state"].host)
        elif kind is MessageKind.TRANSFER:
            # Receipt for an escrow sweep the bank performed for us.
            self.remaining_micro += p["amount"]
            self.reclaimed_micro += p["amount"]

    def _initial_placement(self) -> None:
        rng = self.sim.rng
        hosts = list(self.known_hosts)
        picks = []
        for _ in range(min(self.spec.num_hosts, len(hosts))):
            picks.append(hosts.pop(int(rng.integers(len(hosts)))))
        for host in picks:
            self._spawn_child(host, activate_at=self.sim.now)

    def _spawn_child(self, host: str, activate_at: float) -> None:
        key = f"{self.parent_id}/c{self._child_serial}"
        self._child_serial += 1
        self.children[key] = {
            "state": ChildAgentState(host=host),
            "last_report": self.sim.now,
        }
        self._fund(key, host)
        self.sim.network.send(self.sim.now, self.parent_id, host,
                              MessageKind.SPAWN_CHILD,
                              {"child_key": key, "activate_at": activate_at})

    def _fund(self, child_key: str, host: str) -> None:
        if self.remaining_micro < self.lump_micro:
            self.starvation_events += 1
            return
        self.remaining_micro -= self.lump_micro
        self.funded_micro += self.lump_micro
        self.sim.network.send(self.sim.now, self.parent_id, "bank",
                              MessageKind.FUND_AUCTIONEER,
                              {"parent_account": self.account,
                               "host": host, "child_key": child_key,
                               "amount": self.lump_micro})

    def monitor_query(self) -> None:
        for key, rec in self.children.items():
            self.sim.network.send(self.sim.now, self.parent_id,
                                  rec["state"].host,
                                  MessageKind.QUERY_PROGRESS,
                                  {"child_key": key})
        self.sim.network.send(self.sim.now, self.parent_id, "sls",
                              MessageKind.LOOKUP, {})
        self._decide_pending = True

    def monitor_decide(self) -> None:
        if not self._decide_pending:
            return
        self._decide_pending = False
        now = self.sim.now
        dead = [key for key, rec in self.children.items()
                if now - rec["last_report"] > self.sim.config.report_timeout]
        survivors = [rec["state"] for key, rec in self.children.items()
                     if key not in dead]
        theta_actions = parent_monitor_and_replace(
            survivors, self.spec.performance_cost_threshold,
            self._free_hosts(), self.sim.rng)
        state_to_key = {id(rec["state"]): key
                        for key, rec in self.children.items()}
        moves = [(key, None, "timeout") for key in dead]
        moves += [(state_to_key[id(child)], host, "slow")
                  for child, host in theta_actions]
        for key, new_host, reason in moves:
            self._replace(key, reason, new_host)

    def _free_hosts(self) -> list:
        in_use = {rec["state"].host for rec in self.children.values()}
        return [h for h in self.known_hosts if h not in in_use]

    def _replace(self, child_key: str, reason: str,
                 new_host: str | None) -> None:
        rec = self.children.pop(child_key)
        old_host = rec["state"].host
        if new_host is None:
            # Timeout path: pick here, never re-picking the host being
            # abandoned even though it just became technically free.
            free = [h for h in self._free_hosts() if h != old_host]
            if not free:
                self.children[child_key] = rec
                return
            new_host = free[int(self.sim.rng.integers(len(free)))]
        self.retired_progress += rec["state"].progress
        self.retired_spent += rec["state"].cost
        self.sim.network.send(self.sim.now, self.parent_id, old_host,
                              MessageKind.KILL_CHILD,
                              {"child_key": child_key})
        host_index = int(old_host.split(":")[1])
        self.sim.network.send(self.sim.now, self.parent_id, "bank",
                              MessageKind.TRANSFER,
                              {"from": f"escrow:{host_index}:{child_key}",
                               "to": self.account, "amount": None,
                               "receipt_to": self.parent_id})
        self.sim.replacements.append(
            (self.sim.now, self.parent_id, old_host, new_host, reason))
        self._spawn_child(new_host,
                          activate_at=self.sim.now
                          + self.sim.config.migration_overhead)

    def work_done(self) -> float:
        live = sum(rec["state"].progress for rec in self.children.values())
        return self.retired_progress + live


class _BankNode:
    """Executes transfers; the only component that touches the ledger."""

    def __init__(self, sim):
        self.sim = sim

    def handle(self, msg) -> None:
        p = msg.payload
        ledger = self.sim.ledger
        if msg.kind is MessageKind.FUND_AUCTIONEER:
            host_index = int(p["host"].split(":")[1])
            escrow = f"escrow:{host_index}:{p['child_key']}"
            if escrow not in ledger.accounts:
                ledger.create_account(escrow)
            try:
                bank_transfer(ledger, p["parent_account"], escrow,
                              p["amount"])
            except InsufficientBalanceError:
                self.sim.rejected_transfers += 1
                return
            self.sim.network.send(self.sim.now, "bank", p["host"],
                                  MessageKind.FUND_AUCTIONEER,
                                  {"child_key": p["child_key"],
                                   "amount": p["amount"]})
        elif msg.kind is MessageKind.TRANSFER:
            amount = p["amount"]
            if amount is None:
                amount = ledger.accounts.get(p["from"], 0)
            try:
                bank_transfer(ledger, p["from"], p["to"], amount)
            except (InsufficientBalanceError, KeyError):
                self.sim.rejected_transfers += 1
                return
            if p.get("receipt_to") and amount:
                self.sim.network.send(self.sim.now, "bank", p["receipt_to"],
                                      MessageKind.TRANSFER,
                                      {"amount": amount})


class _SLSNode:
    def __init__(self, sim):
        self.sim = sim
        self.registry = ServiceLocator()

    def handle(self, msg) -> None:
        if msg.kind is MessageKind.ADVERTISE:
            self.registry.advertise(msg.payload["host"],
                                    msg.payload["resources"],
                                    msg.payload["ttl"], self.sim.now)
        elif msg.kind is MessageKind.LOOKUP:
            entries = [{"host": e.host, "resources": e.resources}
                       for e in self.registry.lookup(self.sim.now)]
            self.sim.network.send(self.sim.now, "sls", msg.sender,
                                  MessageKind.LOOKUP_RESULT,
                                  {"entries": entries})


class HarnessSim:
    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.now = 0.0
        self.rng = np.random.default_rng(config.rng_seed)
        self.network = Network(latency=config.message_latency,
                               drop_probability=config.drop_probability,
                               seed=config.rng_seed)
        self.ledger = BankLedger()
        self.replacements = []
        self.rejected_transfers = 0

        self.bank = _BankNode(self)
        self.sls = _SLSNode(self)
        self.network.register("bank", self.bank.handle)
        self.network.register("sls", self.sls.handle)

        self.hosts = [_HostNode(self, i) for i in range(config.num_hosts)]
        for host in self.hosts:
            self.ledger.create_account(host.provider_account)
            self.network.register(host.host_id, host.handle)

        self.parents = [_ParentNode(self, i, job)
                        for i, job in enumerate(config.parents)]
        for parent in self.parents:
            self.ledger.create_account(
                parent.account, credits_to_micro(parent.spec.total_credits))
            self.network.register(parent.parent_id, parent.handle)

        if config.policy_kind is PolicyKind.OPEN_LOOP:
            self.ledger.create_account("admin",
                                       credits_to_micro(config.admin_pool))
            self.policy = FundingPolicy(
                kind=PolicyKind.OPEN_LOOP,
                income_rates={p.account: credits_to_micro(
                    config.open_loop_income) for p in self.parents},
                provider_accounts=tuple(h.provider_account
                                        for h in self.hosts))
        else:
            self.policy = FundingPolicy(kind=PolicyKind.CLOSED_LOOP)
        self._pending_kills = sorted(
            (t, int(h)) for t, h in config.kill_hosts)

    def _every(self, k: int, interval: float) -> bool:
        step = max(1, round(interval / self.config.timeslice_length))
        return k % step == 0

    def run(self) -> ScenarioReport:
        cfg = self.config
        dt = cfg.timeslice_length
        total = int(round(cfg.duration / dt))
        drained = {h.provider_account: 0 for h in self.hosts}
        tick = 0
        for k in range(total):
            self.now = k * dt
            while self._pending_kills and self._pending_kills[0][0] <= self.now:
                _, idx = self._pending_kills.pop(0)
                self.hosts[idx].kill()
            if self._every(k, cfg.advertise_interval):
                for host in self.hosts:
                    host.advertise()
            if k == 0:
                for parent in self.parents:
                    self.network.send(self.now, parent.parent_id, "sls",
                                      MessageKind.LOOKUP, {})
            if cfg.policy_kind is PolicyKind.OPEN_LOOP and k > 0 \
                    and self._every(k, cfg.funding_interval):
                for h in self.hosts:
                    drained[h.provider_account] += \
                        self.ledger.balance(h.provider_account)
                apply_funding_policy(self.ledger, self.policy, tick)
                for parent in self.parents:
                    parent.remaining_micro += credits_to_micro(
                        cfg.open_loop_income)
                tick += 1
            self.network.pump(self.now)
            for parent in self.parents:
                parent.monitor_decide()
            if k > 0 and self._every(k, cfg.monitor_interval):
                for parent in self.parents:
                    parent.monitor_query()
                self.network.pump(self.now)
            for host in self.hosts:
                host.run_slice()
            if cfg.audit_every_slice:
                assert self.ledger.total_balance() == self.ledger.total_issued
        self.now = total * dt
        self.network.pump(self.now)
        # Close the books on fresh numbers: one last progress round.
        for parent in self.parents:
            parent.monitor_query()
            parent._decide_pending = False
        self.network.pump(self.now + self.config.message_latency * 2)
        return self._report(drained)

    def _report(self, drained: dict) -> ScenarioReport:
        per_parent = {}
        for parent in self.parents:
            per_parent[parent.parent_id] = {
                "funded_credits": micro_to_credits(parent.funded_micro),
                "reclaimed_credits": micro_to_credits(parent.reclaimed_micro),
                "work_done": parent.work_done(),
                "starvation_events": parent.starvation_events,
                "bank_balance": micro_to_credits(
                    self.ledger.balance(parent.account)),
            }
        per_host = {}
        for host in self.hosts:
            revenue = self.ledger.balance(host.provider_account) \
                + drained[host.provider_account]
            per_host[host.host_id] = {
                "alive": host.alive,
                "revenue_credits": micro_to_credits(revenue),
                "utilization": (host.slices_won / host.slices_alive
                                if host.slices_alive else 0.0),
                "slices_run": host.slices_won,
            }
        return ScenarioReport(
            duration=self.config.duration,
            per_parent=per_parent,
            per_host=per_host,
            replacements=list(self.replacements),
            starvation_events=sum(p.starvation_events
                                  for p in self.parents),
            ledger_ok=(self.ledger.total_balance()
                       == self.ledger.total_issued),
            no_negative_balances=all(v >= 0
                                     for v in self.ledger.accounts.values()),
            total_issued=self.ledger.total_issued,
            final_total=self.ledger.total_balance(),
            messages_sent=self.network.sent,
            messages_dropped=self.network.dropped,
        )


def run_harness_scenario(config: ScenarioConfig) -> ScenarioReport:
    return HarnessSim(config).run()
