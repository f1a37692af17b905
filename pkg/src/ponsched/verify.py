"""Randomized self-checks for the scheduling core.

Builds schedule states the only way they can legitimately arise -- by
scheduling and committing random requests against a random topology -- and
then cross-checks the fast two-pointer scheduler against the naive grid
search, the Theorem-style step bound, the counted-insertion bound, and the
timeline invariants.  Used by ``ponsched verify`` and by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Topology
from .scheduler import (
    SchedulerState,
    commit,
    schedule_cevf_fast,
    schedule_cevf_naive,
    schedule_eftvf,
)


def random_topology(rng: np.random.Generator) -> Topology:
    n = int(rng.integers(1, 9))
    m = int(rng.integers(1, 9))
    r = int(rng.integers(1, min(8, m * n) + 1))
    n_onus = m * n
    rtts = tuple(int(v) for v in rng.integers(100_000, 200_001, size=n_onus))
    return Topology(
        m_groups=m,
        onus_per_group=n,
        receivers=r,
        olt_rate_bps=1_000_000_000,
        onu_rate_bps=31.25e6,
        t_grd_ns=int(rng.integers(0, 2_001)),
        rtt_ns=rtts,
        lim_bytes=31_250,
    )


def random_grant_bytes(rng: np.random.Generator, lim_bytes: int) -> int:
    """Grant sizes spanning zero, sub-lim, exactly lim and beyond-lim."""
    bucket = rng.random()
    if bucket < 0.1:
        return 0
    if bucket < 0.2:
        return lim_bytes
    if bucket < 0.9:
        return int(rng.integers(1, lim_bytes + 1))
    return int(rng.integers(lim_bytes + 1, 2 * lim_bytes + 1))


def random_state(
    rng: np.random.Generator,
    topology: Topology | None = None,
    max_commits: int = 12,
) -> SchedulerState:
    """A reachable schedule state: random commits with the clock advancing.

    Respects the operating discipline the analytical void-count bounds rest
    on: an ONU is rescheduled only after its previous burst has completed, so
    every ONU has at most one outstanding burst at any scheduling instant.
    """
    topo = topology if topology is not None else random_topology(rng)
    state = SchedulerState.fresh(topo, now=int(rng.integers(0, 1_000_000)))
    busy_until = {}
    for _ in range(int(rng.integers(0, max_commits + 1))):
        onu = int(rng.integers(topo.n_onus))
        state.advance_to(max(state.now, busy_until.get(onu, 0)))
        g = random_grant_bytes(rng, topo.lim_bytes)
        if rng.random() < 0.3:
            decision = schedule_eftvf(state, onu, g)
        else:
            decision = schedule_cevf_fast(state, onu, g)
        commit(state, decision)
        busy_until[onu] = decision.end
        if rng.random() < 0.5:
            state.advance_to(state.now + int(rng.integers(0, 300_000)))
    return state


@dataclass
class VerifyReport:
    instances: int = 0
    mismatches: int = 0
    step_bound_violations: int = 0
    insert_bound_breaches: int = 0
    invariant_failures: int = 0
    max_steps_seen: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.mismatches
            or self.step_bound_violations
            or self.insert_bound_breaches
            or self.invariant_failures
        )

    def summary(self) -> str:
        status = "OK" if self.ok else "FAIL"
        return (
            f"{status}: {self.instances} instances, "
            f"{self.mismatches} fast/naive mismatches, "
            f"{self.step_bound_violations} step-bound violations "
            f"(max steps {self.max_steps_seen}), "
            f"{self.insert_bound_breaches} insertion-bound breaches, "
            f"{self.invariant_failures} invariant failures"
        )


def step_bound(topology: Topology) -> int:
    """Worst-case candidate inspections: N + M*N + R."""
    return (
        topology.onus_per_group
        + topology.m_groups * topology.onus_per_group
        + topology.receivers
    )


def check_instance(rng: np.random.Generator, report: VerifyReport, max_commits: int = 12):
    """One randomized instance: build, schedule both ways, compare, audit."""
    state = random_state(rng, max_commits=max_commits)
    topo = state.topology
    onu = int(rng.integers(topo.n_onus))
    g = random_grant_bytes(rng, topo.lim_bytes)
    fast = schedule_cevf_fast(state, onu, g)
    naive = schedule_cevf_naive(state, onu, g)
    report.instances += 1
    if (fast.t_s, fast.receiver, fast.duration) != (naive.t_s, naive.receiver, naive.duration):
        report.mismatches += 1
        report.failures.append(("mismatch", onu, g, fast, naive))
    bound = step_bound(topo)
    report.max_steps_seen = max(report.max_steps_seen, fast.steps)
    if fast.steps > bound:
        report.step_bound_violations += 1
        report.failures.append(("steps", onu, g, fast.steps, bound))
    if state.insert_bound_breaches:
        report.insert_bound_breaches += 1
    try:
        state.validate()
        _check_void_counts(state)
    except AssertionError as exc:
        report.invariant_failures += 1
        report.failures.append(("invariant", str(exc)))
    return state, fast, naive


def _check_void_counts(state: SchedulerState) -> None:
    """Void populations stay within the one-burst-per-ONU analysis bounds."""
    topo = state.topology
    mn = topo.m_groups * topo.onus_per_group
    if len(state.merged) > mn + topo.receivers:
        raise AssertionError(
            f"{len(state.merged)} receiver voids > {mn + topo.receivers}"
        )
    for tl in state.group_timelines:
        if len(tl.voids) > topo.onus_per_group + 1:
            raise AssertionError(
                f"group[{tl.index}] holds {len(tl.voids)} voids "
                f"> {topo.onus_per_group + 1}"
            )


def run_verification(instances: int = 10_000, seed: int = 0, max_commits: int = 12) -> VerifyReport:
    rng = np.random.default_rng(seed)
    report = VerifyReport()
    for _ in range(instances):
        check_instance(rng, report, max_commits=max_commits)
    return report
