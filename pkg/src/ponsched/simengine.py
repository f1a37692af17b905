"""Discrete-event simulation of the upstream request/grant/transmit loop.

One simulation owns 64-odd ONUs, each with a Pareto on/off source feeding a
drop-tail buffer, and a single OLT-side scheduler state.  The event queue
holds exactly one pending event per ONU: the arrival instant of its next
request, carrying the buffer occupancy the ONU reported.  Processing a
request with b > 0 schedules a grant of min(b, lim) bytes immediately
("online" granting), commits the reservation, dequeues the bytes at the
ONU-local transmit instant t_s - rtt/2, and queues the piggybacked follow-up
request for the burst's end.  A request with b = 0 is answered by a pure
poll: control traffic costs no line time, so nothing is reserved — the next
report simply arrives one RTT later (plus ``poll_interval_ns``, if the run
spaces idle polls out).  Either way each ONU keeps exactly one request in
flight, which is also the premise of the CEVF step bound.

Collisions are not resolved during the run — the scheduler under test either
prevents them or it does not.  After the run every transmission is swept
against both physical domains: overlapping bursts on one receiver are lost,
and on the flexible architecture overlapping bursts within one ONU group are
lost as well (the splitter has no group domain).  EFT-VF never consults the
group timelines, so on flexible hardware its group overlaps surface here as
lost frames; CEVF must come through the sweep with zero losses.

Accounting is exact in integer bytes.  Buffer counters are snapshotted the
first time a source is pulled across the warmup boundary and across the end
of the run, so the measurement window [warmup, duration) gets precise
offered/dropped attribution; delivered and collided bytes are windowed by
burst start.  Over the whole run the identity

    offered = delivered + collided + dropped + residual

holds with no tolerance, where residual is what remains buffered at the end.
Throughput percent normalizes delivered bits against the aggregate
provisioned ONU rate (M * N * r), so 100% means every ONU's full average
rate was carried across the window.
"""

from __future__ import annotations

import csv
import heapq
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import Topology
from .scheduler import (
    SchedulerState,
    commit,
    schedule_cevf_fast,
    schedule_cevf_naive,
    schedule_eftvf,
)
from .traffic import OnuBuffer, ParetoOnOffSource


class Architecture(Enum):
    """Which physical collision domains exist."""

    FLEXIBLE = "flexible"  # receiver domain + per-group switch-port domain
    SPLITTER = "splitter"  # receiver domain only


class SchedulerKind(Enum):
    CEVF = "cevf"
    CEVF_NAIVE = "cevf-naive"
    EFTVF = "eftvf"


_SCHEDULERS = {
    SchedulerKind.CEVF: schedule_cevf_fast,
    SchedulerKind.CEVF_NAIVE: schedule_cevf_naive,
    SchedulerKind.EFTVF: schedule_eftvf,
}


@dataclass(frozen=True)
class SimConfig:
    topology: Topology
    architecture: Architecture = Architecture.FLEXIBLE
    scheduler: SchedulerKind = SchedulerKind.CEVF
    load: float = 1.0
    duration_ns: int = 20_000_000_000
    warmup_ns: int = 2_000_000_000
    seed: int = 0
    poll_interval_ns: int = 0  # extra spacing for idle polls; 0 = every RTT
    peak_rate_bps: int = 1_000_000_000
    trace_path: Optional[str] = None

    def validate(self) -> None:
        topo = self.topology
        if self.load < 0:
            raise ValueError("load must be >= 0")
        if self.duration_ns <= 0:
            raise ValueError("duration must be positive")
        if not 0 <= self.warmup_ns < self.duration_ns:
            raise ValueError("warmup must lie inside the run")
        if self.poll_interval_ns < 0:
            raise ValueError("poll interval must be >= 0")
        if self.peak_rate_bps <= 0:
            raise ValueError("peak rate must be positive")
        if self.load * topo.onu_rate_bps > self.peak_rate_bps:
            raise ValueError("offered per-ONU rate exceeds the transceiver peak")
        if topo.lim_bytes < 1:
            raise ValueError("topology needs a positive grant cap (lim_bytes)")
        if topo.rtt_ns:  # otherwise validated after RTTs are drawn
            topo.validate()


class Transmission(NamedTuple):
    """One upstream burst as it arrives at the OLT (end includes guard)."""

    onu: int
    group: int
    receiver: int
    start: int
    end: int
    g_bytes: int


class CollisionReport(NamedTuple):
    lost: frozenset  # indices into the swept transmission sequence
    receiver_lost: int  # how many of them overlapped on a receiver
    group_lost: int  # how many overlapped within their group


@dataclass
class Metrics:
    """Simulation outcome: exact whole-run totals plus windowed rates."""

    # whole-run conservation, exact integers
    offered_bits: int
    delivered_bits: int
    dropped_bits: int
    collided_bits: int
    residual_bits: int
    receiver_collisions: int
    group_collisions: int
    # measurement window [warmup, duration)
    window_ns: int
    offered_window_bits: int
    delivered_window_bits: int
    dropped_window_bits: int
    collided_window_bits: int
    throughput_pct: float
    collision_loss_pct: float
    buffer_drop_pct: float
    mean_hops: float
    # instrumentation
    events: int
    step_bound_violations: int
    insert_ops: int
    insert_bound_breaches: int

    def conservation_gap(self) -> int:
        """offered - (delivered + collided + dropped + residual); 0 if exact."""
        return self.offered_bits - (
            self.delivered_bits
            + self.collided_bits
            + self.dropped_bits
            + self.residual_bits
        )


def detect_collisions(
    transmissions: Sequence[Transmission], architecture: Architecture
) -> CollisionReport:
    """Sweep all bursts for pairwise interval overlap in each domain.

    Intervals are half-open, so a burst starting exactly where another ends
    is safe.  Any two overlapping bursts of one domain are both lost.
    """
    rx_lost: set = set()
    grp_lost: set = set()

    def sweep(key, lost):
        by_domain = defaultdict(list)
        for i, tr in enumerate(transmissions):
            by_domain[key(tr)].append(i)
        for idxs in by_domain.values():
            idxs.sort(key=lambda i: (transmissions[i].start, transmissions[i].end, i))
            open_heap: list = []  # (end, index) of bursts still in the air
            for i in idxs:
                s = transmissions[i].start
                while open_heap and open_heap[0][0] <= s:
                    heapq.heappop(open_heap)
                if open_heap:
                    lost.add(i)
                    for _e, j in open_heap:
                        lost.add(j)
                heapq.heappush(open_heap, (transmissions[i].end, i))

    sweep(lambda tr: tr.receiver, rx_lost)
    if architecture is Architecture.FLEXIBLE:
        sweep(lambda tr: tr.group, grp_lost)
    return CollisionReport(frozenset(rx_lost | grp_lost), len(rx_lost), len(grp_lost))


def run(config: SimConfig) -> Metrics:
    """Run one simulation to completion and aggregate its metrics."""
    config.validate()
    return _Engine(config).run()


def _resolve_rtts(config: SimConfig) -> Topology:
    """Fill in per-ONU RTTs (uniform 100-200 us, even ns) when unset."""
    topo = config.topology
    if topo.rtt_ns:
        return topo
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    rtts = tuple(2 * int(x) for x in rng.integers(50_000, 100_001, topo.n_onus))
    return replace(topo, rtt_ns=rtts)


class _Engine:
    def __init__(self, config: SimConfig):
        topo = _resolve_rtts(config)
        topo.validate()
        self.config = config
        self.topo = topo
        n = topo.n_onus
        # child 0 seeds the RTT draw above; one child per ONU feeds its source
        children = np.random.SeedSequence(config.seed).spawn(n + 1)[1:]
        mean_rate = config.load * topo.onu_rate_bps
        self.sources = [
            ParetoOnOffSource(np.random.default_rng(c), mean_rate, config.peak_rate_bps)
            for c in children
        ]
        cap_bytes = topo.buffer_capacity_bits // 8
        self.buffers = [OnuBuffer(capacity_bytes=cap_bytes) for _ in range(n)]
        self.state = SchedulerState.fresh(topo, now=0)
        self._pulled = [0] * n
        # counter snapshots taken crossing warmup (0) and end of run (1)
        self._bounds = (config.warmup_ns, config.duration_ns)
        self._snaps: tuple = ({}, {})
        self._writer = None

    # -- traffic feeding ---------------------------------------------------

    def _pull_to(self, onu: int, tau: int) -> None:
        """Feed arrivals up to ONU-local instant tau, snapshotting counters
        the first time a window boundary is crossed."""
        if tau <= self._pulled[onu]:
            return
        buf, src = self.buffers[onu], self.sources[onu]
        for boundary, snap in zip(self._bounds, self._snaps):
            if boundary <= tau and onu not in snap:
                src.pull(boundary, buf)
                snap[onu] = (buf.offered_bytes, buf.dropped_bytes)
        src.pull(tau, buf)
        self._pulled[onu] = tau

    # -- event loop ---------------------------------------------------------

    def run(self) -> Metrics:
        if self.config.trace_path is None:
            return self._run(None)
        with open(self.config.trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "event", "onu", "receiver", "bytes"])
            return self._run(writer)

    def _run(self, trace) -> Metrics:
        cfg, topo, state = self.config, self.topo, self.state
        schedule = _SCHEDULERS[cfg.scheduler]
        watch_steps = cfg.scheduler is SchedulerKind.CEVF
        step_bound = (
            topo.onus_per_group
            + topo.m_groups * topo.onus_per_group
            + topo.receivers
        )
        lim = topo.lim_bytes
        t_end = cfg.duration_ns
        warmup = cfg.warmup_ns

        heap: list = []
        seq = 0
        for onu in range(topo.n_onus):
            rtt = topo.rtt_ns[onu]
            self._pull_to(onu, rtt // 2)  # first report rides the discovery poll
            heap.append((rtt, seq, onu, self.buffers[onu].occupancy_bytes))
            seq += 1
        heapq.heapify(heap)

        transmissions: list = []
        events = violations = 0
        hops_sum = hops_calls = 0

        while heap:
            t, _, onu, b = heapq.heappop(heap)
            if t > t_end:
                break
            events += 1
            state.advance_to(t)
            if trace is not None:
                trace.writerow([t, "request", onu, "", b])
            rtt = topo.rtt_ns[onu]
            g = b if b < lim else lim
            if g == 0:
                nxt = t + max(rtt, cfg.poll_interval_ns)
                self._pull_to(onu, nxt - rtt // 2)
                if trace is not None:
                    trace.writerow([t, "poll", onu, "", 0])
                heapq.heappush(
                    heap, (nxt, seq, onu, self.buffers[onu].occupancy_bytes)
                )
                seq += 1
                continue
            decision = schedule(state, onu, g)
            commit(state, decision)
            if watch_steps and decision.steps > step_bound:
                violations += 1
            if t >= warmup:
                hops_sum += decision.steps
                hops_calls += 1
            self._pull_to(onu, decision.t_s - rtt // 2)
            buf = self.buffers[onu]
            got = buf.dequeue(g)
            assert got == g, f"buffer underran a committed grant: {got} < {g}"
            transmissions.append(
                Transmission(
                    onu, topo.group_of(onu), decision.receiver,
                    decision.t_s, decision.end, g,
                )
            )
            if trace is not None:
                trace.writerow([decision.t_s, "burst", onu, decision.receiver, g])
            heapq.heappush(heap, (decision.end, seq, onu, buf.occupancy_bytes))
            seq += 1

        for onu in range(topo.n_onus):
            self._pull_to(onu, t_end)

        return self._aggregate(transmissions, events, violations,
                               hops_sum, hops_calls)

    # -- metrics -------------------------------------------------------------

    def _aggregate(self, transmissions, events, violations,
                   hops_sum, hops_calls) -> Metrics:
        cfg, topo = self.config, self.topo
        warmup, t_end = self._bounds
        report = detect_collisions(transmissions, cfg.architecture)

        delivered = delivered_w = collided = collided_w = 0
        for i, tr in enumerate(transmissions):
            in_window = warmup <= tr.start < t_end
            if i in report.lost:
                collided += tr.g_bytes
                if in_window:
                    collided_w += tr.g_bytes
            else:
                delivered += tr.g_bytes
                if in_window:
                    delivered_w += tr.g_bytes

        offered = sum(buf.offered_bytes for buf in self.buffers)
        dropped = sum(buf.dropped_bytes for buf in self.buffers)
        residual = sum(buf.occupancy_bytes for buf in self.buffers)
        warm_snap, end_snap = self._snaps
        offered_w = sum(
            end_snap[o][0] - warm_snap[o][0] for o in range(topo.n_onus)
        )
        dropped_w = sum(
            end_snap[o][1] - warm_snap[o][1] for o in range(topo.n_onus)
        )

        window_ns = t_end - warmup
        capacity_bps = topo.n_onus * topo.onu_rate_bps
        throughput = 100.0 * 8.0 * delivered_w * 1e9 / (capacity_bps * window_ns)
        return Metrics(
            offered_bits=8 * offered,
            delivered_bits=8 * delivered,
            dropped_bits=8 * dropped,
            collided_bits=8 * collided,
            residual_bits=8 * residual,
            receiver_collisions=report.receiver_lost,
            group_collisions=report.group_lost,
            window_ns=window_ns,
            offered_window_bits=8 * offered_w,
            delivered_window_bits=8 * delivered_w,
            dropped_window_bits=8 * dropped_w,
            collided_window_bits=8 * collided_w,
            throughput_pct=throughput,
            collision_loss_pct=100.0 * collided_w / offered_w if offered_w else 0.0,
            buffer_drop_pct=100.0 * dropped_w / offered_w if offered_w else 0.0,
            mean_hops=hops_sum / hops_calls if hops_calls else 0.0,
            events=events,
            step_bound_violations=violations,
            insert_ops=self.state.insert_ops,
            insert_bound_breaches=self.state.insert_bound_breaches,
        )


def default_lim_bytes(onu_rate_bps: float, cycle_s: float = 2e-3) -> int:
    """Grant cap carrying one full cycle of the provisioned ONU rate."""
    return int(onu_rate_bps * cycle_s / 8)
