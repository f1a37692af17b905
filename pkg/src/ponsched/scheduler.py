"""Upstream grant scheduling over receiver and group void timelines.

Three schedulers are provided, all searching for the earliest feasible start
``t_s >= T_e = now + rtt`` for a burst of ``g`` bytes:

``schedule_cevf_naive``
    Grid search over the Cartesian product of receiver voids and the
    requesting ONU's group voids.  Reference implementation.

``schedule_cevf_fast``
    Two-pointer hop over (a) the merged, start-ordered sequence of *all*
    receiver voids and (b) the ordered group-void sequence.  When a candidate
    intersection is too short, the void with the earlier finish is abandoned;
    the first candidate that fits is the global earliest start.  Inspects at
    most ``N + M*N + R`` candidate pairs.

``schedule_eftvf``
    Earliest finish-time void filling over receiver voids only; the group
    domain is ignored (safe on a splitter ODN, collision-prone on a flexible
    one).

Ties at equal earliest start are broken by lowest receiver id, then earliest
receiver-void start.  Every tie candidate's receiver void must fully contain
the placement window ``[t_s, t_s + duration)`` (anything earlier in merged
order was proven unfit by the hop scan, anything later starts no earlier), so
the fast variants resolve ties with one containment lookup per receiver.

Committing a decision splits the source voids; fragments shorter than
``2 * t_grd`` are dropped and accounted as dead time.  All ordered insertions
go through a counted binary search so the ``ceil(log2(len + 1))`` comparison
bound can be audited from outside.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .core import (
    INF,
    ScheduleDecision,
    Time,
    TimelineOverlapError,
    Topology,
    Void,
    VoidTimeline,
    burst_duration_ns,
    void_length,
)


class StaleDecisionError(RuntimeError):
    """Decision no longer matches the timelines it was computed against."""


class InfeasibleGrantError(ValueError):
    """Grant send instant would lie in the past (t_s - rtt < now)."""


def earliest_start(now: Time, rtt_ns: Time) -> Time:
    """Earliest instant a burst granted at ``now`` can reach the OLT."""
    return now + rtt_ns


def grant_instant(t_s: Time, rtt_ns: Time, now: Time) -> Time:
    """Downstream send time for a burst that must arrive at ``t_s``."""
    t_g = t_s - rtt_ns
    if t_g < now:
        raise InfeasibleGrantError(f"t_g={t_g} precedes now={now}")
    return t_g


def intersect(a: Void, b: Void, t_e: Time):
    """Clamped intersection of two voids, no earlier than ``t_e``.

    Returns a ``Void`` (possibly zero length) or None when the intersection
    finishes before it starts.
    """
    start = max(t_e, a.start, b.start)
    finish = min(a.finish, b.finish)
    if finish < start:
        return None
    return Void(start, finish)


def fits(candidate: Void, g_bytes: int, line_rate_bps: int, t_grd_ns: Time) -> bool:
    """True when the candidate can hold ``g_bytes`` plus the guard time.

    Equality is admitted: a candidate exactly as long as the reserved
    interval is usable.
    """
    return void_length(candidate) >= burst_duration_ns(g_bytes, line_rate_bps, t_grd_ns)


def _counted_bisect(keys, key):
    """Binary search returning (insertion index, comparison count).

    Standard halving search: at most ceil(log2(len(keys) + 1)) comparisons.
    """
    lo, hi = 0, len(keys)
    comps = 0
    while lo < hi:
        mid = (lo + hi) // 2
        comps += 1
        if key < keys[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo, comps


def insert_ordered(timeline: VoidTimeline, v: Void) -> int:
    """Insert ``v`` into a start-ordered timeline; returns comparisons used.

    Rejects voids that would overlap a neighbour -- that always indicates a
    commit bookkeeping bug, never a legitimate schedule state.
    """
    vs = timeline.voids
    idx, comps = _counted_bisect(vs, v)
    if idx > 0 and vs[idx - 1].finish > v.start:
        raise TimelineOverlapError(f"{v} overlaps predecessor {vs[idx - 1]}")
    if idx < len(vs) and v.finish > vs[idx].start:
        raise TimelineOverlapError(f"{v} overlaps successor {vs[idx]}")
    vs.insert(idx, v)
    return comps


@dataclass
class SchedulerState:
    """Mutable scheduler bookkeeping: one timeline per receiver and group.

    ``merged`` mirrors every receiver void as ``(start, receiver, finish)``
    tuples in (start, receiver) order; per-receiver timelines stay the
    authoritative source and the two are updated in lockstep.
    """

    topology: Topology
    now: Time = 0
    rx_timelines: list = field(default_factory=list)
    group_timelines: list = field(default_factory=list)
    merged: list = field(default_factory=list)
    dead_time_ns: int = 0
    insert_ops: int = 0
    insert_bound_breaches: int = 0

    @classmethod
    def fresh(cls, topology: Topology, now: Time = 0) -> "SchedulerState":
        """Empty schedule: every timeline is a single horizon void at ``now``."""
        state = cls(topology=topology, now=now)
        state.rx_timelines = [
            VoidTimeline("rx", r, start=now) for r in range(topology.receivers)
        ]
        state.group_timelines = [
            VoidTimeline("group", x, start=now) for x in range(topology.m_groups)
        ]
        state.merged = [(now, r, INF) for r in range(topology.receivers)]
        return state

    def advance_to(self, now: Time) -> None:
        """Move the clock forward, discarding voids that ended in the past.

        Every future candidate starts at T_e >= now, so a void with
        finish <= now can never host one again.  Pruning keeps the void
        populations within the N + M*N + R search bound.
        """
        if now < self.now:
            raise ValueError(f"time moved backwards: {self.now} -> {now}")
        self.now = now
        m = self.merged
        if m and m[0][0] < now:
            cut = bisect_left(m, (now,))
            head = [e for e in m[:cut] if e[2] > now]
            if len(head) != cut:
                self.merged = head + m[cut:]
        for tl in self.rx_timelines:
            self._prune_timeline(tl, now)
        for tl in self.group_timelines:
            self._prune_timeline(tl, now)

    @staticmethod
    def _prune_timeline(tl: VoidTimeline, now: Time) -> None:
        vs = tl.voids
        if vs and vs[0].start < now:
            cut = bisect_left(vs, (now,))
            head = [v for v in vs[:cut] if v.finish > now]
            if len(head) != cut:
                tl.voids = head + vs[cut:]

    def validate(self) -> None:
        """Cross-check all timeline invariants plus the merged mirror."""
        t_grd = self.topology.t_grd_ns
        for tl in self.rx_timelines:
            tl.validate(t_grd)
        for tl in self.group_timelines:
            tl.validate(t_grd)
        mirror = sorted(
            (v.start, tl.index, v.finish) for tl in self.rx_timelines for v in tl.voids
        )
        if mirror != self.merged:
            raise AssertionError("merged receiver view out of sync")

    # -- internal helpers -------------------------------------------------

    def _merged_insert(self, rx: int, v: Void) -> None:
        entry = (v.start, rx, v.finish)
        idx, comps = _counted_bisect(self.merged, entry)
        self._note_insert(comps, len(self.merged))
        self.merged.insert(idx, entry)

    def _merged_remove(self, rx: int, v: Void) -> None:
        entry = (v.start, rx, v.finish)
        idx = bisect_left(self.merged, entry)
        if idx >= len(self.merged) or self.merged[idx] != entry:
            raise StaleDecisionError(f"receiver void {v} not present on rx{rx}")
        del self.merged[idx]

    def _note_insert(self, comps: int, length_before: int) -> None:
        self.insert_ops += 1
        if comps > _ceil_log2(length_before + 1):
            self.insert_bound_breaches += 1


def _ceil_log2(n: int) -> int:
    """ceil(log2(n)) for n >= 1."""
    return (n - 1).bit_length()


def _containing_receiver_void(state: SchedulerState, start: Time, end):
    """Lowest receiver id whose void fully contains [start, end)."""
    probe = (start, INF)
    for rx, tl in enumerate(state.rx_timelines):
        vs = tl.voids
        k = bisect_right(vs, probe) - 1
        if k >= 0:
            v = vs[k]
            if v.finish >= end:
                return rx, v
    raise AssertionError("no receiver void contains an accepted candidate")


def schedule_cevf_naive(
    state: SchedulerState, onu: int, g_bytes: int
) -> ScheduleDecision:
    """Exhaustive search over receiver-void x group-void pairs.

    Returns the feasible candidate with the minimum start time; ties broken
    by (receiver id, receiver-void start).  Does not mutate ``state``.
    """
    topo = state.topology
    rtt = topo.rtt_ns[onu]
    t_e = state.now + rtt
    needed = burst_duration_ns(g_bytes, topo.olt_rate_bps, topo.t_grd_ns)
    group_voids = state.group_timelines[topo.group_of(onu)].voids
    best = None
    best_key = None
    steps = 0
    for rx, tl in enumerate(state.rx_timelines):
        for a in tl.voids:
            for b in group_voids:
                steps += 1
                start = max(t_e, a.start, b.start)
                finish = a.finish if a.finish <= b.finish else b.finish
                if finish - start >= needed:
                    key = (start, rx, a.start)
                    if best_key is None or key < best_key:
                        best_key = key
                        best = (rx, a, b, start)
    if best is None:  # unreachable: horizon x horizon always fits
        raise AssertionError("no feasible candidate")
    rx, a, b, start = best
    return ScheduleDecision(
        onu=onu,
        receiver=rx,
        t_s=start,
        t_g=grant_instant(start, rtt, state.now),
        duration=needed,
        g_bytes=g_bytes,
        rx_void=a,
        group_void=b,
        steps=steps,
    )


def schedule_cevf_fast(
    state: SchedulerState, onu: int, g_bytes: int, trace=None
) -> ScheduleDecision:
    """Two-pointer void hopping; result identical to the naive grid search.

    ``trace``, if given, collects the inspected (receiver void, group void)
    pairs.  ``steps`` on the returned decision counts those inspections.
    """
    topo = state.topology
    rtt = topo.rtt_ns[onu]
    t_e = state.now + rtt
    needed = burst_duration_ns(g_bytes, topo.olt_rate_bps, topo.t_grd_ns)
    merged = state.merged
    group_voids = state.group_timelines[topo.group_of(onu)].voids
    i = j = 0
    steps = 0
    while True:
        sa, _rx, fa = merged[i]
        b = group_voids[j]
        fb = b.finish
        steps += 1
        if trace is not None:
            trace.append((Void(sa, fa), b))
        start = t_e
        if sa > start:
            start = sa
        sb = b.start
        if sb > start:
            start = sb
        finish = fa if fa <= fb else fb
        if finish - start >= needed:
            break
        if fa <= fb:
            i += 1
        else:
            j += 1
    receiver, rx_void = _containing_receiver_void(state, start, start + needed)
    return ScheduleDecision(
        onu=onu,
        receiver=receiver,
        t_s=start,
        t_g=grant_instant(start, rtt, state.now),
        duration=needed,
        g_bytes=g_bytes,
        rx_void=rx_void,
        group_void=b,
        steps=steps,
    )


def schedule_eftvf(
    state: SchedulerState, onu: int, g_bytes: int
) -> ScheduleDecision:
    """Receiver-only void filling: earliest start over the merged sequence.

    The group domain is never consulted, so on a flexible architecture two
    ONUs of one group may be granted overlapping intervals on different
    receivers.
    """
    topo = state.topology
    rtt = topo.rtt_ns[onu]
    t_e = state.now + rtt
    needed = burst_duration_ns(g_bytes, topo.olt_rate_bps, topo.t_grd_ns)
    steps = 0
    start = None
    for sa, _rx, fa in state.merged:
        steps += 1
        s = t_e if sa <= t_e else sa
        if fa - s >= needed:
            start = s
            break
    if start is None:  # unreachable: every receiver ends in a horizon void
        raise AssertionError("no feasible receiver void")
    receiver, rx_void = _containing_receiver_void(state, start, start + needed)
    return ScheduleDecision(
        onu=onu,
        receiver=receiver,
        t_s=start,
        t_g=grant_instant(start, rtt, state.now),
        duration=needed,
        g_bytes=g_bytes,
        rx_void=rx_void,
        group_void=None,
        steps=steps,
    )


def commit(state: SchedulerState, decision: ScheduleDecision) -> None:
    """Carve the decision's interval out of its source voids.

    Validates that the named voids are still present and still contain
    ``[t_s, t_s + duration)`` (stale-decision protection), then splits them.
    Fragments shorter than ``2 * t_grd`` are dropped as dead time.
    """
    t_grd = state.topology.t_grd_ns
    start, end = decision.t_s, decision.end

    rx = decision.receiver
    a = decision.rx_void
    _validate_source(a, start, end, state.rx_timelines[rx])
    state._merged_remove(rx, a)
    _remove_void(state.rx_timelines[rx], a)
    for frag in _fragments(a, start, end, t_grd, state):
        comps = insert_ordered(state.rx_timelines[rx], frag)
        state._note_insert(comps, len(state.rx_timelines[rx]) - 1)
        state._merged_insert(rx, frag)

    b = decision.group_void
    if b is not None:
        x = state.topology.group_of(decision.onu)
        _validate_source(b, start, end, state.group_timelines[x])
        _remove_void(state.group_timelines[x], b)
        for frag in _fragments(b, start, end, t_grd, state):
            comps = insert_ordered(state.group_timelines[x], frag)
            state._note_insert(comps, len(state.group_timelines[x]) - 1)


def _validate_source(v: Void, start: Time, end, timeline: VoidTimeline) -> None:
    if not (v.start <= start and end <= v.finish):
        raise StaleDecisionError(f"[{start}, {end}) not contained in {v}")
    idx = bisect_left(timeline.voids, v)
    if idx >= len(timeline.voids) or timeline.voids[idx] != v:
        raise StaleDecisionError(f"source void {v} vanished from {timeline.kind}")


def _remove_void(timeline: VoidTimeline, v: Void) -> None:
    idx = bisect_left(timeline.voids, v)
    del timeline.voids[idx]


def _fragments(v: Void, start: Time, end, t_grd: Time, state: SchedulerState):
    """Surviving fragments of ``v`` after removing [start, end)."""
    out = []
    min_len = 2 * t_grd
    left = start - v.start
    if left >= min_len and left > 0:
        out.append(Void(v.start, start))
    elif left > 0:
        state.dead_time_ns += left
    if v.finish == INF:
        out.append(Void(end, INF))
    else:
        right = v.finish - end
        if right >= min_len and right > 0:
            out.append(Void(end, v.finish))
        elif right > 0:
            state.dead_time_ns += right
    return out
