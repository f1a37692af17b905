"""Shared domain types for upstream scheduling in a TWDM optical access network.

Time is kept as plain integer nanoseconds throughout so that scheduling
arithmetic is exact; the single exception is the ``INF`` sentinel used for the
open end of the last ("horizon") void of every timeline, which compares above
every finite instant.

An upstream schedule is tracked as *voids* -- half-open idle intervals
``[start, finish)`` -- on two kinds of timelines:

* one per OLT receiver (at most one burst can arrive at a receiver at a time),
* one per ONU group (the shared group port carries one burst at a time).

A burst reservation must sit inside one void of each kind; committing it
splits those voids, and fragments shorter than twice the guard time are
discarded as dead time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

Time = int  # integer nanoseconds
INF = math.inf  # horizon sentinel; orders above every finite Time

NS_PER_S = 10**9


class Void(NamedTuple):
    """Half-open idle interval [start, finish) on a receiver or group timeline."""

    start: Time
    finish: Time | float  # INF for the horizon void

    @property
    def length(self):
        return self.finish - self.start

    @property
    def is_horizon(self) -> bool:
        return self.finish == INF


def void_length(v: Void):
    """Length of a void; INF for a horizon void."""
    return v.finish - v.start


def burst_duration_ns(g_bytes: int, line_rate_bps: int, t_grd_ns: Time) -> Time:
    """Reserved interval length for upstreaming ``g_bytes``.

    Transmission time is rounded up to whole nanoseconds; the guard time is
    charged once, at the start of the burst, inside the reserved interval.
    """
    if g_bytes < 0:
        raise ValueError("negative grant size")
    bits = 8 * g_bytes * NS_PER_S
    return (bits + line_rate_bps - 1) // line_rate_bps + t_grd_ns


class TimelineOverlapError(ValueError):
    """A void insertion would overlap its neighbours (bookkeeping bug)."""


class VoidTimeline:
    """Ordered void sequence for one receiver or one group.

    Invariants (checked by :meth:`validate`):

    * voids sorted by strictly increasing start,
    * non-overlapping: finish(v_k) <= start(v_{k+1}),
    * the last void is the unique horizon (finish = INF),
    * every non-horizon void is at least ``2 * t_grd`` long (shorter
      fragments were dropped at commit time).
    """

    __slots__ = ("kind", "index", "voids")

    def __init__(self, kind: str, index: int, voids=None, *, start: Time = 0):
        self.kind = kind
        self.index = index
        self.voids: list[Void] = list(voids) if voids is not None else [Void(start, INF)]

    def __len__(self):
        return len(self.voids)

    def __iter__(self):
        return iter(self.voids)

    def __getitem__(self, i):
        return self.voids[i]

    def validate(self, t_grd_ns: Time) -> None:
        vs = self.voids
        if not vs or vs[-1].finish != INF:
            raise AssertionError(f"{self.kind}[{self.index}]: missing horizon void")
        for k, v in enumerate(vs):
            if v.finish != INF and void_length(v) < 2 * t_grd_ns:
                raise AssertionError(f"{self.kind}[{self.index}]: runt void {v}")
            if k:
                if vs[k - 1].start >= v.start:
                    raise AssertionError(f"{self.kind}[{self.index}]: starts not increasing")
                if vs[k - 1].finish > v.start:
                    raise AssertionError(f"{self.kind}[{self.index}]: overlap at {v}")
            if v.finish == INF and k != len(vs) - 1:
                raise AssertionError(f"{self.kind}[{self.index}]: interior horizon void")


@dataclass(frozen=True)
class Topology:
    """Static description of one OLT and its attached ONUs.

    ONUs are numbered globally ``0 .. m_groups*onus_per_group - 1``; ONU ``i``
    belongs to group ``i // onus_per_group``.  ``rtt_ns[i]`` is the full
    round-trip time between the OLT and ONU ``i``.
    """

    m_groups: int
    onus_per_group: int
    receivers: int
    olt_rate_bps: int = 1_000_000_000
    onu_rate_bps: float = 31.25e6
    t_grd_ns: Time = 1_000
    rtt_ns: tuple = ()
    lim_bytes: int = 0
    buffer_capacity_bits: int = 10**9

    @property
    def n_onus(self) -> int:
        return self.m_groups * self.onus_per_group

    def group_of(self, onu: int) -> int:
        return onu // self.onus_per_group

    def validate(self) -> None:
        if self.m_groups < 1 or self.onus_per_group < 1 or self.receivers < 1:
            raise ValueError("topology sizes must be positive")
        if self.receivers > self.n_onus:
            raise ValueError("more receivers than ONUs")
        if self.olt_rate_bps <= 0 or self.onu_rate_bps <= 0:
            raise ValueError("line rates must be positive")
        if self.onus_per_group * self.onu_rate_bps > self.olt_rate_bps:
            raise ValueError("group rate N*r exceeds one receiver line rate")
        if self.t_grd_ns < 0 or self.lim_bytes < 0:
            raise ValueError("negative guard time or grant cap")
        if len(self.rtt_ns) != self.n_onus:
            raise ValueError("need one RTT per ONU")
        if any(r <= 0 for r in self.rtt_ns):
            raise ValueError("RTTs must be positive")


class RequestMsg(NamedTuple):
    """Upstream bandwidth request: ONU ``onu`` reports ``b_bytes`` queued."""

    onu: int
    b_bytes: int


class GrantMsg(NamedTuple):
    """Downstream grant: transmit ``g_bytes`` (0 <= g <= requested b)."""

    onu: int
    g_bytes: int
    send_at: Time


@dataclass(frozen=True, slots=True)
class ScheduleDecision:
    """Outcome of one scheduling call; immutable until committed.

    ``rx_void``/``group_void`` name the source voids the burst must be carved
    from (``group_void`` is None for receiver-only scheduling).  ``steps`` is
    the number of candidate inspections the search performed.
    """

    onu: int
    receiver: int
    t_s: Time
    t_g: Time
    duration: Time
    g_bytes: int
    rx_void: Void
    group_void: Optional[Void]
    steps: int = 0

    @property
    def end(self) -> Time:
        return self.t_s + self.duration
