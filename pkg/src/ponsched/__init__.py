"""Upstream scheduling and simulation for TWDM optical access networks."""

from .core import (
    INF,
    GrantMsg,
    RequestMsg,
    ScheduleDecision,
    Time,
    TimelineOverlapError,
    Topology,
    Void,
    VoidTimeline,
    burst_duration_ns,
    void_length,
)
from .markov import (
    ChainConfig,
    ConvergenceError,
    bound_point,
    build_transition_matrix,
    lim_quanta,
    mean_arrivals_per_cycle,
    steady_state,
    steady_state_direct,
    throughput_bound,
)
from .scheduler import (
    InfeasibleGrantError,
    SchedulerState,
    StaleDecisionError,
    commit,
    earliest_start,
    fits,
    grant_instant,
    insert_ordered,
    intersect,
    schedule_cevf_fast,
    schedule_cevf_naive,
    schedule_eftvf,
)
from .simengine import (
    Architecture,
    CollisionReport,
    Metrics,
    SchedulerKind,
    SimConfig,
    Transmission,
    default_lim_bytes,
    detect_collisions,
    run,
)
from .traffic import OnuBuffer, ParetoOnOffSource
from .verify import VerifyReport, run_verification

__version__ = "0.1.0"
