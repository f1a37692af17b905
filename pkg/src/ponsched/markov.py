"""Buffer-occupancy Markov chain for the limited granting policy.

One ONU's buffer is observed once per granting cycle, in units of 1500-byte
packet quanta.  Each cycle the buffer receives a Poisson number of packet
arrivals (mean ``mean_arrivals``) and is drained by at most ``lim_quanta``;
state K (the buffer capacity) absorbs all overflow mass.  Solving the chain
for its stationary distribution gives a throughput ceiling for the policy:
``load * (1 - pi[K]) * 100`` percent.

Two transition conventions are provided.  The default
(``growth_includes_service=True``) applies the per-cycle service in every
row -- ``B' = min(K, max(0, B + arrivals - lim))`` -- which is row-stochastic
by construction.  The alternative omits the service term from its growth
case, so the raw rows sum to more than one and each row is renormalized.
Both drain identically and share the same low-occupancy transition
probabilities.

``mean_arrivals_per_cycle`` offers two load normalizations: "literal" takes
the cycle length itself proportional to load (A = rho^2 * lim_q) and
"linear" the standard fixed-cycle form (A = rho * lim_q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

CYCLE_S = 2e-3
PACKET_BYTES = 1500


class ConvergenceError(RuntimeError):
    """Power iteration failed to converge (reducible or periodic chain)."""


@dataclass(frozen=True)
class ChainConfig:
    lim_quanta: int
    buffer_quanta: int  # K: buffer capacity in packet quanta
    mean_arrivals: float  # A: mean Poisson arrivals per cycle
    load: float = 1.0
    growth_includes_service: bool = True

    def __post_init__(self):
        if self.lim_quanta < 1:
            raise ValueError("lim_quanta must be >= 1")
        if self.buffer_quanta < self.lim_quanta:
            raise ValueError("buffer_quanta must be >= lim_quanta")
        if self.mean_arrivals < 0:
            raise ValueError("mean_arrivals must be >= 0")
        if self.load < 0:
            raise ValueError("load must be >= 0")


def lim_quanta(onu_rate_bps: float, cycle_s: float = CYCLE_S,
               packet_bytes: int = PACKET_BYTES) -> int:
    """Grant cap in whole packets: one cycle's worth of traffic at rate r."""
    return int(onu_rate_bps * cycle_s / (8 * packet_bytes))


def mean_arrivals_per_cycle(load: float, onu_rate_bps: float, mode: str = "literal",
                            cycle_s: float = CYCLE_S,
                            packet_bytes: int = PACKET_BYTES) -> float:
    """Mean Poisson arrivals per cycle under either load normalization.

    Whole packets per whole grant opportunities: both forms scale the
    integer grant cap, so at full load the literal chain is exactly
    critical (A = lim_q) rather than supercritical by the fractional
    packet the rate would otherwise carry.
    """
    base = load * lim_quanta(onu_rate_bps, cycle_s, packet_bytes)
    if mode == "literal":
        return load * base  # cycle length itself scales with load
    if mode == "linear":
        return base
    raise ValueError(f"unknown arrival mode: {mode!r}")


def _poisson_pmf(a: float, n: int) -> np.ndarray:
    """pmf[0..n] of Poisson(a) by the stable upward recurrence."""
    pmf = np.zeros(n + 1)
    if a == 0.0:
        pmf[0] = 1.0
        return pmf
    if a < 700.0:  # exp(-a) representable in float64
        pmf[0] = math.exp(-a)
        for k in range(n):
            pmf[k + 1] = pmf[k] * a / (k + 1)
        return pmf
    logs = np.array([-a + k * math.log(a) - math.lgamma(k + 1) for k in range(n + 1)])
    return np.exp(logs)


def build_transition_matrix(cfg: ChainConfig) -> sparse.csr_matrix:
    """Sparse row-stochastic transition matrix over states {0..K}."""
    k_cap = cfg.buffer_quanta
    lim = cfg.lim_quanta
    pmf = _poisson_pmf(cfg.mean_arrivals, k_cap + lim)
    cdf = np.cumsum(pmf)

    rows, cols, vals = [], [], []

    def put(b, j, p):
        if p > 0.0:
            rows.append(b)
            cols.append(j)
            vals.append(p)

    if cfg.growth_includes_service:
        # B' = min(K, max(0, B + arrivals - lim)), exact rows
        for b in range(k_cap + 1):
            if b <= lim:
                put(b, 0, cdf[lim - b])
                first, off = 1, lim - b
            else:
                first, off = b - lim, lim - b
            for j in range(first, k_cap):
                put(b, j, pmf[j + off])
            put(b, k_cap, 1.0 - cdf[k_cap + off - 1])
    else:
        # growth rows omit the service term here, so the raw rows over-count
        # and each is renormalized to a distribution
        for b in range(k_cap + 1):
            acc = np.zeros(k_cap + 1)
            if b <= lim:
                acc[0] = cdf[lim - b]  # drain to empty
            for j in range(max(1, b - lim), b + 1):  # fall or hold, served
                acc[j] += pmf[j + lim - b]
            for j in range(b + 1, k_cap):  # growth: no service applied
                acc[j] += pmf[j - b]
            if k_cap > b:
                acc[k_cap] += 1.0 - cdf[k_cap - b - 1]  # absorbing overflow
            acc /= acc.sum()
            for j in np.nonzero(acc)[0]:
                put(b, int(j), acc[j])

    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(k_cap + 1, k_cap + 1), dtype=np.float64
    )


def steady_state(p: sparse.csr_matrix, tol: float = 1e-12,
                 residual_tol: float = 1e-10, max_iter: int = 300_000) -> np.ndarray:
    """Stationary distribution by power iteration on the sparse matrix.

    Raises ConvergenceError when successive iterates keep differing --
    a reducible or periodic chain, which this model never produces.
    """
    n = p.shape[0]
    pt = p.T.tocsr()
    x = np.zeros(n)
    x[0] = 1.0  # start from the empty buffer
    for _ in range(max_iter):
        x_next = pt @ x
        x_next /= x_next.sum()
        if np.abs(x_next - x).sum() < tol:
            x = x_next
            break
        x = x_next
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations")
    residual = np.abs(pt @ x - x).sum()
    if residual > residual_tol:
        raise ConvergenceError(f"stationarity residual {residual:.3e}")
    return x / x.sum()


def steady_state_direct(p: sparse.csr_matrix) -> np.ndarray:
    """Stationary distribution by a sparse linear solve of pi (P - I) = 0."""
    n = p.shape[0]
    a = (p.T - sparse.identity(n, format="csr")).tolil()
    a[n - 1, :] = 1.0  # replace one equation with the normalization
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spsolve(a.tocsr(), b)
    # the solve can leave O(eps) negatives in the far tail; they are noise,
    # not probabilities, and would otherwise leak into reported columns
    np.maximum(pi, 0.0, out=pi)
    return pi / pi.sum()


def throughput_bound(pi: np.ndarray, load: float) -> float:
    """Throughput ceiling in percent: load * (1 - P(buffer full)) * 100."""
    return load * (1.0 - float(pi[-1])) * 100.0


def bound_point(load: float, onu_rate_bps: float, buffer_quanta: int,
                mode: str = "literal", solver: str = "power") -> dict:
    """One analytic-bound evaluation, as the CSV row fields."""
    lim = lim_quanta(onu_rate_bps)
    a = mean_arrivals_per_cycle(load, onu_rate_bps, mode)
    cfg = ChainConfig(lim_quanta=lim, buffer_quanta=buffer_quanta, mean_arrivals=a,
                      load=load)
    p = build_transition_matrix(cfg)
    pi = steady_state(p) if solver == "power" else steady_state_direct(p)
    return {
        "rho": load,
        "K": buffer_quanta,
        "lim_q": lim,
        "A": a,
        "pi_full": float(pi[-1]),
        "throughput_percent": throughput_bound(pi, load),
    }
