"""Command-line front end: simulation sweeps, analytic bound curves, self-checks.

Three subcommands:

``simulate``
    Runs the Cartesian product of sweep dimensions (load x scheduler x
    architecture x seed) and emits one CSV row per run, ordered by sweep
    index no matter how many worker processes execute the runs.

``bound``
    Evaluates the analytic buffer-overflow throughput bound for each
    requested load and emits one CSV row per load.

``verify``
    Runs the randomized fast-vs-naive scheduler cross-check plus the
    structural invariant audit and prints a one-line summary.

Every flag can also be supplied through a JSON config file (``--config``);
explicit command-line flags override file values.  Exit codes: 0 on success,
1 for an invalid configuration, 2 when verification finds a violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Optional, Sequence

from .core import Topology
from .markov import bound_point
from .simengine import Architecture, SchedulerKind, SimConfig, default_lim_bytes, run
from .verify import run_verification

SIM_HEADER = (
    "scheduler,arch,rho,N,R,onu_rate,seed,"
    "throughput_pct,collision_loss_pct,buffer_drop_pct,mean_hops"
)
BOUND_HEADER = "rho,K,lim_q,A,pi_full,throughput_percent"

_SCHEDULER_TOKENS = {kind.value: kind for kind in SchedulerKind}
_ARCH_TOKENS = {arch.value: arch for arch in Architecture}

# config keys that hold sweep lists; single values are promoted to lists
_LIST_KEYS = ("load", "scheduler", "arch", "seed")

_DEFAULTS = {
    "load": [1.0],
    "scheduler": ["cevf"],
    "arch": ["flexible"],
    "seed": [0],
    "onus": 64,
    "group_size": 8,
    "receivers": 2,
    "onu_rate": 31.25e6,
    "jobs": 1,
    # engine knobs reachable through the JSON config only
    "duration_ns": 20_000_000_000,
    "warmup_ns": 2_000_000_000,
    "poll_interval_ns": 0,
    "peak_rate_bps": 1_000_000_000,
    "t_grd_ns": 1000,
    "lim_bytes": 0,  # 0 = derive from the ONU rate
    "buffer_capacity_bits": 10**9,
    "rtt_ns": [],
    # bound knobs
    "buffer_quanta": 500,
    "arrival_mode": "literal",
    "solver": "direct",
    # verify knobs
    "instances": 10_000,
}


class UsageError(Exception):
    """Raised for anything that should terminate with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract reserves 2 for
    # verification failures, so route parse errors through UsageError instead
    def error(self, message):
        raise UsageError(message)


def _comma_list(text: str) -> list:
    return [item for item in (part.strip() for part in text.split(",")) if item]


def _build_parser() -> _Parser:
    parser = _Parser(prog="ponsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file mirroring the flags")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--seed", help="seed or comma list of seeds")
        p.add_argument("--load", help="load rho or comma list of loads")
        p.add_argument("--scheduler", help="comma list of: cevf, cevf-naive, eftvf")
        p.add_argument("--arch", help="comma list of: flexible, splitter")
        p.add_argument("--onus", type=int, help="total ONU count")
        p.add_argument("--group-size", dest="group_size", type=int, help="ONUs per group (N)")
        p.add_argument("--receivers", type=int, help="OLT receiver count (R)")
        p.add_argument("--onu-rate", dest="onu_rate", type=float, help="per-ONU rate in b/s")
        p.add_argument("--jobs", type=int, help="parallel worker processes")

    sim = sub.add_parser("simulate", help="run a simulation sweep")
    common(sim)
    bound = sub.add_parser("bound", help="evaluate the analytic throughput bound")
    common(bound)
    bound.add_argument("--buffer-quanta", dest="buffer_quanta", type=int,
                       help="chain buffer size K in packet quanta")
    bound.add_argument("--arrival-mode", dest="arrival_mode",
                       help="literal (A = rho^2 lim) or linear (A = rho lim)")
    bound.add_argument("--solver", help="direct or power")
    ver = sub.add_parser("verify", help="randomized scheduler cross-checks")
    common(ver)
    ver.add_argument("--instances", type=int, help="randomized instances to check")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """defaults <- JSON file <- explicit flags, lists normalized."""
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}")
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config", "out") or value is None:
            continue
        cfg[key] = value
    for key in _LIST_KEYS:
        value = cfg[key]
        if isinstance(value, str):
            value = _comma_list(value)
        elif not isinstance(value, (list, tuple)):
            value = [value]
        cfg[key] = list(value)
    try:
        cfg["load"] = [float(v) for v in cfg["load"]]
        cfg["seed"] = [int(v) for v in cfg["seed"]]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad load/seed value: {exc}")
    for token in cfg["scheduler"]:
        if token not in _SCHEDULER_TOKENS:
            raise UsageError(f"unknown scheduler {token!r}")
    for token in cfg["arch"]:
        if token not in _ARCH_TOKENS:
            raise UsageError(f"unknown architecture {token!r}")
    return cfg


def _topology(cfg: dict) -> Topology:
    onus, group = cfg["onus"], cfg["group_size"]
    if group < 1 or onus < 1 or onus % group:
        raise UsageError(f"{onus} ONUs do not divide into groups of {group}")
    rate = float(cfg["onu_rate"])
    return Topology(
        m_groups=onus // group,
        onus_per_group=group,
        receivers=cfg["receivers"],
        onu_rate_bps=rate,
        t_grd_ns=cfg["t_grd_ns"],
        rtt_ns=tuple(cfg["rtt_ns"]),
        lim_bytes=cfg["lim_bytes"] or default_lim_bytes(rate),
        buffer_capacity_bits=cfg["buffer_capacity_bits"],
    )


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def _run_cell(sim_config: SimConfig):
    return run(sim_config)


def _simulate(cfg: dict, out) -> int:
    topo = _topology(cfg)
    sweep = list(product(cfg["load"], cfg["scheduler"], cfg["arch"], cfg["seed"]))
    configs = []
    for rho, sched, arch, seed in sweep:
        sim = SimConfig(
            topology=topo,
            architecture=_ARCH_TOKENS[arch],
            scheduler=_SCHEDULER_TOKENS[sched],
            load=rho,
            duration_ns=cfg["duration_ns"],
            warmup_ns=cfg["warmup_ns"],
            seed=seed,
            poll_interval_ns=cfg["poll_interval_ns"],
            peak_rate_bps=cfg["peak_rate_bps"],
        )
        try:
            sim.validate()
        except ValueError as exc:
            raise UsageError(str(exc))
        configs.append(sim)

    jobs = max(1, int(cfg["jobs"]))
    if jobs == 1 or len(configs) == 1:
        results = [_run_cell(sim) for sim in configs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, configs))  # keeps sweep order

    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SIM_HEADER.split(","))
    for (rho, sched, arch, seed), metrics in zip(sweep, results):
        writer.writerow(
            [
                sched,
                arch,
                _fmt(rho),
                topo.onus_per_group,
                topo.receivers,
                _fmt(topo.onu_rate_bps),
                seed,
                f"{metrics.throughput_pct:.6f}",
                f"{metrics.collision_loss_pct:.6f}",
                f"{metrics.buffer_drop_pct:.6f}",
                f"{metrics.mean_hops:.6f}",
            ]
        )
    return 0


def _bound(cfg: dict, out) -> int:
    if cfg["arrival_mode"] not in ("literal", "linear"):
        raise UsageError(f"unknown arrival mode {cfg['arrival_mode']!r}")
    if cfg["solver"] not in ("direct", "power"):
        raise UsageError(f"unknown solver {cfg['solver']!r}")
    if cfg["buffer_quanta"] < 1:
        raise UsageError("buffer-quanta must be positive")
    try:
        points = [
            bound_point(
                load=rho,
                onu_rate_bps=float(cfg["onu_rate"]),
                buffer_quanta=cfg["buffer_quanta"],
                mode=cfg["arrival_mode"],
                solver=cfg["solver"],
            )
            for rho in cfg["load"]
        ]
    except ValueError as exc:
        raise UsageError(str(exc))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BOUND_HEADER.split(","))
    for point in points:
        writer.writerow(
            [
                _fmt(point["rho"]),
                point["K"],
                point["lim_q"],
                repr(point["A"]),
                repr(point["pi_full"]),
                f"{point['throughput_percent']:.6f}",
            ]
        )
    return 0


def _verify(cfg: dict, out) -> int:
    instances = int(cfg["instances"])
    if instances < 1:
        raise UsageError("instances must be positive")
    report = run_verification(instances=instances, seed=cfg["seed"][0])
    print(report.summary(), file=out)
    return 0 if report.ok else 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _merge_config(args)
        command = {"simulate": _simulate, "bound": _bound, "verify": _verify}[
            args.command
        ]
        if args.out:
            with open(args.out, "w", newline="") as fh:
                return command(cfg, fh)
        return command(cfg, sys.stdout)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
