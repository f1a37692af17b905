#!/usr/bin/env python3
"""Tabulate the analytic queueing-bound curve for each ONU line rate.

Writes one CSV per rate and arrival mode through ``ponsched bound``:
``bound_<rate>_<mode>.csv`` with the standard bound columns.  The dense
load grid makes the output directly plottable against simulation sweeps.
"""

import argparse
import sys
from pathlib import Path

from ponsched.cli import main as cli_main

RATES = (("31.25M", "31.25e6"), ("62.5M", "62.5e6"), ("125M", "125e6"))


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--buffer-quanta", type=int, default=500)
    ap.add_argument("--points", type=int, default=40,
                    help="number of load samples in (0, 1]")
    ap.add_argument("--modes", default="literal,linear")
    args = ap.parse_args(argv)

    loads = ",".join(f"{(i + 1) / args.points:.6g}" for i in range(args.points))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for tag, rate in RATES:
        for mode in args.modes.split(","):
            out = out_dir / f"bound_{tag}_{mode}.csv"
            code = cli_main([
                "bound", "--onu-rate", rate, "--load", loads,
                "--buffer-quanta", str(args.buffer_quanta),
                "--arrival-mode", mode, "--solver", "direct",
                "--out", str(out),
            ])
            if code != 0:
                return code
            print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(run())
