#!/usr/bin/env python3
"""Drive the standard throughput-vs-load experiment grid to CSV files.

Three scenarios, one CSV each, written through the ``ponsched simulate``
entry point so the output format and determinism guarantees are exactly
those of the CLI:

* ``sweep_31.25M.csv``  -- 64 ONUs, groups of 8, 2 receivers
* ``sweep_62.5M.csv``   -- 64 ONUs, groups of 8, 4 receivers
* ``sweep_125M.csv``    -- 64 ONUs, groups of 8, 8 receivers

Each scenario sweeps load x scheduler x architecture x seed.  At full scale
(20 s simulated per point) a scenario takes tens of minutes on one core;
``--quick`` trims the grid for a smoke run.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from ponsched.cli import main as cli_main

SCENARIOS = (
    ("31.25M", "31.25e6", 2),
    ("62.5M", "62.5e6", 4),
    ("125M", "125e6", 8),
)


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results", help="directory for the CSVs")
    ap.add_argument("--duration", type=float, default=20.0,
                    help="simulated seconds per point (default 20)")
    ap.add_argument("--loads", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    ap.add_argument("--seeds", default="1,2,3")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="0.5 s per point, one seed, four loads")
    args = ap.parse_args(argv)

    loads, seeds, dur = args.loads, args.seeds, args.duration
    if args.quick:
        loads, seeds, dur = "0.25,0.5,0.75,1.0", "1", 0.5

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", suffix=".json") as fh:
        json.dump(
            {"duration_ns": int(dur * 1e9), "warmup_ns": int(dur * 1e8)}, fh
        )
        fh.flush()
        for tag, rate, receivers in SCENARIOS:
            out = out_dir / f"sweep_{tag}.csv"
            code = cli_main([
                "simulate", "--config", fh.name,
                "--onus", "64", "--group-size", "8",
                "--receivers", str(receivers), "--onu-rate", rate,
                "--load", loads, "--seed", seeds,
                "--scheduler", "cevf,eftvf", "--arch", "flexible,splitter",
                "--jobs", str(args.jobs),
                "--out", str(out),
            ])
            if code != 0:
                return code
            print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(run())
