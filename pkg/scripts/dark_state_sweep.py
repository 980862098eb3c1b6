#!/usr/bin/env python3
"""Dark-state energy over gamma_0 T at a node, for two line impedances."""

import argparse
import math
import sys

import numpy as np

from mirrorqed.scenarios import run_sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=9, help="log-spaced gamma_0 T values")
    parser.add_argument("--min", type=float, default=0.02 * math.pi)
    parser.add_argument("--max", type=float, default=2 * math.pi)
    parser.add_argument("--imp-ratios", default="0.7071067811865476,10", help="comma-separated Z_0/Z_J")
    parser.add_argument("--horizon-in-t", type=float, default=30.0)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    values = list(np.geomspace(args.min, args.max, args.points))
    writer = sys.stdout
    for z in (float(v) for v in args.imp_ratios.split(",")):
        doc = {"model": "full_mirror",
               "spec": {"imp_ratio": z, "roundtrips": 5, "gamma0_t": values[0]},
               "integrator": {"horizon_in_T": args.horizon_in_t}}
        table = run_sweep(doc, "gamma0_t", values, threads=args.threads)
        writer.write(f"# imp_ratio={z!r}\n")
        table.write_csv(writer)
        worst = float(np.nanmax(table["rel_error"]))
        writer.write(f"# worst relative error against 1/(1+gamma0T/2)^2: {worst:.3e}\n")


if __name__ == "__main__":
    main()
