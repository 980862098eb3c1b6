#!/usr/bin/env python3
"""Write the CSV data for every figure scenario and print a short summary."""

import argparse
import math
import time
from pathlib import Path

import numpy as np

from mirrorqed.scenarios import FIGURES, write_figure
from mirrorqed.trajectory import read_csv


def summarize(path: Path) -> str:
    tr = read_csv(path)
    if "e_norm" in tr:
        return f"{path.name}: {len(tr)} rows, final e_norm {tr['e_norm'][-1]:.6f}"
    if "v_mirror_sq" in tr:
        k = int(np.argmin(np.abs(tr.times - 1.0)))
        return f"{path.name}: {len(tr)} rows, v_mirror^2 at omega_0 = {tr['v_mirror_sq'][k]:.3e}"
    return f"{path.name}: {len(tr)} rows"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", help="directory for the CSV files")
    parser.add_argument("names", nargs="*", default=list(FIGURES), help=f"subset of {', '.join(FIGURES)}")
    args = parser.parse_args()

    total = time.perf_counter()
    for name in args.names:
        start = time.perf_counter()
        paths = write_figure(name, args.outdir)
        print(f"{name} ({time.perf_counter() - start:.2f}s)")
        for path in paths:
            print("  " + summarize(path))
    print(f"total {time.perf_counter() - total:.1f}s")
    if "fig3b" in args.names:
        for g in (0.02, 0.2, 2.0):
            print(f"  closed form dark state at gamma0 T = {g} pi: {1 / (1 + g * math.pi / 2) ** 2:.6f}")


if __name__ == "__main__":
    main()
