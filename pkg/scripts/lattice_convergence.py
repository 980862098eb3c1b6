#!/usr/bin/env python3
"""Lattice qubit energy against the continuum full mirror model as the grid is refined."""

import argparse
import math
import time

import numpy as np

from mirrorqed.dde import integrate
from mirrorqed.lattice import build_lattice, integrate_lattice
from mirrorqed.models import choose_step, full_mirror_system, qubit_energy
from mirrorqed.params import DimensionlessSpec, build_params


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gamma0-t", type=float, default=2 * math.pi, help="gamma_0 T at the node")
    parser.add_argument("--node", type=int, default=5, help="node order n (omega_0 T = 2 pi n)")
    parser.add_argument("--imp-ratio", type=float, default=1 / math.sqrt(2))
    parser.add_argument("--horizon-in-t", type=float, default=3.0)
    parser.add_argument("--ppw", default="32,64,128,256", help="comma-separated points per wavelength")
    args = parser.parse_args()

    p = build_params(DimensionlessSpec(1.0, None, args.imp_ratio, roundtrips=args.node, gamma0_t=args.gamma0_t))
    horizon = args.horizon_in_t * p.delay_t
    h, n = choose_step(p, "full_mirror", horizon, per_period=256)
    ref = integrate(full_mirror_system(p), n * h, h)

    print(f"r = {p.cap_ratio:.6f}, T = {p.delay_t:.6f}")
    print("ppw,nodes,linf,ratio,seconds")
    prev = None
    for ppw in (int(v) for v in args.ppw.split(",")):
        start = time.perf_counter()
        sys = build_lattice(p, ppw, horizon)
        tr = integrate_lattice(sys, p, horizon, stride=4).trajectory
        elapsed = time.perf_counter() - start
        y, _ = ref.sample_many(tr.times)
        e = qubit_energy(y, p, "full_mirror")
        err = float(np.max(np.abs(tr["e_norm"] - e / e[0])))
        ratio = prev / err if prev else float("nan")
        print(f"{ppw},{sys.n_nodes},{err:.6e},{ratio:.3f},{elapsed:.2f}")
        prev = err


if __name__ == "__main__":
    main()
