"""Solver success rates and tangent dimensions over small (v, w) on A1, A2, D4.

Prints one CSV row per case: kind, rank, v, w, success rate, regular fraction,
tangent dimensions seen and the expected dimension.
"""
import argparse
import csv
import sys
import time

import numpy as np

from quiver_adhm.adhm import SolverError, SolverOptions, expected_dimension, is_regular, solve, tangent_dimension
from quiver_adhm.diagram import build_affine_diagram
from quiver_adhm.weyl import random_on_level

CASES = [
    ("A", 1, (1, 1), (1, 0)),
    ("A", 1, (1, 1), (2, 0)),
    ("A", 1, (1, 1), (1, 1)),
    ("A", 1, (2, 2), (2, 0)),
    ("A", 2, (1, 1, 1), (1, 0, 0)),
    ("A", 2, (1, 1, 1), (2, 0, 0)),
    ("A", 2, (1, 1, 0), (1, 1, 0)),
    ("D", 4, (1, 1, 2, 1, 1), (1, 0, 0, 0, 0)),
    ("D", 4, (1, 1, 2, 1, 1), (2, 0, 0, 0, 0)),
    ("D", 4, (0, 0, 1, 0, 0), (0, 0, 2, 0, 0)),
]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--real", action="store_true", help="also randomize the real part of zeta")
    p.add_argument("--max-iters", type=int, default=500)
    args = p.parse_args()

    out = csv.writer(sys.stdout)
    out.writerow(["kind", "rank", "v", "w", "success", "regular", "tangent_dims", "expected", "seconds"])
    for kind, rank, v, w in CASES:
        d = build_affine_diagram(kind, rank)
        rng = np.random.default_rng(rank)
        ok, reg, tangents = 0, 0, set()
        t0 = time.perf_counter()
        for seed in range(args.seeds):
            z = random_on_level(d, rng, real=args.real)
            try:
                x = solve(d, v, w, z, seed, SolverOptions(max_iters=args.max_iters))
            except SolverError:
                continue
            ok += 1
            if is_regular(x, z):
                reg += 1
                tangents.add(tangent_dimension(x, z))
        out.writerow([kind, rank, "".join(map(str, v)), "".join(map(str, w)), f"{ok / args.seeds:.2f}",
                      f"{reg / max(ok, 1):.2f}", " ".join(map(str, sorted(tangents))),
                      expected_dimension(v, w, d), f"{time.perf_counter() - t0:.2f}"])


if __name__ == "__main__":
    main()
