"""Involution and fixed-point checks for the SO/Sp structure on small self-dual cases.

For each case reports how often sigma squared returns the input, how often a
random solution is already sigma-fixed, and whether the fixed-point search
finds a point, with its stabilizer and tangent dimension.
"""
import argparse
import json

import numpy as np

from quiver_adhm.adhm import SolverError, moduli_equal, solve, stabilizer_dimension, tangent_dimension
from quiver_adhm.diagram import build_affine_diagram
from quiver_adhm.so_sp import ParityObstruction, build_w_forms, duality_involution_sigma, is_fixed_point, solve_fixed
from quiver_adhm.weyl import Parameter, random_on_level

CASES = [
    ("A", 1, (1, 1), (2, 0), "SO"),
    ("A", 1, (1, 1), (2, 0), "Sp"),
    ("A", 1, (0, 1), (0, 2), "SO"),
    ("A", 1, (2, 2), (2, 0), "SO"),
    ("A", 2, (0, 1, 1), (1, 1, 1), "SO"),
    ("A", 2, (0, 1, 1), (2, 1, 1), "Sp"),
    ("D", 4, (0, 2, 4, 2, 2), (0, 0, 2, 0, 0), "SO"),
]


def sweep(kind, rank, v, w, cls, seeds, zero):
    d = build_affine_diagram(kind, rank)
    forms = build_w_forms(w, d, cls=cls)
    rng = np.random.default_rng(rank)
    z = Parameter.zero(d.n_vertices) if zero else random_on_level(d, rng, real=False)
    involutive = already_fixed = 0
    for seed in range(seeds):
        x = solve(d, v, w, z, seed)
        y = duality_involution_sigma(x, z, forms)
        involutive += moduli_equal(duality_involution_sigma(y, z, forms), x, 1e-5)
        already_fixed += is_fixed_point(x, z, forms)
    row = {"case": f"{kind}{rank} v={v} w={w} {cls}", "zeta": "0" if zero else "generic",
           "sigma_squared_id": f"{involutive}/{seeds}", "random_fixed": f"{already_fixed}/{seeds}"}
    try:
        f = solve_fixed(v, w, z, d, cls, 0)
        row.update(found=True, fixed=bool(is_fixed_point(f, z, forms)), stabilizer=stabilizer_dimension(f, 1e-6),
                   tangent=tangent_dimension(f, z))
    except SolverError as exc:
        row.update(found=False, best=exc.best_residual)
    except ParityObstruction as exc:
        row.update(found=False, obstruction=str(exc))
    return row


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    for case in CASES:
        for zero in (True, False):
            print(json.dumps(sweep(*case, args.seeds, zero)))


if __name__ == "__main__":
    main()
