"""Trace the CDOSSP and Kalman covariances on a model and write a CSV.

    python3 scripts/estimator_gap.py models/coupled3.json --steps 60 --out gap.csv

Columns: t, subsystem, trace of the CDOSSP block, trace of the Kalman block,
smallest eigenvalue of their difference.
"""
from __future__ import annotations

import argparse

import numpy as np

from netobs.estimate import EstimationSetup, block, run_recursion, to_csv
from netobs.io import load_model
from netobs.linalg import min_eig_sym


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("model")
    ap.add_argument("--steps", type=int, default=60)
    ap.add_argument("--out", help="CSV path (stdout when omitted)")
    args = ap.parse_args(argv)

    sys, _ = load_model(args.model)
    setup = EstimationSetup.from_system(sys)
    Pc = run_recursion(setup, "cdossp", None, args.steps)
    Pk = run_recursion(setup, "kalman", None, args.steps)
    rows = []
    for t, (a, b) in enumerate(zip(Pc, Pk)):
        for i in range(1, setup.N + 1):
            ai, bi = block(setup, a, i, i), block(setup, b, i, i)
            rows.append([t, i, float(np.trace(ai)), float(np.trace(bi)), min_eig_sym(ai - bi)])
    text = to_csv(["t", "subsystem", "cdossp_trace", "kalman_trace", "min_eig_gap"], rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
