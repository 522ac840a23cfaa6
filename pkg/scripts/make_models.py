"""Write the bundled example models into models/.

Run from the repository root:  python3 scripts/make_models.py
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from netobs.core_model import ConnectionMatrix, Subsystem, build_system
from netobs.io import save_model


def coupled3():
    """Three subsystems in a ring (2 + 2 + 1 states), stable, observable."""
    s1 = Subsystem.make(
        1, [[0.6, 0.2], [-0.1, 0.5]],
        A_TS=[[0.3], [0.1]], A_ST=[[0.4, -0.2]], A_SS=[[0.1]],
        B_T=[[0.5, 0.0], [0.0, 0.4]], C_T=[[1.0, 0.0]], C_S=[[0.2]], D_w=[[0.5]],
    )
    s2 = Subsystem.make(
        2, [[0.4, -0.3], [0.2, 0.7]],
        A_TS=[[0.2], [0.4]], A_ST=[[0.3, 0.5]], A_SS=[[-0.1]],
        B_T=[[0.3], [0.6]], C_T=[[0.0, 1.0]], C_S=[[0.1]], D_w=[[0.4]],
    )
    s3 = Subsystem.make(
        3, [[0.8]],
        A_TS=[[0.3]], A_ST=[[0.6]], A_SS=[[0.0]],
        B_T=[[0.7]], C_T=[[1.0]], C_S=[[0.0]], D_w=[[0.6]],
    )
    return build_system([s1, s2, s3], ConnectionMatrix.selection([1, 2, 0], 3))


def decoupled2():
    """Two independent stable subsystems with no interconnection."""
    s1 = Subsystem.make(1, [[0.7, 0.1], [0.0, 0.5]], B_T=[[1.0], [0.5]], C_T=[[1.0, 0.0]], D_w=[[1.0]])
    s2 = Subsystem.make(2, [[0.3]], B_T=[[0.8]], C_T=[[2.0]], D_w=[[0.5]])
    return build_system([s1, s2], np.zeros((0, 0)))


def scalar():
    """a = 0.9, c = 1, unit process and measurement noise."""
    return build_system([Subsystem.make(1, [[0.9]], B_T=[[1.0]], C_T=[[1.0]], D_w=[[1.0]])], np.zeros((0, 0)))


def hidden_mode(lam: float = 0.5):
    """Subsystem 2 carries a mode at ``lam`` that neither its measurement nor its output sees."""
    s1 = Subsystem.make(
        1, [[0.5]], A_TS=[[0.4]], A_ST=[[1.0]], B_T=[[1.0]], C_T=[[1.0]], C_S=[[0.3]], D_w=[[1.0]],
    )
    s2 = Subsystem.make(
        2, [[lam, 0.2], [0.0, 0.3]],
        A_TS=[[0.0], [0.5]], A_ST=[[0.0, 1.0]], B_T=[[1.0], [1.0]], C_T=[[0.0, 1.0]], C_S=[[0.2]], D_w=[[1.0]],
    )
    return build_system([s1, s2], ConnectionMatrix.selection([1, 0], 2))


def loop_cancel():
    """Scalar subsystem whose self loop cancels the zero of its measurement map at -0.1."""
    a, b, c, d, e = 0.2, 0.3, 1.0, 1.0, 0.5
    f = 1.0 + e * d / c  # makes the loop gain equal one at the zero a - b c / d
    s1 = Subsystem.make(1, [[a]], A_TS=[[b]], A_ST=[[e]], A_SS=[[f]], B_T=[[1.0]], C_T=[[c]], C_S=[[d]], D_w=[[1.0]])
    return build_system([s1], ConnectionMatrix.selection([0], 1))


def invalid_phi():
    """Ring with a doubled row, rejected in strict mode."""
    base = coupled3()
    ents = list(base.phi.entries) + [(0, 2, 1.0)]
    return build_system(base.subsystems, ConnectionMatrix(3, 3, tuple(ents)))


MODELS = {
    "coupled3": coupled3,
    "decoupled2": decoupled2,
    "scalar": scalar,
    "hidden_mode": hidden_mode,
    "unstable_hidden": lambda: hidden_mode(1.2),
    "loop_cancel": loop_cancel,
    "invalid_phi": invalid_phi,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "models"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, fn in MODELS.items():
        save_model(fn(), out / f"{name}.json")
        print(f"wrote {out / (name + '.json')}")


if __name__ == "__main__":
    main()
