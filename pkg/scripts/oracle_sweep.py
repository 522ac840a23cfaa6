"""Compare the structured tests with the PBH oracle on a random corpus.

    python3 scripts/oracle_sweep.py --count 700 --seed 2024
"""
from __future__ import annotations

import argparse
import collections
import time

from netobs.core_model import dual_system
from netobs.random_systems import random_corpus
from netobs.verify import oracle_for, verify_controllability, verify_observability


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--count", type=int, default=700)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    tally = collections.Counter()
    for sys, kind in random_corpus(args.seed, args.count):
        for prop, fn in (("observable", verify_observability), ("controllable", verify_controllability)):
            v = fn(sys)
            tally[prop, v.result] += 1
            if v.result != "indeterminate" and v.result != oracle_for(prop, sys).result:
                tally[prop, "disagree"] += 1
                print(f"disagreement: {prop} defect={kind} structured={v.result}")
        if verify_controllability(sys).result != verify_observability(dual_system(sys)).result:
            tally["dual", "mismatch"] += 1
    for key in sorted(tally):
        print(f"{key[0]:>13} {key[1]:<14} {tally[key]}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")
    return 1 if any(k[1] in ("disagree", "mismatch") for k in tally) else 0


if __name__ == "__main__":
    raise SystemExit(main())
