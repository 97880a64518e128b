"""M1-M5 report for the rotation quotient, its dual, and a composite, as JSON."""

import argparse
import json

import numpy as np

from ncorbifold.bitorsor import compose_bitorsors, dual_bitorsor
from ncorbifold.io import jsonable
from ncorbifold.models import rotation_quotient
from ncorbifold.morita import full_report


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--convention", choices=("counting", "normalized"), default="counting")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    b, t1, t2 = rotation_quotient(args.n, args.order, haar=args.convention)
    d = dual_bitorsor(b)
    reports = {"quotient": full_report(b, t1, t2, rng=rng), "dual": full_report(d, t2, t1, rng=rng),
               "composite": full_report(compose_bitorsors(d, b), t1, t1, rng=rng)}
    for name, rep in reports.items():
        flags = " ".join(f"{k}={'ok' if v['passed'] else 'FAIL'}" for k, v in rep.to_dict().items()
                         if isinstance(v, dict) and "passed" in v)
        print(f"{name:>10}: {flags}")
    print(json.dumps(jsonable(reports["quotient"].to_dict()["M5"]), indent=2))


if __name__ == "__main__":
    main()
