"""F-connection defects for the rotation quotient under mesh refinement."""

import argparse

from ncorbifold.models import rotation_quotient
from ncorbifold.morita import check_m3


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--refinements", type=int, nargs="+", default=[16, 32, 64, 128])
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--rank", type=int, default=1, choices=(1, 2))
    args = p.parse_args()

    rep = check_m3([rotation_quotient(n, args.order, rank=args.rank) for n in args.refinements])
    print(f"{'n':>5} {'max_defect':>12} {'||D||':>12}")
    for r in rep["rows"]:
        print(f"{r['n']:>5} {r['max_defect']:>12.6f} {r['dirac_norm']:>12.4f}")
    print("ratios:", " ".join(f"{x:.4f}" for x in rep["ratios"]), "| passed:", rep["passed"])


if __name__ == "__main__":
    main()
