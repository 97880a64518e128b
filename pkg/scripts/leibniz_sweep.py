"""Leibniz residual of the induced Dirac operator through chi, against the mesh size."""

import argparse

import numpy as np

from ncorbifold.induction import verify_prop5
from ncorbifold.models import rotation_quotient


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--refinements", type=int, nargs="+", default=[16, 32, 64, 128])
    p.add_argument("--rank", type=int, default=1, choices=(1, 2))
    args = p.parse_args()

    prev = None
    print(f"{'n':>5} {'h':>10} {'residual':>12} {'ratio':>8}")
    for n in args.refinements:
        b, t1, _ = rotation_quotient(n, 2, rank=args.rank)
        x = np.arange(n)
        psi = np.repeat(np.exp(2j * np.pi * x / n), args.rank)
        r = verify_prop5(b, t1, np.cos(2 * np.pi * x / n), psi)
        ratio = "" if prev is None else f"{r['residual'] / prev:.4f}"
        print(f"{n:>5} {r['h']:>10.5f} {r['residual']:>12.6e} {ratio:>8}")
        prev = r["residual"]


if __name__ == "__main__":
    main()
