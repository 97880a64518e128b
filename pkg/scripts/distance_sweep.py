"""Invariant spectral distance vs orbifold geodesic distance on refined reflection circles."""

import argparse

from ncorbifold.distance import theorem3_harness, trend_violations
from ncorbifold.io import write_csv
from ncorbifold.models import reflection_triple


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--refinements", type=int, nargs="+", default=[16, 32, 64, 128, 256])
    p.add_argument("--csv", default=None, help="optional output CSV")
    args = p.parse_args()

    rows = theorem3_harness(reflection_triple, args.refinements, lambda n: [(0, n // 2), (1, 2)])
    print(f"{'n':>5} {'x':>4} {'xp':>4} {'lower':>14} {'upper':>14} {'geodesic':>14} {'rel_error':>10}")
    for r in rows:
        print(f"{r['n']:>5} {r['x']:>4} {r['xp']:>4} {r['spectral_lower']:>14.10f} {r['spectral_upper']:>14.10f} "
              f"{r['geodesic']:>14.10f} {r['rel_error']:>10.2e}")
    for j in range(2):
        print(f"pair {j}: trend violations {trend_violations([r['rel_error'] for r in rows[j::2]])}")
    if args.csv:
        write_csv(args.csv, ["n", "x", "xp", "spectral_lower", "spectral_upper", "geodesic", "rel_error"],
                  [(r["n"], r["x"], r["xp"], r["spectral_lower"], r["spectral_upper"], r["geodesic"],
                    r["rel_error"]) for r in rows])


if __name__ == "__main__":
    main()
