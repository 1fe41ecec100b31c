"""Error table for the linear problem against its series solution.

The marching scheme samples the smooth factor at the left cell endpoint, so
the expected order is alpha-limited near the origin; the observed order
column should settle near 1 for alpha = 1/2 on this problem.
"""

import argparse

from svoc import convergence_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--ns", default="256,512,1024,2048,4096")
    args = ap.parse_args()

    ns = [int(x) for x in args.ns.split(",")]
    report = convergence_study(args.lam, args.alpha, ns)
    print(f"lambda = {report.lam:g}, alpha = {report.alpha:g}")
    print(f"{'n':>6s}  {'sup rel error':>14s}  {'order':>6s}")
    for row in report.rows:
        print(f"{row.n:6d}  {row.error:14.6e}  {row.order:6.3f}")


if __name__ == "__main__":
    main()
