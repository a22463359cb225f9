"""Penrose margin of the two-stream profile as the stream speed u varies.

Writes penrose_scan.csv (u, pv at omega = 0, margin, verdict) and the
bisection-located critical speed for the chosen total mass.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from geovlasov.linear import EquilibriumProfile, critical_stream_speed, penrose_check
from geovlasov.runner import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mass", type=float, default=2.0)
    ap.add_argument("--manifold", default="sphere")
    ap.add_argument("--u-max", type=float, default=3.0)
    ap.add_argument("--n", type=int, default=61)
    ap.add_argument("--out", type=Path, default=Path("out/penrose"))
    args = ap.parse_args()

    rows = []
    for u in np.linspace(0.0, args.u_max, args.n):
        rep = penrose_check(EquilibriumProfile.two_stream(u, args.mass), args.manifold)
        pv0 = min(rep.critical_points, key=lambda c: abs(c.omega)).pv
        rows.append((u, pv0, rep.margin, rep.verdict))
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "penrose_scan.csv", ["u", "pv_at_0", "margin", "verdict"], rows)
    summary = {"mass": args.mass, "manifold": args.manifold}
    try:
        summary["u_critical"] = critical_stream_speed(args.mass, hi=args.u_max, manifold=args.manifold)
    except ValueError as exc:
        summary["u_critical"] = None
        summary["note"] = str(exc)
    (args.out / "critical.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
