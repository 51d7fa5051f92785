"""Sweep λ for S̃ = S − 2λF𝔠 and record where the Liouville field enters the holonomy span.

    python3 scripts/lambda_sweep_obstruction.py --model hyperbolic --dim 2 --points 20 --csv sweep.csv
"""

import argparse
import csv

import numpy as np

from spraygeom import holonomy as hol
from spraygeom import models
from spraygeom import projective as pj
from spraygeom import spray as spr


def sweep(model, p, lambdas):
    sp = spr.geodesic_spray(model)
    eig = pj.eigen_analysis(model, p)
    rows = []
    for lam in lambdas:
        ctx = pj.deform(sp, pj.ProjectiveFactor.lambda_F(lam, model))
        rep = hol.liouville_test(hol.holonomy_for(model, ctx.deformed, p), p)
        margins = [pj.admissible_lambda(eig.kappas[k], eig.F[k], [lam])[0].margin for k in range(len(p))]
        rows.append({
            "lambda": lam,
            "fraction_obstructed": float(np.mean(rep.contains_liouville)),
            "max_residual": float(np.max(rep.residual)),
            "min_margin": float(np.min(margins)),
            "min_rank": int(np.min(rep.rank)),
            "max_rank": int(np.max(rep.rank)),
        })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--model", default="hyperbolic")
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--points", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lambdas", type=float, nargs=3, default=(-2.0, 2.0, 17), metavar=("START", "STOP", "NUM"))
    ap.add_argument("--csv")
    args = ap.parse_args()

    model = models.get_model(args.model, args.dim)
    p = model.sample(args.points, args.seed)
    start, stop, num = args.lambdas
    rows = sweep(model, p, np.linspace(start, stop, int(num)))

    print(f"{'lambda':>8} {'obstructed':>10} {'max resid':>10} {'min margin':>10}  rank")
    for r in rows:
        print(f"{r['lambda']:8.3f} {r['fraction_obstructed']:10.2f} {r['max_residual']:10.2e} "
              f"{r['min_margin']:10.2e}  {r['min_rank']}..{r['max_rank']}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
