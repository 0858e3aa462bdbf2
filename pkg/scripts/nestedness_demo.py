"""Identified regions and ASF/SWITCH bounds for the ordered model under shape restrictions.

    python scripts/nestedness_demo.py --n 800
"""
import argparse

import numpy as np

from setcf import functionals as fn
from setcf.cells import estimate_cells
from setcf.dgp import DgpConfig, simulate
from setcf.grid import GridSpec
from setcf.identify import bounds_table, default_slack, identified_region
from setcf.models import OrderedChoice
from setcf.theta import ThetaPoint

PI = {((0,), ()): 0.3, ((1,), ()): 0.7}
FUNCTIONALS = [fn.Functional("ASF", d=0), fn.Functional("ASF", d=1), fn.Functional("SWITCH")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=800)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--mu1", type=float, default=0.2)
    ap.add_argument("--rho", type=float, default=0.1)
    args = ap.parse_args()

    model = OrderedChoice(n_x=0)
    truth = ThetaPoint((args.mu1,), (args.rho,), PI, cutoffs=(-0.5, 0.8))
    data = simulate(DgpConfig("ordered", truth, args.n, args.seed, model_options={"n_x": 0}))
    stats = estimate_cells(data.observed, data.schema, support=model.support)
    grid = GridSpec(mu=(tuple(np.linspace(-1.5, 1.5, 13)),), f=(tuple(np.linspace(-0.9, 0.9, 13)),),
                    cutoffs=((-0.5, 0.8),), pi=((((0,), ()), (0.25, 0.3, 0.35)), (((1,), ()), (0.65, 0.7, 0.75))))
    slack = default_slack(stats)
    print(f"n = {args.n}, slack = {slack:.4f}, grid points = {len(grid.points()[0])}\n")
    for constraints in ((), ("mts",), ("mtr",), ("mts", "mtr")):
        region = identified_region(grid, stats, model, slack=slack, constraints=constraints)
        label = "+".join(constraints) or "baseline"
        print(f"{label}: {int(region.accepted.sum())} accepted")
        if not region.empty:
            print(bounds_table(region, FUNCTIONALS, model).to_string(index=False), "\n")


if __name__ == "__main__":
    main()
