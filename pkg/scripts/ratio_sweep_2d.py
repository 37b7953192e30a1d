#!/usr/bin/env python3
"""Uniformity study of the localized gradient bound on the 2D facet problem.

Sweeps the relaxation parameter against the datum amplitude and tabulates the
ratio sup |grad u| on the half ball over its data-side scale; boundedness of
the ratio across the sweep is the testable shadow of the a priori estimate.
"""
import argparse
import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from facetsolve import diagnostics as diag
from facetsolve.energy import Problem
from facetsolve.grid import Grid, default_ball
from facetsolve.integrand import ModelParams
from facetsolve.solver import solve_regularized


@dataclass(frozen=True)
class RatioSweep:
    cells: int = 128
    p: float = 3.0
    # small beta keeps the facet well inside the inner ball at every amplitude
    beta: float = 0.01
    amplitudes: tuple = (1.0, 10.0, 100.0)
    eps_values: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    theta: float = 0.5
    out_dir: str = "out/ratio_2d"


def run(cfg: RatioSweep) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    params = ModelParams(p=cfg.p, beta=cfg.beta, q=math.inf)
    rows = []
    for amp in cfg.amplitudes:
        grid = Grid(dim=2, n_cells=cfg.cells)
        f = grid.constant_field(amp)
        prob = Problem(grid, f, grid.constant_field(0.0), params, max(cfg.eps_values))
        ball = default_ball(grid)
        warm = None
        for eps in sorted(cfg.eps_values, reverse=True):
            sol = solve_regularized(prob.with_eps(eps), init=warm)
            warm = sol.u
            rep = diag.lipschitz_ratio(sol, f, ball, cfg.theta, params.q)
            rows.append(
                {
                    "f_amplitude": amp,
                    "eps": eps,
                    "ratio": rep.values["ratio"],
                    "numerator": rep.values["numerator"],
                    "denominator": rep.values["denominator"],
                    "iterations": sol.iterations,
                    "converged": int(sol.converged),
                }
            )
            print(f"A={amp:<6g} eps={eps:<8.0e} ratio={rep.values['ratio']:.4f}")
    path = os.path.join(cfg.out_dir, "ratios.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    ratios = [r["ratio"] for r in rows]
    print(f"band max/min = {max(ratios) / min(ratios):.2f} over {len(rows)} runs; table in {path}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=RatioSweep.cells)
    ap.add_argument("--p", type=float, default=RatioSweep.p)
    ap.add_argument("--beta", type=float, default=RatioSweep.beta)
    ap.add_argument("--out", default=RatioSweep.out_dir)
    args = ap.parse_args()
    run(RatioSweep(cells=args.cells, p=args.p, beta=args.beta, out_dir=args.out))
