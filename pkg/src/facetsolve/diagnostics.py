"""Truncation fields, explicit constants, and localized-estimate monitors on solver output.

All quantities feeding the structural gradient bounds are computed here:
componentwise truncations of grad(u) at level k, their flat-bottomed sum of
squares w_k and its parabolic companion what_k, the scaled datum f_k, the
comparison constant K and its dimensional version C0(n), the ellipticity pair
(lambda, Lambda), the localized gradient-bound ratio, and the two iteration
monitors (growing-exponent norms on shrinking balls; levelset measures under
truncation). Each monitor checks every inequality that is plain arithmetic
and reports empirical ratios where the theory only asserts a constant exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import BallRegion, Grid, ScalarField, cell_average, cell_lp_norm, gradient, lp_norm
from .integrand import ModelParams
from .report import Report
from .solver import Solution

__all__ = [
    "TruncationState",
    "MoserSchedule",
    "DeGiorgiLevel",
    "compute_k",
    "truncation_state",
    "wulff_constant",
    "c0_constant",
    "lambdas",
    "wulff_check",
    "fk_norm_check",
    "lipschitz_ratio",
    "moser_monitor",
    "de_giorgi_monitor",
]

GAMMA_CAP = 1e4
N_MAX_CAP = 12


@dataclass(frozen=True)
class TruncationState:
    """Cellwise truncation data at level k >= 1 derived from one solution."""

    grid: Grid
    p: float
    k: float
    u_ik: np.ndarray  # (cells..., dim) componentwise truncated gradient
    w_k: np.ndarray  # k^2 + sum_i u_ik^2
    what_k: np.ndarray  # k^2 + |grad u|^2
    f_k: np.ndarray  # f^2 / w_k^(p-1), cell-sampled

    def __post_init__(self):
        if np.any(self.w_k < self.k**2 - 1e-12) or np.any(self.f_k < 0.0):
            raise ValueError("truncation fields violate their sign bounds")


def compute_k(f: ScalarField, p: float, q: float, region: BallRegion) -> float:
    """Truncation level from the data norm: |f|_{L^q(B_R)}^{1/(p-1)} + 1."""
    if not q > f.grid.dim:
        raise ValueError(f"data exponent must exceed the dimension, got q={q}")
    return lp_norm(f, q, region) ** (1.0 / (p - 1.0)) + 1.0


def truncation_state(sol: Solution, f: ScalarField, k: float) -> TruncationState:
    """Componentwise soft truncation of grad(u) at level k and derived fields."""
    if k < 1.0:
        raise ValueError(f"truncation level must satisfy k >= 1, got {k}")
    grid = sol.problem.grid
    p = sol.problem.params.p
    g = gradient(sol.u).values
    u_ik = -np.maximum(-(g + k), 0.0) + np.maximum(g - k, 0.0)
    w_k = k**2 + np.sum(u_ik**2, axis=-1)
    what_k = k**2 + np.sum(g**2, axis=-1)
    f_cells = cell_average(f)
    f_k = f_cells**2 / w_k ** (p - 1.0)
    return TruncationState(grid=grid, p=p, k=k, u_ik=u_ik, w_k=w_k, what_k=what_k, f_k=f_k)


def wulff_constant(ratio: float) -> float:
    """Smallest K with d1^2 + t^2 <= K * (d1^2 + (|t| - d2)_+^2) for all t, ratio = d2/d1.

    Closed form K(r) = 1 + (r^2 / 2) (1 + sqrt(1 + 4 r^-2)); K > 1 and K -> 1
    as r -> 0.
    """
    if not ratio > 0.0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    r2 = ratio**2
    return 1.0 + 0.5 * r2 * (1.0 + math.sqrt(1.0 + 4.0 / r2))


def c0_constant(n: int) -> float:
    """Dimensional comparison constant C0(n) = K(sqrt(n))."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return wulff_constant(math.sqrt(n))


def lambdas(params: ModelParams, n: int) -> tuple[float, float]:
    """Ellipticity pair along the truncation fields.

    lambda = C1 min(1, C0^(p/2-1)) min(1, 2^(1-p/2)),
    Lambda = C2 max(1, C0^(p/2-1)) max(1, 2^(1-p/2)).
    """
    c0 = c0_constant(n)
    e1 = c0 ** (params.p / 2.0 - 1.0)
    e2 = 2.0 ** (1.0 - params.p / 2.0)
    lam = params.C1 * min(1.0, e1) * min(1.0, e2)
    big = params.C2 * max(1.0, e1) * max(1.0, e2)
    return lam, big


def wulff_check(state: TruncationState, n: int | None = None) -> Report:
    """Cellwise two-sided comparison w_k <= what_k <= C0(n) w_k (pure arithmetic)."""
    n = state.grid.dim if n is None else n
    c0 = c0_constant(n)
    lower_gap = state.what_k - state.w_k
    upper_gap = c0 * state.w_k - state.what_k
    violations = int(np.sum(lower_gap < -1e-12) + np.sum(upper_gap < -1e-12))
    return Report(
        name="wulff_comparison",
        passed=violations == 0,
        values={
            "c0": c0,
            "cells": float(state.w_k.size),
            "violations": float(violations),
            "min_lower_gap": float(lower_gap.min()),
            "min_upper_gap": float(upper_gap.min()),
        },
    )


def fk_norm_check(state: TruncationState, q: float, region: BallRegion) -> Report:
    """|f_k|_{L^{q/2}(B_R)} <= 1 whenever k comes from compute_k."""
    norm = cell_lp_norm(state.grid, state.f_k, q / 2.0 if not math.isinf(q) else math.inf, region)
    return Report(
        name="fk_norm",
        passed=bool(norm <= 1.0 + 1e-9),
        values={"norm": norm, "k": state.k, "q": q},
    )


def lipschitz_ratio(
    sol: Solution, f: ScalarField, region: BallRegion, theta: float, q: float
) -> Report:
    """Localized gradient bound: sup on the shrunk ball over its data-side scale.

    numerator = sup_{B_{theta R}} |grad u|,
    denominator = 1 + |f|_{L^q(B_R)}^{1/(p-1)} + R^{-n/p} |grad u|_{L^p(B_R)};
    the ratio is the empirical constant of the a priori estimate. Invariant
    under adding constants to u and, per the estimate, bounded uniformly in
    eps and in the datum scaling.
    """
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    grid = sol.problem.grid
    region.check_inside(grid)
    p = sol.problem.params.p
    n = grid.dim
    grad_u = gradient(sol.u)
    inner = BallRegion(region.center, theta * region.radius)
    numerator = lp_norm(grad_u, math.inf, inner)
    denom = (
        1.0
        + lp_norm(f, q, region) ** (1.0 / (p - 1.0))
        + region.radius ** (-n / p) * lp_norm(grad_u, p, region)
    )
    return Report(
        name="lipschitz_ratio",
        passed=bool(np.isfinite(numerator / denom)),
        values={
            "numerator": numerator,
            "denominator": denom,
            "ratio": numerator / denom,
            "eps": sol.eps_final,
            "theta": theta,
            "radius": region.radius,
        },
    )


@dataclass(frozen=True)
class MoserSchedule:
    """Exponent/radius ladder: alpha_N = p (chi^N - 1), gamma_N = (p/2) chi^N,
    r_N = (theta + 2^-N (1 - theta)) R, truncated so gamma stays below the
    overflow cap."""

    chi: float
    p: float
    theta: float = 0.5
    radius: float = 0.4
    n_max: int = 8

    def __post_init__(self):
        if not self.chi > 1.0:
            raise ValueError(f"chi must exceed 1, got {self.chi}")
        if not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not (0 < self.n_max <= N_MAX_CAP):
            raise ValueError(f"n_max must lie in 1..{N_MAX_CAP}, got {self.n_max}")

    def exponents(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        N = np.arange(self.n_max + 1)
        gamma = (self.p / 2.0) * self.chi ** N.astype(float)
        keep = gamma <= GAMMA_CAP
        N, gamma = N[keep], gamma[keep]
        alpha = self.p * (self.chi ** N.astype(float) - 1.0)
        r = (self.theta + 2.0 ** (-N.astype(float)) * (1.0 - self.theta)) * self.radius
        return alpha, gamma, r


def moser_monitor(state: TruncationState, schedule: MoserSchedule, region: BallRegion) -> Report:
    """Norms |w_k|_{L^{gamma_N}(B_{r_N})} along the ladder.

    On shrinking balls of measure below one these are dominated by the sup of
    w_k on the base ball; the report carries each norm, the per-step
    amplification factors, and the domination check.
    """
    alpha, gamma, radii = schedule.exponents()
    sup_wk = cell_lp_norm(state.grid, state.w_k, math.inf, BallRegion(region.center, radii[0]))
    values: dict[str, float] = {"sup_w_k": sup_wk, "chi": schedule.chi, "steps": float(len(gamma))}
    norms = []
    for i, (gam, rad) in enumerate(zip(gamma, radii)):
        ball = BallRegion(region.center, rad)
        norm = cell_lp_norm(state.grid, state.w_k, gam, ball)
        norms.append(norm)
        values[f"gamma_{i}"] = float(gam)
        values[f"alpha_{i}"] = float(alpha[i])
        values[f"r_{i}"] = float(rad)
        values[f"norm_{i}"] = norm
    for i in range(1, len(norms)):
        values[f"amplification_{i}"] = norms[i] / norms[i - 1] if norms[i - 1] > 0 else math.inf
    dominated = all(nm <= sup_wk + 1e-9 for nm in norms)
    values["max_norm"] = max(norms)
    return Report(name="moser_monitor", passed=dominated, values=values)


@dataclass(frozen=True)
class DeGiorgiLevel:
    """One truncation level: superlevel measure and truncated mass at radius r."""

    level: float
    radius: float
    measure: float
    v_sq_integral: float


def de_giorgi_monitor(
    state: TruncationState,
    levels: list[float],
    radii: list[float],
    center: tuple[float, ...] | None = None,
) -> Report:
    """Levelset table of V_l = (w_k^{p/2} - l)_+ over A(l, r) = {w_k^{p/2} > l}.

    Verifies that measures shrink in l and grow in r and the Chebyshev bound
    measure(A(L, r)) <= (L - l)^-2 * int_{A(l,r)} V_l^2 for every pair L > l,
    which is plain arithmetic on the table.
    """
    levels = sorted(float(l) for l in levels)
    radii = sorted(float(r) for r in radii)
    if any(l < 0.0 for l in levels):
        raise ValueError("levels must be nonnegative")
    grid = state.grid
    if center is None:
        center = tuple(grid.origin[a] + 0.5 * grid.side for a in range(grid.dim))
    vol = grid.cell_volume
    wk_pow = state.w_k ** (state.p / 2.0)

    table: list[DeGiorgiLevel] = []
    meas = np.empty((len(levels), len(radii)))
    v2 = np.empty_like(meas)
    for j, r in enumerate(radii):
        mask_r = BallRegion(center, r).cell_mask(grid)
        for i, l in enumerate(levels):
            above = mask_r & (wk_pow > l)
            meas[i, j] = vol * float(np.sum(above))
            v_l = np.maximum(wk_pow - l, 0.0)
            v2[i, j] = vol * float(np.sum((v_l**2)[above]))
            table.append(DeGiorgiLevel(l, float(r), meas[i, j], v2[i, j]))

    mono_l = bool(np.all(np.diff(meas, axis=0) <= 1e-15))
    mono_r = bool(np.all(np.diff(meas, axis=1) >= -1e-15)) if len(radii) > 1 else True
    cheb_ok = True
    worst = math.inf
    for j in range(len(radii)):
        for i, l in enumerate(levels):
            for ii in range(i + 1, len(levels)):
                L = levels[ii]
                if L <= l:
                    continue
                bound = v2[i, j] / (L - l) ** 2
                margin = bound - meas[ii, j]
                worst = min(worst, margin)
                if margin < -1e-12:
                    cheb_ok = False
    values: dict[str, float] = {
        "levels": float(len(levels)),
        "radii": float(len(radii)),
        "monotone_in_level": float(mono_l),
        "monotone_in_radius": float(mono_r),
        "chebyshev_worst_margin": worst if math.isfinite(worst) else 0.0,
    }
    for entry in table:
        tag = f"l{entry.level:g}_r{entry.radius:g}"
        values[f"measure_{tag}"] = entry.measure
        values[f"v2_{tag}"] = entry.v_sq_integral
    return Report(
        name="de_giorgi_monitor",
        passed=bool(mono_l and mono_r and cheb_ok),
        values=values,
    )
