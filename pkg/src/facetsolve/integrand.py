"""Closed-form energy densities, their derivatives, and structural-inequality verifiers.

The densities are the Euclidean norm `psi`, its smooth relaxation
`psi_eps(z) = sqrt(eps^2 + |z|^2)`, the p-th power well `ep(z) = |z|^p / p`,
its relaxation `ep_eps(z) = (eps^2 + |z|^2)^(p/2) / p`, and the combined
density `e_eps = beta * psi_eps + ep_eps`. Everything broadcasts over a
trailing component axis, so the same code serves pointwise evaluation and
bulk sampling.

The verifiers check the ellipticity band of the combined Hessian, strong
monotonicity and Lipschitz-type continuity of the relaxed p-gradient, its
growth, and the coercivity chain of the relaxed well. Structural constants
that the inequalities only assert to exist are calibrated numerically over
extremal families and cached per exponent (see `structure_constants`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .report import Report

__all__ = [
    "ModelParams",
    "psi",
    "subdiff_psi_contains",
    "eps_subgradient_gap",
    "psi_eps",
    "grad_psi_eps",
    "hess_psi_eps",
    "ep",
    "grad_ep",
    "ep_eps",
    "grad_ep_eps",
    "hess_ep_eps",
    "e_eps",
    "grad_e_eps",
    "hess_e_eps",
    "StructureConstants",
    "structure_constants",
    "verify_ellipticity",
    "verify_monotonicity",
    "verify_growth_continuity",
    "sample_points",
    "run_inequality_battery",
]

# inequality checks absorb rounding with this slack (relative + absolute)
REL_SLACK = 1e-9
ABS_SLACK = 1e-12


def check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"regularization parameter must lie in (0, 1], got {eps}")
    return eps


@dataclass(frozen=True)
class ModelParams:
    """Exponent, 1-homogeneous weight, data exponent and ellipticity constants.

    For the canonical density family the constants are derived:
    c1 = min(p-1, 1/p), c2 = max(p-1, 1), C1 = c1, C2 = c2 + beta.
    """

    p: float
    beta: float = 0.0
    q: float = math.inf
    c1: float = None  # type: ignore[assignment]
    c2: float = None  # type: ignore[assignment]
    C1: float = None  # type: ignore[assignment]
    C2: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if not (self.p > 1.0 and np.isfinite(self.p)):
            raise ValueError(f"p must satisfy p > 1, got {self.p}")
        if not (self.beta >= 0.0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must satisfy beta >= 0, got {self.beta}")
        if not (self.q > 1.0):
            raise ValueError(f"q must satisfy q > 1, got {self.q}")
        if self.c1 is None:
            object.__setattr__(self, "c1", min(self.p - 1.0, 1.0 / self.p))
        if self.c2 is None:
            object.__setattr__(self, "c2", max(self.p - 1.0, 1.0))
        if self.C1 is None:
            object.__setattr__(self, "C1", self.c1)
        if self.C2 is None:
            object.__setattr__(self, "C2", self.c2 + self.beta)
        if not (0.0 < self.c1 <= self.c2 < math.inf):
            raise ValueError(f"need 0 < c1 <= c2 < inf, got c1={self.c1}, c2={self.c2}")
        if not (0.0 < self.C1 <= self.C2 < math.inf):
            raise ValueError(f"need 0 < C1 <= C2 < inf, got C1={self.C1}, C2={self.C2}")


def _norm(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(z, dtype=float) ** 2, axis=-1))


def _eye_like(z: np.ndarray) -> np.ndarray:
    n = z.shape[-1]
    eye = np.eye(n)
    return np.broadcast_to(eye, z.shape[:-1] + (n, n))


def _outer(z: np.ndarray) -> np.ndarray:
    return z[..., :, None] * z[..., None, :]


# ---------------------------------------------------------------------------
# densities


def psi(z) -> np.ndarray | float:
    """Euclidean norm |z|."""
    out = _norm(np.atleast_1d(np.asarray(z, dtype=float)))
    return float(out) if out.ndim == 0 else out


def subdiff_psi_contains(z0, w, tol: float = 0.0) -> bool:
    """Whether w lies within `tol` of the norm's subdifferential at z0.

    Off the origin the subdifferential is the unit direction z0/|z0|;
    at the origin it is the closed unit ball.
    """
    if tol < 0.0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    z0 = np.asarray(z0, dtype=float)
    w = np.asarray(w, dtype=float)
    r = float(_norm(z0))
    if r > 0.0:
        return bool(_norm(w - z0 / r) <= tol)
    return bool(_norm(w) <= 1.0 + tol)


def eps_subgradient_gap(z0, w) -> tuple[float, float]:
    """Duality data (|w|, |z0| - <w, z0>) for the approximate-subgradient test.

    w is a delta-approximate subgradient of the norm at z0 exactly when
    |w| <= 1 and the returned gap is <= delta; the relaxed gradient
    grad_psi_eps(eps, z) satisfies this with delta = eps at every z.
    """
    z0 = np.asarray(z0, dtype=float)
    w = np.asarray(w, dtype=float)
    gap = float(_norm(z0)) - float(np.sum(w * z0, axis=-1))
    return float(_norm(w)), gap


def psi_eps(eps: float, z) -> np.ndarray | float:
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    out = np.sqrt(eps**2 + np.sum(z**2, axis=-1))
    return float(out) if out.ndim == 0 else out


def grad_psi_eps(eps: float, z) -> np.ndarray:
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    s = np.sqrt(eps**2 + np.sum(z**2, axis=-1))
    return z / s[..., None]


def hess_psi_eps(eps: float, z) -> np.ndarray:
    """Hessian with eigenvalues 1/s tangentially and eps^2/s^3 radially, s = psi_eps."""
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    s2 = eps**2 + np.sum(z**2, axis=-1)
    s = np.sqrt(s2)
    return _eye_like(z) / s[..., None, None] - _outer(z) / (s2 * s)[..., None, None]


def ep(p: float, z) -> np.ndarray | float:
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    z = np.asarray(z, dtype=float)
    out = np.sum(z**2, axis=-1) ** (p / 2.0) / p
    return float(out) if out.ndim == 0 else out


def grad_ep(p: float, z) -> np.ndarray:
    """|z|^(p-2) z, extended by 0 at the origin (the limit exists for p > 1)."""
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    z = np.asarray(z, dtype=float)
    r = _norm(z)
    safe = np.where(r > 0.0, r, 1.0)
    factor = np.where(r > 0.0, safe ** (p - 2.0), 0.0)
    return factor[..., None] * z


def ep_eps(p: float, eps: float, z) -> np.ndarray | float:
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    out = (eps**2 + np.sum(z**2, axis=-1)) ** (p / 2.0) / p
    return float(out) if out.ndim == 0 else out


def grad_ep_eps(p: float, eps: float, z) -> np.ndarray:
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    w = eps**2 + np.sum(z**2, axis=-1)
    return w[..., None] ** (p / 2.0 - 1.0) * z


def hess_ep_eps(p: float, eps: float, z) -> np.ndarray:
    """(eps^2+|z|^2)^(p/2-2) [ (eps^2+|z|^2) I + (p-2) z z^T ]."""
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    check_eps(eps)
    z = np.asarray(z, dtype=float)
    w = eps**2 + np.sum(z**2, axis=-1)
    base = w[..., None, None]
    return base ** (p / 2.0 - 2.0) * (base * _eye_like(z) + (p - 2.0) * _outer(z))


def e_eps(params: ModelParams, eps: float, z) -> np.ndarray | float:
    return params.beta * psi_eps(eps, z) + ep_eps(params.p, eps, z)


def grad_e_eps(params: ModelParams, eps: float, z) -> np.ndarray:
    return params.beta * grad_psi_eps(eps, z) + grad_ep_eps(params.p, eps, z)


def hess_e_eps(params: ModelParams, eps: float, z) -> np.ndarray:
    return params.beta * hess_psi_eps(eps, z) + hess_ep_eps(params.p, eps, z)


# ---------------------------------------------------------------------------
# structural constants
#
# The monotonicity/continuity/growth inequalities hold with constants the
# theory leaves implicit. We pin each by extremizing the corresponding ratio
# over families that contain the worst cases (collinear pairs through the
# origin, near-coincident pairs, the full eps-to-radius range), then pad by
# 1e-6 toward the safe side. Scale invariance of each ratio reduces the
# search to low-dimensional grids.


@dataclass(frozen=True)
class StructureConstants:
    """Calibrated constants, one per inequality family, for a fixed exponent."""

    p: float
    monotone: float  # lower bound: <dF, dz> >= c1 * monotone * |dz|^p   (p >= 2)
    continuity: float  # upper bound in the gradient-continuity estimate
    growth_limit: float  # upper bound: |grad_ep| <= c2 * growth_limit * |z|^(p-1)
    growth_relaxed: float  # upper bound in the relaxed-gradient growth estimate
    coercivity: float  # lower bound constant in the monotonicity-at-origin branch

    def as_dict(self) -> dict[str, float]:
        return {
            "cp_monotone": self.monotone,
            "cp_continuity": self.continuity,
            "cp_growth_limit": self.growth_limit,
            "cp_growth_relaxed": self.growth_relaxed,
            "cp_coercivity": self.coercivity,
        }


_PAD = 1e-5


def _collinear_pairs(n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Pairs z1 = (s-1) e, z2 = (s+1) e over offsets and scales; worst cases
    for difference-quotient ratios sit on this family by isotropy."""
    s = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 120)])
    s = np.concatenate([-s[::-1], s])
    scales = np.geomspace(1e-3, 1e3, 25)
    e = np.zeros(n)
    e[0] = 1.0
    z1 = (s[:, None] - 1.0) * e
    z2 = (s[:, None] + 1.0) * e
    z1 = (scales[:, None, None] * z1).reshape(-1, n)
    z2 = (scales[:, None, None] * z2).reshape(-1, n)
    return z1, z2


def _eps_grid() -> np.ndarray:
    return np.array([1e-12, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 0.5, 1.0])


def _refined_extremum_max(fn) -> float:
    """Maximize a smooth scale-invariant ratio over log t: grid pass, then local refinement."""
    from scipy.optimize import minimize_scalar

    logt = np.linspace(np.log(1e-8), np.log(1e8), 4001)
    vals = fn(np.exp(logt))
    i = int(np.argmax(vals))
    lo = logt[max(i - 2, 0)]
    hi = logt[min(i + 2, logt.size - 1)]
    res = minimize_scalar(lambda x: -float(fn(np.exp(np.atleast_1d(x)))[0]), bounds=(lo, hi), method="bounded")
    return max(float(-res.fun), float(vals[i]))


@lru_cache(maxsize=None)
def structure_constants(p: float) -> StructureConstants:
    p = float(p)
    params = ModelParams(p=p)
    c1, c2 = params.c1, params.c2
    z1, z2 = _collinear_pairs()
    dz = _norm(z2 - z1)
    keep = dz > 0.0
    z1, z2, dz = z1[keep], z2[keep], dz[keep]

    mono_ratios = []
    cont_ratios = []
    for eps in _eps_grid():
        g1 = grad_ep_eps(p, min(eps, 1.0), z1)
        g2 = grad_ep_eps(p, min(eps, 1.0), z2)
        inner = np.sum((g2 - g1) * (z2 - z1), axis=-1)
        if p >= 2.0:
            mono_ratios.append(np.min(inner / (c1 * dz**p)))
            scale = eps ** (p - 2.0) + _norm(z1) ** (p - 2.0) + _norm(z2) ** (p - 2.0)
            cont_ratios.append(np.max(_norm(g2 - g1) / (c2 * scale * dz)))
        else:
            cont_ratios.append(np.max(_norm(g2 - g1) / (c2 * dz ** (p - 1.0))))

    if p >= 2.0:
        # the continuity sup also lives on the coincident-pair limit, where the
        # ratio is the radial Hessian norm over the scale sum; 1D in t = |z|/eps
        cont_ratios.append(
            _refined_extremum_max(
                lambda t: (1.0 + t**2) ** (p / 2.0 - 2.0)
                * (1.0 + (p - 1.0) * t**2)
                / (c2 * (1.0 + 2.0 * t ** (p - 2.0)))
            )
        )
        growth_relaxed = _refined_extremum_max(
            lambda t: (1.0 + t**2) ** (p / 2.0 - 1.0) * t / (c2 * (1.0 + t ** (p - 1.0)))
        )
        # the coercivity-at-origin ratio decreases to 1/c1 from above, so the
        # padded limit bounds every finite sample strictly from below
        coercivity = 1.0 / c1
    else:
        growth_relaxed = 1.0 / c2  # (1 + t^-2)^(p/2-1) <= 1 for p < 2
        coercivity = 1.0 / c1  # branch is constant-free; kept for symmetry

    mono = float(np.min(mono_ratios)) * (1.0 - _PAD) if p >= 2.0 else 1.0
    cont = float(np.max(cont_ratios)) * (1.0 + _PAD)
    return StructureConstants(
        p=p,
        monotone=mono,
        continuity=cont,
        growth_limit=1.0,
        growth_relaxed=growth_relaxed * (1.0 + _PAD),
        coercivity=coercivity * (1.0 - _PAD),
    )


# ---------------------------------------------------------------------------
# verifiers


def _holds_lower(lhs, rhs) -> np.ndarray:
    """lhs >= rhs up to relative/absolute rounding slack."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return lhs >= rhs - (REL_SLACK * np.abs(rhs) + ABS_SLACK)


def _margin_lower(lhs, rhs) -> float:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return float(np.min(lhs - rhs))


def verify_ellipticity(params: ModelParams, eps: float, z0, zeta, omega) -> Report:
    """Two-sided Hessian bounds of the combined density on |z0| >= 1.

    Lower: C1 (eps^2+|z0|^2)^(p/2-1) |zeta|^2 <= <H zeta, zeta>.
    Upper: |<H zeta, omega>| <= C2 (eps^2+|z0|^2)^(p/2-1) |zeta| |omega|.
    """
    check_eps(eps)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    r = _norm(z0)
    if np.any(r < 1.0):
        raise ValueError("ellipticity band is only asserted for |z0| >= 1")
    H = hess_e_eps(params, eps, z0)
    Hz = np.einsum("...ij,...j->...i", H, zeta)
    quad = np.sum(Hz * zeta, axis=-1)
    bilin = np.abs(np.sum(Hz * omega, axis=-1))
    w_fac = (eps**2 + r**2) ** (params.p / 2.0 - 1.0)
    lower = params.C1 * w_fac * _norm(zeta) ** 2
    upper = params.C2 * w_fac * _norm(zeta) * _norm(omega)
    lower_ok = _holds_lower(quad, lower)
    upper_ok = _holds_lower(upper, bilin)
    passed = bool(lower_ok.all() and upper_ok.all())
    return Report(
        name="ellipticity",
        passed=passed,
        values={
            "samples": float(z0.shape[0]),
            "lower_bound": float(lower[0]),
            "quadratic_form": float(quad[0]),
            "bilinear_form": float(bilin[0]),
            "upper_bound": float(upper[0]),
            "violations_lower": float(np.sum(~lower_ok)),
            "violations_upper": float(np.sum(~upper_ok)),
            "worst_margin_lower": _margin_lower(quad, lower),
            "worst_margin_upper": _margin_lower(upper, bilin),
        },
    )


def verify_monotonicity(
    params: ModelParams, eps: float, z1, z2, cp: float | None = None
) -> Report:
    """Strong monotonicity of the relaxed p-gradient.

    p >= 2: <dF, dz> >= c1 * cp * |dz|^p with the calibrated structural cp.
    1 < p < 2: <dF, dz> >= c1 |dz|^2 (eps^2 + |z1|^2 + |z2|^2)^(p/2-1).
    """
    check_eps(eps)
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    p, c1 = params.p, params.c1
    if cp is None:
        cp = structure_constants(p).monotone
    lhs = np.sum((grad_ep_eps(p, eps, z2) - grad_ep_eps(p, eps, z1)) * (z2 - z1), axis=-1)
    dz = _norm(z2 - z1)
    if p >= 2.0:
        rhs = c1 * cp * dz**p
    else:
        rhs = c1 * dz**2 * (eps**2 + _norm(z1) ** 2 + _norm(z2) ** 2) ** (p / 2.0 - 1.0)
    ok = _holds_lower(lhs, rhs)
    return Report(
        name="monotonicity",
        passed=bool(ok.all()),
        values={
            "samples": float(z1.shape[0]),
            "cp": float(cp),
            "lhs": float(lhs[0]),
            "rhs": float(rhs[0]),
            "violations": float(np.sum(~ok)),
            "worst_margin": _margin_lower(lhs, rhs),
        },
    )


def verify_growth_continuity(
    params: ModelParams,
    eps: float,
    z0,
    z1,
    z2,
    constants: StructureConstants | None = None,
) -> Report:
    """Continuity, growth and coercivity estimates of the p-part.

    Checks, with calibrated constants where the bound is only structural:
      continuity   |dF(z1) - dF(z2)| against the two-branch modulus,
      growth       |grad_ep(z0)| <= c2 |z0|^(p-1) (the relaxed version too),
      coercivity   the monotonicity-at-origin term and the energy gap
                   ep_eps(z0) - ep_eps(0) - <grad_ep_eps(0), z0>, each
                   bounded below; the gap also never exceeds the
                   monotonicity term (convexity orders them this way).
    """
    check_eps(eps)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    p, c1, c2 = params.p, params.c1, params.c2
    sc = constants or structure_constants(p)

    # continuity of the relaxed gradient
    g1 = grad_ep_eps(p, eps, z1)
    g2 = grad_ep_eps(p, eps, z2)
    dg = _norm(g1 - g2)
    dz = _norm(z1 - z2)
    if p >= 2.0:
        cont_rhs = c2 * sc.continuity * (eps ** (p - 2.0) + _norm(z1) ** (p - 2.0) + _norm(z2) ** (p - 2.0)) * dz
    else:
        cont_rhs = c2 * sc.continuity * dz ** (p - 1.0)
    cont_ok = _holds_lower(cont_rhs, dg)

    # growth of the limit gradient and of the relaxed one
    r0 = _norm(z0)
    growth_lhs = _norm(grad_ep(p, z0))
    growth_rhs = c2 * sc.growth_limit * r0 ** (p - 1.0)
    growth_ok = _holds_lower(growth_rhs, growth_lhs)
    relaxed_lhs = _norm(grad_ep_eps(p, eps, z0))  # grad at the origin vanishes
    if p >= 2.0:
        relaxed_rhs = c2 * sc.growth_relaxed * (eps ** (p - 1.0) + r0 ** (p - 1.0))
    else:
        relaxed_rhs = c2 * sc.growth_relaxed * r0 ** (p - 1.0)
    relaxed_ok = _holds_lower(relaxed_rhs, relaxed_lhs)

    # coercivity chain at the origin
    w = eps**2 + r0**2
    origin_term = np.sum(grad_ep_eps(p, eps, z0) * z0, axis=-1)
    energy_gap = ep_eps(p, eps, z0) - ep_eps(p, eps, np.zeros_like(z0))
    if p >= 2.0:
        origin_lower = c1 * sc.coercivity * r0**p
    else:
        origin_lower = c1 * (w ** (p / 2.0) - eps**p)
    gap_lower = (c1 / p) * (w ** (p / 2.0) - eps**p)
    chain_ok = (
        _holds_lower(origin_term, origin_lower)
        & _holds_lower(energy_gap, gap_lower)
        & _holds_lower(origin_term, energy_gap)
    )

    passed = bool(cont_ok.all() and growth_ok.all() and relaxed_ok.all() and chain_ok.all())
    return Report(
        name="growth_continuity",
        passed=passed,
        values={
            "samples": float(z0.shape[0]),
            "cp_continuity": sc.continuity,
            "cp_growth_relaxed": sc.growth_relaxed,
            "cp_coercivity": sc.coercivity,
            "violations_continuity": float(np.sum(~cont_ok)),
            "violations_growth": float(np.sum(~growth_ok) + np.sum(~relaxed_ok)),
            "violations_coercivity": float(np.sum(~chain_ok)),
            "margin_continuity": _margin_lower(cont_rhs, dg),
            "margin_growth": _margin_lower(growth_rhs, growth_lhs),
            "margin_growth_relaxed": _margin_lower(relaxed_rhs, relaxed_lhs),
            "margin_coercivity": _margin_lower(origin_term, origin_lower),
            "margin_energy_gap": _margin_lower(energy_gap, gap_lower),
        },
    )


# ---------------------------------------------------------------------------
# sampling battery


def sample_points(
    rng: np.random.Generator,
    count: int,
    n: int = 2,
    radius_range: tuple[float, float] = (1e-3, 1e3),
) -> np.ndarray:
    """Log-uniform radii with uniform directions; stresses both small and large |z|."""
    lo, hi = radius_range
    radii = np.exp(rng.uniform(np.log(lo), np.log(hi), size=count))
    if n == 1:
        signs = rng.choice([-1.0, 1.0], size=count)
        return (radii * signs)[:, None]
    dirs = rng.normal(size=(count, n))
    dirs /= _norm(dirs)[:, None]
    return radii[:, None] * dirs


def run_inequality_battery(
    params: ModelParams,
    eps: float,
    n_samples: int,
    rng: np.random.Generator,
    n: int = 2,
) -> list[Report]:
    """Random-sample every structural inequality for one (p, beta, eps) cell."""
    check_eps(eps)
    z0 = sample_points(rng, n_samples, n=n, radius_range=(1.0, 1e3))
    zeta = rng.normal(size=(n_samples, n))
    omega = rng.normal(size=(n_samples, n))
    reports = [verify_ellipticity(params, eps, z0, zeta, omega)]

    za = sample_points(rng, n_samples, n=n)
    zb = sample_points(rng, n_samples, n=n)
    reports.append(verify_monotonicity(params, eps, za, zb))

    zc = sample_points(rng, n_samples, n=n)
    reports.append(verify_growth_continuity(params, eps, zc, za, zb))

    # boundedness of the relaxed well and its gradient at the origin
    origin = np.zeros((1, n))
    v0 = abs(float(ep_eps(params.p, eps, origin)[0]))
    g0 = float(_norm(grad_ep_eps(params.p, eps, origin))[0])
    reports.append(
        Report(
            name="origin_bounds",
            passed=bool(v0 <= 1.0 + ABS_SLACK and g0 <= 1.0 + ABS_SLACK),
            values={"value_at_origin": v0, "gradient_at_origin": g0},
        )
    )

    # the relaxed gradient of the norm is an eps-approximate subgradient
    w = grad_psi_eps(eps, za)
    wn = _norm(w)
    gap = _norm(za) - np.sum(w * za, axis=-1)
    sub_ok = (wn <= 1.0 + ABS_SLACK) & (gap <= eps + ABS_SLACK)
    reports.append(
        Report(
            name="eps_subgradient",
            passed=bool(sub_ok.all()),
            values={
                "samples": float(n_samples),
                "max_gradient_norm": float(wn.max()),
                "max_gap": float(gap.max()),
                "eps": float(eps),
                "violations": float(np.sum(~sub_ok)),
            },
        )
    )
    return reports
