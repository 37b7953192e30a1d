"""Discrete energies over the Dirichlet class: totals, interior gradients, limit-form residual.

A `Problem` couples grid, datum f, Dirichlet trace and model parameters with
the current relaxation parameter eps (eps = 0 selects the nonsmooth limit
energy, which is only ever minimized, never differentiated).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrand as denf
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    cell_average,
    divergence,
    gradient,
    node_quadrature_weights,
)
from .integrand import ModelParams, check_eps

__all__ = [
    "Problem",
    "EnergyDensity",
    "regularized_density",
    "limit_density",
    "polished_density",
    "total_energy",
    "energy_gradient",
    "weak_residual",
]


@dataclass(frozen=True)
class Problem:
    """Grid + datum + Dirichlet trace + model parameters + relaxation parameter."""

    grid: Grid
    f: ScalarField
    boundary: ScalarField
    params: ModelParams
    eps: float

    def __post_init__(self):
        if self.f.grid != self.grid or self.boundary.grid != self.grid:
            raise ValueError("datum and boundary trace must live on the problem grid")
        if self.eps != 0.0:
            check_eps(self.eps)

    def with_eps(self, eps: float) -> "Problem":
        return Problem(self.grid, self.f, self.boundary, self.params, eps)

    def with_f(self, f: ScalarField) -> "Problem":
        return Problem(self.grid, f, self.boundary, self.params, self.eps)

    def check_boundary(self, u: ScalarField) -> None:
        mask = self.grid.boundary_mask()
        if not np.array_equal(u.values[mask], self.boundary.values[mask]):
            raise ValueError("field does not match the Dirichlet trace on boundary nodes")


class EnergyDensity:
    """Cellwise density with value/gradient/Hessian callables on gradient samples."""

    def __init__(self, value, grad=None, hess=None):
        self.value = value
        self.grad = grad
        self.hess = hess


def regularized_density(params: ModelParams, eps: float) -> EnergyDensity:
    """Smooth density beta * psi_eps + ep_eps; strictly convex for eps > 0."""
    check_eps(eps)
    return EnergyDensity(
        value=lambda Z: denf.e_eps(params, eps, Z),
        grad=lambda Z: denf.grad_e_eps(params, eps, Z),
        hess=lambda Z: denf.hess_e_eps(params, eps, Z),
    )


def limit_density(params: ModelParams) -> EnergyDensity:
    """Nonsmooth limit density beta * |z| + |z|^p / p (value only)."""
    return EnergyDensity(
        value=lambda Z: params.beta * denf.psi(Z) + denf.ep(params.p, Z),
    )


def polished_density(params: ModelParams, eps: float, hess_floor: float | None = None) -> EnergyDensity:
    """Half-relaxed density beta * psi_eps + ep (exact p-part).

    The p-part is C^1 for every p > 1 but its Hessian degenerates at the
    origin, so the Hessian callable substitutes the relaxed one at level
    `hess_floor` (a modified-Newton surrogate; line searches and stopping
    always use the exact value and gradient). The floor defaults to a small
    fraction of eps: much larger floors underestimate the curvature at
    near-facet cells badly enough that the damped iteration cycles.
    """
    check_eps(eps)
    floor = 1e-3 * eps if hess_floor is None else hess_floor
    return EnergyDensity(
        value=lambda Z: params.beta * denf.psi_eps(eps, Z) + denf.ep(params.p, Z),
        grad=lambda Z: params.beta * denf.grad_psi_eps(eps, Z) + denf.grad_ep(params.p, Z),
        hess=lambda Z: params.beta * denf.hess_psi_eps(eps, Z)
        + denf.hess_ep_eps(params.p, floor, Z),
    )


def _density_for(prob: Problem) -> EnergyDensity:
    if prob.eps == 0.0:
        return limit_density(prob.params)
    return regularized_density(prob.params, prob.eps)


def load_vector(prob: Problem) -> np.ndarray:
    """Trapezoid-weighted nodal load w * f; boundary entries never drive unknowns."""
    return node_quadrature_weights(prob.grid) * prob.f.values


def total_energy(prob: Problem, u: ScalarField) -> float:
    """Cell quadrature of the density at grad(u) minus the nodal load term."""
    prob.check_boundary(u)
    dens = _density_for(prob)
    Z = gradient(u).values
    val = prob.grid.cell_volume * float(np.sum(dens.value(Z)))
    val -= float(np.sum(load_vector(prob) * u.values))
    if not np.isfinite(val):
        raise ValueError("energy evaluated to a non-finite value")
    return val


def energy_gradient(prob: Problem, u: ScalarField) -> ScalarField:
    """Exact gradient of `total_energy` w.r.t. interior node values.

    Equals quadrature-weight times (-div of the cellwise density gradient
    minus f); zero on boundary nodes. Requires eps > 0 (the limit density is
    nonsmooth; its minimization goes through the continuation machinery).
    """
    if prob.eps == 0.0:
        raise ValueError("limit energy is nonsmooth; gradient needs eps > 0")
    prob.check_boundary(u)
    dens = regularized_density(prob.params, prob.eps)
    W = VectorField(prob.grid, dens.grad(gradient(u).values))
    g = -prob.grid.cell_volume * divergence(W).values - load_vector(prob)
    g = np.where(prob.grid.interior_mask(), g, 0.0)
    return ScalarField(prob.grid, g)


def _hat_norm(grid: Grid, p: float) -> float:
    """Discrete W^{1,p} norm of one interior nodal hat (translation invariant)."""
    h = grid.h
    if grid.dim == 1:
        grad_part = 2.0 * h * h**-p
    else:
        grad_part = 4.0 * h**2 * (1.0 / (np.sqrt(2.0) * h)) ** p
    return float((h**grid.dim + grad_part) ** (1.0 / p))


def weak_residual(prob: Problem, u: ScalarField, Z: VectorField, z_tol: float = 1e-9) -> float:
    """Residual of the pair (u, Z) in the limit weak form, plus any |Z| <= 1 violation.

    Tests beta <Z, grad(phi)> + <grad_ep(grad u), grad(phi)> - <f, phi>
    against every interior nodal hat phi, each normalized by its discrete
    W^{1,p} norm; the returned value is the max over hats, or the amount by
    which max |Z| exceeds 1 + z_tol if that is larger. Used to accept a
    continuation limit.
    """
    prob.check_boundary(u)
    if Z.grid != prob.grid:
        raise ValueError("flux field must live on the problem grid")
    params = prob.params
    flux = params.beta * Z.values + denf.grad_ep(params.p, gradient(u).values)
    resid = -prob.grid.cell_volume * divergence(VectorField(prob.grid, flux)).values
    resid -= load_vector(prob)
    interior = prob.grid.interior_mask()
    hat_res = float(np.max(np.abs(resid[interior]))) / _hat_norm(prob.grid, params.p)
    violation = max(0.0, float(Z.magnitudes().max()) - 1.0 - z_tol)
    return max(hat_res, violation)
