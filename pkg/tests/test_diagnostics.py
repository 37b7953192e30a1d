import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from facetsolve import diagnostics as diag
from facetsolve.energy import Problem
from facetsolve.grid import BallRegion, Grid, VectorField, default_ball, gradient
from facetsolve.integrand import ModelParams
from facetsolve.solver import Solution, continuation_solve, ContinuationSchedule, oracle_1d


def ramp_solution(slope, n=64, p=3.0, beta=0.1):
    """Solution whose gradient is exactly `slope` everywhere (linear ramp)."""
    g = Grid(dim=1, n_cells=n)
    u = g.sample_nodes(lambda x: slope * x)
    prob = Problem(g, g.constant_field(0.0), u, ModelParams(p=p, beta=beta), 0.0)
    Z = VectorField(g, np.sign(slope) * np.ones(g.cell_shape + (1,)))
    return Solution(prob, u, Z, 0.0, 0, [0.0], True, 0.0)


@pytest.fixture(scope="module")
def facet_run():
    g = Grid(dim=1, n_cells=512)
    f = g.constant_field(1.0)
    prob = Problem(g, f, g.constant_field(0.0), ModelParams(p=3.0, beta=0.1, q=math.inf), 1e-3)
    sol = continuation_solve(prob, ContinuationSchedule(1e-1, 1e-3))
    return sol, f


# --- scalar constants ---------------------------------------------------------


def test_truncation_level_from_datum():
    g = Grid(dim=1, n_cells=64)
    ball = default_ball(g)
    assert diag.compute_k(g.constant_field(0.0), 3.0, math.inf, ball) == 1.0
    for p in (1.5, 2.0, 3.0):
        assert diag.compute_k(g.constant_field(1.0), p, math.inf, ball) == pytest.approx(2.0)
    assert diag.compute_k(g.constant_field(2.0), 3.0, math.inf, ball) == pytest.approx(1.0 + math.sqrt(2.0))
    with pytest.raises(ValueError):
        diag.compute_k(g.constant_field(1.0), 3.0, 0.5, ball)


def test_comparison_constant_closed_form():
    assert diag.wulff_constant(1.0) == pytest.approx(2.61803, abs=1e-5)
    assert diag.wulff_constant(math.sqrt(2.0)) == pytest.approx(3.73205, abs=1e-5)
    assert diag.wulff_constant(math.sqrt(2.0)) == pytest.approx(2.0 + math.sqrt(3.0))
    # K decreases to 1 as the ratio vanishes
    assert 1.0 < diag.wulff_constant(1e-8) < 1.0 + 1e-6
    assert diag.c0_constant(2) == diag.wulff_constant(math.sqrt(2.0))
    with pytest.raises(ValueError):
        diag.wulff_constant(0.0)


def test_ellipticity_pair():
    mp = ModelParams(p=2.0, beta=0.5)
    lam, big = diag.lambdas(mp, 2)
    assert lam == mp.C1 and big == mp.C2
    mp3 = ModelParams(p=3.0, beta=1.0)
    lam, big = diag.lambdas(mp3, 2)
    assert lam == pytest.approx(mp3.C1 * 2.0**-0.5)
    assert big == pytest.approx(mp3.C2 * diag.c0_constant(2) ** 0.5)
    mp15 = ModelParams(p=1.5)
    lam, _ = diag.lambdas(mp15, 2)
    assert lam == pytest.approx(mp15.C1 * diag.c0_constant(2) ** -0.25)


# --- truncation state -----------------------------------------------------------


def test_truncation_kills_small_gradients():
    sol = ramp_solution(0.5)
    st_ = diag.truncation_state(sol, sol.problem.f, 1.0)
    assert np.all(st_.u_ik == 0.0)
    assert np.allclose(st_.w_k, 1.0)
    assert np.allclose(st_.what_k, 1.25)


def test_truncation_of_steep_ramp():
    sol = ramp_solution(2.0)
    st_ = diag.truncation_state(sol, sol.problem.f, 1.0)
    assert np.allclose(st_.u_ik[..., 0], 1.0)
    assert np.allclose(st_.w_k, 2.0)
    assert np.allclose(st_.what_k, 5.0)


def test_truncation_of_negative_ramp():
    sol = ramp_solution(-3.0)
    st_ = diag.truncation_state(sol, sol.problem.f, 1.0)
    assert np.allclose(st_.u_ik[..., 0], -2.0)


def test_truncation_sign_and_magnitude_identity():
    rng = np.random.default_rng(2)
    g = Grid(dim=1, n_cells=64)
    u = g.sample_nodes(lambda x: np.sin(7 * x))
    prob = Problem(g, g.constant_field(0.0), u, ModelParams(p=2.0, beta=0.0), 0.0)
    sol = Solution(prob, u, VectorField(g, np.zeros((64, 1))), 0.0, 0, [0.0], True, 0.0)
    k = 1.0
    st_ = diag.truncation_state(sol, prob.f, k)
    grad = gradient(u).values
    expect = np.sign(grad) * np.maximum(np.abs(grad) - k, 0.0)
    assert np.allclose(st_.u_ik, expect)
    assert np.all(st_.w_k <= st_.what_k + 1e-15)
    with pytest.raises(ValueError):
        diag.truncation_state(sol, prob.f, 0.5)


def test_comparison_bounds_on_ramp():
    # slope 2, k = 1: w = 2, what = 5 <= K(1) * 2 = 5.236 in one dimension
    sol = ramp_solution(2.0)
    rep = diag.wulff_check(diag.truncation_state(sol, sol.problem.f, 1.0), n=1)
    assert rep.passed
    assert rep.values["c0"] * 2.0 == pytest.approx(5.2360679, abs=1e-6)


def test_comparison_bounds_on_solver_output(facet_run):
    sol, f = facet_run
    k = diag.compute_k(f, 3.0, math.inf, default_ball(sol.problem.grid))
    rep = diag.wulff_check(diag.truncation_state(sol, f, k))
    assert rep.passed and rep.values["violations"] == 0.0


def test_relaxation_compatibility_bounds():
    # for |z| > k >= 1 >= eps: (k^2 + z^2)/2 <= eps^2 + z^2 <= k^2 + z^2
    rng = np.random.default_rng(3)
    k = rng.uniform(1.0, 3.0)
    eps = rng.uniform(1e-6, 1.0)
    z = rng.uniform(k * (1 + 1e-9), 50.0, size=200)
    assert np.all(0.5 * (k**2 + z**2) <= eps**2 + z**2)
    assert np.all(eps**2 + z**2 <= k**2 + z**2)


# --- datum norm check ------------------------------------------------------------


def test_fk_norm_zero_datum():
    sol = ramp_solution(0.5)
    st_ = diag.truncation_state(sol, sol.problem.f, 1.0)
    ball = default_ball(sol.problem.grid)
    rep = diag.fk_norm_check(st_, math.inf, ball)
    assert rep.passed and rep.values["norm"] == 0.0


def test_fk_norm_below_one_with_derived_level(facet_run):
    sol, f = facet_run
    ball = default_ball(sol.problem.grid)
    for q in (math.inf, 8.0):
        k = diag.compute_k(f, 3.0, q, ball)
        rep = diag.fk_norm_check(diag.truncation_state(sol, f, k), q, ball)
        assert rep.passed, rep.values


# --- localized gradient bound -----------------------------------------------------


def test_lipschitz_ratio_zero_solution():
    g = Grid(dim=1, n_cells=64)
    zero = g.constant_field(0.0)
    prob = Problem(g, zero, zero, ModelParams(p=2.0, beta=0.0), 1e-1)
    sol = Solution(prob, zero, VectorField(g, np.zeros((64, 1))), 1e-1, 0, [0.0], True, 0.0)
    rep = diag.lipschitz_ratio(sol, zero, default_ball(g), 0.5, math.inf)
    assert rep.values["ratio"] == 0.0


def test_lipschitz_ratio_shift_invariance(facet_run):
    sol, f = facet_run
    ball = default_ball(sol.problem.grid)
    base = diag.lipschitz_ratio(sol, f, ball, 0.5, math.inf).values["ratio"]
    from facetsolve.grid import ScalarField

    shifted_u = ScalarField(sol.problem.grid, sol.u.values + 3.25)
    shifted = Solution(sol.problem, shifted_u, sol.Z, sol.eps_final, 0, [0.0], True, 0.0)
    again = diag.lipschitz_ratio(shifted, f, ball, 0.5, math.inf).values["ratio"]
    assert again == pytest.approx(base, rel=1e-14)


# --- iteration monitors -------------------------------------------------------------


def test_moser_schedule_arithmetic():
    ms = diag.MoserSchedule(chi=2.0, p=3.0, n_max=8)
    alpha, gamma, radii = ms.exponents()
    assert np.allclose(gamma, 1.5 * 2.0 ** np.arange(9))
    assert np.allclose(alpha + 3.0, 3.0 * 2.0 ** np.arange(9))
    assert radii[0] == pytest.approx(0.4) and radii[-1] < radii[0]
    assert np.all(np.diff(radii) < 0.0)
    # gamma values beyond the overflow cap are dropped
    ms_deep = diag.MoserSchedule(chi=2.0, p=3.0, n_max=12)
    _, gamma_deep, _ = ms_deep.exponents()
    assert np.all(gamma_deep <= diag.GAMMA_CAP)


def test_moser_monitor_constant_field():
    sol = ramp_solution(0.5, p=3.0)
    st_ = diag.truncation_state(sol, sol.problem.f, 1.0)  # w_k = 1 everywhere
    g = sol.problem.grid
    ball = BallRegion((0.5,), 0.4)
    rep = diag.moser_monitor(st_, diag.MoserSchedule(chi=2.0, p=3.0, n_max=6), ball)
    assert rep.passed
    _, gamma, radii = diag.MoserSchedule(chi=2.0, p=3.0, n_max=6).exponents()
    for i, (gam, rad) in enumerate(zip(gamma, radii)):
        cells = int(BallRegion((0.5,), rad).cell_mask(g).sum())
        expect = (g.cell_volume * cells) ** (1.0 / gam)  # k^2 = 1
        assert rep.values[f"norm_{i}"] == pytest.approx(expect)


def test_moser_monitor_dominated_by_sup(facet_run):
    sol, f = facet_run
    k = diag.compute_k(f, 3.0, math.inf, default_ball(sol.problem.grid))
    st_ = diag.truncation_state(sol, f, k)
    rep = diag.moser_monitor(st_, diag.MoserSchedule(chi=2.0, p=3.0, n_max=8), default_ball(sol.problem.grid))
    assert rep.passed
    assert rep.values["max_norm"] <= rep.values["sup_w_k"] + 1e-9
    # norms increase toward the sup on this run
    norms = [rep.values[f"norm_{i}"] for i in range(int(rep.values["steps"]))]
    assert norms[-1] >= norms[0]


def test_de_giorgi_extreme_levels(facet_run):
    sol, f = facet_run
    g = sol.problem.grid
    k = diag.compute_k(f, 3.0, math.inf, default_ball(g))
    st_ = diag.truncation_state(sol, f, k)
    top = float(st_.w_k.max() ** 1.5)
    rep = diag.de_giorgi_monitor(st_, levels=[0.0, 2.0 * top], radii=[0.3])
    assert rep.passed
    ball_cells = int(BallRegion((0.5,), 0.3).cell_mask(g).sum())
    # level 0 catches the whole ball, a level above the max catches nothing
    assert rep.values["measure_l0_r0.3"] == pytest.approx(g.cell_volume * ball_cells)
    assert rep.values[f"measure_l{2.0 * top:g}_r0.3"] == 0.0


def test_de_giorgi_chebyshev_on_solver_output(facet_run):
    sol, f = facet_run
    k = diag.compute_k(f, 3.0, math.inf, default_ball(sol.problem.grid))
    st_ = diag.truncation_state(sol, f, k)
    top = float(st_.w_k.max() ** 1.5)
    rep = diag.de_giorgi_monitor(st_, levels=list(np.linspace(0.0, 1.05 * top, 10)), radii=[0.2, 0.3, 0.4])
    assert rep.passed
    assert rep.values["chebyshev_worst_margin"] >= -1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_de_giorgi_chebyshev_on_random_fields(seed):
    rng = np.random.default_rng(seed)
    g = Grid(dim=1, n_cells=64)
    u = g.sample_nodes(lambda x: np.sin(5 * x) * rng.uniform(0.5, 3.0))
    prob = Problem(g, g.constant_field(0.0), u, ModelParams(p=2.0, beta=0.0), 0.0)
    sol = Solution(prob, u, VectorField(g, np.zeros((64, 1))), 0.0, 0, [0.0], True, 0.0)
    st_ = diag.truncation_state(sol, prob.f, 1.0)
    top = float(st_.w_k.max())
    levels = sorted(rng.uniform(0.0, 1.2 * top, size=6))
    rep = diag.de_giorgi_monitor(st_, levels=levels, radii=[0.2, 0.4])
    assert rep.passed, rep.values
