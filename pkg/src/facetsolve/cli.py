"""Experiment runner: solve / verify / sweep / report over JSON configs.

Exit codes: 0 pass, 1 config error, 2 non-convergence, 3 verification
failure. Outputs are CSV tables and flat text records, every file headed by
the sha256 of the canonical config plus the seed, and bit-identical across
reruns of the same config and seed. `FACETSOLVE_THREADS` caps sweep
parallelism (0 = auto, unset = serial).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from . import integrand as ig
from .energy import Problem, total_energy, weak_residual
from .grid import BallRegion, Grid, ScalarField, default_ball, gradient, lp_norm, scalar_from_csv
from .integrand import ModelParams
from .report import Report, all_passed, first_failure, format_value, write_reports
from .solver import (
    ContinuationSchedule,
    SolveOptions,
    continuation_solve,
    facet_interval,
    oracle_1d,
    solve_regularized,
    stability_check,
)

__all__ = ["ExperimentConfig", "cmd_solve", "cmd_verify", "cmd_sweep", "cmd_report", "main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_VERIFY = 3


class ConfigError(Exception):
    """Invalid configuration; message carries file and line when locatable."""


def _line_of_key(raw: str, key: str) -> int | None:
    pattern = re.compile(rf'"{re.escape(key)}"\s*:')
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if pattern.search(line):
            return lineno
    return None


@dataclass
class ExperimentConfig:
    """Validated experiment description (problem, solver, diagnostics, axes)."""

    path: str
    raw_text: str
    data: dict
    seed: int = 0

    # populated by validate()
    dimension: int = 1
    cells: int = 256
    params: ModelParams = None  # type: ignore[assignment]
    schedule: ContinuationSchedule = None  # type: ignore[assignment]
    f_spec: dict = field(default_factory=dict)
    boundary_spec: dict = field(default_factory=dict)
    solve_opts: SolveOptions = field(default_factory=SolveOptions)
    polish: bool = True
    theta: float = 0.5
    radius_factor: float = 0.4
    chi: float = 2.0
    hooks: dict = field(default_factory=dict)

    def fail(self, key: str, message: str):
        line = _line_of_key(self.raw_text, key)
        where = f"{self.path}:{line}" if line else self.path
        raise ConfigError(f"{where}: {message}")

    def validate(self) -> "ExperimentConfig":
        data = self.data
        prob = data.get("problem")
        if not isinstance(prob, dict):
            self.fail("problem", "missing or malformed 'problem' section")
        self.dimension = prob.get("dimension", 1)
        if self.dimension not in (1, 2):
            self.fail("dimension", f"dimension must be 1 or 2, got {self.dimension}")
        self.cells = int(prob.get("cells", 256))
        if self.cells < 4:
            self.fail("cells", f"cells must be >= 4, got {self.cells}")
        q = prob.get("q", "inf")
        q = math.inf if q in ("inf", None) else float(q)
        try:
            self.params = ModelParams(
                p=float(prob.get("p", 2.0)), beta=float(prob.get("beta", 0.0)), q=q
            )
        except ValueError as exc:
            key = "p" if "p " in str(exc) or str(exc).startswith("p") else "problem"
            self.fail(key, str(exc))
        if self.params.q <= self.dimension:
            self.fail("q", f"data exponent must exceed the dimension, got q={self.params.q}")
        eps = prob.get("eps", {"start": 1e-1, "end": 1e-3, "decay": 0.1})
        try:
            self.schedule = ContinuationSchedule(
                float(eps.get("start", 1e-1)), float(eps.get("end", 1e-3)), float(eps.get("decay", 0.1))
            )
        except ValueError as exc:
            self.fail("eps", str(exc))
        self.f_spec = prob.get("f", {"kind": "constant", "value": 1.0})
        self.boundary_spec = prob.get("boundary", {"kind": "zero"})
        if self.f_spec.get("kind") not in ("constant", "sine_product", "step", "csv"):
            self.fail("f", f"unknown datum selector {self.f_spec.get('kind')!r}")
        if self.boundary_spec.get("kind") not in ("zero", "constant", "csv"):
            self.fail("boundary", f"unknown boundary selector {self.boundary_spec.get('kind')!r}")

        solver = data.get("solver", {})
        try:
            self.solve_opts = SolveOptions(
                grad_tol=float(solver.get("grad_tol", 1e-8)),
                max_iters=int(solver.get("max_iters", 200)),
            )
        except ValueError as exc:
            self.fail("solver", str(exc))
        self.polish = bool(solver.get("polish", True))

        dg = data.get("diagnostics", {})
        self.theta = float(dg.get("theta", 0.5))
        self.radius_factor = float(dg.get("radius_factor", 0.4))
        self.chi = float(dg.get("chi", 2.0))
        if not (0.0 < self.theta < 1.0):
            self.fail("theta", f"theta must lie in (0, 1), got {self.theta}")
        if self.chi <= 1.0:
            self.fail("chi", f"chi must exceed 1, got {self.chi}")
        self.hooks = data.get("test_hooks", {})
        self.seed = int(data.get("seed", self.seed))
        return self

    def config_hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def header_note(self) -> str:
        return f"config_sha256={self.config_hash()} seed={self.seed}"

    # -- field builders ------------------------------------------------

    def build_grid(self, cells: int | None = None) -> Grid:
        return Grid(dim=self.dimension, n_cells=cells or self.cells)

    def build_f(self, grid: Grid, amplitude: float | None = None) -> ScalarField:
        spec = self.f_spec
        kind = spec.get("kind")
        if kind == "csv":
            return scalar_from_csv(grid, spec["path"])
        scale = float(amplitude) if amplitude is not None else float(spec.get("value", spec.get("amplitude", 1.0)))
        if kind == "constant":
            return grid.constant_field(scale)
        if kind == "sine_product":
            if grid.dim == 1:
                return grid.sample_nodes(lambda x: scale * np.sin(np.pi * x))
            return grid.sample_nodes(lambda x, y: scale * np.sin(np.pi * x) * np.sin(np.pi * y))
        # centered plateau of the given radius
        radius = float(spec.get("radius", 0.25))
        center = [grid.origin[a] + 0.5 * grid.side for a in range(grid.dim)]
        if grid.dim == 1:
            return grid.sample_nodes(lambda x: scale * (np.abs(x - center[0]) <= radius))
        return grid.sample_nodes(
            lambda x, y: scale * ((x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius**2)
        )

    def build_boundary(self, grid: Grid) -> ScalarField:
        spec = self.boundary_spec
        if spec.get("kind") == "csv":
            return scalar_from_csv(grid, spec["path"])
        if spec.get("kind") == "constant":
            return grid.constant_field(float(spec.get("value", 0.0)))
        return grid.constant_field(0.0)

    def build_problem(self, cells: int | None = None, amplitude: float | None = None) -> Problem:
        grid = self.build_grid(cells)
        return Problem(
            grid,
            self.build_f(grid, amplitude),
            self.build_boundary(grid),
            self.params,
            self.schedule.eps_start,
        )


def load_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    cfg = ExperimentConfig(path=path, raw_text=raw, data=data).validate()
    if seed_override is not None:
        cfg.seed = seed_override
    return cfg


# ---------------------------------------------------------------------------
# solve


def cmd_solve(cfg: ExperimentConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    prob = cfg.build_problem()
    sol = continuation_solve(prob, cfg.schedule, cfg.solve_opts, polish=cfg.polish)
    from .solver import save_solution

    save_solution(sol, out_dir, "solution", note=cfg.header_note())
    lines = [
        f"# {cfg.header_note()}",
        f"converged={int(sol.converged)}",
        f"eps_final={format_value(sol.eps_final)}",
        f"iterations={sol.iterations}",
        f"energy={format_value(sol.energy)}",
        f"weak_residual={format_value(weak_residual(prob.with_eps(0.0), sol.u, sol.Z))}",
    ]
    if prob.grid.dim == 1 and cfg.params.beta > 0.0:
        try:
            lo, hi = facet_interval(sol)
            lines.append(f"facet_lo={format_value(lo)}")
            lines.append(f"facet_hi={format_value(hi)}")
        except ValueError:
            lines.append("facet_lo=nan")
            lines.append("facet_hi=nan")
    with open(os.path.join(out_dir, "solve_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if not sol.converged:
        print("solve: non-convergence, best iterate written", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(f"solve: converged in {sol.iterations} iterations, outputs in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _verify_battery(cfg: ExperimentConfig, rng: np.random.Generator) -> list[Report]:
    verify = cfg.data.get("verify", {})
    samples = int(verify.get("samples", 20000))
    p_grid = [float(v) for v in verify.get("p_grid", [1.5, 2.0, 3.0])]
    beta_grid = [float(v) for v in verify.get("beta_grid", [0.0, 1.0])]
    eps_grid = [float(v) for v in verify.get("eps_grid", [1e-3, 1.0])]
    out: list[Report] = []
    for p in p_grid:
        for beta in beta_grid:
            for eps in eps_grid:
                cell = ig.ModelParams(p=p, beta=beta)
                for rep in ig.run_inequality_battery(cell, eps, samples, rng):
                    rep.name = f"{rep.name}[p={p:g},beta={beta:g},eps={eps:g}]"
                    out.append(rep)
    return out


def _verify_solution_checks(cfg: ExperimentConfig, rng: np.random.Generator) -> list[Report]:
    """Facet run + diagnostics + minimality + stability + ratio sweep, all 1D."""
    verify = cfg.data.get("verify", {})
    amplitudes = verify.get("amplitudes", [1.0, 10.0, 100.0])
    if not amplitudes:
        raise ConfigError(f"{cfg.path}: verify.amplitudes must not be empty")
    n_cells = int(verify.get("cells", 512))
    p = float(verify.get("p", 3.0))
    beta = float(verify.get("beta", 0.1))
    grid = Grid(dim=1, n_cells=n_cells)
    f = grid.constant_field(1.0)
    zero = grid.constant_field(0.0)
    params = ModelParams(p=p, beta=beta, q=math.inf)
    prob = Problem(grid, f, zero, params, eps=1e-1)
    schedule = ContinuationSchedule(1e-1, float(verify.get("eps_end", 1e-3)))
    sol = continuation_solve(prob, schedule, cfg.solve_opts, polish=cfg.polish)

    z_scale = float(cfg.hooks.get("z_scale", 1.0))
    if z_scale != 1.0:
        from .grid import VectorField

        sol.Z = VectorField(grid, z_scale * sol.Z.values)

    reports: list[Report] = []
    orc = oracle_1d(p, beta, f, 0.0, 0.0)
    grad_err = float(np.max(np.abs(gradient(sol.u).values - gradient(orc.u).values)))
    reports.append(
        Report("oracle_gradient_error", passed=grad_err <= 1e-2, values={"linf_error": grad_err})
    )
    wres = weak_residual(prob.with_eps(0.0), sol.u, sol.Z)
    reports.append(Report("weak_residual", passed=wres <= 1e-6, values={"residual": wres}))

    ball = default_ball(grid, cfg.radius_factor, cfg.theta)
    k = diag.compute_k(f, p, params.q, ball)
    state = diag.truncation_state(sol, f, k)
    reports.append(diag.wulff_check(state))
    reports.append(diag.fk_norm_check(state, params.q, ball))
    wk_top = float(state.w_k.max() ** (p / 2.0))
    reports.append(
        diag.de_giorgi_monitor(state, levels=list(np.linspace(0.0, 1.1 * wk_top, 8)), radii=[0.2, 0.4])
    )
    reports.append(diag.moser_monitor(state, diag.MoserSchedule(chi=cfg.chi, p=p), ball))

    # minimality of the continuation limit in the nonsmooth energy
    limit_prob = prob.with_eps(0.0)
    e_limit = total_energy(limit_prob, sol.u)
    interior = grid.interior_mask()
    u_scale = float(np.max(np.abs(sol.u.values))) or 1.0
    worst = math.inf
    for magnitude in (1e-3, 1e-1):
        for _ in range(20):
            bump = np.zeros(grid.node_shape)
            bump[interior] = rng.normal(size=int(interior.sum()))
            bump *= magnitude * u_scale / max(np.max(np.abs(bump)), 1e-30)
            trial = ScalarField(grid, sol.u.values + bump)
            worst = min(worst, total_energy(limit_prob, trial) - e_limit)
    reports.append(Report("minimality", passed=worst >= -1e-10, values={"worst_margin": worst}))

    # stability of oracle pairs
    f2 = grid.constant_field(1.1)
    orc2 = oracle_1d(p, beta, f2, 0.0, 0.0)
    reports.append(stability_check(orc.problem, orc2.problem, orc, orc2))

    # gradient-bound ratio band over datum amplitudes
    ratios = []
    for amp in amplitudes:
        fa = grid.constant_field(float(amp))
        prob_a = Problem(grid, fa, zero, params, eps=schedule.eps_start)
        sol_a = continuation_solve(prob_a, schedule, cfg.solve_opts, polish=False)
        ratios.append(diag.lipschitz_ratio(sol_a, fa, ball, cfg.theta, params.q).values["ratio"])
    ratios = [r for r in ratios if r > 0.0]
    band = max(ratios) / min(ratios) if ratios else math.inf
    reports.append(
        Report(
            "lipschitz_ratio_band",
            passed=band <= 10.0,
            values={"band": band, "min_ratio": min(ratios), "max_ratio": max(ratios)},
        )
    )
    return reports


def cmd_verify(cfg: ExperimentConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    reports = _verify_battery(cfg, rng)
    reports.extend(_verify_solution_checks(cfg, rng))
    path = os.path.join(out_dir, "verify_report.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {cfg.header_note()}\n")
        for rep in reports:
            fh.write(rep.text() + "\n")
    n_pass = sum(r.passed for r in reports)
    print(f"verify: {n_pass}/{len(reports)} checks passed, report in {path}")
    if not all_passed(reports):
        bad = first_failure(reports)
        print(f"verify: FAILED check {bad.name}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _dedupe(values: list, label: str) -> list:
    seen: list = []
    for v in values:
        if v in seen:
            print(f"sweep: duplicate {label} value {v!r} dropped", file=sys.stderr)
        else:
            seen.append(v)
    return seen


def _sweep_task(args: tuple) -> list[dict]:
    """One (cells, amplitude) task: warm-started solves down the eps axis, one row per eps."""
    cfg_data, path, seed, cells, amplitude, eps_values, polish = args
    cfg = ExperimentConfig(path=path, raw_text="", data=cfg_data, seed=seed).validate()
    prob = cfg.build_problem(cells=cells, amplitude=amplitude)
    grid = prob.grid
    ball = default_ball(grid, cfg.radius_factor, cfg.theta)
    oracle = None
    if grid.dim == 1:
        oracle = oracle_1d(cfg.params.p, cfg.params.beta, prob.f, 0.0, 0.0)
    rows: list[dict] = []
    warm = None
    for eps in sorted(eps_values, reverse=True):
        try:
            sol = solve_regularized(prob.with_eps(eps), init=warm, opts=cfg.solve_opts)
            warm = sol.u
            row = {
                "cells": cells,
                "f_amplitude": amplitude,
                "eps": eps,
                "converged": int(sol.converged),
                "iterations": sol.iterations,
                "energy": sol.energy,
                "lipschitz_ratio": diag.lipschitz_ratio(sol, prob.f, ball, cfg.theta, cfg.params.q).values["ratio"],
                "weak_residual": weak_residual(prob.with_eps(0.0), sol.u, sol.Z),
                "grad_sup": lp_norm(gradient(sol.u), math.inf),
            }
            if oracle is not None:
                row["oracle_grad_error"] = float(
                    np.max(np.abs(gradient(sol.u).values - gradient(oracle.u).values))
                )
        except Exception as exc:  # per-run failures are recorded, not fatal
            row = {"cells": cells, "f_amplitude": amplitude, "eps": eps, "error": str(exc)}
        rows.append(row)
    return rows


def cmd_sweep(cfg: ExperimentConfig, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    sweep = cfg.data.get("sweep", {})
    eps_values = _dedupe([float(v) for v in sweep.get("eps", [cfg.schedule.eps_end])], "eps")
    amplitudes = _dedupe([float(v) for v in sweep.get("f_amplitude", [1.0])], "f_amplitude")
    cell_counts = _dedupe([int(v) for v in sweep.get("cells", [cfg.cells])], "cells")
    if not eps_values or not amplitudes or not cell_counts:
        raise ConfigError(f"{cfg.path}: sweep axes must not be empty")

    tasks = [
        (cfg.data, cfg.path, cfg.seed, cells, amp, eps_values, cfg.polish)
        for cells in cell_counts
        for amp in amplitudes
    ]
    workers = _thread_cap()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]

    columns = [
        "cells",
        "f_amplitude",
        "eps",
        "converged",
        "iterations",
        "energy",
        "lipschitz_ratio",
        "weak_residual",
        "grad_sup",
        "oracle_grad_error",
        "error",
    ]
    path = os.path.join(out_dir, "sweep.csv")
    n_rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {cfg.header_note()}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rows in results:
            for row in rows:
                writer.writerow([format_value(row[c]) if c in row else "" for c in columns])
                n_rows += 1
    print(f"sweep: {n_rows} rows written to {path}")
    return EXIT_OK


def _thread_cap() -> int:
    raw = os.environ.get("FACETSOLVE_THREADS", "")
    if not raw:
        return 1
    val = int(raw)
    if val == 0:
        return os.cpu_count() or 1
    return max(1, val)


# ---------------------------------------------------------------------------
# report


def cmd_report(cfg: ExperimentConfig, out_dir: str) -> int:
    """Digest the text and CSV artifacts of previous runs in `out_dir`."""
    if not os.path.isdir(out_dir):
        raise ConfigError(f"report: output directory {out_dir} does not exist")
    lines = [f"# {cfg.header_note()}"]
    for name in sorted(os.listdir(out_dir)):
        full = os.path.join(out_dir, name)
        if name.endswith("_summary.txt") or name == "verify_report.txt":
            lines.append(f"[{name}]")
            with open(full, encoding="utf-8") as fh:
                lines.extend(line.rstrip() for line in fh if line.strip())
        elif name == "sweep.csv":
            with open(full, encoding="utf-8") as fh:
                rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
            lines.append(f"[{name}] rows={len(rows) - 1}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="facetsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "sweep", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        handler = {
            "solve": cmd_solve,
            "verify": cmd_verify,
            "sweep": cmd_sweep,
            "report": cmd_report,
        }[args.command]
        return handler(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
