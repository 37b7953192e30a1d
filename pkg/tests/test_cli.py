import csv
import hashlib
import json
import math

import pytest

from facetsolve.cli import (
    EXIT_CONFIG,
    EXIT_NONCONVERGED,
    EXIT_OK,
    EXIT_VERIFY,
    cmd_report,
    cmd_solve,
    cmd_sweep,
    cmd_verify,
    load_config,
    main,
)


BASE_CONFIG = {
    "problem": {
        "dimension": 1,
        "cells": 256,
        "p": 3.0,
        "beta": 0.1,
        "q": "inf",
        "eps": {"start": 0.1, "end": 0.001, "decay": 0.1},
        "f": {"kind": "constant", "value": 1.0},
        "boundary": {"kind": "zero"},
    },
    "solver": {"grad_tol": 1e-8, "max_iters": 200, "polish": True},
    "verify": {"samples": 1500, "eps_end": 0.001, "p_grid": [1.5, 2.0, 3.0], "beta_grid": [0.1], "eps_grid": [0.001, 1.0]},
    "sweep": {"eps": [0.1, 0.01, 0.001], "f_amplitude": [1.0, 10.0]},
    "seed": 11,
}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def test_solve_writes_outputs(tmp_path):
    cfg = load_config(write_config(tmp_path, BASE_CONFIG))
    out = tmp_path / "out"
    assert cmd_solve(cfg, str(out)) == EXIT_OK
    for name in ("solution_u.csv", "solution_z.csv", "solution_summary.txt", "solve_summary.txt"):
        assert (out / name).exists()
    summary = (out / "solve_summary.txt").read_text()
    assert f"config_sha256={cfg.config_hash()}" in summary
    assert "facet_lo=" in summary


def test_invalid_exponent_exits_one_with_line(tmp_path, capsys):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["problem"]["p"] = 0.5
    path = write_config(tmp_path, data)
    rc = main(["solve", "--config", path, "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "p must satisfy p > 1" in err
    # the message points at the line carrying the bad key
    line_no = int(err.split(".json:")[1].split(":")[0])
    assert json.dumps(data, indent=1).splitlines()[line_no - 1].strip().startswith('"p"')


def test_malformed_json_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{ not json }")
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_max_iters_one_exits_two(tmp_path):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["solver"]["max_iters"] = 1
    cfg = load_config(write_config(tmp_path, data))
    assert cmd_solve(cfg, str(tmp_path / "out")) == EXIT_NONCONVERGED
    assert (tmp_path / "out" / "solution_u.csv").exists()  # best iterate still written


def test_verify_default_passes(tmp_path):
    cfg = load_config(write_config(tmp_path, BASE_CONFIG))
    out = tmp_path / "verify"
    assert cmd_verify(cfg, str(out)) == EXIT_OK
    text = (out / "verify_report.txt").read_text()
    assert "check=minimality" in text and "check=stability" in text
    assert "passed=0" not in text


def test_verify_injected_flux_violation_exits_three(tmp_path, capsys):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["test_hooks"] = {"z_scale": 5.0}
    cfg = load_config(write_config(tmp_path, data))
    assert cmd_verify(cfg, str(tmp_path / "v")) == EXIT_VERIFY
    assert "FAILED check weak_residual" in capsys.readouterr().err


def test_verify_empty_amplitudes_exits_one(tmp_path):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["verify"]["amplitudes"] = []
    path = write_config(tmp_path, data)
    assert main(["verify", "--config", path, "--out", str(tmp_path / "v")]) == EXIT_CONFIG


def test_sweep_rows_and_dedup(tmp_path, capsys):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["sweep"] = {"eps": [0.1, 0.01, 0.01, 0.001], "f_amplitude": [1.0, 10.0]}
    cfg = load_config(write_config(tmp_path, data))
    out = tmp_path / "sweep"
    assert cmd_sweep(cfg, str(out)) == EXIT_OK
    assert "duplicate eps value" in capsys.readouterr().err
    with open(out / "sweep.csv") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    assert len(body) == 6  # 3 deduped eps x 2 amplitudes
    eps_col = header.index("eps")
    oracle_col = header.index("oracle_grad_error")
    # rows are ordered amplitude-major, eps descending, and the oracle error
    # shrinks with eps within each amplitude
    first = [float(r[oracle_col]) for r in body[:3]]
    assert first[0] > first[1] > first[2]
    assert [float(r[eps_col]) for r in body[:3]] == [0.1, 0.01, 0.001]


def test_sweep_deterministic_and_hash_headed(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG)
    outs = []
    for tag in ("a", "b"):
        cfg = load_config(path)
        out = tmp_path / tag
        assert cmd_sweep(cfg, str(out)) == EXIT_OK
        outs.append((out / "sweep.csv").read_bytes())
    assert hashlib.sha256(outs[0]).hexdigest() == hashlib.sha256(outs[1]).hexdigest()
    first_line = outs[0].decode().splitlines()[0]
    assert first_line.startswith("# config_sha256=")


def test_seed_override_changes_hash_header_only_not_validity(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG)
    cfg = load_config(path, seed_override=123)
    assert cfg.seed == 123


def test_report_digests_outputs(tmp_path, capsys):
    cfg = load_config(write_config(tmp_path, BASE_CONFIG))
    out = tmp_path / "out"
    assert cmd_solve(cfg, str(out)) == EXIT_OK
    assert cmd_report(cfg, str(out)) == EXIT_OK
    text = (out / "report.txt").read_text()
    assert "[solve_summary.txt]" in text


def test_report_missing_dir_exits_one(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG)
    assert main(["report", "--config", path, "--out", str(tmp_path / "missing")]) == EXIT_CONFIG


def test_step_datum_and_sine_product_selectors(tmp_path):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["problem"]["f"] = {"kind": "sine_product", "amplitude": 2.0}
    cfg = load_config(write_config(tmp_path, data))
    f = cfg.build_f(cfg.build_grid())
    assert abs(f.values[len(f.values) // 2] - 2.0) < 1e-2  # peak of 2 sin(pi x) at midpoint
    data["problem"]["f"] = {"kind": "step", "value": 3.0, "radius": 0.25}
    cfg = load_config(write_config(tmp_path, data, name="cfg2.json"))
    f = cfg.build_f(cfg.build_grid())
    assert f.values.max() == 3.0 and f.values.min() == 0.0


def test_csv_field_selector_roundtrip(tmp_path):
    from facetsolve.grid import Grid, scalar_to_csv

    g = Grid(dim=1, n_cells=256)
    field = g.sample_nodes(lambda x: 1.0 + 0.5 * x)
    fpath = tmp_path / "f.csv"
    scalar_to_csv(field, fpath)
    data = json.loads(json.dumps(BASE_CONFIG))
    data["problem"]["f"] = {"kind": "csv", "path": str(fpath)}
    cfg = load_config(write_config(tmp_path, data))
    assert cfg.build_f(cfg.build_grid()).values[0] == pytest.approx(1.0)


def test_unknown_selector_rejected(tmp_path):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["problem"]["f"] = {"kind": "gaussian"}
    with pytest.raises(Exception) as exc_info:
        load_config(write_config(tmp_path, data))
    assert "unknown datum selector" in str(exc_info.value)


def test_low_q_rejected(tmp_path):
    data = json.loads(json.dumps(BASE_CONFIG))
    data["problem"]["dimension"] = 2
    data["problem"]["cells"] = 16
    data["problem"]["q"] = 1.5
    with pytest.raises(Exception) as exc_info:
        load_config(write_config(tmp_path, data))
    assert "exceed the dimension" in str(exc_info.value)
