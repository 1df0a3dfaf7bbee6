from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geogame.cli import main
from geogame.equilibria import closed_loop_profile
from geogame.model import ParameterError
from geogame.reporting import (
    ConfigError,
    PlotData,
    Table,
    canonical_hash,
    emit_report,
    load_config,
    load_ensemble,
    parse_config,
    read_csv,
    read_json,
    read_plot,
    run_scenario,
    save_ensemble,
)
from geogame.simulation import TimeGrid, sample_paths

from helpers import baseline

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "schema_version": 1,
    "scenario": "equilibria",
    "seed": 1,
    "model": {"rho": 0.05, "N": 10, "agent": {"gamma": 0.1, "mu": 0.2, "nu": 0.1, "theta": 1.0, "eta": 0.5}},
}


def config(**over):
    raw = json.loads(json.dumps(BASE))
    for key, value in over.items():
        raw[key] = value
    return raw


def write_toml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_equilibria_scenario_row(tmp_path):
    cfg = parse_config(config())
    code, files = run_scenario(cfg, out_dir=tmp_path)
    assert code == 0
    header, cols, rows = read_csv(tmp_path / "equilibria.csv")
    assert header.startswith("# geogame 0.1.0 config_sha256=" + cfg.config_hash)
    assert cols == ("agent", "alpha_cl", "alpha_ol", "alpha_sp", "tau", "growth")
    assert len(rows) == 10
    agent, cl, ol, sp, tau, growth = rows[0]
    assert agent == 0 and ol == 0.025 and tau == pytest.approx(9.0, rel=1e-14)
    assert cl == pytest.approx(0.0243902, abs=1e-7) and sp == pytest.approx(0.02, rel=1e-14)
    summary = read_json(tmp_path / "summary.json")
    assert summary["schema_version"] == 1 and summary["checks"]["residuals"]


def test_convergence_scenario(tmp_path):
    code, _ = run_scenario(load_config(CONFIGS / "convergence_dirac.toml"), out_dir=tmp_path, check=True)
    assert code == 0
    _, cols, rows = read_csv(tmp_path / "gaps.csv")
    assert cols == ("N", "gap") and [r[0] for r in rows] == [10, 100, 1000]
    assert rows[1][1] == pytest.approx(0.015, abs=1e-12)
    slope = read_json(tmp_path / "slope.json")
    assert abs(slope["slope"] + 1) <= 1e-6 and slope["schema_version"] == 1
    x, y = read_plot(tmp_path / "gaps.dat")
    np.testing.assert_array_equal(x, [10, 100, 1000])


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml") if not p.name.startswith("bad")))
def test_shipped_configs_pass_check(tmp_path, name):
    code, files = run_scenario(load_config(CONFIGS / name), out_dir=tmp_path, check=True)
    assert code == 0 and files


def test_missing_rho_is_parse_error(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(CONFIGS / "bad_missing_rho.toml"), "--out", str(out)]) == 1
    assert not out.exists()


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r.pop("seed"),
        lambda r: r.update(seed=True),
        lambda r: r.update(scenario="plot"),
        lambda r: r.update(schema_version=2),
        lambda r: r.update(extra=1),
        lambda r: r["model"].update(N="ten"),
        lambda r: r["model"]["agent"].pop("mu"),
        lambda r: r["model"]["agent"].update(kappa=1.0),
        lambda r: r["model"].update(agents=[]),
        lambda r: r.update(controls={"n_paths": 10}),
    ],
)
def test_structural_errors(mutate):
    raw = config()
    mutate(raw)
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_out_of_domain_values_are_invariant_violations(tmp_path):
    bad = write_toml(
        tmp_path / "neg.toml",
        'scenario = "equilibria"\nseed = 1\n[model]\nrho = -0.05\nN = 3\n'
        "[model.agent]\ngamma = 0.1\nmu = 0.2\nnu = 0.1\ntheta = 1.0\neta = 0.5\n",
    )
    with pytest.raises(ParameterError):
        load_config(bad)
    assert main(["validate", str(bad)]) == 2


def test_invalid_toml(tmp_path):
    bad = write_toml(tmp_path / "broken.toml", "scenario = \n")
    assert main(["validate", str(bad)]) == 1


def test_heterogeneous_convergence_is_invariant_violation(tmp_path):
    raw = config(scenario="convergence")
    agent = raw["model"].pop("agent")
    raw["model"].pop("N")
    raw["model"]["agents"] = [agent, dict(agent, eta=0.1)]
    out = tmp_path / "out"
    code, files = run_scenario(parse_config(raw), out_dir=out)
    assert code == 2 and files == [] and not out.exists()


def test_check_breach_exits_3(tmp_path):
    cfg = parse_config(config(scenario="verify_nash", controls={"tol": 1e-30}))
    code, files = run_scenario(cfg, out_dir=tmp_path, check=True)
    assert code == 3 and files
    assert run_scenario(cfg, out_dir=tmp_path / "b", check=False)[0] == 0


def test_io_failure_exits_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, files = run_scenario(parse_config(config()), out_dir=blocker / "sub")
    assert code == 4 and files == []


def test_hash_ignores_output_block_only():
    a = canonical_hash(config())
    assert a == canonical_hash(config(output={"dir": "elsewhere"}))
    assert a != canonical_hash(config(seed=2))


def test_output_dir_relative_to_config(tmp_path):
    shutil.copy(CONFIGS / "baseline_equilibria.toml", tmp_path / "c.toml")
    cfg = load_config(tmp_path / "c.toml")
    assert cfg.output_dir == tmp_path / "../out/baseline_equilibria"


def test_heterogeneous_agents_list(tmp_path):
    cfg = load_config(CONFIGS / "hetero_mc_validate.toml")
    assert cfg.params.n == 3 and not cfg.params.is_homogeneous()


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(-10**6, 10**6), finite, finite), min_size=1, max_size=20))
def test_csv_round_trip_bitwise(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    emit_report(Table("t", ("k", "x", "y"), rows), "csv", path, "0" * 64)
    _, cols, back = read_csv(path)
    assert cols == ("k", "x", "y")
    for (k, x, y), (k2, x2, y2) in zip(rows, back):
        assert k == k2
        assert np.float64(x).tobytes() == np.float64(float(x2)).tobytes()
        assert np.float64(y).tobytes() == np.float64(float(y2)).tobytes()


@settings(max_examples=100)
@given(st.dictionaries(st.text("abcdefgh", min_size=1, max_size=5), finite, max_size=10))
def test_json_round_trip_bitwise(tmp_path_factory, obj):
    path = tmp_path_factory.mktemp("json") / "s.json"
    emit_report(obj, "json", path, "0" * 64)
    back = read_json(path)
    assert back["schema_version"] == 1
    for k, v in obj.items():
        assert np.float64(back[k]).tobytes() == np.float64(v).tobytes()


def test_plot_round_trip(tmp_path):
    x, y = [1.0, 2.0, 3.0], [0.1, 1 / 3, 2.0**-40]
    emit_report(PlotData("p", x, y), "dat", tmp_path / "p.dat", "0" * 64)
    bx, by = read_plot(tmp_path / "p.dat")
    assert list(bx) == x and list(by) == y
    lines = (tmp_path / "p.dat").read_text().splitlines()
    assert lines[0].startswith("#") and len(lines[1].split()) == 2


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report({}, "xml", tmp_path / "a", "0")


def test_runs_are_byte_identical(tmp_path):
    cfg = load_config(CONFIGS / "baseline_tax_poa.toml")
    run_scenario(cfg, out_dir=tmp_path / "a")
    run_scenario(cfg, out_dir=tmp_path / "b")
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_ensemble_spill_round_trip(tmp_path):
    p = baseline(3)
    ens = sample_paths(p, closed_loop_profile(p), TimeGrid(2.0, 8), 17, seed=5, path_offset=3)
    bin_path, meta_path = save_ensemble(ens, tmp_path / "ens")
    assert bin_path.stat().st_size == 17 * 9 * 3 * 8
    meta = json.loads(meta_path.read_text())
    assert meta["shape"] == [17, 9, 3] and meta["seed"] == 5 and meta["dtype"] == "<f8"
    back = load_ensemble(tmp_path / "ens", p)
    assert np.array_equal(back.log_states, ens.log_states)
    assert back.profile == ens.profile and back.path_offset == 3
    raw = np.fromfile(bin_path, dtype="<f8")
    assert np.array_equal(raw, ens.log_states.ravel())
    with pytest.raises(ParameterError):
        load_ensemble(tmp_path / "ens", baseline(3, eta=0.4))


def test_cli_validate_and_entry_point(tmp_path):
    assert main(["validate", str(CONFIGS / "baseline_equilibria.toml")]) == 0
    exe = shutil.which("geogame")
    cmd = [exe] if exe else [sys.executable, "-m", "geogame.cli"]
    env = dict(os.environ, GEOGAME_THREADS="4")
    res = subprocess.run(
        cmd + ["run", str(CONFIGS / "convergence_dirac.toml"), "--check", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env=env,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "gaps.csv").exists()
