"""Scenario configs, batch runners and deterministic report files.

A config is a TOML file::

    schema_version = 1
    scenario = "equilibria"     # equilibria | verify_nash | mc_validate | convergence | tax_poa
    seed = 7                    # always explicit

    [model]
    rho = 0.05
    N = 10                      # with a single [model.agent] block
    [model.agent]
    gamma = 0.1
    mu = 0.2
    nu = 0.1
    theta = 1.0
    eta = 0.5
    # or heterogeneous: one [[model.agents]] table per agent and no N

    [controls]                  # scenario specific, see CONTROL_DEFAULTS
    [output]
    dir = "out/baseline"

Every emitted file starts with a header carrying the package version and the
SHA-256 of the canonical config (the output block excluded), so outputs of
the same config are byte-identical wherever they are written.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .equilibria import (
    GAME,
    PLANNER as PLANNER_KIND,
    closed_loop_profile,
    game_value_coefficients,
    mfg_value_coefficients,
    open_loop_profile,
    planner_profile,
    planner_value_coefficients,
    equilibrium_report,
    pigouvian_tax,
    poa_ratio,
    price_of_anarchy,
    price_of_anarchy_limit,
    social_planner_rate,
    taxed_closed_loop_rate,
)
from .measures import DiscreteMeasure
from .mfg import (
    convergence_identity,
    convergence_sweep,
    empirical_population_measure,
    loglog_slope,
    master_residual,
)
from .model import AgentParams, GameParams, ParameterError, StrategyProfile, UtilityConvention
from .simulation import (
    PLANNER,
    EnsembleTooLargeError,
    PathEnsemble,
    TimeGrid,
    default_horizon,
    payoff_bias_terms,
    payoff_samples,
    sample_paths,
    summarize_payoff,
)
from .verification import analytic_payoff, hjb_residual, nash_gap

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
SCENARIOS = ("equilibria", "verify_nash", "mc_validate", "convergence", "tax_poa")
AGENT_KEYS = ("gamma", "mu", "nu", "theta", "eta", "q0")
STATE_GRID = (0.1, 0.5, 1.0, 2.0, 10.0)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVARIANT = 2
EXIT_CHECK = 3
EXIT_IO = 4

CONTROL_DEFAULTS: dict[str, dict[str, Any]] = {
    "equilibria": {"tol": 1e-10},
    "verify_nash": {"tol": 1e-8},
    "mc_validate": {
        "n_paths": 10_000,
        "n_steps": 400,
        "t_max": None,
        "rel_trunc": 1e-4,
        "chunk": 2_000,
        "profile": "closed_loop",
    },
    "convergence": {
        "Ns": [10, 100, 1000],
        "measure": "dirac",
        "q": 1.0,
        "t": 0.25,
        "tol": 1e-6,
    },
    "tax_poa": {"Ns": [100, 300, 1000, 3000, 10000, 30000, 100000], "tol": 1e-12, "slope_tol": 0.01},
}


class ConfigError(ValueError):
    """Unparseable config or missing / unknown keys."""


class InvariantError(RuntimeError):
    """A scenario produced a result that violates a model invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    params: GameParams
    scenario: str
    seed: int
    controls: Mapping[str, Any]
    output_dir: Optional[Path]
    config_hash: str
    source: Mapping[str, Any] = field(repr=False, default_factory=dict)


def canonical_hash(raw: Mapping[str, Any]) -> str:
    """SHA-256 of the sorted, compact JSON of the config without its output block."""
    body = {k: v for k, v in raw.items() if k != "output"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _agent(section: str, block: Any) -> AgentParams:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{section} must be a table")
    unknown = set(block) - set(AGENT_KEYS)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    missing = [k for k in AGENT_KEYS[:-1] if k not in block]
    if missing:
        raise ConfigError(f"{section}: missing keys {missing}")
    values = {k: _number(section, k, v) for k, v in block.items()}
    return AgentParams(**values)


def _model(raw: Any) -> GameParams:
    if not isinstance(raw, Mapping):
        raise ConfigError("missing [model] table")
    unknown = set(raw) - {"rho", "N", "agent", "agents"}
    if unknown:
        raise ConfigError(f"model: unknown keys {sorted(unknown)}")
    if "rho" not in raw:
        raise ConfigError("model: missing key 'rho'")
    rho = _number("model", "rho", raw["rho"])
    if ("agent" in raw) == ("agents" in raw):
        raise ConfigError("model: give exactly one of [model.agent] (with N) or [[model.agents]]")
    if "agent" in raw:
        n = raw.get("N")
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError("model: homogeneous shortcut needs an integer N")
        if n < 1:
            raise ParameterError(f"N must be at least 1, got {n}")
        agents = (_agent("model.agent", raw["agent"]),) * n
    else:
        if "N" in raw:
            raise ConfigError("model: N is implied by the agents list")
        blocks = raw["agents"]
        if not isinstance(blocks, list) or not blocks:
            raise ConfigError("model.agents must be a non-empty array of tables")
        agents = tuple(_agent(f"model.agents[{k}]", b) for k, b in enumerate(blocks))
    return GameParams(agents=agents, rho=rho)


def _controls(scenario: str, raw: Any) -> dict[str, Any]:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigError("[controls] must be a table")
    defaults = CONTROL_DEFAULTS[scenario]
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"controls: unknown keys {sorted(unknown)} for scenario {scenario!r}")
    out = dict(defaults)
    out.update(raw)
    for key in ("n_paths", "n_steps", "chunk"):
        if key in out and (isinstance(out[key], bool) or not isinstance(out[key], int) or out[key] < 1):
            raise ConfigError(f"controls.{key} must be a positive integer")
    if "Ns" in out:
        ns = out["Ns"]
        if not isinstance(ns, list) or len(ns) < 2 or any(
            isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in ns
        ):
            raise ConfigError("controls.Ns must list at least two positive integers")
        if len(set(ns)) != len(ns):
            raise ConfigError("controls.Ns must not repeat")
    for key in ("tol", "t_max", "rel_trunc", "q", "t", "slope_tol"):
        if out.get(key) is not None:
            out[key] = _number("controls", key, out[key])
    if scenario == "convergence" and out["measure"] not in ("dirac", "empirical"):
        raise ConfigError("controls.measure must be 'dirac' or 'empirical'")
    if scenario == "mc_validate":
        prof = out["profile"]
        if not (prof in ("closed_loop", "open_loop", "planner") or isinstance(prof, list)):
            raise ConfigError("controls.profile must be closed_loop, open_loop, planner or a list of rates")
    return out


def parse_config(raw: Mapping[str, Any], base_dir: Optional[Path] = None) -> ScenarioConfig:
    """Validate a config mapping.

    Raises :class:`ConfigError` for structural problems and
    :class:`~geogame.model.ParameterError` for values outside the model's domain.
    """
    unknown = set(raw) - {"schema_version", "scenario", "seed", "model", "controls", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    seed = raw.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**63:
        raise ConfigError("seed must be given explicitly as a nonnegative integer")
    params = _model(raw.get("model"))
    controls = _controls(scenario, raw.get("controls"))
    if isinstance(controls.get("profile"), list):
        rates = controls["profile"]
        if len(rates) != params.n:
            raise ConfigError(f"controls.profile has {len(rates)} rates for N={params.n}")
        StrategyProfile(tuple(_number("controls", "profile", r) for r in rates))
    out = raw.get("output")
    out_dir = None
    if out is not None:
        if not isinstance(out, Mapping) or set(out) - {"dir"} or not isinstance(out.get("dir"), str):
            raise ConfigError("[output] must hold a single string key 'dir'")
        out_dir = Path(out["dir"])
        if base_dir is not None and not out_dir.is_absolute():
            out_dir = base_dir / out_dir
    return ScenarioConfig(params, scenario, seed, controls, out_dir, canonical_hash(raw), raw)


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, base_dir=path.parent)


# --- results and emission ----------------------------------------------------


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple]


@dataclass
class PlotData:
    name: str
    x: Sequence[float]
    y: Sequence[float]


@dataclass
class ScenarioResult:
    tables: list[Table] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    plots: list[PlotData] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    documents: dict[str, dict[str, Any]] = field(default_factory=dict)

    @property
    def breached(self) -> list[str]:
        return sorted(k for k, ok in self.checks.items() if not ok)


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    s = str(v)
    if any(c in s for c in ",\n\"#"):
        raise ValueError(f"cannot write {s!r} to CSV")
    return s


def parse_value(s: str) -> Any:
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "-0":
        return -0.0  # int() would drop the sign
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def header_line(config_hash: str) -> str:
    return f"# geogame {__version__} config_sha256={config_hash}"


def _jsonable(v: Any) -> Any:
    if isinstance(v, Mapping):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else format(f)
    return v


def render_csv(table: Table, config_hash: str) -> str:
    lines = [header_line(config_hash), ",".join(table.columns)]
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValueError(f"row of length {len(row)} in table with {len(table.columns)} columns")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def render_json(obj: Mapping[str, Any], config_hash: str) -> str:
    body = {"schema_version": SCHEMA_VERSION, "artifact_version": __version__, "config_sha256": config_hash}
    body.update(_jsonable(obj))
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_plot(plot: PlotData, config_hash: str) -> str:
    lines = [header_line(config_hash)]
    lines += [f"{format_value(float(x))} {format_value(float(y))}" for x, y in zip(plot.x, plot.y)]
    return "\n".join(lines) + "\n"


def emit_report(results: Table | Mapping[str, Any] | PlotData, fmt: str, path: str | os.PathLike, config_hash: str) -> Path:
    """Write one report file; ``fmt`` is ``csv``, ``json`` or ``dat``."""
    if fmt == "csv":
        text = render_csv(results, config_hash)
    elif fmt == "json":
        text = render_json(results, config_hash)
    elif fmt == "dat":
        text = render_plot(results, config_hash)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def read_csv(path: str | os.PathLike) -> tuple[str, tuple[str, ...], list[tuple]]:
    """Inverse of the CSV writer: ``(header line, columns, rows)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise ValueError(f"{path}: not a geogame CSV")
    cols = tuple(lines[1].split(","))
    rows = [tuple(parse_value(s) for s in line.split(",")) for line in lines[2:]]
    return lines[0], cols, rows


def read_json(path: str | os.PathLike) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_plot(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, 0], data[:, 1]


def render_result(result: ScenarioResult, config_hash: str) -> dict[str, str]:
    """File name to content, for every file the scenario emits."""
    files = {f"{t.name}.csv": render_csv(t, config_hash) for t in result.tables}
    files["summary.json"] = render_json(
        {"summary": result.summary, "checks": result.checks}, config_hash
    )
    files.update({f"{name}.json": render_json(doc, config_hash) for name, doc in result.documents.items()})
    files.update({f"{p.name}.dat": render_plot(p, config_hash) for p in result.plots})
    return files


def write_files(files: Mapping[str, str], out_dir: Path) -> list[Path]:
    """All-or-nothing write: stage every file, then rename into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged: list[tuple[Path, Path]] = []
    try:
        for name, text in files.items():
            final = out_dir / name
            tmp = out_dir / f".{name}.tmp"
            tmp.write_text(text, encoding="utf-8")
            staged.append((tmp, final))
    except OSError:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


# --- ensemble spill ------------------------------------------------------------


def params_hash(params: GameParams) -> str:
    body = {"rho": params.rho, "agents": [[getattr(a, k) for k in AGENT_KEYS] for a in params.agents]}
    return hashlib.sha256(json.dumps(body, separators=(",", ":")).encode()).hexdigest()


def save_ensemble(ensemble: PathEnsemble, path: str | os.PathLike) -> tuple[Path, Path]:
    """Flat little-endian float64 ``.bin`` plus a ``.json`` sidecar."""
    base = Path(path)
    bin_path, meta_path = base.with_suffix(".bin"), base.with_suffix(".json")
    ensemble.log_states.astype("<f8", copy=False).tofile(bin_path)
    meta = {
        "shape": list(ensemble.log_states.shape),
        "dtype": "<f8",
        "seed": ensemble.seed,
        "path_offset": ensemble.path_offset,
        "method": ensemble.method,
        "antithetic": ensemble.antithetic,
        "t_max": ensemble.grid.t_max,
        "n_steps": ensemble.grid.n_steps,
        "profile": list(ensemble.profile.rates),
        "params_sha256": params_hash(ensemble.params),
    }
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return bin_path, meta_path


def load_ensemble(path: str | os.PathLike, params: GameParams) -> PathEnsemble:
    base = Path(path)
    meta = json.loads(base.with_suffix(".json").read_text(encoding="utf-8"))
    if meta["params_sha256"] != params_hash(params):
        raise ParameterError("spilled ensemble was generated with different parameters")
    data = np.fromfile(base.with_suffix(".bin"), dtype="<f8")
    shape = tuple(meta["shape"])
    if data.size != math.prod(shape):
        raise ValueError("spill file size does not match its sidecar shape")
    return PathEnsemble(
        log_states=data.reshape(shape).astype(float),
        grid=TimeGrid(meta["t_max"], meta["n_steps"]),
        seed=meta["seed"],
        profile=StrategyProfile(tuple(meta["profile"])),
        params=params,
        path_offset=meta["path_offset"],
        method=meta["method"],
        antithetic=meta["antithetic"],
    )


# --- scenarios -----------------------------------------------------------------


def _rel(x: float, ref: float) -> float:
    return abs(x - ref) / abs(ref) if ref != 0 else abs(x)


def residual_table(params: GameParams) -> tuple[Table, float, dict[str, Optional[float]]]:
    """HJB, planner-HJB and master residuals over the state grid."""
    rows, worst = [], 0.0
    n = params.n
    game = [game_value_coefficients(i, params) for i in range(n)]
    for i, co in enumerate(game):
        for q in STATE_GRID:
            for qh in STATE_GRID:
                rows.append(("game", i, q, qh, hjb_residual(GAME, (q, qh), co, params, i=i)))
    plan = planner_value_coefficients(params)
    for q in STATE_GRID:
        rows.append(("planner", -1, q, q, hjb_residual(PLANNER_KIND, np.full(n, q), plan, params)))
    deviations: dict[str, Optional[float]] = {
        "game_c_max_abs_deviation": max(abs(c.c_deviation) for c in game),
        "planner_c_deviation": plan.c_deviation,
        "master_c_deviation": None,
    }
    if params.is_homogeneous():
        master = mfg_value_coefficients(params)
        m = DiscreteMeasure.from_atoms(STATE_GRID)
        for q in STATE_GRID:
            rows.append(("master", -1, q, math.exp(m.mean_log()), master_residual(q, m, master, params)))
        deviations["master_c_deviation"] = master.c_deviation
    worst = max(abs(r[-1]) for r in rows)
    return Table("residuals", ("equation", "agent", "q", "q_hat", "residual"), rows), worst, deviations


def run_equilibria(cfg: ScenarioConfig) -> ScenarioResult:
    params, tol = cfg.params, cfg.controls["tol"]
    rep = equilibrium_report(params)
    table = Table(
        "equilibria",
        ("agent", "alpha_cl", "alpha_ol", "alpha_sp", "tau", "growth"),
        [
            (i, rep.alpha_cl[i], rep.alpha_ol[i], rep.alpha_sp[i], rep.tau[i], rep.growth[i])
            for i in range(params.n)
        ],
    )
    res, worst, devs = residual_table(params)
    summary = {"N": params.n, "rho": params.rho, "poa": rep.poa, "max_abs_residual": worst}
    summary.update(devs)
    checks = {"ordering": all(rep.ordering_ok), "residuals": worst <= tol}
    return ScenarioResult([table, res], summary, [], checks)


def run_verify_nash(cfg: ScenarioConfig) -> ScenarioResult:
    params, tol = cfg.params, cfg.controls["tol"]
    rows = []
    cases = [
        ("closed_loop", closed_loop_profile(params), UtilityConvention.INCLUSIVE),
        ("open_loop", open_loop_profile(params), UtilityConvention.EXCLUSIVE),
        ("planner", planner_profile(params), UtilityConvention.INCLUSIVE),
    ]
    reports = {}
    for name, prof, conv in cases:
        rep = nash_gap(prof, params, conv)
        reports[name] = rep
        for i in range(params.n):
            rows.append(
                (name, conv.value, i, prof[i], rep.best_rates[i], rep.gains[i], rep.rel_deviations[i])
            )
    table = Table(
        "nash_gap",
        ("profile", "convention", "agent", "alpha", "best_response", "gain", "rel_deviation"),
        rows,
    )
    externality = params.n >= 2 and any(a.eta > 0 for a in params.agents)
    checks = {
        "closed_loop_certified": reports["closed_loop"].max_rel_deviation <= tol,
        "open_loop_certified": reports["open_loop"].max_rel_deviation <= tol,
    }
    if externality:
        checks["planner_not_nash"] = min(reports["planner"].gains) > 0
    summary = {
        name: {"max_gain": r.max_gain, "max_rel_deviation": r.max_rel_deviation}
        for name, r in reports.items()
    }
    return ScenarioResult([table], summary, [], checks)


def _mc_profile(cfg: ScenarioConfig) -> StrategyProfile:
    prof = cfg.controls["profile"]
    if isinstance(prof, list):
        return StrategyProfile(tuple(float(r) for r in prof))
    return {"closed_loop": closed_loop_profile, "open_loop": open_loop_profile, "planner": planner_profile}[prof](
        cfg.params
    )


def mc_validate(
    params: GameParams,
    profile: StrategyProfile,
    seed: int,
    n_paths: int,
    n_steps: int,
    t_max: Optional[float] = None,
    rel_trunc: float = 1e-4,
    chunk: int = 2_000,
    conv: UtilityConvention = UtilityConvention.INCLUSIVE,
    workers: Optional[int] = None,
) -> list[dict[str, Any]]:
    """Oracle-vs-Monte-Carlo rows for every agent and the planner.

    The horizon is the largest one needed for a truncation bound below
    ``rel_trunc * |J|`` across targets; paths are generated in chunks and
    share one ensemble.  ``mc`` is the raw trapezoid estimate and ``mc_corrected``
    removes its exactly known quadrature bias.
    """
    targets = list(range(params.n)) + [PLANNER]
    if t_max is None:
        t_max = max(default_horizon(t, profile, params, conv, rel_tol=rel_trunc) for t in targets)
    grid = TimeGrid(float(t_max), int(n_steps))
    samples = {t: [] for t in targets}
    for start in range(0, n_paths, chunk):
        ens = sample_paths(params, profile, grid, min(chunk, n_paths - start), seed, path_offset=start, workers=workers)
        for t in targets:
            samples[t].append(payoff_samples(t, ens, params, conv))
    rows = []
    for t in targets:
        trunc, bias = payoff_bias_terms(t, profile, params, conv, grid)
        est = summarize_payoff(np.concatenate(samples[t]), trunc, bias)
        exact = analytic_payoff(t, profile, params, conv)
        corrected = est.estimate - est.quadrature_bias
        band = 3.0 * est.standard_error + est.truncation_bound
        rows.append(
            {
                "target": "planner" if t == PLANNER else str(t),
                "analytic": exact,
                "mc": est.estimate,
                "mc_corrected": corrected,
                "standard_error": est.standard_error,
                "truncation_bound": est.truncation_bound,
                "quadrature_bias": est.quadrature_bias,
                "t_max": grid.t_max,
                "within": abs(corrected - exact) <= band,
            }
        )
    return rows


def run_mc_validate(cfg: ScenarioConfig) -> ScenarioResult:
    c = cfg.controls
    rows = mc_validate(
        cfg.params, _mc_profile(cfg), cfg.seed, c["n_paths"], c["n_steps"], c["t_max"], c["rel_trunc"], c["chunk"]
    )
    cols = tuple(rows[0])
    table = Table("mc_validate", cols, [tuple(r[k] for k in cols) for r in rows])
    checks = {"mc_within_band": all(r["within"] for r in rows)}
    summary = {"n_paths": c["n_paths"], "n_steps": c["n_steps"], "t_max": rows[0]["t_max"]}
    return ScenarioResult([table], summary, [], checks)


def run_convergence(cfg: ScenarioConfig) -> ScenarioResult:
    c, params = cfg.controls, cfg.params
    if not params.is_homogeneous():
        raise InvariantError("convergence scenario needs homogeneous agents")
    ns = c["Ns"]
    if c["measure"] == "dirac":
        m = DiscreteMeasure.dirac(c["q"])
        sweep = convergence_sweep(ns, m, params)
        slope_tol = c["tol"]
        identity = [convergence_identity(m, n, params) for n in ns]
    else:
        sweep = convergence_sweep(
            ns, None, params, measure_for=lambda n: empirical_population_measure(n, params, c["t"], cfg.seed)
        )
        slope_tol = 0.1
        identity = [
            convergence_identity(DiscreteMeasure.from_log_points([ml]), n, params)
            for n, ml in zip(ns, sweep.mean_logs)
        ]
    identity_err = max(abs(g - e) for g, e in zip(sweep.gaps, identity))
    table = Table("gaps", ("N", "gap"), list(zip(sweep.ns, sweep.gaps)))
    summary = {"slope": sweep.slope, "measure": c["measure"], "max_identity_error": identity_err}
    checks = {"slope": abs(sweep.slope + 1.0) <= slope_tol, "identity": identity_err <= 1e-12}
    plot = PlotData("gaps", [float(n) for n in sweep.ns], list(sweep.gaps))
    slope_doc = {"slope": sweep.slope, "Ns": list(sweep.ns)}
    return ScenarioResult([table], summary, [plot], checks, {"slope": slope_doc})


def run_tax_poa(cfg: ScenarioConfig) -> ScenarioResult:
    params, c = cfg.params, cfg.controls
    rows, worst = [], 0.0
    for i in range(params.n):
        tau = pigouvian_tax(i, params)
        taxed = taxed_closed_loop_rate(i, tau, params)
        sp = social_planner_rate(i, params)
        err = _rel(taxed, sp)
        worst = max(worst, err)
        rows.append((i, tau, taxed, sp, err))
    tables = [Table("tax", ("agent", "tau", "alpha_taxed", "alpha_sp", "rel_error"), rows)]
    checks = {"tax_alignment": worst <= c["tol"]}
    summary: dict[str, Any] = {"max_tax_rel_error": worst}
    plots = []
    if params.is_homogeneous():
        ag = params.agents[0]
        ns = c["Ns"]
        limit = price_of_anarchy_limit(params)
        poas = [price_of_anarchy(GameParams(agents=(ag,) * n, rho=params.rho)) for n in ns]
        gaps = [limit - p for p in poas]
        tables.append(Table("poa", ("N", "poa", "limit_gap"), list(zip(ns, poas, gaps))))
        plots.append(PlotData("poa", [float(n) for n in ns], poas))
        poa = price_of_anarchy(params)
        cl, sp = closed_loop_profile(params), planner_profile(params)
        inc = UtilityConvention.INCLUSIVE
        welfare_gap = analytic_payoff(PLANNER, sp, params, inc) - analytic_payoff(PLANNER, cl, params, inc)
        summary.update(
            poa=poa,
            poa_limit=limit,
            welfare_gap=welfare_gap,
            limit_slope=loglog_slope(ns, gaps) if all(g > 0 for g in gaps) else None,
        )
        if ag.eta > 0:
            checks["poa_positive"] = all(p > 0 for p in poas)
            checks["limit_slope"] = summary["limit_slope"] is not None and abs(summary["limit_slope"] + 1) <= c["slope_tol"]
            if params.is_homogeneous(q0=True) and ag.q0 == 1.0:
                checks["poa_matches_welfare_gap"] = abs(poa - welfare_gap) <= c["tol"]
    return ScenarioResult(tables, summary, plots, checks)


RUNNERS = {
    "equilibria": run_equilibria,
    "verify_nash": run_verify_nash,
    "mc_validate": run_mc_validate,
    "convergence": run_convergence,
    "tax_poa": run_tax_poa,
}


def execute(cfg: ScenarioConfig) -> ScenarioResult:
    return RUNNERS[cfg.scenario](cfg)


def run_scenario(
    cfg: ScenarioConfig, out_dir: Optional[Path] = None, check: bool = False, log=None
) -> tuple[int, list[Path]]:
    """Run, write every output file or none, and map the outcome to an exit code."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    if out_dir is None:
        out_dir = Path("geogame_out") / f"{cfg.scenario}-{cfg.config_hash[:12]}"
    try:
        result = execute(cfg)
    except (ParameterError, InvariantError, EnsembleTooLargeError, ArithmeticError) as exc:
        log(f"invariant violation: {exc}")
        return EXIT_INVARIANT, []
    try:
        written = write_files(render_result(result, cfg.config_hash), Path(out_dir))
    except OSError as exc:
        log(f"I/O failure: {exc}")
        return EXIT_IO, []
    if check and result.breached:
        log("tolerance breached: " + ", ".join(result.breached))
        return EXIT_CHECK, written
    return EXIT_OK, written
