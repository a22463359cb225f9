"""Scenario configuration, orchestration and artifact emission."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .field import PointMass, gauss_flux, field_table, gaussian_cap, uniform_density
from .geometry import (
    Curvature,
    circle_fourier_quadrature,
    kernel_fourier_circle,
    kernel_fourier_line,
    line_fourier_quadrature,
)
from .linear import (
    EquilibriumProfile,
    VolterraProblem,
    fit_decay,
    gaussian_seed,
    hyperbolic_norm,
    penrose_check,
    probe_grid,
    solve_volterra,
)
from .vlasov import PhaseGrid, from_expression, initial_state, run

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("simulate", "linear", "penrose", "kernel", "field", "fit")
REQUIRED = ("kind", "manifold")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# --- configuration ---------------------------------------------------------------

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "grid": {"nx": 128, "nv": 256, "L": 16.0, "V": 8.0, "bc": None},
    "time": {"T": 20.0, "dt": 1.0 / 32.0, "cadence": 8},
    "initial": {
        "type": "maxwellian", "mass": 0.5, "epsilon": 0.01, "mode": 1, "u": 3.0,
        "width": 1.0, "x_width": 2.0, "expression": None,
    },
    "simulate": {"field_off": False, "save_final": False},
    "linear": {
        "profile": {"type": "maxwellian", "mass": 0.5}, "modes": [1, 3, 5, 7, 9], "xi_grid": False,
        "T": 100.0, "h": 1e-2, "epsilon": 1.0, "x_width": 1.0, "fit_window": None,
        "lambda_prime": 0.1, "stride": 10,
    },
    "penrose": {"profile": {"type": "maxwellian", "mass": 1.0}},
    "kernel": {"modes": 33, "xi": None},
    "field": {"density": "point", "eval_grid": 16, "gauss_alpha": [0.5, 1.0, 1.5, 2.5], "alpha_max": 3.0},
    "fit": {"input": None, "t_column": "t", "y_column": None, "model": "exponential", "window": None},
}


@dataclass
class ScenarioConfig:
    kind: str
    manifold: Curvature
    params: Dict[str, Any]
    output_dir: Path
    seed: int = 0
    raw: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a table")
        data = dict(data)
        if data.get("kind") == "fit":
            data.setdefault("manifold", "sphere")
        missing = [k for k in REQUIRED if k not in data]
        if missing:
            raise ConfigError(",".join(missing), f"missing required keys: {', '.join(missing)}")
        kind = data["kind"]
        if kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        try:
            manifold = Curvature.parse(data["manifold"])
        except ValueError as exc:
            raise ConfigError("manifold", str(exc)) from None
        params = {}
        for section in _sections(kind):
            given = data.get(section, {})
            if not isinstance(given, dict):
                raise ConfigError(section, "must be a table")
            unknown = set(given) - set(DEFAULTS[section])
            if unknown:
                raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown key")
            merged = copy.deepcopy(DEFAULTS[section])
            merged.update(given)
            params[section] = merged
        out = data.get("outputs", {}).get("dir", data.get("output_dir", "out"))
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed", "must be an integer")
        cfg = cls(kind, manifold, params, Path(out), seed, copy.deepcopy(data))
        _validate(cfg)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        out = {"kind": self.kind, "manifold": self.manifold.label, "seed": self.seed,
               "outputs": {"dir": str(self.output_dir)}}
        out.update(copy.deepcopy(self.params))
        return out


def _sections(kind):
    return {
        "simulate": ("grid", "time", "initial", "simulate"),
        "linear": ("linear",),
        "penrose": ("penrose",),
        "kernel": ("kernel",),
        "field": ("field",),
        "fit": ("fit",),
    }[kind]


def load_config(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text.decode())
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("--config", f"cannot parse {path.name}: {exc}") from None


def _positive(cfg, section, key, integer=False):
    val = cfg.params[section][key]
    ok = isinstance(val, int) if integer else isinstance(val, (int, float))
    if isinstance(val, bool) or not ok or val <= 0:
        kind = "a positive integer" if integer else "a positive number"
        raise ConfigError(f"{section}.{key}", f"must be {kind}")


def profile_from(value, key) -> EquilibriumProfile:
    try:
        if isinstance(value, str):
            return EquilibriumProfile.parse(value)
        if isinstance(value, dict):
            kind = value.get("type", "maxwellian")
            if kind == "maxwellian":
                return EquilibriumProfile.maxwellian(
                    float(value.get("mass", 1.0)), float(value.get("center", 0.0)), float(value.get("width", 1.0))
                )
            if kind == "two_stream":
                return EquilibriumProfile.two_stream(
                    float(value["u"]), float(value.get("mass", 1.0)), float(value.get("width", 1.0))
                )
            raise ValueError(f"unknown profile type {kind!r}")
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, "profile must be a string or a table")


def _validate(cfg: ScenarioConfig):
    p = cfg.params
    if cfg.kind == "simulate":
        for key in ("nx", "nv"):
            _positive(cfg, "grid", key, integer=True)
        for key in ("L", "V"):
            _positive(cfg, "grid", key)
        for key in ("T", "dt"):
            _positive(cfg, "time", key)
        _positive(cfg, "time", "cadence", integer=True)
        T, dt = p["time"]["T"], p["time"]["dt"]
        if abs(round(T / dt) * dt - T) > 1e-9 * T:
            raise ConfigError("time.dt", "T must be an integer multiple of dt")
        bc = p["grid"]["bc"]
        if bc not in (None, "isolated", "periodic"):
            raise ConfigError("grid.bc", "must be isolated or periodic")
        init = p["initial"]
        if init["type"] not in ("maxwellian", "two_stream", "custom_expression"):
            raise ConfigError("initial.type", "must be maxwellian, two_stream or custom_expression")
        if init["type"] == "custom_expression" and not isinstance(init["expression"], str):
            raise ConfigError("initial.expression", "required for custom_expression")
        if init["type"] != "custom_expression":
            _positive(cfg, "initial", "mass")
            _positive(cfg, "initial", "width")
            if not isinstance(init["epsilon"], (int, float)) or abs(init["epsilon"]) >= 1:
                raise ConfigError("initial.epsilon", "must be a number with |epsilon| < 1")
    elif cfg.kind == "linear":
        lin = p["linear"]
        profile_from(lin["profile"], "linear.profile")
        for key in ("T", "h", "lambda_prime"):
            _positive(cfg, "linear", key)
        _positive(cfg, "linear", "stride", integer=True)
        if not lin["xi_grid"]:
            modes = lin["modes"]
            if not isinstance(modes, list) or not modes:
                raise ConfigError("linear.modes", "must be a non-empty list")
            if cfg.manifold is Curvature.SPHERE and any(not float(m).is_integer() for m in modes):
                raise ConfigError("linear.modes", "circle modes must be integers")
        elif cfg.manifold is Curvature.SPHERE:
            raise ConfigError("linear.xi_grid", "the xi probe grid applies to the hyperbolic manifold")
        _window(lin["fit_window"], "linear.fit_window")
    elif cfg.kind == "penrose":
        profile_from(p["penrose"]["profile"], "penrose.profile")
    elif cfg.kind == "kernel":
        if cfg.manifold is Curvature.SPHERE:
            _positive(cfg, "kernel", "modes", integer=True)
    elif cfg.kind == "field":
        fp = p["field"]
        _positive(cfg, "field", "eval_grid", integer=True)
        _density_from(fp["density"], cfg.manifold)
        alphas = fp["gauss_alpha"]
        if not isinstance(alphas, list):
            raise ConfigError("field.gauss_alpha", "must be a list")
        if cfg.manifold is Curvature.SPHERE and any(not 0 < a < np.pi for a in alphas):
            raise ConfigError("field.gauss_alpha", "values must lie in (0, pi)")
    elif cfg.kind == "fit":
        fp = p["fit"]
        if not fp["input"]:
            raise ConfigError("fit.input", "path to a CSV file is required")
        if not fp["y_column"]:
            raise ConfigError("fit.y_column", "column to fit is required")
        if fp["model"] not in ("exponential", "algebraic"):
            raise ConfigError("fit.model", "must be exponential or algebraic")
        _window(fp["window"], "fit.window")


def _window(win, key):
    if win is None:
        return
    if not (isinstance(win, (list, tuple)) and len(win) == 2 and win[0] < win[1]):
        raise ConfigError(key, "must be [t_start, t_end] with t_start < t_end")


def _density_from(value, manifold):
    if not isinstance(value, str):
        raise ConfigError("field.density", "must be point, uniform or gaussian:<width>")
    kind, _, arg = value.partition(":")
    if kind == "point":
        return PointMass([0.0, 0.0, 1.0], manifold)
    if kind == "uniform":
        if manifold is not Curvature.SPHERE:
            raise ConfigError("field.density", "uniform density has infinite mass on H2")
        return uniform_density()
    if kind == "gaussian":
        try:
            width = float(arg)
        except ValueError:
            raise ConfigError("field.density", "gaussian needs a width, e.g. gaussian:0.2") from None
        if width <= 0:
            raise ConfigError("field.density", "gaussian width must be positive")
        return gaussian_cap(manifold, width, n_alpha=128, n_theta=64)
    raise ConfigError("field.density", "must be point, uniform or gaussian:<width>")


# --- output helpers --------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- scenario pipelines ----------------------------------------------------------

def _simulate(cfg, out: Path, files: list) -> dict:
    g, tm, init, opts = (cfg.params[s] for s in ("grid", "time", "initial", "simulate"))
    bc = g["bc"] or "isolated"
    grid = PhaseGrid(cfg.manifold, g["nx"], g["nv"], g["V"], g["L"], bc)
    if init["type"] == "custom_expression":
        f0 = from_expression(grid, init["expression"])
    else:
        if init["type"] == "maxwellian":
            prof = EquilibriumProfile.maxwellian(init["mass"], 0.0, init["width"])
        else:
            prof = EquilibriumProfile.two_stream(init["u"], init["mass"], init["width"])
        f0 = initial_state(grid, prof, init["epsilon"], init["mode"], init["x_width"])
    fT, records = run(f0, tm["T"], tm["dt"], tm["cadence"], field_off=opts["field_off"])

    rows = [r.row() for r in records]
    header = list(rows[0])
    files.append(out / "diagnostics.csv")
    write_csv(files[-1], header, ([r[h] for h in header] for r in rows))
    files.append(out / "rho_modes.csv")
    mode_rows = []
    for r in records:
        for i, m in enumerate(r.modes):
            label = i + 1 if grid.circle else (0.25, 0.5, 1.0, 2.0)[i]
            mode_rows.append((r.t, label, float(abs(m)), float(np.angle(m))))
    write_csv(files[-1], ["t", "k", "abs_rho_hat", "arg_rho_hat"], mode_rows)
    if opts["save_final"]:
        files.append(out / "f_final.bin")
        fT.values.astype("<f8").tofile(files[-1])
        files.append(out / "f_final.json")
        _write_json(files[-1], {
            "shape": [grid.nx, grid.nv], "dtype": "float64", "order": "row-major (x, v)",
            "manifold": grid.manifold.label, "nx": grid.nx, "nv": grid.nv, "V": grid.V, "L": grid.L,
            "bc": grid.bc, "x0": float(grid.x[0]), "dx": grid.dx, "dv": grid.dv, "time": fT.time,
        })

    first, last = records[0], records[-1]

    def drift(a, b):
        return abs(b - a) / abs(a) if a else abs(b - a)

    metrics = {
        "mass_drift": drift(first.N, last.N),
        "energy_drift": drift(first.E_consistent, last.E_consistent),
        "energy_unhalved_drift": drift(first.E_unhalved, last.E_unhalved),
        "entropy_drift": drift(first.S, last.S),
        "casimir_s2_drift": drift(first.casimirs["s2"], last.casimirs["s2"]),
        "min_f": last.min_f,
    }
    t = np.array([r.t for r in records])
    y = np.array([abs(r.modes[0]) for r in records])
    try:
        fit = fit_decay(t, y, "exponential", (min(3.0, t[-1] / 2), t[-1]))
        metrics["mode1_rate"] = fit.rate
        metrics["mode1_r2"] = fit.r2
    except ValueError:
        pass
    return metrics


def _linear(cfg, out: Path, files: list) -> dict:
    lin = cfg.params["linear"]
    f0 = profile_from(lin["profile"], "linear.profile")
    hyper = cfg.manifold is Curvature.HYPERBOLIC
    if hyper:
        seed = gaussian_seed(lin["epsilon"], mass=f0.mass, x_width=lin["x_width"])
    else:
        seed = gaussian_seed(lin["epsilon"], mass=f0.mass)
    modes = probe_grid() if lin["xi_grid"] else [float(m) if hyper else int(m) for m in lin["modes"]]
    sols = []
    for m in modes:
        prob = VolterraProblem.build(f0, cfg.manifold, m, seed, lin["T"], lin["h"])
        sols.append(solve_volterra(prob))
    t = prob.t
    stride = lin["stride"]
    rows = []
    for i in range(0, len(t), stride):
        for m, phi in zip(modes, sols):
            rows.append((t[i], m, float(abs(phi[i])), float(np.angle(phi[i]))))
    files.append(out / "volterra.csv")
    write_csv(files[-1], ["t", "mode", "abs_phi", "arg_phi"], rows)

    window = tuple(lin["fit_window"]) if lin["fit_window"] else None
    fits = {}
    for m, phi in zip(modes, sols):
        if not np.any(np.abs(phi)):
            continue
        try:
            fits[str(m)] = fit_decay(t, phi, "exponential", window or (min(3.0, t[-1] / 2), t[-1])).to_dict()
        except ValueError as exc:
            fits[str(m)] = {"error": str(exc)}
    summary = {"modes": fits}
    metrics = {}
    if lin["xi_grid"]:
        norm = hyperbolic_norm(np.abs(np.array(sols)).T, lin["lambda_prime"], xi=np.asarray(modes))
        alg = fit_decay(t, norm, "algebraic", window or (10.0, t[-1]))
        mask = (t >= 10.0)
        summary["hyperbolic_norm"] = {
            "lambda_prime": lin["lambda_prime"], "fit": alg.to_dict(),
            "max_t_times_norm": float(np.max(t[mask] * norm[mask])) if mask.any() else None,
        }
        files.append(out / "norm.csv")
        write_csv(files[-1], ["t", "norm"], ((t[i], norm[i]) for i in range(0, len(t), stride)))
        metrics.update(exponent=alg.slope, r2=alg.r2)
    else:
        first = fits.get(str(modes[0]), {})
        metrics.update(rate=first.get("rate"), r2=first.get("r2"))
    files.append(out / "decay_fit.json")
    _write_json(files[-1], summary)
    return metrics


def _penrose(cfg, out: Path, files: list) -> dict:
    report = penrose_check(profile_from(cfg.params["penrose"]["profile"], "penrose.profile"), cfg.manifold)
    files.append(out / "penrose.json")
    _write_json(files[-1], report.to_dict())
    return {"verdict": report.verdict, "margin": report.margin if report.critical_points else None}


def _kernel(cfg, out: Path, files: list) -> dict:
    kp = cfg.params["kernel"]
    rows = []
    if cfg.manifold is Curvature.SPHERE:
        for k in range(1, kp["modes"] + 1):
            exact = kernel_fourier_circle(k)
            quad = circle_fourier_quadrature(k)
            rows.append((k, exact, quad.real, abs(quad - exact)))
    else:
        xi = kp["xi"] if kp["xi"] is not None else np.geomspace(0.05, 20.0, 32).tolist()
        for x in xi:
            exact = kernel_fourier_line(x)
            quad = line_fourier_quadrature(x)
            rows.append((float(x), exact, quad, abs(quad - exact)))
    files.append(out / "kernel.csv")
    write_csv(files[-1], ["mode_or_xi", "analytic", "quadrature", "abs_err"], rows)
    return {"max_abs_err": max(r[3] for r in rows)}


def _field(cfg, out: Path, files: list) -> dict:
    fp = cfg.params["field"]
    rho = _density_from(fp["density"], cfg.manifold)
    n = fp["eval_grid"]
    top = np.pi if cfg.manifold is Curvature.SPHERE else fp["alpha_max"]
    alphas = (np.arange(n) + 0.5) * top / n
    thetas = 2 * np.pi * np.arange(n) / n
    rows = field_table(rho, alphas, thetas)
    files.append(out / "field.csv")
    write_csv(files[-1], ["alpha", "theta", "U", "F_alpha", "F_theta"], (r[:5] for r in rows))
    summary = {"density": fp["density"], "manifold": cfg.manifold.label,
               "max_tangency_residual": max(r[5] for r in rows), "flux": []}
    worst = 0.0
    if cfg.manifold is Curvature.SPHERE:
        for a in fp["gauss_alpha"]:
            flux = gauss_flux(rho, a)
            enclosed = _enclosed(rho, a)
            worst = max(worst, abs(flux - enclosed))
            summary["flux"].append({"alpha": a, "flux": flux, "enclosed": enclosed, "error": abs(flux - enclosed)})
    summary["max_flux_error"] = worst
    files.append(out / "field_summary.json")
    _write_json(files[-1], summary)
    return {"max_flux_error": worst, "max_tangency": summary["max_tangency_residual"]}


def _enclosed(rho, alpha):
    """Mass in the cap minus mass in the antipodal cap (the sphere's Green's
    function carries a compensating sink at the antipode)."""
    if isinstance(rho, PointMass):
        return rho.mass
    total = rho.mass()
    return rho.mass_within(alpha) - (total - rho.mass_within(np.pi - alpha))


def _fit(cfg, out: Path, files: list) -> dict:
    fp = cfg.params["fit"]
    path = Path(fp["input"])
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError("fit.input", f"cannot read {path}: {exc.strerror}") from None
    for col in (fp["t_column"], fp["y_column"]):
        if not rows or col not in rows[0]:
            raise ConfigError("fit.y_column" if col == fp["y_column"] else "fit.t_column", f"column {col!r} not found")
    t = np.array([float(r[fp["t_column"]]) for r in rows])
    y = np.array([float(r[fp["y_column"]]) for r in rows])
    fit = fit_decay(t, y, fp["model"], tuple(fp["window"]) if fp["window"] else None)
    files.append(out / "fit.json")
    _write_json(files[-1], fit.to_dict())
    return {"rate": fit.rate, "r2": fit.r2}


PIPELINES = {
    "simulate": _simulate, "linear": _linear, "penrose": _penrose,
    "kernel": _kernel, "field": _field, "fit": _fit,
}


def run_scenario(cfg, out_dir=None) -> dict:
    """Run one scenario, write its files plus ``manifest.json``; returns the manifest."""
    if isinstance(cfg, dict):
        cfg = ScenarioConfig.from_dict(cfg)
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files: List[Path] = []
    start = time.perf_counter()
    try:
        metrics = PIPELINES[cfg.kind](cfg, out, files)
        manifest = {
            "kind": cfg.kind,
            "config": cfg.to_dict(),
            "version": __version__,
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_time_s": time.perf_counter() - start,
            "metrics": metrics,
            "checksums": {p.name: sha256(p) for p in files if p.suffix == ".csv"},
            "files": [p.name for p in files],
        }
        files.append(out / "manifest.json")
        _write_json(files[-1], manifest)
    except BaseException:
        for p in files:
            p.unlink(missing_ok=True)
        raise
    return manifest


# --- sweeps ----------------------------------------------------------------------

def set_path(data: dict, dotted: str, value):
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = copy.deepcopy(DEFAULTS.get(k, {})) if node is data else {}
            node[k] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(dotted, f"{k} is not a table")
        node = nxt
    node[keys[-1]] = value


def get_path(data: dict, dotted: str):
    node = data
    for k in dotted.split("."):
        if not isinstance(node, dict) or k not in node:
            raise KeyError(dotted)
        node = node[k]
    return node


def _sweep_one(args):
    i, template, axis, value, out = args
    data = copy.deepcopy(template)
    set_path(data, axis, value)
    run_dir = Path(out) / f"run_{i:03d}"
    try:
        manifest = run_scenario(data, run_dir)
        return {"index": i, "value": value, "status": "ok", "metrics": manifest["metrics"], "dir": str(run_dir)}
    except Exception as exc:  # noqa: BLE001 - recorded per run, the sweep continues
        return {"index": i, "value": value, "status": f"error: {type(exc).__name__}: {exc}", "metrics": {},
                "dir": str(run_dir)}


def sweep(template: dict, axis: str, values, out_dir, workers: int = 1) -> list:
    """Run one scenario per value of ``axis`` and aggregate ``sweep.csv``."""
    cfg = ScenarioConfig.from_dict(template)
    probe = cfg.to_dict()
    try:
        current = get_path(probe, axis)
    except KeyError:
        raise ConfigError(axis, "sweep axis does not name a config key") from None
    if isinstance(current, (dict, list)):
        raise ConfigError(axis, "sweep axis must name a scalar key")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(i, probe, axis, v, out) for i, v in enumerate(values)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    metric_names = sorted({k for r in results for k in r["metrics"]})
    write_csv(
        out / "sweep.csv",
        ["index", axis, "status"] + metric_names,
        ([r["index"], r["value"], r["status"]] + [r["metrics"].get(m, "") for m in metric_names] for r in results),
    )
    return results
