"""Command-line entry point ``geovlasov``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .runner import ConfigError, load_config, run_scenario, set_path, sweep


def _floats(text):
    return [float(s) for s in text.split(",") if s.strip()]


def _modes(text):
    """``1..9`` (odd and even included) or a comma list."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [float(s) if "." in s else int(s) for s in text.split(",") if s.strip()]


def _window(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("window must be START,END")
    return vals


# flag dest -> dotted config key
FLAG_KEYS = {
    "simulate": {
        "nx": "grid.nx", "nv": "grid.nv", "V": "grid.V", "L": "grid.L", "bc": "grid.bc",
        "T": "time.T", "dt": "time.dt", "cadence": "time.cadence",
        "initial": "initial.type", "mass": "initial.mass", "epsilon": "initial.epsilon",
        "mode": "initial.mode", "u": "initial.u", "expression": "initial.expression",
        "field_off": "simulate.field_off", "save_final": "simulate.save_final",
    },
    "linear": {
        "profile": "linear.profile", "modes": "linear.modes", "xi_grid": "linear.xi_grid",
        "T": "linear.T", "h": "linear.h", "epsilon": "linear.epsilon",
        "fit_window": "linear.fit_window", "lambda_prime": "linear.lambda_prime",
    },
    "penrose": {"profile": "penrose.profile"},
    "kernel": {"modes": "kernel.modes", "xi": "kernel.xi"},
    "field": {"density": "field.density", "eval_grid": "field.eval_grid", "gauss_alpha": "field.gauss_alpha"},
    "fit": {
        "input": "fit.input", "t_column": "fit.t_column", "y_column": "fit.y_column",
        "model": "fit.model", "window": "fit.window",
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geovlasov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML or JSON scenario file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--manifold", help="sphere | hyperbolic")
        p.add_argument("--workers", type=int, default=1, help="parallel workers for sweeps")
        return p

    p = common(sub.add_parser("simulate", help="nonlinear reduced Vlasov run"))
    for name, typ in (("--nx", int), ("--nv", int), ("--V", float), ("--L", float), ("--T", float),
                      ("--dt", float), ("--cadence", int), ("--mass", float), ("--epsilon", float),
                      ("--mode", float), ("--u", float)):
        p.add_argument(name, type=typ)
    p.add_argument("--bc", choices=["isolated", "periodic"])
    p.add_argument("--initial", choices=["maxwellian", "two_stream", "custom_expression"])
    p.add_argument("--expression")
    p.add_argument("--field-off", action="store_true", default=None)
    p.add_argument("--save-final", action="store_true", default=None)

    p = common(sub.add_parser("linear", help="Volterra mode solutions and decay fits"))
    p.add_argument("--profile", help="maxwellian:mass[,center,width] | two_stream:u[,mass]")
    p.add_argument("--modes", type=_modes)
    p.add_argument("--xi-grid", action="store_true", default=None)
    p.add_argument("--T", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--fit-window", type=_window)
    p.add_argument("--lambda-prime", type=float)

    p = common(sub.add_parser("penrose", help="Penrose stability report"))
    p.add_argument("--profile")

    p = common(sub.add_parser("kernel", help="kernel transform table"))
    p.add_argument("--modes", type=int, help="highest circle mode")
    p.add_argument("--xi", type=_floats, help="comma-separated line frequencies")

    p = common(sub.add_parser("field", help="potential and field of a surface density"))
    p.add_argument("--density", help="point | uniform | gaussian:<width>")
    p.add_argument("--eval-grid", type=int)
    p.add_argument("--gauss-alpha", type=_floats)

    p = common(sub.add_parser("fit", help="decay fit of a CSV column"))
    p.add_argument("--input")
    p.add_argument("--t-column")
    p.add_argument("--y-column")
    p.add_argument("--model", choices=["exponential", "algebraic"])
    p.add_argument("--window", type=_window)

    p = common(sub.add_parser("sweep", help="run a scenario over values of one config key"))
    p.add_argument("--axis", required=True, help="dotted config key, e.g. penrose.profile.mass")
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _config_from_args(args) -> dict:
    data = load_config(args.config) if args.config else {}
    if args.command != "sweep":
        data["kind"] = args.command
    if args.manifold:
        data["manifold"] = args.manifold
    for dest, key in FLAG_KEYS.get(args.command, {}).items():
        val = getattr(args, dest, None)
        if val is not None:
            set_path(data, key, val)
    if args.out:
        data.setdefault("outputs", {})["dir"] = str(args.out)
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = _config_from_args(args)
        if args.command == "sweep":
            if args.workers < 1:
                raise ConfigError("--workers", "must be >= 1")
            values = [_parse_value(v) for v in args.values.split(",")]
            out = args.out or Path(data.get("outputs", {}).get("dir", "out"))
            results = sweep(data, args.axis, values, out, args.workers)
            failed = [r for r in results if r["status"] != "ok"]
            print(f"sweep: {len(results) - len(failed)} ok, {len(failed)} failed -> {Path(out) / 'sweep.csv'}")
        else:
            manifest = run_scenario(data)
            print(json.dumps({"kind": manifest["kind"], "metrics": manifest["metrics"],
                              "files": manifest["files"]}, indent=2, default=str))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported with exit code 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
