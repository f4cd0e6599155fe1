"""Command line entry point: ``elastowave <command> [options]``.

Configuration is read from a plain ``key = value`` file (``#`` starts a
comment) or a JSON object; command line flags override file values.  Step
sizes and lags accept fractions such as ``1/50``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from . import experiment as ex
from .linalg import BACKEND
from .model import F_KINDS, G_KINDS, ModelSpec, preset

COMMANDS = ("run", "convergence-time", "convergence-space", "energy", "holder")
CONVERGENCE_COLUMNS = ("h", "k", "L2_u", "order_L2_u", "H1_u", "order_H1_u",
                       "L2_v", "order_L2_v", "samples")

EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: str = "test1"
    lam: Optional[float] = None
    mu: Optional[float] = None
    delta: Optional[float] = None
    F: Optional[str] = None
    G: Optional[str] = None
    initial: Optional[str] = None
    T: Optional[float] = None
    mesh_n: int = 32
    k_list: list = field(default_factory=lambda: [1 / 10, 1 / 20, 1 / 40, 1 / 80])
    k_ref: float = 1 / 320
    k: Optional[float] = None
    mesh_list: list = field(default_factory=lambda: [8, 16, 32])
    mesh_ref: int = 64
    lags: Optional[list] = None
    samples: int = 100
    seed: int = 0
    workers: int = 1
    out: str = "elastowave"
    format: str = "csv"

    def model(self) -> ModelSpec:
        over = {"lam": self.lam, "mu": self.mu, "delta": self.delta, "F_kind": self.F,
                "G_kind": self.G, "initial_kind": self.initial, "T": self.T}
        try:
            return preset(self.preset, **{k: v for k, v in over.items() if v is not None})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def step_for(self, command: str) -> float:
        if self.k is not None:
            return self.k
        return {"convergence-space": 1 / 200, "holder": 1 / 400}.get(command, 1 / 100)

    def resolved(self, command: str) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["k"] = self.step_for(command)
        if d["lags"] is None:
            d["lags"] = [m * d["k"] for m in (2, 4, 8, 16)]
        d.update({"lam": self.model().lam, "mu": self.model().mu, "delta": self.model().delta,
                  "F": self.model().F_kind, "G": self.model().G_kind,
                  "initial": self.model().initial_kind, "T": self.model().T})
        return d


# config key -> (attribute, parser)
def _number(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _integer(text) -> int:
    if isinstance(text, int):
        return text
    value = _number(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _list_of(parse):
    def inner(text):
        items = text if isinstance(text, list) else str(text).replace(",", " ").split()
        if not items:
            raise ValueError("empty list")
        return [parse(x) for x in items]
    return inner


def _choice(options):
    def inner(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return inner


KEYS = {
    "preset": ("preset", _choice(("test1", "test2"))),
    "lambda": ("lam", _number),
    "mu": ("mu", _number),
    "delta": ("delta", _number),
    "F": ("F", _choice(tuple(k for k in F_KINDS if k != "custom"))),
    "G": ("G", _choice(tuple(k for k in G_KINDS if k != "custom"))),
    "initial": ("initial", _choice(("test1", "test2", "zero"))),
    "T": ("T", _number),
    "mesh_n": ("mesh_n", _integer),
    "k_list": ("k_list", _list_of(_number)),
    "k_ref": ("k_ref", _number),
    "k": ("k", _number),
    "mesh_list": ("mesh_list", _list_of(_integer)),
    "mesh_ref": ("mesh_ref", _integer),
    "lags": ("lags", _list_of(_number)),
    "samples": ("samples", _integer),
    "seed": ("seed", _integer),
    "workers": ("workers", _integer),
    "out": ("out", str),
    "format": ("format", _choice(("csv", "json"))),
}


def read_config_file(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("JSON configuration must be an object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        data[key] = value
    return data


def parse_config(values: dict, command: str = "run") -> RunConfig:
    """Validate raw key/value pairs into a :class:`RunConfig`."""
    cfg = RunConfig()
    # preset first: it decides the model defaults
    for key in sorted(values, key=lambda k: k != "preset"):
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        attr, parse = KEYS[key]
        try:
            setattr(cfg, attr, parse(values[key]))
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key!r}: {exc}") from None
    validate(cfg, command)
    return cfg


def validate(cfg: RunConfig, command: str) -> None:
    if cfg.samples < 1:
        raise ConfigError(f"'samples' must be >= 1, got {cfg.samples}")
    if cfg.workers < 1:
        raise ConfigError(f"'workers' must be >= 1, got {cfg.workers}")
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise ConfigError("'seed' must be an unsigned 64-bit integer")
    if cfg.mesh_n < 1:
        raise ConfigError("'mesh_n' must be >= 1")
    spec = cfg.model()
    k = cfg.step_for(command)
    for name, value in (("k", k), ("k_ref", cfg.k_ref)):
        if value <= 0:
            raise ConfigError(f"{name!r} must be positive")
    try:
        if command == "convergence-time":
            for kk in cfg.k_list:
                ratio = kk / cfg.k_ref
                if abs(ratio - round(ratio)) > 1e-9 or ratio < 1 - 1e-9:
                    raise ConfigError(
                        f"'k_ref' = {ex.as_fraction(cfg.k_ref)} does not divide "
                        f"'k_list' entry {ex.as_fraction(kk)}")
            _convergence_config(cfg, spec, command)
        elif command == "convergence-space":
            _convergence_config(cfg, spec, command)
        else:
            ex.steps_for(spec.T, k)
            if command == "holder":
                lags = cfg.resolved(command)["lags"]
                if len(lags) < 3:
                    raise ConfigError("'lags' needs at least three entries")
                ex._holder_lags(lags, k)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _convergence_config(cfg: RunConfig, spec: ModelSpec, command: str) -> ex.ConvergenceConfig:
    if command == "convergence-time":
        return ex.ConvergenceConfig("temporal", spec, cfg.samples, cfg.seed, mesh_n=cfg.mesh_n,
                                    k_list=tuple(cfg.k_list), k_ref=cfg.k_ref)
    return ex.ConvergenceConfig("spatial", spec, cfg.samples, cfg.seed,
                                mesh_list=tuple(cfg.mesh_list), mesh_ref=cfg.mesh_ref,
                                k=cfg.step_for(command))


def fmt(x) -> str:
    """Six significant digits in scientific notation; empty for missing."""
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.5e}"


def _json_value(x):
    if x is None or isinstance(x, int):
        return x
    x = float(x)
    return None if math.isnan(x) else float(f"{x:.5e}")


def execute(cfg: RunConfig, command: str) -> tuple[list[str], list[list], dict]:
    """Run ``command``; return (columns, rows, extra metadata)."""
    spec = cfg.model()
    k = cfg.step_for(command)
    if command in ("convergence-time", "convergence-space"):
        conv = _convergence_config(cfg, spec, command)
        fn = ex.temporal_convergence if command == "convergence-time" else ex.spatial_convergence
        report = fn(conv, workers=cfg.workers)
        rows = [[r.h, r.k, r.e_L2_u, r.order_L2_u, r.e_H1_u, r.order_H1_u,
                 r.e_L2_v, r.order_L2_v, report.samples] for r in report.records]
        meta = dict(report.metadata, failed=report.failed, valid=report.valid,
                    fitted_orders=report.fitted_orders())
        return list(CONVERGENCE_COLUMNS), rows, meta
    if command == "energy":
        tr = ex.energy_trace(spec, cfg.mesh_n, k, cfg.samples, cfg.seed, cfg.workers)
        meta = {"failed": tr.failed, "valid": tr.failed <= ex.FAILURE_THRESHOLD * cfg.samples}
        return ["t", "mean_J"], [[t, j] for t, j in zip(tr.t, tr.mean_J)], meta
    if command == "holder":
        lags = cfg.resolved(command)["lags"]
        rep = ex.holder_diagnostic(spec, cfg.mesh_n, k, cfg.samples, lags, cfg.seed, cfg.workers)
        meta = dict(rep.metadata, slope_u=rep.slope_u, slope_v=rep.slope_v, failed=rep.failed,
                    valid=rep.failed <= ex.FAILURE_THRESHOLD * cfg.samples)
        return (["tau", "m_u", "m_v"],
                [[t, a, b] for t, a, b in zip(rep.lags, rep.m_u, rep.m_v)], meta)
    if command == "run":
        s = ex.run_summary(spec, cfg.mesh_n, k, cfg.samples, cfg.seed, cfg.workers)
        meta = {"failed": s.failed, "valid": s.failed <= ex.FAILURE_THRESHOLD * cfg.samples}
        return (["t", "mean_J", "rms_L2_u", "rms_L2_v"],
                [list(r) for r in zip(s.t, s.mean_J, s.rms_L2_u, s.rms_L2_v)], meta)
    raise ConfigError(f"unknown command {command!r}")


def write_outputs(cfg: RunConfig, command: str, columns, rows, meta) -> list[Path]:
    prefix = cfg.out
    table = Path(f"{prefix}_{command}.{cfg.format}")
    meta_path = Path(f"{prefix}_{command}.meta.json")
    if cfg.format == "csv":
        body = ",".join(columns) + "\n" + "".join(",".join(fmt(x) for x in r) + "\n" for r in rows)
    else:
        body = json.dumps({"columns": list(columns),
                           "rows": [[_json_value(x) for x in r] for r in rows]}, indent=1) + "\n"
    # workers and the output location do not affect the numbers, so they are
    # left out of the reproduction record
    resolved = {k: v for k, v in cfg.resolved(command).items() if k not in ("workers", "out")}
    meta_doc = {"command": command, "version": __version__, "backend": BACKEND,
                "config": resolved, "seed": cfg.seed, "results": meta}
    table.parent.mkdir(parents=True, exist_ok=True)
    with open(table, "w", newline="") as fh:
        fh.write(body)
    with open(meta_path, "w") as fh:
        json.dump(meta_doc, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    return [table, meta_path]


def _json_default(o):
    try:
        return float(o)
    except (TypeError, ValueError):
        return str(o)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="elastowave",
                description="Monte Carlo studies for the stochastic elastic wave solver.",
                epilog=f"configuration keys: {', '.join(sorted(KEYS))}")
    p.add_argument("command", choices=COMMANDS,
                   help="run: mean energy and RMS norms per step; convergence-time / "
                        "convergence-space: strong error tables; energy: mean energy "
                        "trace; holder: increment moments against the lag")
    p.add_argument("--config", help="key = value or JSON configuration file")
    p.add_argument("--seed", help="master seed (falls back to $ELASTOWAVE_SEED)")
    p.add_argument("--samples", help="number of Monte Carlo samples")
    p.add_argument("--workers", help="worker processes (does not change results)")
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key")
    p.add_argument("--version", action="version", version=__version__)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = read_config_file(args.config) if args.config else {}
        if "seed" not in values and os.environ.get("ELASTOWAVE_SEED"):
            values["seed"] = os.environ["ELASTOWAVE_SEED"]
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            values[key.strip()] = value.strip()
        for key in ("seed", "samples", "workers", "out", "format"):
            if getattr(args, key) is not None:
                values[key] = getattr(args, key)
        cfg = parse_config(values, args.command)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"elastowave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"elastowave: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO

    columns, rows, meta = execute(cfg, args.command)
    try:
        paths = write_outputs(cfg, args.command, columns, rows, meta)
    except OSError as exc:
        print(f"elastowave: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(path)
    if not meta.get("valid", True):
        print(f"elastowave: {meta.get('failed')} samples failed; report marked invalid",
              file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
