"""Command-line front end: reports, sweeps, Monte-Carlo checks and optimization.

Exit codes: 0 success, 1 verification failed, 2 bad config or arguments,
3 degenerate measurement, 4 infeasible optimization.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .cluster import SqueezingSpec
from .gaussian_oracle import analytic_added_noise, run_protocol_mc
from .optimizer import (
    Family,
    InfeasibleOptimization,
    OptimizerSettings,
    classify_configuration,
    minimize_weights,
)
from .protocol import (
    CANONICAL_PHASES,
    FREE_WEIGHT_NAMES,
    ProtocolConfig,
    added_noise_fidelity,
    canonical_constraints,
    check_bqt_condition,
    db_to_variance,
    error_variances,
    run_bqt,
)
from .quad_algebra import DegenerateMeasurementError

EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_INFEASIBLE = 4

SWEEP_COLUMNS = ("db", "var_XB", "var_XA", "var_YB", "var_YA", "total", "fidelity_A", "fidelity_B")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    weights: dict[str, float] = field(default_factory=lambda: dict.fromkeys(FREE_WEIGHT_NAMES, 0.0))
    full_graph: list[list[float]] | None = None
    phases: list[float] = field(default_factory=lambda: list(CANONICAL_PHASES))
    beta0: float = 1.0
    squeezing_db: float = 10.0
    samples: int = 100_000
    seed: int = 42
    input_means: dict[str, list[float]] | None = None

    def to_protocol(self) -> ProtocolConfig:
        means = None
        if self.input_means is not None:
            means = (tuple(self.input_means["a"]), tuple(self.input_means["b"]))
        return ProtocolConfig(
            free_weights=tuple(self.weights[k] for k in FREE_WEIGHT_NAMES),
            full_graph=None if self.full_graph is None else np.array(self.full_graph),
            phases=tuple(self.phases),
            beta0=self.beta0,
            squeezing_db=self.squeezing_db,
            input_means=means,
        )


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: non-finite number")
    return float(value)


def _vector(value: Any, path: str, length: int) -> list[float]:
    if not isinstance(value, list) or len(value) != length:
        raise ConfigError(f"{path}: expected a list of {length} numbers")
    return [_number(v, f"{path}[{k}]") for k, v in enumerate(value)]


def parse_config(text: str) -> RunConfig:
    """Strictly parse a JSON run config, filling defaults.

    Raises:
        ConfigError: naming the key path of the first problem found.
    """
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f for f in RunConfig.__dataclass_fields__}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
    cfg = RunConfig()
    if "weights" in raw:
        w = raw["weights"]
        if not isinstance(w, dict):
            raise ConfigError("weights: expected an object")
        for key, v in w.items():
            if key not in FREE_WEIGHT_NAMES:
                raise ConfigError(f"unknown key 'weights.{key}'")
            cfg.weights[key] = _number(v, f"weights.{key}")
    if raw.get("full_graph") is not None:
        g = raw["full_graph"]
        if not isinstance(g, list) or len(g) != 5:
            raise ConfigError("full_graph: expected a 5x5 matrix")
        cfg.full_graph = [_vector(row, f"full_graph[{k}]", 5) for k, row in enumerate(g)]
    if "phases" in raw:
        cfg.phases = _vector(raw["phases"], "phases", 5)
    if "beta0" in raw:
        cfg.beta0 = _number(raw["beta0"], "beta0")
        if cfg.beta0 <= 0:
            raise ConfigError("beta0: must be positive")
    if "squeezing_db" in raw:
        cfg.squeezing_db = _number(raw["squeezing_db"], "squeezing_db")
        if cfg.squeezing_db < 0:
            raise ConfigError("squeezing_db: must be non-negative")
    for key in ("samples", "seed"):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{key}: expected a non-negative integer")
            setattr(cfg, key, v)
    if raw.get("input_means") is not None:
        im = raw["input_means"]
        if not isinstance(im, dict) or set(im) != {"a", "b"}:
            raise ConfigError("input_means: expected keys 'a' and 'b'")
        cfg.input_means = {k: _vector(im[k], f"input_means.{k}", 2) for k in ("a", "b")}
    try:
        cfg.to_protocol()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def render_config(cfg: RunConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _squeezing_block(db: float) -> dict:
    return {"db": db, "y_variance": db_to_variance(db)}


def build_report(cfg: RunConfig) -> dict:
    pc = cfg.to_protocol()
    report = run_bqt(pc)
    spec = pc.squeezing()
    diag, full = error_variances(report, pc.adjacency(), spec)
    free = tuple(cfg.weights[k] for k in FREE_WEIGHT_NAMES)
    return {
        "config": asdict(cfg),
        "squeezing": _squeezing_block(cfg.squeezing_db),
        "teleport": report.to_dict(),
        "bqt_condition": check_bqt_condition(report),
        "canonical_constraints": canonical_constraints(pc.adjacency(), pc.phases),
        "family": classify_configuration(free).tag.value if cfg.full_graph is None else None,
        "added_variance": diag.tolist(),
        "added_variance_units": (diag / spec.y_variance).tolist(),
        "added_covariance": full.tolist(),
        "total_added_variance": float(diag.sum()),
    }


def sweep_rows(cfg: RunConfig, db_from: float, db_to: float, step: float) -> list[dict]:
    if step <= 0:
        raise ConfigError("--step must be positive")
    pc = cfg.to_protocol()
    report = run_bqt(pc)
    n = int(math.floor((db_to - db_from) / step + 1e-9)) + 1
    rows = []
    for k in range(n):
        db = db_from + k * step
        diag, _ = error_variances(report, pc.adjacency(), SqueezingSpec.from_db(db))
        xb, xa, yb, ya = diag
        rows.append({
            "db": db,
            "var_XB": xb, "var_XA": xa, "var_YB": yb, "var_YA": ya,
            "total": float(diag.sum()),
            "fidelity_A": added_noise_fidelity(xa, ya),
            "fidelity_B": added_noise_fidelity(xb, yb),
        })
    return rows


def write_sweep_csv(rows: list[dict], path: str | None) -> None:
    handle = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(row[c])) for c in SWEEP_COLUMNS])
    finally:
        if path:
            handle.close()


def families_table(db: float = 10.0, g: float = 1.0) -> list[dict]:
    spec = SqueezingSpec.from_db(db)
    examples = {
        Family.LINEAR_ENDS: (0.0, g, g, 0.0),
        Family.LINEAR_CENTERS: (g, 0.0, 0.0, g),
        Family.TWO_PAIRS: (0.0, 0.0, 0.0, 0.0),
    }
    out = []
    for fam, w in examples.items():
        pc = ProtocolConfig(free_weights=w)
        diag, _ = error_variances(run_bqt(pc), pc.adjacency(), spec)
        out.append({
            "family": fam.value,
            "weights": dict(zip(FREE_WEIGHT_NAMES, w)),
            "added_variance_units": (diag / spec.y_variance).tolist(),
            "total_units": float(diag.sum() / spec.y_variance),
        })
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvbqt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report", help="symbolic pipeline report as JSON")
    p.add_argument("--config")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="check that the configuration teleports both inputs")
    p.add_argument("--config")

    p = sub.add_parser("sweep", help="added noise versus squeezing as CSV")
    p.add_argument("--config")
    p.add_argument("--db-from", type=float, default=0.0)
    p.add_argument("--db-to", type=float, default=15.5)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--csv")

    p = sub.add_parser("simulate", help="Monte-Carlo Gaussian simulation versus analytic noise")
    p.add_argument("--config")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("optimize", help="minimize total added variance over the free weights")
    p.add_argument("--connected", action="store_true")
    p.add_argument("--gmin", type=float, default=0.1)
    p.add_argument("--bound", type=float, default=3.0)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--db", type=float, default=10.0)
    p.add_argument("--out")

    p = sub.add_parser("families", help="error variances of the three sparse families")
    p.add_argument("--db", type=float, default=10.0)
    p.add_argument("--g", type=float, default=1.0)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        _write_json(build_report(load_config(args.config)), args.out)
    elif args.command == "verify":
        cfg = load_config(args.config)
        pc = cfg.to_protocol()
        ok = check_bqt_condition(run_bqt(pc))
        canon = canonical_constraints(pc.adjacency(), pc.phases)
        print(f"bqt_condition: {'PASS' if ok else 'FAIL'}")
        print(f"canonical_constraints: {'PASS' if canon else 'FAIL'}")
        return 0 if ok else EXIT_VERIFY
    elif args.command == "sweep":
        cfg = load_config(args.config)
        write_sweep_csv(sweep_rows(cfg, args.db_from, args.db_to, args.step), args.csv)
    elif args.command == "simulate":
        cfg = load_config(args.config)
        if args.samples is not None:
            cfg.samples = args.samples
        if args.seed is not None:
            cfg.seed = args.seed
        pc = cfg.to_protocol()
        mc = run_protocol_mc(pc, n_samples=cfg.samples, rng_seed=cfg.seed)
        payload = {
            "config": asdict(cfg),
            "squeezing": _squeezing_block(cfg.squeezing_db),
            "oracle_analytic_added_variance": np.diag(analytic_added_noise(pc)).tolist(),
            **mc.to_dict(),
        }
        _write_json(payload, args.out)
    elif args.command == "optimize":
        settings = OptimizerSettings(
            bound=args.bound, connectivity_required=args.connected, g_min=args.gmin,
            budget=args.budget, seed=args.seed,
        )
        res = minimize_weights(settings, SqueezingSpec.from_db(args.db))
        _write_json({
            "settings": asdict(settings),
            "squeezing": _squeezing_block(args.db),
            "weights": dict(zip(FREE_WEIGHT_NAMES, res.weights.as_tuple())),
            "family": res.family.tag.value,
            "objective": res.objective,
            "objective_units": res.objective_units,
            "per_quadrature": res.per_quadrature.tolist(),
        }, args.out)
    elif args.command == "families":
        _write_json({"families": families_table(args.db, args.g)}, None)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else 0
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateMeasurementError as exc:
        print(f"degenerate measurement: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InfeasibleOptimization as exc:
        print(f"infeasible optimization: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
