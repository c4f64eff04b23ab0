"""Command-line front end.

Subcommands::

    wintv denoise  series.csv (--lambda L | --auto) [--q 10] [--out out.csv]
    wintv monitor  series.csv --window 400 [--baseline S | --warmup K] [--out out.csv]
    wintv simulate [--config run.json] [--out-dir DIR]
    wintv bench    [--config run.json] [--out-dir DIR]

Input CSV files need a header with ``t`` and ``y`` columns (other columns
are ignored), comma separated, UTF-8, ``.`` as decimal mark. Floats are
written with ``repr`` so output does not depend on the locale.

Exit status is 0 on a clean run, 2 when ``monitor`` raised at least one
alert and 1 on usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .core import ContractError, WindowSamples, solution_at_lambda
from .monitor import run_monitor
from .path import SelectorConfig, compute_merge_path, select_lambda
from .sim import DEFAULT_STEPS, ExperimentConfig, bench_window, run_experiment, summarize_bench
from .stream import CorruptedStateError, RejectedSampleError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ALERT = 2


class CsvParseError(ValueError):
    pass


class ConfigError(ValueError):
    pass


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "window_length": {"type": "integer", "minimum": 4},
        "q": {"type": "integer", "minimum": 1},
        "cutting_policy": {"enum": ["quantile", "previous", "fixed"]},
        "cutting_quantile": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "fixed_cutting_point": {"type": "number", "minimum": 0},
        "epsilon_lambda": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "baseline_sigma": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "warmup": {"type": ["integer", "null"], "minimum": 1},
        "ratio_threshold": {"type": "number", "exclusiveMinimum": 1},
        "consecutive_windows": {"type": "integer", "minimum": 1},
        "noise_model": {"enum": [1, 2, 3, 4]},
        "n": {"type": "integer", "minimum": 4},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "repetitions": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "steps": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "bench_ms": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 4}},
        "bench_slides": {"type": "integer", "minimum": 1},
        "noise_sigma": {"type": "number", "exclusiveMinimum": 0},
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the subcommands; see :data:`CONFIG_SCHEMA`."""

    window_length: int = 400
    q: int = 10
    cutting_policy: str = "quantile"
    cutting_quantile: float = 0.8
    fixed_cutting_point: float = 0.0
    epsilon_lambda: Optional[float] = None
    baseline_sigma: Optional[float] = None
    warmup: Optional[int] = None
    ratio_threshold: float = 1.2
    consecutive_windows: int = 5
    noise_model: int = 1
    n: int = 2000
    dt: float = 1.0
    repetitions: int = 20
    seed: int = 0
    steps: tuple = DEFAULT_STEPS
    bench_ms: tuple = (100, 200, 400)
    bench_slides: int = 400
    noise_sigma: float = 1.0

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        validate_config(data)
        data = dict(data)
        if "steps" in data:
            data["steps"] = tuple(tuple(s) for s in data["steps"])
        if "bench_ms" in data:
            data["bench_ms"] = tuple(data["bench_ms"])
        return cls(**data)

    def state_kwargs(self) -> dict:
        return {
            "policy": self.cutting_policy,
            "quantile": self.cutting_quantile,
            "fixed_cutting_point": self.fixed_cutting_point,
            "epsilon_lambda": self.epsilon_lambda,
        }


def validate_config(data) -> None:
    """Raise :class:`ConfigError` naming every offending field."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.path)))
    if errors:
        lines = []
        for e in errors:
            where = ".".join(map(str, e.path)) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    """File values first, then every flag that was given."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    given = {k: v for k, v in overrides.items() if v is not None}
    # a baseline flag replaces a warm-up from the file and vice versa
    if "baseline_sigma" in given:
        data.pop("warmup", None)
    if "warmup" in given:
        data.pop("baseline_sigma", None)
    data.update(given)
    return RunConfig.from_mapping(data)


# ---------------------------------------------------------------- csv io


def read_series_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read ``t`` and ``y`` columns; errors carry the offending line number."""
    ts, ys, lines = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: line 1: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in ("t", "y") if c not in header]
        if missing:
            raise CsvParseError(f"{path}: line 1: header lacks column(s) {', '.join(missing)}")
        it, iy = header.index("t"), header.index("y")
        try:
            for row in reader:
                if not row:
                    continue
                line = reader.line_num
                if len(row) != len(header):
                    raise CsvParseError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
                try:
                    t, y = float(row[it]), float(row[iy])
                except ValueError:
                    raise CsvParseError(f"{path}: line {line}: not a number in t or y") from None
                if not (math.isfinite(t) and math.isfinite(y)):
                    raise CsvParseError(f"{path}: line {line}: non-finite value")
                ts.append(t)
                ys.append(y)
                lines.append(line)
        except csv.Error as exc:
            raise CsvParseError(f"{path}: line {reader.line_num}: {exc}") from None
    t = np.array(ts)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise ContractError(f"{path}: line {lines[bad[0] + 1]}: t is not strictly increasing")
    return t, np.array(ys)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Optional[str], header: Sequence[str], rows) -> None:
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if path:
            fh.close()


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_denoise(args) -> int:
    cfg = load_config(args.config, {"q": args.q})
    t, y = read_series_csv(args.input)
    w = WindowSamples.from_timestamps(y, t)
    path = compute_merge_path(w)
    lam = select_lambda(path, w, SelectorConfig(q=cfg.q)) if args.auto else args.lam
    if lam < 0:
        raise ContractError("--lambda must be nonnegative")
    seg = solution_at_lambda(w, path, lam)
    u = seg.to_signal()
    ids = seg.segment_ids()
    write_csv(args.out, ("t", "y", "u_star", "segment_id"), zip(t, y, u, ids))
    if args.auto:
        print(f"lambda {lam!r}", file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_monitor(args) -> int:
    cfg = load_config(args.config, {
        "window_length": args.window,
        "q": args.q,
        "baseline_sigma": args.baseline,
        "warmup": args.warmup,
        "ratio_threshold": args.threshold,
        "consecutive_windows": args.consecutive,
    })
    t, y = read_series_csv(args.input)
    m = cfg.window_length
    if y.size < m:
        raise ContractError(f"series has {y.size} samples, fewer than the window length {m}")
    records, _ = run_monitor(
        y, t, m, SelectorConfig(q=cfg.q),
        baseline_sigma=cfg.baseline_sigma,
        warmup=cfg.warmup,
        ratio_threshold=cfg.ratio_threshold,
        consecutive_windows=cfg.consecutive_windows,
        **cfg.state_kwargs(),
    )
    write_csv(
        args.out,
        ("start_index", "sigma_star", "lambda_used", "mad_sigma", "shift_alert"),
        ((r.window_start_index, r.sigma_star, r.lambda_used, r.mad_sigma, r.shift_alert) for r in records),
    )
    return EXIT_ALERT if any(r.shift_alert for r in records) else EXIT_OK


def _common_overrides(args) -> dict:
    return {
        "window_length": getattr(args, "window", None),
        "noise_model": getattr(args, "noise_model", None),
        "repetitions": getattr(args, "repetitions", None),
        "seed": args.seed,
        "q": args.q,
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _common_overrides(args))
    exp = ExperimentConfig(
        noise_model=cfg.noise_model, m=cfg.window_length, n=cfg.n, dt=cfg.dt,
        repetitions=cfg.repetitions, base_seed=cfg.seed, q=cfg.q,
        cutting_policy=cfg.cutting_policy, steps=cfg.steps,
    )
    report = run_experiment(exp)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = list(report.rows[0])
    write_csv(str(out / "simulation_rows.csv"), header, ([r[k] for k in header] for r in report.rows))
    summary = report.summary()
    summary["run_config"] = asdict(cfg)
    write_json(out / "simulation_summary.json", summary)
    print(json.dumps(summary["metrics"], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    overrides = _common_overrides(args)
    overrides["bench_ms"] = args.ms
    overrides["bench_slides"] = args.slides
    cfg = load_config(args.config, overrides)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summary = [], []
    for m in cfg.bench_ms:
        est = bench_window(m, cfg.bench_slides, cfg.seed, cfg.q, cfg.noise_sigma, cfg.steps, **cfg.state_kwargs())
        for k in range(est.rewritten.size):
            rows.append((m, k, est.slide_seconds[k], est.rewritten[k], est.non_right_isolated[k], est.incremental[k]))
        summary.append(summarize_bench(m, est))
    write_csv(str(out / "bench_slides.csv"),
              ("m", "slide", "seconds", "rewritten", "non_right_isolated", "incremental"), rows)
    write_json(out / "bench_summary.json", {"run_config": asdict(cfg), "windows": summary})
    for s in summary:
        print(f"m={s['m']:5d}  mean {1e3 * s['mean_slide_seconds']:.3f} ms/slide  "
              f"rewritten {s['mean_rewritten']:.1f}  incremental {s['incremental_fraction']:.2f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1; 2 is reserved for alerts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wintv", description="Sliding-window TV restoration and noise monitoring.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("denoise", help="restore a whole series at one lambda")
    d.add_argument("input")
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--auto", action="store_true", help="select lambda from the extremum curve")
    d.add_argument("--q", type=int)
    d.add_argument("--config")
    d.add_argument("--out", help="output CSV (default stdout)")
    d.set_defaults(func=cmd_denoise)

    mo = sub.add_parser("monitor", help="per-window noise level and shift alerts")
    mo.add_argument("input")
    mo.add_argument("--window", type=int)
    g = mo.add_mutually_exclusive_group()
    g.add_argument("--baseline", type=float)
    g.add_argument("--warmup", type=int, help="windows used to calibrate the baseline")
    mo.add_argument("--threshold", type=float)
    mo.add_argument("--consecutive", type=int)
    mo.add_argument("--q", type=int)
    mo.add_argument("--config")
    mo.add_argument("--out", help="output CSV (default stdout)")
    mo.set_defaults(func=cmd_monitor)

    for name, func, help_ in (
        ("simulate", cmd_simulate, "noise-model experiment with RVE and bias tables"),
        ("bench", cmd_bench, "per-slide timing on stationary traces"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config")
        s.add_argument("--seed", type=int)
        s.add_argument("--q", type=int)
        s.add_argument("--out-dir", default=".")
        if name == "simulate":
            s.add_argument("--window", type=int)
            s.add_argument("--noise-model", type=int)
            s.add_argument("--repetitions", type=int)
        else:
            s.add_argument("--ms", type=int, nargs="+")
            s.add_argument("--slides", type=int)
        s.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, CsvParseError, ConfigError, RejectedSampleError, CorruptedStateError, OSError) as exc:
        print(f"wintv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
