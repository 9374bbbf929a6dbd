"""Command-line front end: ``plane-sample {generate,select,compare,ppc}``.

Every command writes a ``manifest.json`` next to its outputs. Logging
verbosity is read from ``PLANE_SAMPLE_LOG`` (``debug`` or ``info``).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import SyntheticConfig, generate_synthetic, posterior_predictive_check, run_comparison
from .hier_model import load_model
from .inference import resolve_target
from .scenario_space import load_observations, load_space, write_observations, write_space
from .selection import greedy_select
from .svg import comparison_svg, gain_curve_svg, ppc_svg

log = logging.getLogger("plane_sample")


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _manifest(out_dir: Path, command: str, config: dict, seed, inputs: dict, outputs: list[Path], start: float):
    blob = json.dumps(config, sort_keys=True).encode()
    manifest = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "seed": seed,
        "inputs": {k: (str(v) if v is not None else None) for k, v in inputs.items()},
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "duration_s": round(time.perf_counter() - start, 3),
    }
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _model_config(args):
    model = load_model(args.model)
    return model, model.to_config()


def cmd_generate(args) -> None:
    start = time.perf_counter()
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            raise CLIError("config must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    config = SyntheticConfig.from_dict(cfg)
    if config.seed is None:
        raise CLIError("a seed is required (--seed or 'seed' in the config)")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    space, observations = generate_synthetic(config)
    write_space(space, out / "scenarios.csv")
    write_observations(observations, out / "observations.csv")
    _manifest(
        out, "generate", config.to_dict(), config.seed, {"config": args.config},
        [out / "scenarios.csv", out / "observations.csv"], start,
    )


def cmd_select(args) -> None:
    start = time.perf_counter()
    space = load_space(args.scenarios, args.hyperplane_feature)
    model, model_cfg = _model_config(args)
    resolve_target(space, args.objective)
    rng = np.random.default_rng(args.seed)
    trace = greedy_select(
        space, model, args.objective, args.confidence, args.abs_error, rng, args.budget,
        max_samples=args.max_samples, workers=args.workers,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "trace.json", trace.to_json())
    _write(out / "gain_curve.csv", trace.curve_csv())
    _write(out / "gain_curve.svg", gain_curve_svg(trace.gains))
    config = {
        "model": model_cfg, "objective": args.objective, "confidence": args.confidence,
        "abs_error": args.abs_error, "budget": args.budget, "max_samples": args.max_samples,
        "hyperplane_feature": args.hyperplane_feature,
    }
    _manifest(
        out, "select", config, args.seed, {"scenarios": args.scenarios, "model": args.model},
        [out / "trace.json", out / "gain_curve.csv", out / "gain_curve.svg"], start,
    )
    log.info("selected %s (%s)", trace.selected, trace.stopped_reason)


def cmd_compare(args) -> None:
    start = time.perf_counter()
    space = load_space(args.scenarios, args.hyperplane_feature)
    model, model_cfg = _model_config(args)
    report = run_comparison(
        space, model, args.runs, np.random.default_rng(args.seed), max_size=args.max_size,
        confidence=args.confidence, abs_error=args.abs_error, workers=args.workers,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [out / "comparison.json", out / "comparison.svg"]
    _write(out / "comparison.json", report.to_json())
    _write(out / "comparison.svg", comparison_svg(report))
    for name, res in report.methods.items():
        _write(out / f"{name}.csv", res.curve_csv())
        outputs.append(out / f"{name}.csv")
    config = {
        "model": model_cfg, "runs": args.runs, "max_size": args.max_size, "confidence": args.confidence,
        "abs_error": args.abs_error, "hyperplane_feature": args.hyperplane_feature,
    }
    _manifest(out, "compare", config, args.seed, {"scenarios": args.scenarios, "model": args.model}, outputs, start)


def cmd_ppc(args) -> None:
    start = time.perf_counter()
    space = load_space(args.scenarios, args.hyperplane_feature)
    observations = load_observations(args.observations, space)
    if not observations:
        raise CLIError("nothing to check: observations file has no rows")
    model, model_cfg = _model_config(args)
    report = posterior_predictive_check(
        observations, space, model, args.replicates, np.random.default_rng(args.seed)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "ppc.json", report.to_json())
    _write(out / "ppc.svg", ppc_svg(report))
    config = {"model": model_cfg, "replicates": args.replicates, "hyperplane_feature": args.hyperplane_feature}
    _manifest(
        out, "ppc", config, args.seed,
        {"scenarios": args.scenarios, "observations": args.observations, "model": args.model},
        [out / "ppc.json", out / "ppc.svg"], start,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plane-sample", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic scenario space and counts")
    p.add_argument("--config", help="synthetic config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=_u64)
    p.set_defaults(func=cmd_generate)

    def common(p):
        p.add_argument("--scenarios", required=True, help="scenarios.csv")
        p.add_argument("--model", help="model config JSON (defaults when omitted)")
        p.add_argument("--hyperplane-feature", default="town")
        p.add_argument("--seed", type=_u64, default=0)
        p.add_argument("--out", required=True)

    p = sub.add_parser("select", help="greedy selection with the plateau stopping rule")
    common(p)
    p.add_argument("--objective", default="sigma", help="sigma or hyperplane:<level>")
    p.add_argument("--confidence", type=_probability, default=0.9)
    p.add_argument("--abs-error", type=float, default=0.1)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-samples", type=_positive_int, default=2000)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="greedy vs LHS vs random")
    common(p)
    p.add_argument("--runs", type=_positive_int, default=5)
    p.add_argument("--max-size", type=_positive_int, default=20)
    p.add_argument("--confidence", type=_probability, default=0.9)
    p.add_argument("--abs-error", type=float, default=0.1)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ppc", help="posterior predictive check")
    common(p)
    p.add_argument("--observations", required=True)
    p.add_argument("--replicates", type=_positive_int, default=500)
    p.set_defaults(func=cmd_ppc)
    return parser


def _setup_logging():
    level = os.environ.get("PLANE_SAMPLE_LOG", "").lower()
    logging.basicConfig(
        level={"debug": logging.DEBUG, "info": logging.INFO}.get(level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "budget", None) is not None and args.budget < 0:
            raise CLIError("--budget must be nonnegative")
        if getattr(args, "abs_error", 1.0) <= 0:
            raise CLIError("--abs-error must be > 0")
        args.func(args)
    except (CLIError, ValueError, KeyError, OSError, FloatingPointError, RuntimeError) as exc:
        msg = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"plane-sample: error: {' '.join(msg.split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
