"""Command-line entry point.

Exit codes: 0 success, 1 invalid config or plan, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import run_to_fixpoint, seed_infection
from .complex import build_complex, event_log_text, run_star_process, snapshot
from .config import ConfigError, validate
from .experiments import ExperimentPlan, run_plan, sweep_percolation, write_records
from .urn import critical_probability, lambda_star, spectra_report

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simplicial-percolation", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", required=True, help="model config JSON")
        sp.add_argument("--seed", type=int, help="override the config/plan seed")
        sp.add_argument("--out", help="directory for output files and the manifest")
        return sp

    sp = add("spectra", "growth rates, profile and critical exponent")
    sp.add_argument("--n", type=int, help="also report p_c at this size")

    sp = add("grow", "grow a complex and write its event log")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--continuous", action="store_true", help="record split times")

    sp = add("star", "run the star process around a centre of weight x")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--x", type=float, help="centre weight (default: maximiser of lambda_x)")

    sp = add("percolate", "grow a complex, seed it, run the bootstrap to its fixpoint")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)

    sp = add("sweep", "percolation frequencies over a p-grid")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--replicas", type=int, default=20)
    sp.add_argument("--p-grid", help="comma-separated probabilities (default: 7 points, p_c/10..10p_c)")
    sp.add_argument("--workers", type=int, default=1)

    sp = add("check", "run a diagnostics plan", config=False)
    sp.add_argument("--plan", required=True, help="experiment plan JSON")
    sp.add_argument("--n", type=int)
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--workers", type=int)
    return p


def _load_json(path: str) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None


def _overrides(args: argparse.Namespace, names: list[str]) -> dict:
    return {k: getattr(args, k) for k in names if getattr(args, k, None) not in (None, False)}


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_outputs(out: str | None, files: dict[str, str], manifest: dict) -> None:
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for fname, text in files.items():
        (d / fname).write_text(text)
    (d / "manifest.json").write_text(_json_text(manifest))


def _run(args: argparse.Namespace) -> str:
    """Execute the subcommand; returns the text destined for stdout."""
    cmd = args.command
    if cmd == "check":
        doc, raw = _load_json(args.plan)
        overrides = _overrides(args, ["n", "replicas", "seed", "workers"])
        if "seed" in overrides:
            doc["master_seed"] = overrides["seed"]
        for key in ("n", "replicas", "workers"):
            if key in overrides:
                doc[key] = overrides[key]
        try:
            plan = ExperimentPlan.from_dict(doc, base=Path(args.plan).parent)
        except ConfigError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"invalid plan: {exc}") from None
        manifest = _manifest(raw, plan.master_seed, cmd, overrides)
        summary = run_plan(plan, args.out)
        _write_outputs(args.out, {}, manifest)
        return _json_text({"manifest": manifest, **summary})

    doc, raw = _load_json(args.config)
    config = validate(doc)
    overrides = _overrides(args, ["seed", "n", "p", "x", "replicas", "continuous", "p_grid", "workers"])
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    manifest = _manifest(raw, config.seed, cmd, overrides)
    rng = np.random.default_rng(config.seed)
    files: dict[str, str] = {}

    if cmd == "spectra":
        payload = spectra_report(config, args.n)
    elif cmd == "grow":
        cx = build_complex(config, args.n, rng)
        log_text = "# manifest " + json.dumps(manifest, sort_keys=True) + "\n"
        log_text += event_log_text(cx, continuous=args.continuous)
        files["events.csv"] = log_text
        files["snapshot.json"] = json.dumps(snapshot(cx))
        _write_outputs(args.out, files, manifest)
        return log_text
    elif cmd == "star":
        summary = lambda_star(config)
        x = args.x if args.x is not None else summary.argmax_weight
        if x not in config.mu.values:
            raise UsageError(f"--x {x} is not in the weight support {list(config.mu.values)}")
        run = run_star_process(config, x, args.n, rng)
        z = run.Z_star_trajectory
        payload = {
            "center_weight": x,
            "steps": args.n,
            "z_star": float(z[-1]),
            "z_star_over_n": float(z[-1] / max(args.n, 1)),
            "star_face_count": int(run.star_face_count[-1]),
            "lambda_x": summary.per_weight[x],
        }
        rows = ["step,z_star,star_face_count"]
        rows += [f"{t},{float(zt)!r},{int(c)}" for t, (zt, c) in enumerate(zip(z, run.star_face_count))]
        files["star_trajectory.csv"] = "\n".join(rows) + "\n"
    elif cmd == "percolate":
        if not (0.0 <= args.p <= 1.0):
            raise UsageError(f"--p must lie in [0, 1], got {args.p}")
        cx = build_complex(config, args.n, rng)
        payload = run_to_fixpoint(cx, seed_infection(cx, args.p, rng)).to_dict()
    elif cmd == "sweep":
        grid = None
        if args.p_grid:
            try:
                grid = tuple(float(p) for p in args.p_grid.split(","))
            except ValueError:
                raise UsageError(f"--p-grid must be comma-separated numbers, got {args.p_grid!r}") from None
            if any(not (0.0 <= p <= 1.0) for p in grid):
                raise UsageError("--p-grid entries must lie in [0, 1]")
        plan = ExperimentPlan(config, args.n, args.replicas, frozenset({"sweep"}), master_seed=config.seed,
                              p_grid=grid, workers=args.workers)
        result = sweep_percolation(plan)
        pc = critical_probability(args.n, config)
        payload = {
            "p_c": pc.p_c,
            "regime": pc.regime,
            "rows": [
                {"p": r.p, "fraction_percolated": r.fraction_percolated,
                 "fraction_stable_at_one": r.fraction_stable_at_one, "half_width": r.half_width}
                for r in result.detail
            ],
        }
        buf = io.StringIO()
        write_records(result.records, buf)
        files["sweep.csv"] = buf.getvalue()
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown command {cmd}")

    text = _json_text({"manifest": manifest, **payload})
    files[f"{cmd}.json"] = text
    _write_outputs(args.out, files, manifest)
    return text


def _manifest(raw: bytes, seed: int, cmd: str, overrides: dict) -> dict:
    return {
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": seed,
        "tool_version": __version__,
        "subcommand": cmd,
        "overrides": overrides,
    }


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        text = _run(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
