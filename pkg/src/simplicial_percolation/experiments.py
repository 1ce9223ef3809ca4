"""Monte Carlo harness for the limit laws and the percolation threshold.

Every replica draws from its own stream, derived only from the master seed,
the replica index and the diagnostic, so results do not depend on how many
replicas run or in which order. Pass/fail thresholds live in the plan.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .bootstrap import run_to_fixpoint, seed_infection
from .complex import build_complex, empirical_type_measure, grow, new_complex, run_star_process
from .config import ModelConfig, load_config, validate
from .urn import build_main_urn, critical_probability, dominant_eigenpair, lambda_star

DIAGNOSTICS = ("z_convergence", "star_convergence", "type_frequencies", "degree_growth", "splitting_times", "sweep")
_DIAG_KEY = {name: i for i, name in enumerate(DIAGNOSTICS)}

DEFAULT_TOLERANCES = {
    "z_rel": 0.02,
    "star_rel": 0.02,
    "tv_max": 0.02,
    "slope_abs": 0.05,
    "sd_growth_max": 1.5,
    "pairwise_se": 3.0,
    "sweep_high_min": 0.9,
    "sweep_low_max": 0.1,
    "sweep_low_stable_min": 0.9,
}

RECORD_HEADER = ["replica", "quantity", "step_or_p", "value"]


class NoSuchWeightObserved(RuntimeError):
    pass


@dataclass(frozen=True)
class RunRecord:
    replica: int
    quantity: str
    step_or_p: float
    value: float


@dataclass(frozen=True)
class ExperimentPlan:
    config: ModelConfig
    n: int
    replicas: int
    diagnostics: frozenset[str]
    master_seed: int = 0
    p_grid: tuple[float, ...] | None = None
    p_grid_points: int = 7
    p_grid_factor: float = 10.0
    checkpoints: tuple[int, ...] = ()
    degree_weight: float | None = None
    degree_after: int = 100
    tolerances: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.diagnostics) - set(DIAGNOSTICS)
        if unknown:
            raise ValueError(f"unknown diagnostics {sorted(unknown)}")
        if self.n < 1 or self.replicas < 1:
            raise ValueError("n and replicas must be positive")
        merged = dict(DEFAULT_TOLERANCES)
        merged.update(self.tolerances)
        object.__setattr__(self, "tolerances", merged)

    def resolved_checkpoints(self) -> list[int]:
        if self.checkpoints:
            return sorted(c for c in set(self.checkpoints) if 1 <= c <= self.n)
        pts = {self.n}
        c = 10
        while c < self.n:
            if c >= 1000:
                pts.add(c)
            c *= 10
        return sorted(pts)

    def resolved_p_grid(self) -> list[float]:
        if self.p_grid is not None:
            return list(self.p_grid)
        pc = critical_probability(self.n, self.config).p_c
        f = self.p_grid_factor
        grid = np.geomspace(pc / f, pc * f, self.p_grid_points)
        return [float(min(p, 1.0)) for p in grid]

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base: Path | None = None) -> "ExperimentPlan":
        doc = dict(doc)
        if "config" in doc:
            config = validate(doc.pop("config"))
        else:
            path = Path(doc.pop("config_path"))
            if base is not None and not path.is_absolute():
                path = base / path
            config = load_config(path)
        p_grid = doc.pop("p_grid", None)
        kwargs: dict[str, Any] = {}
        if isinstance(p_grid, Mapping):
            kwargs["p_grid_points"] = int(p_grid.get("points", 7))
            kwargs["p_grid_factor"] = float(p_grid.get("factor", 10.0))
        elif p_grid is not None:
            kwargs["p_grid"] = tuple(float(p) for p in p_grid)
        allowed = {"n", "replicas", "diagnostics", "master_seed", "checkpoints", "degree_weight",
                   "degree_after", "tolerances", "workers"}
        extra = set(doc) - allowed
        if extra:
            raise ValueError(f"unknown plan keys {sorted(extra)}")
        return cls(
            config=config,
            n=int(doc["n"]),
            replicas=int(doc["replicas"]),
            diagnostics=frozenset(doc.get("diagnostics", ())),
            master_seed=int(doc.get("master_seed", config.seed)),
            checkpoints=tuple(int(c) for c in doc.get("checkpoints", ())),
            degree_weight=doc.get("degree_weight"),
            degree_after=int(doc.get("degree_after", 100)),
            tolerances=dict(doc.get("tolerances", {})),
            workers=int(doc.get("workers", 1)),
            **kwargs,
        )

    def replace(self, **changes) -> "ExperimentPlan":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ExperimentPlan(**fields)


def load_plan(path: str | Path) -> ExperimentPlan:
    path = Path(path)
    with open(path) as fh:
        return ExperimentPlan.from_dict(json.load(fh), base=path.parent)


# streams --------------------------------------------------------------------

def replica_seed_sequence(master_seed: int, replica: int, *sub: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(replica, *sub))


def replica_rng(master_seed: int, replica: int, *sub: int) -> np.random.Generator:
    return np.random.default_rng(replica_seed_sequence(master_seed, replica, *sub))


def _map(fn: Callable, arg_list: Sequence[tuple], workers: int) -> list:
    if workers <= 1 or len(arg_list) <= 1:
        return [fn(*args) for args in arg_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for args in arg_list]
        return [f.result() for f in futures]


# statistics ------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float, float]:
    """Wilson score interval; returns ``(low, high, half_width)``."""
    if trials == 0:
        return 0.0, 1.0, 0.5
    z = NormalDist().inv_cdf(0.5 + level / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi, half


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def _entry(estimate: float, target: float, tolerance: float, passed: bool, **extra) -> dict:
    out = {"estimate": float(estimate), "target": float(target), "tolerance": float(tolerance), "pass": bool(passed)}
    out.update(extra)
    return out


# per-replica workers (module level so they pickle) -----------------------------

def _sweep_replica(config: ModelConfig, n: int, grid: list[float], master_seed: int, i: int) -> list[tuple[float, bool, bool]]:
    out = []
    for j, p in enumerate(grid):
        rng = replica_rng(master_seed, i, _DIAG_KEY["sweep"], j)
        cx = build_complex(config, n, rng)
        verdict = run_to_fixpoint(cx, seed_infection(cx, p, rng))
        out.append((p, verdict.percolated, verdict.stable_at_one))
    return out


def _z_replica(config: ModelConfig, checkpoints: list[int], master_seed: int, i: int) -> list[float]:
    rng = replica_rng(master_seed, i, _DIAG_KEY["z_convergence"])
    cx = new_complex(config, rng, capacity_steps=checkpoints[-1])
    out = []
    for c in checkpoints:
        grow(cx, c - cx.step_count, rng)
        out.append(cx.total_fitness / c)
    return out


def _star_replica(config: ModelConfig, checkpoints: list[int], master_seed: int, i: int) -> dict[float, list[float]]:
    out = {}
    for a, x in enumerate(config.mu.values):
        rng = replica_rng(master_seed, i, _DIAG_KEY["star_convergence"], a)
        run = run_star_process(config, x, checkpoints[-1], rng)
        out[x] = [float(run.Z_star_trajectory[c] / c) for c in checkpoints]
    return out


def _types_replica(config: ModelConfig, n: int, target: np.ndarray, master_seed: int, i: int) -> float:
    rng = replica_rng(master_seed, i, _DIAG_KEY["type_frequencies"])
    cx = build_complex(config, n, rng)
    counts = empirical_type_measure(cx)
    return total_variation(counts / counts.sum(), target)


def _degree_replica(config: ModelConfig, x: float, after: int, checkpoints: list[int], master_seed: int, i: int) -> tuple[int, list[int]]:
    rng = replica_rng(master_seed, i, _DIAG_KEY["degree_growth"])
    cx = new_complex(config, rng, capacity_steps=checkpoints[-1])
    grow(cx, after, rng)
    while True:
        if cx.step_count >= checkpoints[0]:
            raise NoSuchWeightObserved(f"no vertex of weight {x} arrived between step {after} and {checkpoints[0]}")
        grow(cx, 1, rng)
        v = cx.vertex_count - 1
        if cx.weights[v] == x:
            break
    born = cx.step_count
    degrees = []
    for c in checkpoints:
        grow(cx, c - cx.step_count, rng)
        degrees.append(int(cx.degrees[v]))
    return born, degrees


def _tau_replica(config: ModelConfig, checkpoints: list[int], master_seed: int, i: int) -> list[float]:
    rng = replica_rng(master_seed, i, _DIAG_KEY["splitting_times"])
    cx = build_complex(config, checkpoints[-1], rng)
    return [float(cx.taus[c - 1]) for c in checkpoints]


# diagnostics -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    p: float
    fraction_percolated: float
    fraction_stable_at_one: float
    half_width: float
    stable_half_width: float
    replicas: int


@dataclass(frozen=True)
class DiagnosticResult:
    records: list[RunRecord]
    summary: dict[str, dict]
    detail: Any = None


def sweep_percolation(plan: ExperimentPlan) -> DiagnosticResult:
    """Percolation and no-evolution frequencies over the p-grid, with Wilson intervals."""
    grid = plan.resolved_p_grid()
    per_rep = _map(_sweep_replica, [(plan.config, plan.n, grid, plan.master_seed, i) for i in range(plan.replicas)], plan.workers)
    records = []
    rows = []
    for j, p in enumerate(grid):
        perc = [rep[j][1] for rep in per_rep]
        stab = [rep[j][2] for rep in per_rep]
        for i in range(plan.replicas):
            records.append(RunRecord(i, "percolated", p, float(perc[i])))
            records.append(RunRecord(i, "stable_at_one", p, float(stab[i])))
        _, _, hw = wilson_interval(sum(perc), len(perc))
        _, _, hws = wilson_interval(sum(stab), len(stab))
        rows.append(SweepRow(p, sum(perc) / len(perc), sum(stab) / len(stab), hw, hws, len(perc)))
    tol = plan.tolerances
    lo, hi = rows[0], rows[-1]
    summary = {
        "sweep_high": _entry(hi.fraction_percolated, 1.0, tol["sweep_high_min"],
                             hi.fraction_percolated >= tol["sweep_high_min"], p=hi.p, half_width=hi.half_width),
        "sweep_low": _entry(lo.fraction_percolated, 0.0, tol["sweep_low_max"],
                            lo.fraction_percolated <= tol["sweep_low_max"], p=lo.p, half_width=lo.half_width),
        "sweep_low_stable": _entry(lo.fraction_stable_at_one, 1.0, tol["sweep_low_stable_min"],
                                   lo.fraction_stable_at_one >= tol["sweep_low_stable_min"], p=lo.p,
                                   half_width=lo.stable_half_width),
    }
    return DiagnosticResult(records, summary, rows)


@dataclass(frozen=True)
class ConvergenceTable:
    checkpoints: list[int]
    mean: list[float]
    target: float
    relative_error: float


def check_z_convergence(plan: ExperimentPlan, include_star: bool = True) -> DiagnosticResult:
    """Mean ``Z/n`` (and ``Z*/n`` per support weight) against the spectral rates."""
    cps = plan.resolved_checkpoints()
    lam = dominant_eigenpair(build_main_urn(plan.config)).lam
    reps = _map(_z_replica, [(plan.config, cps, plan.master_seed, i) for i in range(plan.replicas)], plan.workers)
    records = [RunRecord(i, "z_over_n", c, v) for i, rep in enumerate(reps) for c, v in zip(cps, rep)]
    mean = np.mean(reps, axis=0)
    rel = abs(mean[-1] - lam) / lam
    tol = plan.tolerances
    summary = {"z_convergence": _entry(mean[-1], lam, tol["z_rel"], rel < tol["z_rel"], relative_error=rel)}
    detail = {"main": ConvergenceTable(cps, mean.tolist(), lam, rel)}
    if include_star:
        star = check_star_convergence(plan)
        records += star.records
        summary.update(star.summary)
        detail.update(star.detail)
    return DiagnosticResult(records, summary, detail)


def check_star_convergence(plan: ExperimentPlan) -> DiagnosticResult:
    cps = plan.resolved_checkpoints()
    rates = lambda_star(plan.config).per_weight
    reps = _map(_star_replica, [(plan.config, cps, plan.master_seed, i) for i in range(plan.replicas)], plan.workers)
    records, summary, detail = [], {}, {}
    tol = plan.tolerances["star_rel"]
    for x in plan.config.mu.values:
        tag = f"zstar_over_n@{x!r}"
        rows = [rep[x] for rep in reps]
        records += [RunRecord(i, tag, c, v) for i, row in enumerate(rows) for c, v in zip(cps, row)]
        mean = np.mean(rows, axis=0)
        rel = abs(mean[-1] - rates[x]) / rates[x]
        summary[f"star_convergence@{x!r}"] = _entry(mean[-1], rates[x], tol, rel < tol, relative_error=rel)
        detail[x] = ConvergenceTable(cps, mean.tolist(), rates[x], rel)
    return DiagnosticResult(records, summary, detail)


def check_type_frequencies(plan: ExperimentPlan) -> DiagnosticResult:
    """Total-variation distance between active-face type frequencies and ``rho / sum(rho)``."""
    target = dominant_eigenpair(build_main_urn(plan.config)).type_distribution
    tvs = _map(_types_replica, [(plan.config, plan.n, target, plan.master_seed, i) for i in range(plan.replicas)], plan.workers)
    records = [RunRecord(i, "type_tv", plan.n, tv) for i, tv in enumerate(tvs)]
    mean = float(np.mean(tvs))
    tol = plan.tolerances["tv_max"]
    return DiagnosticResult(records, {"type_frequencies": _entry(mean, 0.0, tol, mean < tol)}, tvs)


@dataclass(frozen=True)
class DegreeGrowth:
    slope: float
    target: float
    checkpoints: list[int]
    mean_log_ratio: list[float]
    log_mean_degree: list[float]


def check_degree_growth(plan: ExperimentPlan, x: float | None = None) -> DiagnosticResult:
    """Slope of ``log E[D_n(i)]`` against ``log(n/i)`` for a tagged vertex of weight ``x``."""
    cfg = plan.config
    x = plan.degree_weight if x is None else x
    if x is None:
        x = lambda_star(cfg).argmax_weight
    x = float(x)
    cps = plan.checkpoints or tuple(c for c in (1_000, 10_000, 100_000) if c <= plan.n)
    cps = sorted(cps)
    if len(cps) < 2:
        raise ValueError("degree growth needs at least two checkpoints")
    reps = _map(_degree_replica, [(cfg, x, plan.degree_after, cps, plan.master_seed, i) for i in range(plan.replicas)], plan.workers)
    born = np.array([b for b, _ in reps], dtype=float)
    deg = np.array([d for _, d in reps], dtype=float)
    xs = [float(np.mean(np.log(c / born))) for c in cps]
    ys = [float(np.log(deg[:, j].mean())) for j in range(len(cps))]
    slope = float(np.polyfit(xs, ys, 1)[0])
    target = lambda_star(cfg).per_weight[x] / dominant_eigenpair(build_main_urn(cfg)).lam
    records = [RunRecord(i, "tagged_birth_step", 0, b) for i, b in enumerate(born)]
    records += [RunRecord(i, "tagged_degree", c, deg[i, j]) for i in range(len(reps)) for j, c in enumerate(cps)]
    tol = plan.tolerances["slope_abs"]
    summary = {"degree_growth": _entry(slope, target, tol, abs(slope - target) <= tol, weight=x)}
    return DiagnosticResult(records, summary, DegreeGrowth(slope, target, list(cps), xs, ys))


@dataclass(frozen=True)
class SplittingTimes:
    checkpoints: list[int]
    centered_sd: list[float]
    pairwise_mean: float
    pairwise_se: float
    lam: float


def check_splitting_times(plan: ExperimentPlan) -> DiagnosticResult:
    """Dispersion of ``tau_n - log(n)/lambda`` and the ``tau_n - tau_{n/10}`` check."""
    lam = dominant_eigenpair(build_main_urn(plan.config)).lam
    cps = plan.resolved_checkpoints()
    n = plan.n
    tenth = max(1, n // 10)
    all_cps = sorted(set(cps) | {tenth, n})
    reps = np.array(_map(_tau_replica, [(plan.config, all_cps, plan.master_seed, i) for i in range(plan.replicas)], plan.workers))
    centered = reps - np.log(np.array(all_cps, dtype=float)) / lam
    sds = centered.std(axis=0, ddof=1) if plan.replicas > 1 else np.zeros(len(all_cps))
    diff = reps[:, all_cps.index(n)] - reps[:, all_cps.index(tenth)] - math.log(n / tenth) / lam
    mean = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else float("inf")
    records = [RunRecord(i, "tau", c, reps[i, j]) for i in range(len(reps)) for j, c in enumerate(all_cps)]
    tol = plan.tolerances
    sd_ratio = float(sds[all_cps.index(n)] / sds[all_cps.index(tenth)]) if sds[all_cps.index(tenth)] > 0 else float("nan")
    summary = {
        "splitting_sd_ratio": _entry(sd_ratio, 1.0, tol["sd_growth_max"], sd_ratio <= tol["sd_growth_max"]),
        "splitting_pairwise": _entry(mean, 0.0, tol["pairwise_se"], abs(mean) <= tol["pairwise_se"] * se, standard_error=se),
    }
    return DiagnosticResult(records, summary, SplittingTimes(all_cps, sds.tolist(), mean, se, lam))


def expected_tau_constant_fitness(config: ModelConfig, n: int) -> float:
    """``E[tau_n]`` when every face has the same fitness (total fitness is deterministic)."""
    if len(set(config.fitness_values.tolist())) != 1:
        raise ValueError("closed form needs constant face fitness")
    gamma = float(config.fitness_values[0])
    d = config.d
    per_step = d - 1 if config.is_model_b else d
    m = np.arange(n, dtype=float)
    return float(np.sum(1.0 / (gamma * (d + 1 + per_step * m))))


# records and plan execution ----------------------------------------------------

def write_records(records: Iterable[RunRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow([r.replica, r.quantity, repr(float(r.step_or_p)), repr(float(r.value))])


def read_records(fh) -> list[RunRecord]:
    rows = csv.DictReader(fh)
    return [RunRecord(int(r["replica"]), r["quantity"], float(r["step_or_p"]), float(r["value"])) for r in rows]


_RUNNERS: dict[str, Callable[[ExperimentPlan], DiagnosticResult]] = {
    "z_convergence": lambda plan: check_z_convergence(plan, include_star=False),
    "star_convergence": check_star_convergence,
    "type_frequencies": check_type_frequencies,
    "degree_growth": check_degree_growth,
    "splitting_times": check_splitting_times,
    "sweep": sweep_percolation,
}


def run_plan(plan: ExperimentPlan, out_dir: str | Path | None = None) -> dict:
    """Run every requested diagnostic; write ``<name>.csv`` records and ``summary.json``."""
    summary: dict[str, Any] = {
        "n": plan.n,
        "replicas": plan.replicas,
        "master_seed": plan.master_seed,
        "diagnostics": {},
    }
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for name in DIAGNOSTICS:
        if name not in plan.diagnostics:
            continue
        result = _RUNNERS[name](plan)
        summary["diagnostics"].update(result.summary)
        if out is not None:
            with open(out / f"{name}.csv", "w", newline="") as fh:
                write_records(result.records, fh)
    summary["pass"] = all(e["pass"] for e in summary["diagnostics"].values())
    if out is not None:
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
