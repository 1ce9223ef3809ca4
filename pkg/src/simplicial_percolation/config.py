"""Model inputs: weight distribution, fitness function, and the validated config.

A config is immutable once built. Every fitness value the simulation can ever
need is evaluated once, over all face types, when the config is created.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

PROB_RENORMALIZE_TOL = 1e-12
MAX_SEED = 2**64 - 1

FITNESS_KINDS = ("constant", "sum", "product", "min", "max", "table")


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ConfigError(ValueError):
    """Raised with the full list of violations found in a config document."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


@dataclass(frozen=True)
class WeightDistribution:
    """Finitely supported law on (0, 1]; atoms sorted by value."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.values)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values, self.probs))

    def index_of(self, x: float) -> int:
        for i, v in enumerate(self.values):
            if v == x:
                return i
        raise KeyError(x)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "WeightDistribution":
        dist, problems = _build_distribution(atoms)
        if problems:
            raise ConfigError(problems)
        return dist


def _build_distribution(atoms) -> tuple[WeightDistribution | None, list[Violation]]:
    problems: list[Violation] = []
    if len(atoms) == 0:
        return None, [Violation("EmptySupport", "weight distribution needs at least one atom")]
    pairs = sorted((float(v), float(p)) for v, p in atoms)
    values = [v for v, _ in pairs]
    probs = [p for _, p in pairs]
    for v in values:
        if not (0.0 < v <= 1.0) or math.isnan(v):
            problems.append(Violation("WeightOutOfRange", f"weight {v!r} not in (0, 1]"))
    for a, b in zip(values, values[1:]):
        if a == b:
            problems.append(Violation("DuplicateWeights", f"weight {a!r} listed twice"))
    for p in probs:
        if not (0.0 < p <= 1.0) or math.isnan(p):
            problems.append(Violation("ProbabilitiesDontSum", f"probability {p!r} not in (0, 1]"))
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_RENORMALIZE_TOL:
        problems.append(
            Violation("ProbabilitiesDontSum", f"probabilities sum to {total!r}, not 1")
        )
    if problems:
        return None, problems
    probs = [p / total for p in probs]
    return WeightDistribution(tuple(values), tuple(probs)), []


@dataclass(frozen=True)
class FaceType:
    """Canonical sorted multiset of face weights, with its lexicographic rank."""

    weights: tuple[float, ...]
    index: int
    atoms: tuple[int, ...]


def enumerate_face_types(d: int, mu: WeightDistribution) -> list[FaceType]:
    """All multisets of size ``d`` over the support, in lexicographic order."""
    return [
        FaceType(tuple(mu.values[a] for a in combo), i, combo)
        for i, combo in enumerate(itertools.combinations_with_replacement(range(mu.K), d))
    ]


def count_face_types(d: int, K: int) -> int:
    return math.comb(d + K - 1, d)


@dataclass(frozen=True)
class FitnessFunction:
    kind: str
    value: float | None = None
    table: Mapping[tuple[float, ...], float] | None = None

    def __call__(self, weights: Sequence[float]) -> float:
        w = tuple(sorted(float(x) for x in weights))
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "sum":
            return math.fsum(w)
        if self.kind == "product":
            return math.prod(w)
        if self.kind == "min":
            return w[0]
        if self.kind == "max":
            return w[-1]
        if self.kind == "table":
            try:
                return float(self.table[w])
            except KeyError:
                raise KeyError(f"fitness table has no entry for {w}") from None
        raise ValueError(f"unknown fitness kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        if self.kind == "table":
            out["table"] = [{"weights": list(k), "value": v} for k, v in sorted(self.table.items())]
        return out


def _parse_fitness(doc: Any) -> tuple[FitnessFunction | None, list[Violation]]:
    if not isinstance(doc, Mapping) or "kind" not in doc:
        return None, [Violation("BadFitness", "fitness must be an object with a 'kind'")]
    kind = doc["kind"]
    allowed = {"kind"}
    if kind == "constant":
        allowed.add("value")
    elif kind == "table":
        allowed.add("table")
    extra = set(doc) - allowed
    if extra:
        return None, [Violation("UnknownKey", f"fitness has unknown keys {sorted(extra)}")]
    if kind not in FITNESS_KINDS:
        return None, [Violation("BadFitness", f"unknown fitness kind {kind!r}")]
    if kind == "constant":
        if "value" not in doc:
            return None, [Violation("BadFitness", "constant fitness needs 'value'")]
        return FitnessFunction("constant", value=float(doc["value"])), []
    if kind == "table":
        rows = doc.get("table")
        if not isinstance(rows, list):
            return None, [Violation("BadFitness", "table fitness needs a 'table' list")]
        table: dict[tuple[float, ...], float] = {}
        try:
            for row in rows:
                table[tuple(sorted(float(x) for x in row["weights"]))] = float(row["value"])
        except (TypeError, KeyError, ValueError):
            return None, [Violation("BadFitness", "table rows must be {weights: [...], value: number}")]
        return FitnessFunction("table", table=table), []
    return FitnessFunction(kind), []


@dataclass(frozen=True)
class ModelConfig:
    d: int
    variant: str
    mu: WeightDistribution
    fitness: FitnessFunction
    r: int = 1
    k: int = 1
    seed: int = 0
    initial_weights: tuple[float, ...] | None = None
    face_types: tuple[FaceType, ...] = field(init=False, repr=False, compare=False)
    fitness_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        problems = _check_config(self)
        if problems:
            raise ConfigError(problems)
        types = tuple(enumerate_face_types(self.d, self.mu))
        try:
            values = np.array([self.fitness(t.weights) for t in types], dtype=float)
        except KeyError as exc:
            raise ConfigError([Violation("BadFitness", str(exc.args[0]))]) from None
        bad = [t.weights for t, f in zip(types, values) if not (np.isfinite(f) and f > 0)]
        if bad:
            raise ConfigError(
                [Violation("NonPositiveFitness", f"fitness not positive and finite on {w}") for w in bad]
            )
        values.setflags(write=False)
        object.__setattr__(self, "face_types", types)
        object.__setattr__(self, "fitness_values", values)

    @property
    def K(self) -> int:
        return self.mu.K

    @property
    def q(self) -> int:
        return len(self.face_types)

    @property
    def is_model_b(self) -> bool:
        return self.variant == "B"

    def type_index(self, weights: Sequence[float]) -> int:
        atoms = tuple(sorted(self.mu.index_of(float(w)) for w in weights))
        return rank_multiset(atoms, self.K)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "d": self.d,
            "variant": self.variant,
            "weights": [{"value": v, "prob": p} for v, p in self.mu.atoms],
            "fitness": self.fitness.to_dict(),
            "r": self.r,
            "k": self.k,
            "seed": self.seed,
        }
        if self.initial_weights is not None:
            out["initial_weights"] = list(self.initial_weights)
        return out

    def replace(self, **changes) -> "ModelConfig":
        doc = self.to_dict()
        doc.update(changes)
        return validate(doc)


def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_scalars(d, variant, r, k, seed, fitness: FitnessFunction | None) -> list[Violation]:
    problems = []
    if not _is_int(d) or d < 3:
        problems.append(Violation("DimensionTooSmall", f"d must be an integer >= 3, got {d!r}"))
    if variant not in ("A", "B"):
        problems.append(Violation("BadVariant", f"variant must be 'A' or 'B', got {variant!r}"))
    for name, val in (("r", r), ("k", k)):
        if not _is_int(val) or val < 1:
            problems.append(Violation("BadBootstrapParameter", f"{name} must be an integer >= 1"))
    if not problems and r * k > d:
        problems.append(Violation("RKExceedsD", f"r*k = {r * k} exceeds d = {d}"))
    if not _is_int(seed) or not (0 <= seed <= MAX_SEED):
        problems.append(Violation("BadSeed", "seed must be a 64-bit unsigned integer"))
    if fitness is not None and fitness.kind == "constant" and not (fitness.value > 0 and math.isfinite(fitness.value)):
        problems.append(Violation("NonPositiveFitness", "constant fitness must be positive"))
    return problems


def _check_config(cfg: ModelConfig) -> list[Violation]:
    problems = _check_scalars(cfg.d, cfg.variant, cfg.r, cfg.k, cfg.seed, cfg.fitness)
    if cfg.initial_weights is not None and isinstance(cfg.d, int):
        if len(cfg.initial_weights) != cfg.d + 1:
            problems.append(
                Violation("BadInitialWeights", f"initial_weights needs d+1 = {cfg.d + 1} entries")
            )
        for w in cfg.initial_weights:
            if w not in cfg.mu.values:
                problems.append(Violation("WeightNotInSupport", f"initial weight {w!r} not in support"))
    return problems


CONFIG_KEYS = {"d", "variant", "weights", "fitness", "r", "k", "seed", "initial_weights"}


def validate(doc: Mapping[str, Any]) -> ModelConfig:
    """Build a ModelConfig from a parsed JSON document.

    Unknown keys are rejected. All violations found are reported together in
    a single :class:`ConfigError`.
    """
    problems: list[Violation] = []
    if not isinstance(doc, Mapping):
        raise ConfigError([Violation("BadDocument", "config must be a JSON object")])
    extra = set(doc) - CONFIG_KEYS
    if extra:
        problems.append(Violation("UnknownKey", f"unknown keys {sorted(extra)}"))
    for key in ("d", "variant", "weights", "fitness"):
        if key not in doc:
            problems.append(Violation("MissingKey", f"missing required key {key!r}"))
    if problems:
        raise ConfigError(problems)

    try:
        atoms = [(a["value"], a["prob"]) for a in doc["weights"]]
    except (TypeError, KeyError):
        raise ConfigError([Violation("BadWeights", "weights must be a list of {value, prob}")]) from None
    mu, mu_problems = _build_distribution(atoms)
    fitness, fit_problems = _parse_fitness(doc["fitness"])
    problems += mu_problems + fit_problems
    if problems:
        problems += _check_scalars(doc["d"], doc["variant"], doc.get("r", 1), doc.get("k", 1),
                                   doc.get("seed", 0), fitness)
        raise ConfigError(problems)

    init = doc.get("initial_weights")
    return ModelConfig(
        d=doc["d"],
        variant=doc["variant"],
        mu=mu,
        fitness=fitness,
        r=doc.get("r", 1),
        k=doc.get("k", 1),
        seed=doc.get("seed", 0),
        initial_weights=None if init is None else tuple(float(w) for w in init),
    )


def load_config(path: str | Path) -> ModelConfig:
    with open(path) as fh:
        return validate(json.load(fh))


def rank_multiset(atoms: Sequence[int], K: int) -> int:
    """Lexicographic rank of a sorted multiset among all multisets of its size."""
    s = len(atoms)
    rank = 0
    prev = 0
    for pos, c in enumerate(atoms):
        rest = s - pos - 1
        for v in range(prev, c):
            rank += math.comb(rest + K - 1 - v, rest)
        prev = c
    return rank


def multiset_count_table(size: int, K: int) -> np.ndarray:
    """``table[len, v]`` = number of sorted sequences of length ``len`` over ``v..K-1``."""
    table = np.zeros((size + 1, K), dtype=np.int64)
    for length in range(size + 1):
        for v in range(K):
            table[length, v] = math.comb(length + K - 1 - v, length)
    return table


def ran_config(d: int, gamma: float = 1.0, variant: str = "B", r: int = 1, k: int = 1, seed: int = 0) -> ModelConfig:
    """Random Apollonian network: one weight, constant fitness ``gamma``."""
    return validate(
        {
            "d": d,
            "variant": variant,
            "weights": [{"value": 1.0, "prob": 1.0}],
            "fitness": {"kind": "constant", "value": gamma},
            "r": r,
            "k": k,
            "seed": seed,
        }
    )


def two_point_config(alpha: float, beta: float, variant: str = "B", r: int = 2, k: int = 1, seed: int = 0) -> ModelConfig:
    """Weights alpha (prob 1-beta) and 1 (prob beta), d = 3, fitness = sum."""
    if alpha == 1.0:
        weights = [{"value": 1.0, "prob": 1.0}]
    else:
        weights = [{"value": alpha, "prob": 1.0 - beta}, {"value": 1.0, "prob": beta}]
    return validate(
        {
            "d": 3,
            "variant": variant,
            "weights": weights,
            "fitness": {"kind": "sum"},
            "r": r,
            "k": k,
            "seed": seed,
        }
    )
