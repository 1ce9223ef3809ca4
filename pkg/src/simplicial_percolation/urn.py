"""Generalized Polya urn reduction of the growth process and its Perron data.

Face types are urn colours. A ball of type ``i`` has activity ``a_i = f(type_i)``
and, when it dies, produces on average ``B[i, j]`` balls of type ``j``. The
growth rates of the complex are read off the dominant eigenpair of the
generator ``A = diag(a) B``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .config import FaceType, ModelConfig, enumerate_face_types

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 1_000_000
TIE_TOL = 1e-9


class NotIrreducible(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


class WeightNotInSupport(ValueError):
    pass


@dataclass(frozen=True)
class UrnSpec:
    types: tuple[FaceType, ...]
    activities: np.ndarray
    replacement: np.ndarray
    variant: str

    @property
    def q(self) -> int:
        return len(self.types)

    @property
    def generator(self) -> np.ndarray:
        return self.activities[:, None] * self.replacement


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    u: np.ndarray
    v: np.ndarray
    nu: float
    rho: np.ndarray
    iterations: int
    residual: float

    @property
    def type_distribution(self) -> np.ndarray:
        return self.rho / self.rho.sum()


@dataclass(frozen=True)
class StarSpectralSummary:
    per_weight: dict[float, float]
    lambda_star: float
    argmax_weight: float
    ties: tuple[float, ...] = ()


def _offspring_matrix(types: list[FaceType], config: ModelConfig) -> np.ndarray:
    """Expected offspring counts when every element of a type is replaced in turn.

    Replacing position ``j`` of a sorted multiset by a fresh weight ``w`` gives
    one child; positions are counted with multiplicity.
    """
    K = config.K
    size = len(types[0].atoms)
    index = {t.atoms: t.index for t in types}
    B = np.zeros((len(types), len(types)))
    for t in types:
        for pos in range(size):
            rest = t.atoms[:pos] + t.atoms[pos + 1 :]
            for w in range(K):
                child = tuple(sorted(rest + (w,)))
                B[t.index, index[child]] += config.mu.probs[w]
    if config.is_model_b:
        B -= np.eye(len(types))
    return B


def build_main_urn(config: ModelConfig) -> UrnSpec:
    """Urn whose balls are the active ``(d-1)``-faces of the complex."""
    types = list(config.face_types)
    B = _offspring_matrix(types, config)
    a = np.array(config.fitness_values, dtype=float)
    return UrnSpec(tuple(types), a, B, config.variant)


def build_star_urn(config: ModelConfig, x: float) -> UrnSpec:
    """Urn for the star of a centre vertex of weight ``x``.

    Balls are the ``d-1`` non-centre weights of a star face; a subdivision
    keeps only the ``d-1`` children that still contain the centre.
    """
    if x not in config.mu.values:
        raise WeightNotInSupport(f"{x!r} is not in the support {config.mu.values}")
    types = enumerate_face_types(config.d - 1, config.mu)
    B = _offspring_matrix(types, config)
    a = np.array([config.fitness(t.weights + (x,)) for t in types], dtype=float)
    return UrnSpec(tuple(types), a, B, config.variant)


def is_irreducible(urn: UrnSpec) -> bool:
    """Strong connectivity of the positive off-diagonal pattern of ``B``."""
    q = urn.q
    adj = (urn.replacement > 0) & ~np.eye(q, dtype=bool)

    def reaches_all(m: np.ndarray) -> bool:
        seen = np.zeros(q, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(m[i] & ~seen):
                seen[j] = True
                queue.append(j)
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


def _power_iterate(M: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, float, int]:
    x = np.full(M.shape[0], 1.0 / M.shape[0])
    for it in range(1, max_iter + 1):
        y = M @ x
        s = y.sum()
        y /= s
        if np.max(np.abs(y - x)) <= tol * np.max(np.abs(y)):
            return y, s, it
        x = y
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def dominant_eigenpair(urn: UrnSpec, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SpectralResult:
    """Perron root and eigenvectors of the urn generator.

    Power iteration runs on ``A + c I`` with ``c = 1 + max |A_ii|``, which is
    nonnegative and primitive when the urn is irreducible.
    """
    if not is_irreducible(urn):
        raise NotIrreducible("replacement pattern is not strongly connected")
    A = urn.generator
    q = urn.q
    c = 1.0 + float(np.max(np.abs(np.diag(A))))
    M = A + c * np.eye(q)
    v, _, it_v = _power_iterate(M, tol, max_iter)
    u, _, it_u = _power_iterate(M.T.copy(), tol, max_iter)
    v = v / v.sum()
    lam = float((M @ v).sum() / v.sum()) - c
    u = u / (u @ v)
    nu = lam / float(urn.activities @ u)
    rho = nu * u
    scale = float(np.max(np.abs(A).sum(axis=1)))
    res_v = np.max(np.abs(A @ v - lam * v))
    res_u = np.max(np.abs(u @ A - lam * u))
    residual = float(max(res_v, res_u) / scale) if scale > 0 else 0.0
    return SpectralResult(lam, u, v, nu, rho, max(it_v, it_u), residual)


def lambda_main(config: ModelConfig) -> float:
    return dominant_eigenpair(build_main_urn(config)).lam


def lambda_star(config: ModelConfig) -> StarSpectralSummary:
    """Star growth rate for every support weight, with the maximising weight.

    Ties within ``1e-9`` go to the largest weight.
    """
    per_weight = {x: dominant_eigenpair(build_star_urn(config, x)).lam for x in config.mu.values}
    best = max(per_weight.values())
    ties = tuple(x for x, lam in per_weight.items() if abs(lam - best) <= TIE_TOL)
    return StarSpectralSummary(per_weight, best, max(ties), ties if len(ties) > 1 else ())


Regime = Literal["strict", "log_corrected", "not_applicable"]


@dataclass(frozen=True)
class CriticalProbability:
    p_c: float
    exponent: float
    regime: Regime
    ratio: float


def classify_regime(r: int, lam: float, lam_star: float) -> Regime:
    ratio = r * lam_star / lam
    if abs(ratio - 1.0) <= TIE_TOL:
        return "log_corrected"
    return "strict" if ratio > 1.0 else "not_applicable"


def critical_probability(n: int, config: ModelConfig) -> CriticalProbability:
    """``p_c = n ** (-lambda_star / (k * lambda))`` and the subcritical regime."""
    lam = lambda_main(config)
    lam_star = lambda_star(config).lambda_star
    exponent = -lam_star / (config.k * lam)
    return CriticalProbability(
        p_c=float(n) ** exponent,
        exponent=exponent,
        regime=classify_regime(config.r, lam, lam_star),
        ratio=config.r * lam_star / lam,
    )


def spectra_report(config: ModelConfig, n: int | None = None) -> dict:
    """Everything the ``spectra`` command prints, as plain JSON-ready values."""
    main = dominant_eigenpair(build_main_urn(config))
    star = lambda_star(config)
    exponent = -star.lambda_star / (config.k * main.lam)
    report = {
        "lambda": main.lam,
        "lambda_x": {repr(x): lam for x, lam in star.per_weight.items()},
        "lambda_star": star.lambda_star,
        "argmax_weight": star.argmax_weight,
        "rho": main.rho.tolist(),
        "u": main.u.tolist(),
        "v": main.v.tolist(),
        "pc_exponent": exponent,
        "regime": classify_regime(config.r, main.lam, star.lambda_star),
    }
    if n is not None:
        report["n"] = n
        report["p_c"] = float(n) ** exponent
    return report


__all__ = [
    "UrnSpec",
    "SpectralResult",
    "StarSpectralSummary",
    "CriticalProbability",
    "NotIrreducible",
    "NoConvergence",
    "WeightNotInSupport",
    "build_main_urn",
    "build_star_urn",
    "is_irreducible",
    "dominant_eigenpair",
    "lambda_main",
    "lambda_star",
    "critical_probability",
    "classify_regime",
    "spectra_report",
]
