"""(r,k)-bootstrap percolation on a grown complex.

A healthy vertex ``v`` becomes infected in round ``t+1`` when its link holds
``r`` fully infected ``(k-1)``-faces that are pairwise disjoint, i.e. ``r``
``k``-faces through ``v`` in which ``v`` is the only healthy member and which
meet only at ``v``. Rounds are simultaneous: eligibility is evaluated against
the infected set of the previous round.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .complex import Complex

log = logging.getLogger(__name__)

BACKTRACK_WARN = 100_000


class InvalidProbability(ValueError):
    pass


class VertexNotHealthy(ValueError):
    pass


@dataclass
class BootstrapState:
    infected: np.ndarray
    r: int
    k: int
    round: int = 0
    frontier: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    history: list[int] = field(default_factory=list)

    @property
    def infected_count(self) -> int:
        return int(self.infected.sum())

    def infected_set(self) -> set[int]:
        return set(np.flatnonzero(self.infected).tolist())


@dataclass(frozen=True)
class PercolationVerdict:
    percolated: bool
    rounds_to_fixpoint: int
    final_infected_count: int
    stable_at_one: bool
    per_round_counts: tuple[int, ...]
    final_infected: np.ndarray = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {
            "percolated": self.percolated,
            "rounds": self.rounds_to_fixpoint,
            "final_count": self.final_infected_count,
            "stable_at_one": self.stable_at_one,
            "per_round_counts": list(self.per_round_counts),
        }


@dataclass(frozen=True)
class Incidence:
    """CSR views of the complex used by the bootstrap rounds."""

    n: int
    simplices: np.ndarray
    inc_ptr: np.ndarray
    inc_idx: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray

    def incident(self, v: int) -> np.ndarray:
        return self.inc_idx[self.inc_ptr[v] : self.inc_ptr[v + 1]]

    def neighbors(self, v: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[v] : self.nbr_ptr[v + 1]]


def _csr(keys: np.ndarray, values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr, values[order]


def incidence(cx: Complex) -> Incidence:
    cached = cx._graph_cache
    if cached is not None and cached.n == cx.vertex_count:
        return cached
    n = cx.vertex_count
    simp = cx.simplices()
    inc_ptr, inc_idx = _csr(simp.ravel(), np.repeat(np.arange(len(simp)), simp.shape[1]), n)
    e = cx.edges()
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    nbr_ptr, nbr_idx = _csr(src, dst, n)
    inc = Incidence(n, simp, inc_ptr, inc_idx, nbr_ptr, nbr_idx, src, dst)
    cx._graph_cache = inc
    return inc


def _new_state(cx: Complex, infected: np.ndarray, r: int | None, k: int | None) -> BootstrapState:
    r = cx.config.r if r is None else r
    k = cx.config.k if k is None else k
    if r < 1 or k < 1 or r * k > cx.d:
        raise ValueError(f"need r, k >= 1 and r*k <= d, got r={r}, k={k}, d={cx.d}")
    return BootstrapState(infected, r, k, 0, np.flatnonzero(infected), [int(infected.sum())])


def seed_infection(cx: Complex, p: float, rng: np.random.Generator, r: int | None = None, k: int | None = None) -> BootstrapState:
    """Infect each vertex independently with probability ``p``."""
    if not (0.0 <= p <= 1.0):
        raise InvalidProbability(f"p must lie in [0, 1], got {p!r}")
    infected = rng.random(cx.vertex_count) < p
    return _new_state(cx, infected, r, k)


def seed_vertices(cx: Complex, vertices: Iterable[int], r: int | None = None, k: int | None = None) -> BootstrapState:
    infected = np.zeros(cx.vertex_count, dtype=bool)
    infected[list(vertices)] = True
    return _new_state(cx, infected, r, k)


def _candidates(inc: Incidence, infected: np.ndarray, v: int, k: int) -> list[tuple[int, ...]]:
    found: set[tuple[int, ...]] = set()
    for s in inc.incident(v):
        others = [int(u) for u in inc.simplices[s] if u != v and infected[u]]
        if len(others) >= k:
            found.update(itertools.combinations(others, k))
    return sorted(found)


def critical_link_faces(cx: Complex, state: BootstrapState, v: int) -> list[tuple[int, ...]]:
    """Fully infected ``(k-1)``-faces in the link of the healthy vertex ``v``.

    Each candidate is a sorted tuple of ``k`` vertex ids; duplicates arising
    from different simplices are merged.
    """
    if state.infected[v]:
        raise VertexNotHealthy(v)
    return _candidates(incidence(cx), state.infected, v, state.k)


def has_r_disjoint(candidates: Sequence[Iterable[int]], r: int) -> bool:
    """Whether ``r`` pairwise disjoint sets can be picked from ``candidates``.

    Greedy in the given order first; when that falls short, an exact
    backtracking search settles it.
    """
    if r <= 0:
        return True
    sets = [frozenset(c) for c in candidates]
    if len(sets) < r:
        return False
    used: set[int] = set()
    got = 0
    for s in sets:
        if used.isdisjoint(s):
            used |= s
            got += 1
            if got >= r:
                return True
    if len(sets) > BACKTRACK_WARN:
        log.warning("backtracking over %d candidate faces", len(sets))

    def search(start: int, taken: frozenset, need: int) -> bool:
        if need == 0:
            return True
        for i in range(start, len(sets)):
            if len(sets) - i < need:
                return False
            s = sets[i]
            if taken.isdisjoint(s) and search(i + 1, taken | s, need - 1):
                return True
        return False

    return search(0, frozenset(), r)


def _eligible(inc: Incidence, infected: np.ndarray, v: int, r: int, k: int) -> bool:
    return has_r_disjoint(_candidates(inc, infected, v, k), r)


def step(cx: Complex, state: BootstrapState) -> BootstrapState:
    """One simultaneous round.

    Only healthy neighbours of the last round's newly infected vertices can
    change status; for ``k = 1`` the rule reduces to counting infected
    neighbours and is evaluated for every vertex at once.
    """
    inc = incidence(cx)
    infected = state.infected
    if state.k == 1:
        hits = np.bincount(inc.edge_src[infected[inc.edge_dst]], minlength=inc.n)
        newly = np.flatnonzero(~infected & (hits >= state.r))
    else:
        if state.frontier.size:
            touched = np.concatenate([inc.neighbors(u) for u in state.frontier])
            touched = np.unique(touched)
            touched = touched[~infected[touched]]
        else:
            touched = np.zeros(0, dtype=np.int64)
        newly = np.array(
            [v for v in touched.tolist() if _eligible(inc, infected, v, state.r, state.k)],
            dtype=np.int64,
        )
    nxt = infected.copy()
    nxt[newly] = True
    return BootstrapState(nxt, state.r, state.k, state.round + 1, newly, state.history + [int(nxt.sum())])


def run_to_fixpoint(cx: Complex, state: BootstrapState) -> PercolationVerdict:
    rounds = 0
    stable_at_one = True
    n = cx.vertex_count
    for t in range(n + 1):
        nxt = step(cx, state)
        if nxt.frontier.size == 0:
            break
        if t == 0:
            stable_at_one = False
        rounds += 1
        state = nxt
    count = state.infected_count
    return PercolationVerdict(
        percolated=count == n,
        rounds_to_fixpoint=rounds,
        final_infected_count=count,
        stable_at_one=stable_at_one,
        per_round_counts=tuple(state.history),
        final_infected=state.infected,
    )


def naive_oracle_step(cx: Complex, state: BootstrapState) -> BootstrapState:
    """Reference round: every healthy vertex re-examined from the raw simplex list."""
    simplices = cx.simplices().tolist()
    infected = state.infected
    r, k = state.r, state.k
    newly = []
    for v in range(cx.vertex_count):
        if infected[v]:
            continue
        faces = set()
        for simplex in simplices:
            if v not in simplex:
                continue
            for sub in itertools.combinations([u for u in simplex if u != v], k):
                if all(infected[u] for u in sub):
                    faces.add(frozenset(sub))
        if any(
            all(a.isdisjoint(b) for a, b in itertools.combinations(choice, 2))
            for choice in itertools.combinations(faces, r)
        ):
            newly.append(v)
    nxt = infected.copy()
    nxt[newly] = True
    return BootstrapState(nxt, r, k, state.round + 1, np.array(newly, dtype=np.int64),
                          state.history + [int(nxt.sum())])
