"""Growing weighted simplicial complexes (models A and B) and the star process.

Vertex ids are dense: the starting simplex uses ``0..d`` and the vertex added
at step ``s`` (1-based) gets id ``d + s``. Face slots are never reused; a
subdivided face in model B keeps its slot with ``alive`` cleared.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from . import _kernels as K
from .config import ModelConfig, enumerate_face_types, multiset_count_table
from .urn import WeightNotInSupport

ID_CONVENTION = "# vertex ids: initial simplex 0..d, vertex added at step s has id d+s"
EVENT_HEADER = ["step", "tau", "chosen_face", "new_vertex", "new_weight"]


class EmptyActiveSet(RuntimeError):
    pass


class UnknownVertex(KeyError):
    pass


@dataclass(frozen=True)
class GrowthEvent:
    step: int
    chosen_face: tuple[int, ...]
    new_vertex: int
    new_weight: float
    created_faces: tuple[tuple[int, ...], ...]
    wall_time_tau: float | None = None


@dataclass(frozen=True)
class StarRun:
    center_weight: float
    Z_star_trajectory: np.ndarray
    star_face_count: np.ndarray
    initial_weights: tuple[float, ...]


def _next_pow2(n: int) -> int:
    return 1 << max(1, int(n - 1).bit_length())


def _cum_probs(config: ModelConfig) -> np.ndarray:
    cum = np.cumsum(np.asarray(config.mu.probs, dtype=float))
    cum[-1] = 1.0
    return cum


class Complex:
    """Array-backed simplicial complex grown by repeated face subdivision.

    Only the maximal-dimensional history is stored: the active-face arena and,
    per step, the slot of the subdivided face. Every face of the complex is a
    subset of ``faces[step_face[s]] + {d + s + 1}`` or of the initial simplex.
    """

    def __init__(self, config: ModelConfig, initial_atoms: np.ndarray, capacity_steps: int = 1024):
        self.config = config
        self.d = d = config.d
        self.model_b = config.is_model_b
        self._fitness_by_type = np.array(config.fitness_values, dtype=float)
        self._count_table = multiset_count_table(d, config.K)
        self._cum_probs = _cum_probs(config)
        self._values = np.asarray(config.mu.values, dtype=float)

        self._counters = np.zeros(4, dtype=np.int64)
        self._floats = np.zeros(2, dtype=float)
        self._alloc(capacity_steps)

        self._vertex_atom[: d + 1] = initial_atoms
        self._degree[: d + 1] = d
        self._counters[K.N_VERTICES] = d + 1
        for j in range(d + 1):
            ids = [i for i in range(d + 1) if i != j]
            self._faces[j] = ids
            t = config.type_index(self._values[self._vertex_atom[ids]])
            self._face_type[j] = t
            self._face_fit[j] = self._fitness_by_type[t]
            self._alive[j] = True
        self._counters[K.N_FACES] = d + 1
        self.rebuild()
        self._graph_cache = None

    # storage -----------------------------------------------------------
    def _alloc(self, steps: int) -> None:
        d = self.d
        self._cap_steps = steps
        nv = d + 1 + steps
        nf = d + 1 + d * steps
        self._vertex_atom = np.zeros(nv, dtype=np.int64)
        self._degree = np.zeros(nv, dtype=np.int64)
        self._faces = np.zeros((nf, d), dtype=np.int64)
        self._face_type = np.zeros(nf, dtype=np.int64)
        self._face_fit = np.zeros(nf, dtype=float)
        self._alive = np.zeros(nf, dtype=bool)
        self._tree_size = _next_pow2(nf)
        self._tree = np.zeros(self._tree_size + 1, dtype=float)
        self._step_face = np.zeros(steps, dtype=np.int64)
        self._taus = np.zeros(steps, dtype=float)

    def _ensure_capacity(self, extra_steps: int) -> None:
        need = self.step_count + extra_steps
        if need <= self._cap_steps:
            return
        new_cap = max(need, 2 * self._cap_steps)
        old = (self._vertex_atom, self._degree, self._faces, self._face_type,
               self._face_fit, self._alive, self._step_face, self._taus)
        nv, nf, ns = self.vertex_count, self.face_slots, self.step_count
        self._alloc(new_cap)
        self._vertex_atom[:nv] = old[0][:nv]
        self._degree[:nv] = old[1][:nv]
        self._faces[:nf] = old[2][:nf]
        self._face_type[:nf] = old[3][:nf]
        self._face_fit[:nf] = old[4][:nf]
        self._alive[:nf] = old[5][:nf]
        self._step_face[:ns] = old[6][:ns]
        self._taus[:ns] = old[7][:ns]
        K.fenwick_rebuild(self._tree, self._tree_size, self._face_fit, self._alive, nf)

    def rebuild(self) -> None:
        """Recompute the sampler and the total fitness exactly."""
        nf = self.face_slots
        K.fenwick_rebuild(self._tree, self._tree_size, self._face_fit, self._alive, nf)
        self._floats[K.TOTAL] = K.exact_total(self._face_fit, self._alive, nf)
        self._counters[K.N_UPDATES] = 0

    # read-only views ---------------------------------------------------
    @property
    def vertex_count(self) -> int:
        return int(self._counters[K.N_VERTICES])

    @property
    def face_slots(self) -> int:
        return int(self._counters[K.N_FACES])

    @property
    def step_count(self) -> int:
        return int(self._counters[K.N_STEPS])

    @property
    def total_fitness(self) -> float:
        return float(self._floats[K.TOTAL])

    @property
    def tau(self) -> float:
        return float(self._floats[K.TAU])

    @property
    def alive_count(self) -> int:
        return int(self._alive[: self.face_slots].sum())

    @property
    def weights(self) -> np.ndarray:
        return self._values[self._vertex_atom[: self.vertex_count]]

    @property
    def degrees(self) -> np.ndarray:
        return self._degree[: self.vertex_count]

    @property
    def taus(self) -> np.ndarray:
        """Split times ``tau_1..tau_n`` of the continuous-time embedding."""
        return self._taus[: self.step_count]

    @property
    def faces(self) -> np.ndarray:
        return self._faces[: self.face_slots]

    @property
    def alive(self) -> np.ndarray:
        return self._alive[: self.face_slots]

    @property
    def face_fitness(self) -> np.ndarray:
        return self._face_fit[: self.face_slots]

    @property
    def face_types(self) -> np.ndarray:
        return self._face_type[: self.face_slots]

    @property
    def step_faces(self) -> np.ndarray:
        return self._step_face[: self.step_count]

    def alive_faces(self) -> np.ndarray:
        return self.faces[self.alive]

    def recomputed_total(self) -> float:
        return float(np.sum(self.face_fitness[self.alive]))

    def simplices(self) -> np.ndarray:
        """All d-simplices, initial one first, each row sorted."""
        d = self.d
        out = np.empty((self.step_count + 1, d + 1), dtype=np.int64)
        out[0] = np.arange(d + 1)
        out[1:, :d] = self._faces[self.step_faces]
        out[1:, d] = np.arange(d + 1, d + 1 + self.step_count)
        return out

    def edges(self) -> np.ndarray:
        """1-skeleton as an ``(E, 2)`` array; every edge appears once."""
        d = self.d
        init = np.array([(i, j) for i in range(d + 1) for j in range(i + 1, d + 1)], dtype=np.int64)
        chosen = self._faces[self.step_faces]
        new = np.repeat(np.arange(d + 1, d + 1 + self.step_count), d)
        grown = np.column_stack([chosen.reshape(-1), new])
        return np.concatenate([init, grown])

    def _check_vertex(self, v: int) -> None:
        if not (0 <= v < self.vertex_count):
            raise UnknownVertex(v)

    def __repr__(self) -> str:
        return (f"Complex(d={self.d}, variant={self.config.variant}, steps={self.step_count}, "
                f"vertices={self.vertex_count}, alive_faces={self.alive_count})")


def new_complex(config: ModelConfig, rng: np.random.Generator | None = None, capacity_steps: int = 1024) -> Complex:
    """A single d-simplex with all ``d+1`` boundary faces active.

    Vertex weights come from ``config.initial_weights`` when given, otherwise
    they are drawn i.i.d. from the weight distribution using ``rng`` (or a
    generator seeded with ``config.seed``).
    """
    if config.initial_weights is not None:
        atoms = np.array([config.mu.index_of(w) for w in config.initial_weights], dtype=np.int64)
    else:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        atoms = rng.choice(config.K, size=config.d + 1, p=np.asarray(config.mu.probs))
    return Complex(config, atoms.astype(np.int64), capacity_steps)


def build_complex(config: ModelConfig, steps: int, rng: np.random.Generator | None = None) -> Complex:
    """Seeded start plus ``steps`` subdivisions, all from one generator."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    cx = new_complex(config, rng, capacity_steps=max(steps, 1))
    grow(cx, steps, rng)
    return cx


def sample_face(cx: Complex, rng: np.random.Generator) -> int:
    """Slot of a live face drawn with probability proportional to its fitness."""
    return int(sample_faces(cx, rng, 1)[0])


def sample_faces(cx: Complex, rng: np.random.Generator, size: int) -> np.ndarray:
    if cx.alive_count == 0:
        raise EmptyActiveSet("no active faces")
    u = rng.random(size)
    return K.sample_many(cx._tree, cx._tree_size, cx._face_fit, cx._alive, cx.face_slots, u)


def grow(
    cx: Complex,
    steps: int,
    rng: np.random.Generator,
    continuous: bool = False,
    event_sink: Callable[[GrowthEvent], None] | None = None,
) -> None:
    """Run ``steps`` subdivisions in place.

    The exponential clock is always advanced (the draw is consumed either way,
    which keeps runs with and without ``continuous`` identical); the flag only
    controls whether events carry ``wall_time_tau``.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps == 0:
        return
    cx._ensure_capacity(steps)
    start = cx.step_count
    uniforms = rng.random((steps, 3))
    K.grow_kernel(
        uniforms, cx.d, cx.model_b, cx._faces, cx._face_type, cx._face_fit, cx._alive,
        cx._tree, cx._tree_size, cx._vertex_atom, cx._degree, cx._step_face, cx._taus,
        cx._fitness_by_type, cx._count_table, cx._cum_probs, cx._counters, cx._floats,
    )
    cx._graph_cache = None
    if event_sink is not None:
        for ev in iter_events(cx, start, cx.step_count, continuous):
            event_sink(ev)


def grow_step(cx: Complex, rng: np.random.Generator, continuous: bool = False) -> GrowthEvent:
    events: list[GrowthEvent] = []
    grow(cx, 1, rng, continuous, events.append)
    return events[0]


def event_at(cx: Complex, index: int, continuous: bool = False) -> GrowthEvent:
    """Event for the ``index``-th step (0-based)."""
    d = cx.d
    parent = tuple(int(x) for x in cx._faces[cx._step_face[index]])
    v = d + 1 + index
    created = tuple(tuple(parent[:j] + parent[j + 1 :]) + (v,) for j in range(d))
    return GrowthEvent(
        step=index + 1,
        chosen_face=parent,
        new_vertex=v,
        new_weight=float(cx._values[cx._vertex_atom[v]]),
        created_faces=created,
        wall_time_tau=float(cx._taus[index]) if continuous else None,
    )


def iter_events(cx: Complex, start: int = 0, stop: int | None = None, continuous: bool = False) -> Iterator[GrowthEvent]:
    stop = cx.step_count if stop is None else stop
    for i in range(start, stop):
        yield event_at(cx, i, continuous)


def star(cx: Complex, v: int) -> list[tuple[int, ...]]:
    """Active faces containing ``v``."""
    cx._check_vertex(v)
    live = cx.alive_faces()
    return [tuple(int(x) for x in row) for row in live[(live == v).any(axis=1)]]


def link(cx: Complex, v: int) -> list[tuple[int, ...]]:
    return [tuple(x for x in face if x != v) for face in star(cx, v)]


def degree(cx: Complex, v: int) -> int:
    """Number of distinct neighbours of ``v`` in the 1-skeleton."""
    cx._check_vertex(v)
    return int(cx._degree[v])


def neighbors(cx: Complex, v: int) -> np.ndarray:
    cx._check_vertex(v)
    e = cx.edges()
    return np.sort(np.concatenate([e[e[:, 0] == v, 1], e[e[:, 1] == v, 0]]))


def empirical_type_measure(cx: Complex) -> np.ndarray:
    """Active-face counts per face type."""
    return np.bincount(cx.face_types[cx.alive], minlength=cx.config.q)


def run_star_process(config: ModelConfig, x: float, steps: int, rng: np.random.Generator,
                     initial_weights: Iterable[float] | None = None) -> StarRun:
    """Grow the star of a centre vertex of weight ``x`` for ``steps`` subdivisions.

    The centre subdivides a face whose ``d`` weights are i.i.d. draws (or
    ``initial_weights``); the child not containing the centre is discarded.
    """
    if x not in config.mu.values:
        raise WeightNotInSupport(f"{x!r} is not in the support {config.mu.values}")
    d = config.d
    m = d - 1
    if initial_weights is None:
        sigma0 = rng.choice(config.K, size=d, p=np.asarray(config.mu.probs))
    else:
        sigma0 = np.array([config.mu.index_of(float(w)) for w in initial_weights], dtype=np.int64)
        if sigma0.shape != (d,):
            raise ValueError(f"initial_weights needs {d} entries")
    init = np.array([np.delete(sigma0, j) for j in range(d)], dtype=np.int64)
    star_types = enumerate_face_types(m, config.mu)
    fit = np.array([config.fitness(t.weights + (x,)) for t in star_types], dtype=float)
    uniforms = rng.random((steps, 2))
    z = np.empty(steps + 1)
    counts = np.empty(steps + 1, dtype=np.int64)
    tree_size = _next_pow2(d + m * steps)
    K.star_kernel(uniforms, m, config.is_model_b, init, fit, multiset_count_table(m, config.K),
                  _cum_probs(config), tree_size, z, counts)
    return StarRun(float(x), z, counts, tuple(float(config.mu.values[a]) for a in sigma0))


# persistence ---------------------------------------------------------------

def write_event_log(cx: Complex, fh, continuous: bool = True) -> None:
    fh.write(ID_CONVENTION + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EVENT_HEADER)
    for ev in iter_events(cx, continuous=continuous):
        tau = "" if ev.wall_time_tau is None else repr(ev.wall_time_tau)
        w.writerow([ev.step, tau, ";".join(map(str, ev.chosen_face)), ev.new_vertex, repr(ev.new_weight)])


def event_log_text(cx: Complex, continuous: bool = True) -> str:
    buf = io.StringIO()
    write_event_log(cx, buf, continuous)
    return buf.getvalue()


def read_event_log(fh) -> list[dict]:
    rows = csv.DictReader(line for line in fh if not line.startswith("#"))
    out = []
    for row in rows:
        out.append({
            "step": int(row["step"]),
            "tau": float(row["tau"]) if row["tau"] else None,
            "chosen_face": tuple(int(x) for x in row["chosen_face"].split(";")),
            "new_vertex": int(row["new_vertex"]),
            "new_weight": float(row["new_weight"]),
        })
    return out


def snapshot(cx: Complex) -> dict:
    return {
        "vertices": [{"id": i, "weight": float(w)} for i, w in enumerate(cx.weights)],
        "faces": cx.alive_faces().tolist(),
        "step_count": cx.step_count,
    }


def write_snapshot(cx: Complex, fh) -> None:
    json.dump(snapshot(cx), fh)
