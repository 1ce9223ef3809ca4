"""Compiled inner loops: Fenwick-tree sampling, complex growth, star growth.

All randomness arrives as pre-drawn uniforms so that the compiled path and any
step-by-step path consume the generator identically. Each growth step uses
three uniforms: face choice, new weight, exponential clock.
"""

import numpy as np
from numba import njit

REBUILD_EVERY = 1 << 16

# counters layout
N_VERTICES, N_FACES, N_STEPS, N_UPDATES = 0, 1, 2, 3
# floats layout
TOTAL, TAU = 0, 1


@njit(cache=True)
def fenwick_add(tree, size, i, delta):
    i += 1
    while i <= size:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def fenwick_rebuild(tree, size, weights, alive, count):
    tree[:] = 0.0
    for i in range(count):
        if alive[i]:
            tree[i + 1] = weights[i]
    for i in range(1, size + 1):
        j = i + (i & (-i))
        if j <= size:
            tree[j] += tree[i]


@njit(cache=True)
def fenwick_find(tree, size, target):
    """0-based slot whose cumulative interval contains ``target``."""
    pos = 0
    bit = size
    while bit > 0:
        nxt = pos + bit
        if nxt <= size and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        bit >>= 1
    return pos


@njit(cache=True)
def sample_slot(tree, size, weights, alive, count, u):
    slot = fenwick_find(tree, size, u * tree[size])
    if slot < count and alive[slot]:
        return slot
    # float drift pushed the target onto a dead or empty slot; take the nearest live one
    j = min(slot, count - 1)
    while j >= 0 and not alive[j]:
        j -= 1
    if j >= 0:
        return j
    j = 0
    while j < count and not alive[j]:
        j += 1
    return j


@njit(cache=True)
def sample_many(tree, size, weights, alive, count, uniforms):
    out = np.empty(uniforms.shape[0], dtype=np.int64)
    for i in range(uniforms.shape[0]):
        out[i] = sample_slot(tree, size, weights, alive, count, uniforms[i])
    return out


@njit(cache=True)
def rank_sorted(atoms, length, count_table):
    """Lexicographic rank of the sorted multiset ``atoms[:length]``."""
    rank = 0
    prev = 0
    for pos in range(length):
        rest = length - pos - 1
        c = atoms[pos]
        for v in range(prev, c):
            rank += count_table[rest, v]
        prev = c
    return rank


@njit(cache=True)
def insertion_sort(a, length):
    for i in range(1, length):
        x = a[i]
        j = i - 1
        while j >= 0 and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


@njit(cache=True)
def draw_atom(cum_probs, u):
    K = cum_probs.shape[0]
    for a in range(K - 1):
        if u < cum_probs[a]:
            return a
    return K - 1


@njit(cache=True)
def grow_kernel(
    uniforms,
    d,
    model_b,
    faces,
    face_type,
    face_fit,
    alive,
    tree,
    tree_size,
    vertex_atom,
    degree,
    step_face,
    taus,
    fitness_by_type,
    count_table,
    cum_probs,
    counters,
    floats,
):
    steps = uniforms.shape[0]
    atoms = np.empty(d, dtype=np.int64)
    for s in range(steps):
        n_faces = counters[N_FACES]
        slot = sample_slot(tree, tree_size, face_fit, alive, n_faces, uniforms[s, 0])
        a = draw_atom(cum_probs, uniforms[s, 1])
        floats[TAU] += -np.log1p(-uniforms[s, 2]) / floats[TOTAL]

        v = counters[N_VERTICES]
        vertex_atom[v] = a
        degree[v] = d
        counters[N_VERTICES] = v + 1
        for j in range(d):
            degree[faces[slot, j]] += 1

        # child j drops the j-th vertex of the parent; the new id is the largest
        for j in range(d):
            f = counters[N_FACES]
            c = 0
            for i in range(d):
                if i != j:
                    faces[f, c] = faces[slot, i]
                    atoms[c] = vertex_atom[faces[slot, i]]
                    c += 1
            faces[f, d - 1] = v
            atoms[d - 1] = a
            insertion_sort(atoms, d)
            t = rank_sorted(atoms, d, count_table)
            fit = fitness_by_type[t]
            face_type[f] = t
            face_fit[f] = fit
            alive[f] = True
            fenwick_add(tree, tree_size, f, fit)
            floats[TOTAL] += fit
            counters[N_FACES] = f + 1
        counters[N_UPDATES] += d

        if model_b:
            alive[slot] = False
            fenwick_add(tree, tree_size, slot, -face_fit[slot])
            floats[TOTAL] -= face_fit[slot]
            counters[N_UPDATES] += 1

        step_face[counters[N_STEPS]] = slot
        taus[counters[N_STEPS]] = floats[TAU]
        counters[N_STEPS] += 1

        if counters[N_UPDATES] >= REBUILD_EVERY:
            fenwick_rebuild(tree, tree_size, face_fit, alive, counters[N_FACES])
            floats[TOTAL] = exact_total(face_fit, alive, counters[N_FACES])
            counters[N_UPDATES] = 0


@njit(cache=True)
def exact_total(weights, alive, count):
    total = 0.0
    comp = 0.0
    for i in range(count):
        if alive[i]:
            # Kahan summation
            y = weights[i] - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total


@njit(cache=True)
def star_kernel(uniforms, m, model_b, init_atoms, fitness_by_type, count_table, cum_probs, tree_size, z_out, count_out):
    """Grow the star of a fixed centre; faces are stored as their ``m = d-1`` non-centre atoms."""
    steps = uniforms.shape[0]
    cap = init_atoms.shape[0] + m * steps
    faces = np.empty((cap, m), dtype=np.int64)
    fit = np.zeros(cap)
    alive = np.zeros(cap, dtype=np.bool_)
    tree = np.zeros(tree_size + 1)
    atoms = np.empty(m, dtype=np.int64)
    total = 0.0
    n_faces = init_atoms.shape[0]
    for f in range(n_faces):
        for i in range(m):
            atoms[i] = init_atoms[f, i]
        insertion_sort(atoms, m)
        for i in range(m):
            faces[f, i] = atoms[i]
        fit[f] = fitness_by_type[rank_sorted(atoms, m, count_table)]
        alive[f] = True
        fenwick_add(tree, tree_size, f, fit[f])
        total += fit[f]
    live = n_faces
    updates = 0
    z_out[0] = total
    count_out[0] = live
    for s in range(steps):
        slot = sample_slot(tree, tree_size, fit, alive, n_faces, uniforms[s, 0])
        a = draw_atom(cum_probs, uniforms[s, 1])
        for j in range(m):
            c = 0
            for i in range(m):
                if i != j:
                    atoms[c] = faces[slot, i]
                    c += 1
            atoms[m - 1] = a
            insertion_sort(atoms, m)
            f = n_faces
            for i in range(m):
                faces[f, i] = atoms[i]
            fit[f] = fitness_by_type[rank_sorted(atoms, m, count_table)]
            alive[f] = True
            fenwick_add(tree, tree_size, f, fit[f])
            total += fit[f]
            n_faces += 1
        live += m
        updates += m
        if model_b:
            alive[slot] = False
            fenwick_add(tree, tree_size, slot, -fit[slot])
            total -= fit[slot]
            live -= 1
            updates += 1
        if updates >= REBUILD_EVERY:
            fenwick_rebuild(tree, tree_size, fit, alive, n_faces)
            total = exact_total(fit, alive, n_faces)
            updates = 0
        z_out[s + 1] = total
        count_out[s + 1] = live
