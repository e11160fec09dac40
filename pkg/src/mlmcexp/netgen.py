"""Seeded small-world and preferential-attachment test graphs.

``smallw`` is a ring lattice with random shortcuts and ``pref`` grows a graph
by degree-proportional attachment.  Both reproduce the usual models of those
names, not any particular toolbox's random bit streams.  Output is a
symmetric 0/1 adjacency matrix with an empty diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .sparse import SparseMatrix


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    n: int
    k: int = 2
    p: float = 0.1
    d: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("smallw", "pref"):
            raise ConfigurationError(f"unknown graph kind {self.kind!r}")
        if self.n < 3:
            raise ConfigurationError("graphs need n >= 3")
        if self.k < 1 or self.d < 1:
            raise ConfigurationError("k and d must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("shortcut probability must lie in [0, 1]")

    def build(self) -> SparseMatrix:
        if self.kind == "smallw":
            return smallw(self.n, self.k, self.p, self.seed)
        return pref(self.n, self.d, self.seed)


def _symmetric_adjacency(n, a, b) -> SparseMatrix:
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    return SparseMatrix.from_coo(n, rows, cols, np.ones(rows.size))


def smallw(n: int, k: int = 2, p: float = 0.1, seed: int = 0) -> SparseMatrix:
    """Ring of ``n`` nodes joined to ``k`` neighbours per side, plus shortcuts.

    Each node independently gets, with probability ``p``, one extra edge to a
    uniformly chosen node that is neither itself nor a ring neighbour.
    """
    GraphSpec("smallw", n, k=k, p=p, seed=seed)
    if 2 * k + 1 > n:
        raise ConfigurationError(f"k = {k} too large for a ring of {n} nodes")
    rng = np.random.default_rng(seed)
    nodes = np.arange(n, dtype=np.int64)
    src = [nodes] * k
    dst = [(nodes + s) % n for s in range(1, k + 1)]

    has_shortcut = rng.random(n) < p
    if n == 2 * k + 1:
        # the ring is already complete; there is no non-neighbour to link to
        has_shortcut[:] = False
    origin = nodes[has_shortcut]
    target = rng.integers(0, n, size=origin.size)
    # redraw targets that hit the node itself or its ring neighbourhood
    while True:
        gap = np.abs(target - origin)
        gap = np.minimum(gap, n - gap)
        bad = gap <= k
        if not bad.any():
            break
        target[bad] = rng.integers(0, n, size=int(bad.sum()))
    src.append(origin)
    dst.append(target)
    return _symmetric_adjacency(n, np.concatenate(src), np.concatenate(dst))


def pref(n: int, d: int = 2, seed: int = 0) -> SparseMatrix:
    """Preferential attachment grown from a ``d``-clique.

    Every new node links to ``d`` distinct existing nodes chosen with
    probability proportional to their current degree.
    """
    GraphSpec("pref", n, d=d, seed=seed)
    if n < d + 1:
        raise ConfigurationError(f"need n >= d + 1 = {d + 1}")
    rng = np.random.default_rng(seed)
    # every edge endpoint appears once in ``ends``; a uniform pick is degree-proportional
    ends = np.empty(2 * (d * (d - 1) // 2 + d * (n - d)), dtype=np.int64)
    src, dst = [], []
    m = 0
    for a in range(d):
        for b in range(a + 1, d):
            src.append(a)
            dst.append(b)
            ends[m] = a
            ends[m + 1] = b
            m += 2

    uniforms = rng.random(4 * d * n + 16)
    pos = 0
    for v in range(d, n):
        chosen = set()
        while len(chosen) < d:
            if pos == uniforms.size:
                uniforms = rng.random(uniforms.size)
                pos = 0
            x = uniforms[pos]
            pos += 1
            if m == 0:
                w = int(x * v)
            else:
                w = int(ends[int(x * m)])
            chosen.add(w)
        for w in sorted(chosen):
            src.append(v)
            dst.append(w)
            ends[m] = v
            ends[m + 1] = w
            m += 2
    return _symmetric_adjacency(n, np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64))


def degrees(a: SparseMatrix) -> np.ndarray:
    return np.diff(a.row_ptr)
