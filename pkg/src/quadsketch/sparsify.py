"""Sampling-based cut/spectral sparsifier behind a stable interface.

Each edge is kept with probability proportional to an upper bound on its
importance and reweighted by 1/p (Horvitz-Thompson), so all cut and spectral
expectations are preserved:

* cut kind: a connectivity lower bound from Nagamochi-Ibaraki style iterated
  spanning forests inside each factor-2 weight class;
* spectral kind: exact effective resistances from a dense pseudoinverse for
  n <= 512, with a uniform-by-weight-class fallback above.

Deterministic given the seed. After reweighting, edges lighter than
w_max / n^6 are dropped, which caps the output weight ratio at poly(n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import UnionFind, WeightedGraph
from .rng import rng_for

OVERSAMPLE = 2.0
EDGE_BUDGET_CONSTANT = 48.0  # documented constant C in the m <= C n log n / eps^2 bound
RESISTANCE_VERTEX_CAP = 512
WEIGHT_RATIO_POWER = 6


@dataclass(frozen=True)
class SparsifierConfig:
    epsilon: float
    kind: str = "cut"  # "cut" or "spectral"
    seed: int = 0
    keep_all_threshold: int = 0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.kind not in ("cut", "spectral"):
            raise ValueError("kind must be 'cut' or 'spectral'")
        if self.keep_all_threshold < 0:
            raise ValueError("keep_all_threshold must be non-negative")


def _weight_classes(w: np.ndarray) -> np.ndarray:
    """Factor-2 class index anchored at the minimum weight."""
    wmin = w.min()
    cls = np.floor(np.log2(w / wmin)).astype(np.int64)
    # guard against w == 2^k * wmin landing one class high from rounding
    too_high = w < wmin * np.exp2(cls)
    cls[too_high] -= 1
    return cls


def _forest_indices(n: int, u: np.ndarray, v: np.ndarray, max_rounds: int) -> np.ndarray:
    """Nagamochi-Ibaraki forest index per edge, capped at max_rounds.

    An edge in forest k has k edge-disjoint paths between its endpoints in
    the scanned subgraph, so k lower-bounds its (unweighted) connectivity.
    """
    m = u.size
    idx = np.zeros(m, dtype=np.int64)
    remaining = list(range(m))
    rnd = 0
    while remaining and rnd < max_rounds:
        rnd += 1
        uf = UnionFind(n)
        leftover = []
        for e in remaining:
            if uf.union(int(u[e]), int(v[e])):
                idx[e] = rnd
            else:
                leftover.append(e)
        remaining = leftover
    for e in remaining:
        idx[e] = max_rounds + 1
    return idx


def effective_resistances(g: WeightedGraph) -> np.ndarray:
    """Exact effective resistance of every edge via a dense pseudoinverse."""
    lp = np.linalg.pinv(g.laplacian())
    u, v = g.edge_u, g.edge_v
    return lp[u, u] + lp[v, v] - 2.0 * lp[u, v]


def keep_probabilities(g: WeightedGraph, cfg: SparsifierConfig) -> np.ndarray:
    """Per-edge sampling probability; 1.0 means the edge is always kept."""
    n, m = g.n, g.m
    eps2 = cfg.epsilon**2
    logn = math.log(n + 2)
    target = OVERSAMPLE * logn / eps2
    if cfg.kind == "spectral" and n <= RESISTANCE_VERTEX_CAP:
        score = g.edge_w * effective_resistances(g)
        return np.minimum(1.0, target * np.clip(score, 0.0, 1.0))
    cls = _weight_classes(g.edge_w)
    p = np.ones(m)
    for c in np.unique(cls):
        sel = np.flatnonzero(cls == c)
        gamma = g.edge_w[sel].min()
        if cfg.kind == "cut":
            max_rounds = int(math.ceil(target)) + 1
            k = _forest_indices(n, g.edge_u[sel], g.edge_v[sel], max_rounds)
            p[sel] = np.minimum(1.0, target * g.edge_w[sel] / (gamma * k))
        else:
            # uniform fallback per class for instances too big to invert
            budget = OVERSAMPLE * n * logn / eps2
            p[sel] = min(1.0, budget / sel.size)
    return p


def sparsify(g: WeightedGraph, cfg: SparsifierConfig) -> WeightedGraph:
    """Reweighted subgraph approximating cuts (or all quadratic forms).

    Identity on inputs with m <= cfg.keep_all_threshold: a graph is trivially
    its own (1 + eps)-sparsifier.
    """
    if g.m <= cfg.keep_all_threshold or g.m == 0:
        return g
    p = keep_probabilities(g, cfg)
    rng = rng_for(cfg.seed, "sparsify", cfg.kind)
    kept = rng.random(g.m) < p
    if not np.any(kept):
        return WeightedGraph(g.n)
    new_w = g.edge_w[kept] / p[kept]
    u, v = g.edge_u[kept], g.edge_v[kept]
    # weight-ratio clipping: drop reweighted edges below w_max / n^6
    if g.n >= 2:
        floor = new_w.max() / float(g.n) ** WEIGHT_RATIO_POWER
        keep2 = new_w >= floor
        u, v, new_w = u[keep2], v[keep2], new_w[keep2]
    return WeightedGraph(g.n, _arrays=(u, v, new_w))


def edge_budget(n: int, epsilon: float) -> float:
    """The documented C n log n / eps^2 bound on the output edge count."""
    return EDGE_BUDGET_CONSTANT * n * math.log(n + 2) / epsilon**2
