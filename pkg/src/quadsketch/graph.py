"""Graph substrate: weighted/directed graphs, exact cut and quadratic forms.

All graphs are immutable after construction; every operation here is pure, so
concurrent callers are safe. Edge lists are canonicalized (u < v, sorted,
parallel edges merged by summing weights), which also makes serialization and
fingerprinting deterministic.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import GraphFormatError, QuadsketchError, TooLargeError

EXHAUSTIVE_VERTEX_CAP = 24
_CHUNK = 1 << 18


class UnionFind:
    """Array-based union-find with path compression and union by rank."""

    __slots__ = ("parent", "rank", "n_components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.n_components = n

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.rank[ri] < self.rank[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        if self.rank[ri] == self.rank[rj]:
            self.rank[ri] += 1
        self.n_components -= 1
        return True


def _canonicalize(n: int, u, v, w, merge_parallel: bool):
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    if not (u.shape == v.shape == w.shape):
        raise ValueError("edge arrays must have equal length")
    if u.size:
        if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
            raise ValueError("vertex id out of range")
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("edge weights must be positive and finite")
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    if lo.size:
        same = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        if np.any(same):
            if not merge_parallel:
                raise ValueError("parallel edges are not allowed here")
            # merge parallel edges by summing their weights
            grp = np.concatenate(([0], np.cumsum(~same)))
            k = grp[-1] + 1
            ws = np.zeros(k)
            np.add.at(ws, grp, w)
            keep = np.concatenate(([True], ~same))
            lo, hi, w = lo[keep], hi[keep], ws
    return lo, hi, w


class WeightedGraph:
    """Undirected positively weighted simple graph on vertices 0..n-1.

    Parallel edges in the input are merged by summing weights; this preserves
    every cut and quadratic form.
    """

    __slots__ = ("n", "edge_u", "edge_v", "edge_w", "_adj")

    def __init__(self, n: int, edges: Iterable | None = None, *, _arrays=None):
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        self.n = int(n)
        if _arrays is not None:
            u, v, w = _arrays
        elif edges is None:
            u = v = np.empty(0, dtype=np.int64)
            w = np.empty(0, dtype=np.float64)
        else:
            rows = list(edges)
            if rows:
                u = np.array([r[0] for r in rows], dtype=np.int64)
                v = np.array([r[1] for r in rows], dtype=np.int64)
                w = np.array([r[2] for r in rows], dtype=np.float64)
            else:
                u = v = np.empty(0, dtype=np.int64)
                w = np.empty(0, dtype=np.float64)
        self.edge_u, self.edge_v, self.edge_w = _canonicalize(self.n, u, v, w, True)
        self.edge_u.setflags(write=False)
        self.edge_v.setflags(write=False)
        self.edge_w.setflags(write=False)
        self._adj = None

    @property
    def m(self) -> int:
        return int(self.edge_u.size)

    @property
    def total_weight(self) -> float:
        return float(self.edge_w.sum())

    def edges(self):
        return zip(self.edge_u.tolist(), self.edge_v.tolist(), self.edge_w.tolist())

    def _adjacency(self):
        """CSR-style (indptr, nbr vertex, incident edge id); built lazily."""
        if self._adj is None:
            ends = np.concatenate([self.edge_u, self.edge_v])
            others = np.concatenate([self.edge_v, self.edge_u])
            eids = np.concatenate([np.arange(self.m), np.arange(self.m)])
            order = np.argsort(ends, kind="stable")
            ends, others, eids = ends[order], others[order], eids[order]
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, ends + 1, 1)
            indptr = np.cumsum(indptr)
            self._adj = (indptr, others, eids)
        return self._adj

    def neighbors(self, u: int):
        indptr, others, eids = self._adjacency()
        s, e = indptr[u], indptr[u + 1]
        return others[s:e], eids[s:e]

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.edge_u, self.edge_v] = self.edge_w
        a[self.edge_v, self.edge_u] = self.edge_w
        return a

    def laplacian(self) -> np.ndarray:
        a = self.adjacency_matrix()
        return np.diag(a.sum(axis=1)) - a

    def edge_subgraph(self, edge_idx) -> tuple["WeightedGraph", np.ndarray]:
        """Edge-induced subgraph on the support of the selected edges.

        Returns the piece and a vertex map (new id -> id in this graph).
        """
        edge_idx = np.asarray(edge_idx, dtype=np.int64)
        u, v, w = self.edge_u[edge_idx], self.edge_v[edge_idx], self.edge_w[edge_idx]
        vmap = np.unique(np.concatenate([u, v]))
        inv = np.full(self.n, -1, dtype=np.int64)
        inv[vmap] = np.arange(vmap.size)
        g = WeightedGraph(int(vmap.size), _arrays=(inv[u], inv[v], w))
        return g, vmap

    def induced_subgraph(self, members) -> tuple["WeightedGraph", np.ndarray]:
        """Vertex-induced subgraph. Returns the piece and new->old vertex map."""
        members = as_cut_query(self.n, members)
        vmap = np.flatnonzero(members)
        inv = np.full(self.n, -1, dtype=np.int64)
        inv[vmap] = np.arange(vmap.size)
        keep = members[self.edge_u] & members[self.edge_v]
        g = WeightedGraph(
            int(vmap.size),
            _arrays=(inv[self.edge_u[keep]], inv[self.edge_v[keep]], self.edge_w[keep]),
        )
        return g, vmap

    def relabel(self, vmap: np.ndarray, n_new: int) -> "WeightedGraph":
        """Image of this graph under vertex map (old id -> vmap[old])."""
        return WeightedGraph(
            n_new, _arrays=(vmap[self.edge_u], vmap[self.edge_v], self.edge_w)
        )

    def __eq__(self, other):
        return (
            isinstance(other, WeightedGraph)
            and self.n == other.n
            and np.array_equal(self.edge_u, other.edge_u)
            and np.array_equal(self.edge_v, other.edge_v)
            and np.array_equal(self.edge_w, other.edge_w)
        )

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"


class DirectedGraph:
    """Directed positively weighted graph; at most one arc per vertex pair.

    Both orientations of the same pair are rejected: arcs are orientations of
    the edges of an underlying undirected simple graph.
    """

    __slots__ = ("n", "arc_u", "arc_v", "arc_w")

    def __init__(self, n: int, arcs: Iterable | None = None, *, _arrays=None):
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        self.n = int(n)
        if _arrays is not None:
            u, v, w = _arrays
            u = np.asarray(u, dtype=np.int64)
            v = np.asarray(v, dtype=np.int64)
            w = np.asarray(w, dtype=np.float64)
        else:
            rows = list(arcs) if arcs is not None else []
            u = np.array([r[0] for r in rows], dtype=np.int64)
            v = np.array([r[1] for r in rows], dtype=np.int64)
            w = np.array([r[2] for r in rows], dtype=np.float64)
        if u.size:
            if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
                raise ValueError("vertex id out of range")
            if np.any(u == v):
                raise ValueError("self-loops are not allowed")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("arc weights must be positive and finite")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        order = np.lexsort((hi, lo))
        if u.size:
            slo, shi = lo[order], hi[order]
            if np.any((slo[1:] == slo[:-1]) & (shi[1:] == shi[:-1])):
                raise ValueError("at most one orientation of a pair is allowed")
        u, v, w = u[order], v[order], w[order]
        self.arc_u, self.arc_v, self.arc_w = u, v, w
        for a in (self.arc_u, self.arc_v, self.arc_w):
            a.setflags(write=False)

    @property
    def m(self) -> int:
        return int(self.arc_u.size)

    def out_degrees_unweighted(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        np.add.at(d, self.arc_u, 1)
        return d

    def in_degrees_unweighted(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        np.add.at(d, self.arc_v, 1)
        return d

    def out_degrees_weighted(self) -> np.ndarray:
        d = np.zeros(self.n)
        np.add.at(d, self.arc_u, self.arc_w)
        return d

    def in_degrees_weighted(self) -> np.ndarray:
        d = np.zeros(self.n)
        np.add.at(d, self.arc_v, self.arc_w)
        return d

    def undirected(self) -> WeightedGraph:
        return WeightedGraph(self.n, _arrays=(self.arc_u, self.arc_v, self.arc_w))

    def arc_subgraph(self, arc_idx) -> tuple["DirectedGraph", np.ndarray]:
        """Arc-induced subgraph on the support of selected arcs; new->old map."""
        arc_idx = np.asarray(arc_idx, dtype=np.int64)
        u, v, w = self.arc_u[arc_idx], self.arc_v[arc_idx], self.arc_w[arc_idx]
        vmap = np.unique(np.concatenate([u, v]))
        inv = np.full(self.n, -1, dtype=np.int64)
        inv[vmap] = np.arange(vmap.size)
        return DirectedGraph(int(vmap.size), _arrays=(inv[u], inv[v], w)), vmap

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, m={self.m})"


def as_cut_query(n: int, members) -> np.ndarray:
    """Validate a cut query (bit vector of length n) into a bool array."""
    s = np.asarray(members)
    if s.dtype != bool:
        if s.dtype.kind in "iu" and s.size and s.max(initial=0) <= 1:
            s = s.astype(bool)
        else:
            raise ValueError("cut query must be a 0/1 vector")
    if s.shape != (n,):
        raise ValueError(f"cut query has length {s.shape}, expected ({n},)")
    return s


def members_from_vertices(n: int, vertices: Sequence[int]) -> np.ndarray:
    s = np.zeros(n, dtype=bool)
    for v in vertices:
        if not 0 <= v < n:
            raise ValueError(f"vertex {v} out of range")
        s[v] = True
    return s


def as_spectral_query(n: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"spectral query has length {x.shape}, expected ({n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("spectral query entries must be finite")
    return x


def quadratic_form(g: WeightedGraph, x) -> float:
    """Exact x^T L(G) x = sum over edges of w(u,v) (x_u - x_v)^2."""
    x = as_spectral_query(g.n, x)
    d = x[g.edge_u] - x[g.edge_v]
    return float(np.dot(g.edge_w, d * d))


def cut_weight(g: WeightedGraph, members) -> float:
    """Exact weight of the cut (S, V\\S) given by the member bit vector."""
    s = as_cut_query(g.n, members)
    crossing = s[g.edge_u] != s[g.edge_v]
    return float(g.edge_w[crossing].sum())


def cut_edge_count(g: WeightedGraph, members) -> int:
    s = as_cut_query(g.n, members)
    return int(np.count_nonzero(s[g.edge_u] != s[g.edge_v]))


def degrees(g: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Weighted degrees delta_u and unweighted degrees d_u."""
    delta = np.zeros(g.n)
    np.add.at(delta, g.edge_u, g.edge_w)
    np.add.at(delta, g.edge_v, g.edge_w)
    d = np.zeros(g.n, dtype=np.int64)
    np.add.at(d, g.edge_u, 1)
    np.add.at(d, g.edge_v, 1)
    return delta, d


def volume(g: WeightedGraph, members) -> float:
    s = as_cut_query(g.n, members)
    delta, _ = degrees(g)
    return float(delta[s].sum())


def conductance(g: WeightedGraph, members) -> float:
    """Phi(S) = w(S, S̄) / min(vol S, vol S̄)."""
    s = as_cut_query(g.n, members)
    delta, _ = degrees(g)
    vol_s = float(delta[s].sum())
    vol_t = float(delta[~s].sum())
    denom = min(vol_s, vol_t)
    if denom <= 0:
        raise QuadsketchError("conductance undefined: one side has zero volume")
    return cut_weight(g, s) / denom


def connected_components(g: WeightedGraph) -> np.ndarray:
    """Component labels 0..k-1 in order of smallest member vertex."""
    uf = UnionFind(g.n)
    for u, v in zip(g.edge_u.tolist(), g.edge_v.tolist()):
        uf.union(u, v)
    labels = np.empty(g.n, dtype=np.int64)
    seen: dict[int, int] = {}
    for v in range(g.n):
        r = uf.find(v)
        if r not in seen:
            seen[r] = len(seen)
        labels[v] = seen[r]
    return labels


def is_connected(g: WeightedGraph) -> bool:
    return g.n <= 1 or int(connected_components(g).max()) == 0


def _iter_mask_chunks(n_masks: int):
    start = 1
    while start < n_masks:
        stop = min(start + _CHUNK, n_masks)
        yield np.arange(start, stop, dtype=np.int64)
        start = stop


def _mask_cut_stats(g: WeightedGraph, masks: np.ndarray, weighted: bool):
    """Per-mask cut weight (or edge count) via bit tricks."""
    acc = np.zeros(masks.size)
    for u, v, w in zip(g.edge_u.tolist(), g.edge_v.tolist(), g.edge_w.tolist()):
        crossing = ((masks >> u) ^ (masks >> v)) & 1
        acc += crossing * (w if weighted else 1.0)
    return acc


def _mask_popcount(masks: np.ndarray, n: int) -> np.ndarray:
    pc = np.zeros(masks.size, dtype=np.int64)
    for b in range(n):
        pc += (masks >> b) & 1
    return pc


def cheeger_exact(g: WeightedGraph) -> float:
    """Cheeger's constant by exhaustive enumeration; capped at n <= 24."""
    if g.n == 0 or g.n > EXHAUSTIVE_VERTEX_CAP:
        raise TooLargeError("instance too large for exhaustive oracle")
    if not is_connected(g):
        raise QuadsketchError("cheeger_exact requires a connected graph")
    if g.n == 1:
        raise QuadsketchError("cheeger_exact undefined for a single vertex")
    delta, _ = degrees(g)
    best = np.inf
    # enumerate masks over bits 0..n-2: one side of every complementary pair
    for masks in _iter_mask_chunks(1 << (g.n - 1)):
        cw = _mask_cut_stats(g, masks, weighted=True)
        vol_s = np.zeros(masks.size)
        for b in range(g.n - 1):
            vol_s += ((masks >> b) & 1) * delta[b]
        vol_t = delta.sum() - vol_s
        denom = np.minimum(vol_s, vol_t)
        ok = denom > 0
        if np.any(ok):
            best = min(best, float((cw[ok] / denom[ok]).min()))
    return best


def expansion_exact(g: WeightedGraph) -> float:
    """Expansion constant min_{|S| <= n/2} |∂(S, S̄)| / |S|; capped at n <= 24."""
    if g.n == 0 or g.n > EXHAUSTIVE_VERTEX_CAP:
        raise TooLargeError("instance too large for exhaustive oracle")
    if g.n == 1:
        raise QuadsketchError("expansion undefined for a single vertex")
    best = np.inf
    for masks in _iter_mask_chunks(1 << (g.n - 1)):
        cnt = _mask_cut_stats(g, masks, weighted=False)
        pc = _mask_popcount(masks, g.n - 1)
        size = np.minimum(pc, g.n - pc)
        best = min(best, float((cnt / size).min()))
    return best


# ---------------------------------------------------------------------------
# Edge-list text format: first line "n m", then m lines "u v w" (0-indexed).


def parse_graph(text: str) -> WeightedGraph:
    lines = text.splitlines()
    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines):
            raw = lines[idx]
            idx += 1
            stripped = raw.strip()
            if stripped and not stripped.startswith("#"):
                return idx, stripped
        return None

    first = next_line()
    if first is None:
        raise GraphFormatError(1, "empty graph file")
    lineno, header = first
    parts = header.split()
    if len(parts) != 2:
        raise GraphFormatError(lineno, "expected header 'n m'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphFormatError(lineno, "header entries must be integers") from None
    if n < 0 or m < 0:
        raise GraphFormatError(lineno, "n and m must be non-negative")
    edges = []
    for _ in range(m):
        row = next_line()
        if row is None:
            raise GraphFormatError(len(lines), f"expected {m} edges, found {len(edges)}")
        lineno, body = row
        parts = body.split()
        if len(parts) != 3:
            raise GraphFormatError(lineno, "expected 'u v w'")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError(lineno, "bad edge entry") from None
        if not 0 <= u < n or not 0 <= v < n:
            raise GraphFormatError(lineno, f"vertex id out of range [0, {n})")
        if u == v:
            raise GraphFormatError(lineno, "self-loops are rejected")
        if not w > 0:
            raise GraphFormatError(lineno, "edge weight must be positive")
        edges.append((u, v, w))
    return WeightedGraph(n, edges)


def format_graph(g: WeightedGraph) -> str:
    out = [f"{g.n} {g.m}"]
    for u, v, w in g.edges():
        out.append(f"{u} {v} {w!r}")
    return "\n".join(out) + "\n"


def load_graph(path) -> WeightedGraph:
    with open(path, "r", encoding="utf-8") as f:
        return parse_graph(f.read())


def save_graph(g: WeightedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_graph(g))
