"""Recursive sparse-cut partitioning and edge-direction machinery.

Shared by the cut and spectral sketches:

* ``find_sparse_cut``: exact subset enumeration for small components (with a
  spectral certificate to skip hopeless scans), Fiedler sweep above;
* ``cut_preprocessing``: rescale / discard / importance-sample / weight-class
  split / expansion partition, producing expander pieces plus stored cut
  edges Q;
* ``spectral_preprocessing``: conductance partition at threshold h;
* ``assign_direction``: the out-degree balancing fixpoint;
* ``degree_class_partition``: the recursive out-degree-band partition that
  feeds the improved spectral sketch.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadsketchError
from .graph import (
    DirectedGraph,
    WeightedGraph,
    connected_components,
    degrees,
)
from .rng import derive_seed, rng_for
from .sparsify import SparsifierConfig, sparsify

EXHAUSTIVE_CUT_CAP = 20


# ---------------------------------------------------------------------------
# Sparse cut finding


@dataclass
class SparseCutResult:
    members: np.ndarray | None  # bool mask, smaller side, or None if not found
    certified: bool  # True when absence/presence was decided exactly


def _metric_prefix_sweep(g: WeightedGraph, order: np.ndarray, mode: str, delta):
    """Cut metric of every prefix of `order`, normalized by the smaller side."""
    n = g.n
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    pu, pv = pos[g.edge_u], pos[g.edge_v]
    lo = np.minimum(pu, pv)
    hi = np.maximum(pu, pv)
    # edge crosses prefix of length k iff lo < k <= hi
    w = g.edge_w if mode == "conductance" else np.ones(g.m)
    diff = np.zeros(n + 1)
    np.add.at(diff, lo + 1, w)
    np.add.at(diff, hi + 1, -w)
    cut_at = np.cumsum(diff)[1:n]  # prefix sizes 1..n-1
    if mode == "conductance":
        vol = np.cumsum(delta[order])[: n - 1]
        denom = np.minimum(vol, delta.sum() - vol)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(denom > 0, cut_at / denom, np.inf)
    else:
        sizes = np.arange(1, n)
        denom = np.minimum(sizes, n - sizes)
        vals = cut_at / denom
    return vals


def _qualifies(value: float, mode: str, threshold: float) -> bool:
    return value < threshold if mode == "edge_expansion" else value <= threshold


def find_sparse_cut(g: WeightedGraph, mode: str, threshold: float) -> SparseCutResult:
    """Search for a cut below the threshold (smaller side returned).

    edge_expansion mode: |∂(S, S̄)| / |S| < threshold;
    conductance mode: Φ(S) <= threshold.

    Deterministic: singletons are tried in vertex order, then subsets in a
    fixed canonical enumeration (small components), or the best Fiedler sweep
    prefix (large components, heuristic).
    """
    if mode not in ("edge_expansion", "conductance"):
        raise ValueError(f"unknown mode {mode!r}")
    n = g.n
    if n < 2:
        return SparseCutResult(None, True)
    labels = connected_components(g)
    if labels.max() > 0:
        # a disconnected input has a zero cut: return the smallest piece
        sizes = np.bincount(labels)
        side = labels == int(np.argmin(sizes))
        return SparseCutResult(side, True)
    delta, udeg = degrees(g)

    # cheap qualifying singleton, in vertex order
    if mode == "edge_expansion":
        single = udeg.astype(float)
    else:
        vol = delta.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            single = np.where(
                np.minimum(delta, vol - delta) > 0,
                delta / np.minimum(delta, vol - delta),
                np.inf,
            )
    hit = [u for u in range(n) if _qualifies(float(single[u]), mode, threshold)]
    if hit:
        members = np.zeros(n, dtype=bool)
        members[hit[0]] = True
        return SparseCutResult(members, True)

    # spectral certificate: expansion >= lambda_1(L)/2, conductance >= lambda_1(L~)/2
    if mode == "edge_expansion":
        a = np.zeros((n, n))
        a[g.edge_u, g.edge_v] = 1.0
        a[g.edge_v, g.edge_u] = 1.0
        lap = np.diag(a.sum(axis=1)) - a
        vals, vecs = np.linalg.eigh(lap)
        lam1 = float(vals[1])
        fiedler = vecs[:, 1]
        if lam1 / 2.0 >= threshold:
            return SparseCutResult(None, True)
    else:
        inv_sqrt = 1.0 / np.sqrt(delta)
        a = g.adjacency_matrix()
        nl = np.eye(n) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]
        vals, vecs = np.linalg.eigh(nl)
        lam1 = float(vals[1])
        fiedler = vecs[:, 1] * inv_sqrt
        if lam1 / 2.0 > threshold:
            return SparseCutResult(None, True)

    if n <= EXHAUSTIVE_CUT_CAP:
        return SparseCutResult(_exhaustive_cut(g, mode, threshold, delta), True)

    # Fiedler sweep heuristic: best prefix of the sorted embedding
    order = np.lexsort((np.arange(n), fiedler))
    vals_prefix = _metric_prefix_sweep(g, order, mode, delta)
    best = int(np.argmin(vals_prefix))
    if _qualifies(float(vals_prefix[best]), mode, threshold):
        members = np.zeros(n, dtype=bool)
        members[order[: best + 1]] = True
        if members.sum() > n // 2:
            members = ~members
        return SparseCutResult(members, True)
    return SparseCutResult(None, False)


def _exhaustive_cut(g, mode, threshold, delta) -> np.ndarray | None:
    """First qualifying subset in mask-ascending order over bits 0..n-2."""
    n = g.n
    total_vol = delta.sum()
    n_masks = 1 << (n - 1)
    w = g.edge_w if mode == "conductance" else np.ones(g.m)
    chunk = 1 << 16
    start = 1
    while start < n_masks:
        stop = min(start + chunk, n_masks)
        masks = np.arange(start, stop, dtype=np.int64)
        cw = np.zeros(masks.size)
        for u, v, ww in zip(g.edge_u.tolist(), g.edge_v.tolist(), w.tolist()):
            cw += (((masks >> u) ^ (masks >> v)) & 1) * ww
        pc = np.zeros(masks.size, dtype=np.int64)
        side_vol = np.zeros(masks.size)
        for b in range(n - 1):
            bit = (masks >> b) & 1
            pc += bit
            side_vol += bit * delta[b]
        if mode == "edge_expansion":
            size = np.minimum(pc, n - pc)
            vals = cw / size
            ok = vals < threshold
        else:
            denom = np.minimum(side_vol, total_vol - side_vol)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.where(denom > 0, cw / denom, np.inf)
            ok = vals <= threshold
        idx = np.flatnonzero(ok)
        if idx.size:
            mask = int(masks[idx[0]])
            members = np.zeros(n, dtype=bool)
            for b in range(n - 1):
                members[b] = bool((mask >> b) & 1)
            if members.sum() > n // 2:
                members = ~members
            return members
        start = stop
    return None


# ---------------------------------------------------------------------------
# Partition results


@dataclass
class Component:
    graph: WeightedGraph
    vmap: np.ndarray  # component vertex id -> parent vertex id
    edge_idx: np.ndarray  # component edge id -> parent edge id
    certified: bool = True


@dataclass
class PartitionResult:
    components: list[Component]
    cross_u: np.ndarray
    cross_v: np.ndarray
    cross_w: np.ndarray
    cross_idx: np.ndarray  # parent edge indices of the cross edges
    info: dict = field(default_factory=dict)

    @property
    def cross_count(self) -> int:
        return int(self.cross_u.size)


def _partition_by_cuts(g: WeightedGraph, mode: str, threshold: float) -> PartitionResult:
    """Recursively split g along qualifying cuts; pieces keep parent ids."""
    work: deque[tuple[np.ndarray, np.ndarray]] = deque()
    # seed the worklist with connected components (splitting them is free)
    labels = connected_components(g)
    all_idx = np.arange(g.m, dtype=np.int64)
    for lab in range(int(labels.max()) + 1 if g.n else 0):
        vmask = labels == lab
        vmap = np.flatnonzero(vmask)
        emask = vmask[g.edge_u]
        work.append((vmap, all_idx[emask]))
    comps: list[Component] = []
    cross: list[np.ndarray] = []
    while work:
        vmap, eidx = work.popleft()
        if eidx.size == 0:
            continue  # edgeless pieces carry nothing to sketch or conserve
        inv = np.full(g.n, -1, dtype=np.int64)
        inv[vmap] = np.arange(vmap.size)
        piece = WeightedGraph(
            vmap.size,
            _arrays=(inv[g.edge_u[eidx]], inv[g.edge_v[eidx]], g.edge_w[eidx]),
        )
        res = find_sparse_cut(piece, mode, threshold)
        if res.members is None:
            # local edge order matches parent order (canonical sort is stable
            # under the monotone relabeling), so edge_idx aligns
            comps.append(Component(piece, vmap, eidx, res.certified))
            continue
        s = res.members
        crossing = s[piece.edge_u] != s[piece.edge_v]
        cross.append(eidx[crossing])
        for side in (s, ~s):
            sub_v = vmap[side]
            sub_e = eidx[side[piece.edge_u] & side[piece.edge_v]]
            if sub_e.size:
                work.append((sub_v, sub_e))
    cross_idx = (
        np.concatenate(cross) if cross else np.empty(0, dtype=np.int64)
    )
    cross_idx = np.sort(cross_idx)
    return PartitionResult(
        comps,
        g.edge_u[cross_idx],
        g.edge_v[cross_idx],
        g.edge_w[cross_idx],
        cross_idx,
    )


def spectral_preprocessing(g: WeightedGraph, h: float) -> PartitionResult:
    """Split along conductance-<=h cuts until every piece has Cheeger > h.

    Pieces of size <= 20 are certified exactly; larger ones by the spectral
    certificate or heuristic sweep failure (flagged per component). Cross
    edges Q are stored exactly; |Q| = O(h m log m) for factor-2 weights.
    """
    if h <= 0:
        raise ValueError("threshold h must be positive")
    res = _partition_by_cuts(g, "conductance", h)
    res.info["h"] = h
    if g.m:
        res.info["q_bound_ratio"] = res.cross_count / (h * g.m * math.log2(g.m + 1))
    return res


# ---------------------------------------------------------------------------
# Cut preprocessing (importance sampling + expansion partition)


def importance_sample(w_scaled: np.ndarray, epsilon: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Keep each edge with p = min(w/eps^2, 1); reweight kept edges by 1/p.

    Returns (kept mask, reweighted weights for kept edges).
    """
    p = np.minimum(w_scaled / epsilon**2, 1.0)
    kept = rng.random(w_scaled.size) < p
    return kept, w_scaled[kept] / p[kept]


def weight_class_of(w_tilde: np.ndarray) -> np.ndarray:
    """Class index i >= 1 with w in (5 * 2^-i, 5 * 2^(1-i)]."""
    i = np.floor(np.log2(5.0 / w_tilde)).astype(np.int64) + 1
    # fix float rounding at the class boundaries
    i = np.maximum(i, 1)
    too_low = w_tilde <= 5.0 * np.exp2(-i.astype(float))
    i[too_low] += 1
    too_high = w_tilde > 5.0 * np.exp2(1.0 - i.astype(float))
    i[too_high] -= 1
    return np.maximum(i, 1)


@dataclass
class CutClass:
    index: int
    result: PartitionResult  # component graphs carry reweighted (w~) weights


@dataclass
class CutPreprocessing:
    scale: float
    epsilon: float
    classes: list[CutClass]
    discarded_heavy: np.ndarray  # edge indices of the input graph
    dropped_unsampled: np.ndarray


def cut_preprocessing(g: WeightedGraph, c: float, epsilon: float, seed: int) -> CutPreprocessing:
    """Rescale by 1/c, discard w > 5, importance-sample, split into factor-2
    reweighted classes, and partition each along expansion-< 1/eps cuts.

    Every returned component has (unweighted) expansion >= 1/eps, certified
    exactly for pieces of <= 20 vertices.
    """
    if c <= 0:
        raise ValueError("scale c must be positive")
    if epsilon < 1.0 / max(g.n, 2) or epsilon >= 1.0:
        # caller should fall back to storing the component verbatim
        raise QuadsketchError(
            "epsilon outside the sketchable range; store the graph exactly instead"
        )
    w_scaled = g.edge_w / c
    heavy = w_scaled > 5.0
    light_idx = np.flatnonzero(~heavy)
    rng = rng_for(seed, "cut-preprocess")
    kept_mask, w_tilde = importance_sample(w_scaled[light_idx], epsilon, rng)
    kept_idx = light_idx[kept_mask]
    dropped_idx = light_idx[~kept_mask]
    classes: list[CutClass] = []
    if kept_idx.size:
        cls = weight_class_of(w_tilde)
        for i in np.unique(cls):
            sel = cls == i
            eidx = kept_idx[sel]
            sub = WeightedGraph(
                g.n, _arrays=(g.edge_u[eidx], g.edge_v[eidx], w_tilde[sel])
            )
            part = _partition_by_cuts(sub, "edge_expansion", 1.0 / epsilon)
            # eidx is ascending, so sub's canonical edge order equals it and
            # per-class edge ids map back to input ids by direct lookup
            part.cross_idx = eidx[part.cross_idx]
            for comp in part.components:
                comp.edge_idx = eidx[comp.edge_idx]
            classes.append(CutClass(int(i), part))
    return CutPreprocessing(
        c, epsilon, classes, np.flatnonzero(heavy), dropped_idx
    )


# ---------------------------------------------------------------------------
# Buddy orientation


def assign_direction(g: WeightedGraph, t: float, *, check_potential: bool = False) -> DirectedGraph:
    """Flip arcs (u, v) with outdeg(u) >= t and outdeg(v) < t-1 to a fixpoint.

    Postcondition: every arc satisfies outdeg(tail) < t or outdeg(head) >= t-1.
    The potential over violating arcs drops by at least 2 per flip, which is
    asserted when check_potential is set.
    """
    if t <= 1:
        raise ValueError("t must exceed 1")
    tail = g.edge_u.copy()
    head = g.edge_v.copy()
    m = g.m
    out = np.zeros(g.n, dtype=np.int64)
    np.add.at(out, tail, 1)
    arcs_at: list[list[int]] = [[] for _ in range(g.n)]
    for e in range(m):
        arcs_at[tail[e]].append(e)
        arcs_at[head[e]].append(e)

    def potential() -> int:
        viol = (out[tail] >= t) & (out[head] < t - 1)
        return int(np.sum(out[tail[viol]] - out[head[viol]]))

    queue = deque(range(m))
    in_queue = [True] * m
    while queue:
        e = queue.popleft()
        in_queue[e] = False
        a, b = tail[e], head[e]
        if out[a] >= t and out[b] < t - 1:
            before = potential() if check_potential else 0
            tail[e], head[e] = b, a
            out[a] -= 1
            out[b] += 1
            if check_potential:
                after = potential()
                assert after <= before - 2, f"potential fell only {before - after}"
            for x in (a, b):
                for e2 in arcs_at[x]:
                    if not in_queue[e2]:
                        in_queue[e2] = True
                        queue.append(e2)
    return DirectedGraph(g.n, _arrays=(tail, head, g.edge_w.copy()))


# ---------------------------------------------------------------------------
# Degree-class partition (improved spectral pipeline)


@dataclass
class DegreeClass:
    piece: DirectedGraph
    vmap: np.ndarray  # piece vertex -> original vertex id
    kind: str  # "verbatim" | "low" | "band"
    band: int | None = None  # kappa for band classes
    weight_class: int | None = None
    depth: int = 0


@dataclass
class LevelInfo:
    depth: int
    n: int
    m_sparsified: int
    eta: float
    s: float
    m_leftover: int = 0  # arcs deferred to the next recursion level


@dataclass
class DegreeClassPartition:
    classes: list[DegreeClass]
    recursion_depth: int
    levels: list[LevelInfo]


def degree_class_partition(
    g: WeightedGraph,
    epsilon: float,
    seed: int,
    *,
    c_beta: float = 1.0,
    beta: float | None = None,
) -> DegreeClassPartition:
    """Partition into out-degree-band directed pieces plus low/verbatim rest.

    Implements: sparsify; eta measured from the sparsifier (clamped >= 1);
    assign directions at 2s; split arcs into factor-2 weight classes; within
    each, peel the low class (tail out-degree < beta) and bands
    [2^i beta, 2^{i+1} beta); recurse on the remaining heavy arcs.

    Bands are emitted while 2^i beta <= 2s, so every arc with tail degree
    below 2s is classified and the recursion shrinks the vertex support by
    the guaranteed factor (depth <= ceil(log_{2-1/s} n) + 1).
    """
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 1/2)")
    if beta is None:
        beta = c_beta * epsilon ** (-8.0 / 5.0)
    classes: list[DegreeClass] = []
    levels: list[LevelInfo] = []

    def orient_verbatim(gl: WeightedGraph) -> DirectedGraph:
        return DirectedGraph(gl.n, _arrays=(gl.edge_u, gl.edge_v, gl.edge_w))

    def recurse(gl: WeightedGraph, vmap: np.ndarray, depth: int):
        if gl.n < 3:
            if gl.n > 0:
                classes.append(DegreeClass(orient_verbatim(gl), vmap, "verbatim", depth=depth))
            return depth
        g2 = sparsify(
            gl,
            SparsifierConfig(epsilon, "spectral", derive_seed(seed, "sparsify", depth)),
        )
        eta = max(1.0, g2.m * epsilon**2 / gl.n)
        s = eta / epsilon**2  # = 1 / eps_tilde^2 with eps_tilde = eps / sqrt(eta)
        levels.append(LevelInfo(depth, gl.n, g2.m, eta, s))
        if g2.m == 0:
            return depth
        buddy = assign_direction(g2, 2.0 * s)
        wmin = float(buddy.arc_w.min())
        wcls = np.floor(np.log2(buddy.arc_w / wmin)).astype(np.int64)
        leftover: list[np.ndarray] = []
        for j in np.unique(wcls):
            arc_ids = np.flatnonzero(wcls == j)
            out_in_class = np.zeros(g2.n, dtype=np.int64)
            np.add.at(out_in_class, buddy.arc_u[arc_ids], 1)
            tail_deg = out_in_class[buddy.arc_u[arc_ids]]
            low = arc_ids[tail_deg < beta]
            if low.size:
                piece, pmap = buddy.arc_subgraph(low)
                classes.append(
                    DegreeClass(piece, vmap[pmap], "low", None, int(j), depth)
                )
            covered = tail_deg < beta
            i = 0
            while (2.0**i) * beta <= 2.0 * s:
                lo, hi = (2.0**i) * beta, (2.0 ** (i + 1)) * beta
                sel = (tail_deg >= lo) & (tail_deg < hi)
                covered |= sel
                band_ids = arc_ids[sel]
                if band_ids.size:
                    piece, pmap = buddy.arc_subgraph(band_ids)
                    classes.append(
                        DegreeClass(piece, vmap[pmap], "band", int(i), int(j), depth)
                    )
                i += 1
            rest = arc_ids[~covered]
            if rest.size:
                leftover.append(rest)
        if not leftover:
            return depth
        rest_ids = np.concatenate(leftover)
        levels[-1].m_leftover = int(rest_ids.size)
        und = WeightedGraph(
            g2.n,
            _arrays=(buddy.arc_u[rest_ids], buddy.arc_v[rest_ids], buddy.arc_w[rest_ids]),
        )
        sub, pmap = und.edge_subgraph(np.arange(und.m))
        return recurse(sub, vmap[pmap], depth + 1)

    max_depth = recurse(g, np.arange(g.n, dtype=np.int64), 0)
    return DegreeClassPartition(classes, max_depth + 1, levels)


def recursion_depth_bound(n: int, s: float) -> int:
    """ceil(log_{2 - 1/s} n) + 1 (the guaranteed shrink rate per level)."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / math.log(2.0 - 1.0 / s)) + 1
