"""The "for each" cut-sketch pipeline.

Three tiers, each built on the previous one:

* ``S1Sketch``: degrees plus s = ceil(1/eps) uniform incident-edge samples
  per vertex; difference estimator for cuts of bounded rescaled weight;
* ``CutSketchPoly``: a 0.2-accuracy sparsifier to locate the cut value on a
  base-1.4 scale ladder, plus per-scale importance-sampled expander pieces
  with S1 sketches and exactly stored cut edges;
* ``CutSketchGeneral``: maximum-spanning-forest reduction that snaps an
  arbitrary weight range onto polynomially bounded slices.

Sketches are immutable after build; estimates are read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .errors import QuadsketchError, SketchConsistencyError
from .graph import (
    UnionFind,
    WeightedGraph,
    as_cut_query,
    cut_weight,
)
from .graph import connected_components
from .oracle import multiset_outcomes
from .partition import cut_preprocessing
from .rng import derive_seed, rng_for
from . import serialize
from .serialize import Reader, Writer
from .sparsify import SparsifierConfig, sparsify

LADDER_BASE = 1.4
SPARSIFIER_ACCURACY = 0.2


@dataclass
class QueryResult:
    value: float
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Tier 1: S1 sampling sketch


@dataclass
class S1Sketch:
    """Weighted degrees + per-vertex uniform edge samples of an S1 piece."""

    epsilon: float
    s: int
    delta: np.ndarray  # weighted degree per vertex (in the piece)
    deg: np.ndarray  # unweighted degree per vertex
    owner: np.ndarray  # flattened sample table: sampling vertex
    nbr: np.ndarray  # sampled neighbor
    w: np.ndarray  # weight of the sampled edge
    y: np.ndarray  # multiplicity

    @property
    def n(self) -> int:
        return int(self.delta.size)

    def estimate(self, members) -> float:
        s = as_cut_query(self.n, members)
        base = float(self.delta[s].sum())
        if self.owner.size == 0:
            return base
        mask = s[self.owner] & s[self.nbr]
        if not np.any(mask):
            return base
        corr = (self.deg[self.owner[mask]] / self.s) * self.y[mask] * self.w[mask]
        return base - float(corr.sum())

    def word_count(self) -> int:
        return 2 * self.n + 3 * int(self.owner.size)

    def write(self, w: Writer) -> None:
        w.varint(self.s)
        w.f64(self.epsilon)
        w.f64_array(self.delta)
        w.int_array(self.deg)
        w.int_array(self.owner)
        w.int_array(self.nbr)
        w.f64_array(self.w)
        w.int_array(self.y)

    @classmethod
    def read(cls, r: Reader) -> "S1Sketch":
        s = r.varint()
        eps = r.f64()
        delta = r.f64_array()
        deg = r.int_array()
        owner = r.int_array()
        nbr = r.int_array()
        wts = r.f64_array()
        y = r.int_array()
        return cls(eps, s, delta, deg, owner, nbr, wts, y)


def cut_s1_build(p: WeightedGraph, epsilon: float, seed: int, *, s: int | None = None) -> S1Sketch:
    """Sample s = ceil(1/eps) incident edges per vertex, uniformly with
    replacement (p_e = 1/d_u), and store all weighted degrees."""
    if s is None:
        s = math.ceil(1.0 / epsilon)
    if s < 1:
        raise ValueError("sample count must be positive")
    delta = np.zeros(p.n)
    np.add.at(delta, p.edge_u, p.edge_w)
    np.add.at(delta, p.edge_v, p.edge_w)
    deg = np.zeros(p.n, dtype=np.int64)
    np.add.at(deg, p.edge_u, 1)
    np.add.at(deg, p.edge_v, 1)
    rng = rng_for(seed, "s1")
    owners, nbrs, ws, ys = [], [], [], []
    for u in range(p.n):
        d = int(deg[u])
        if d == 0:
            continue
        nv, ne = p.neighbors(u)
        counts = np.bincount(rng.integers(0, d, size=s), minlength=d)
        for slot in np.flatnonzero(counts):
            owners.append(u)
            nbrs.append(int(nv[slot]))
            ws.append(float(p.edge_w[ne[slot]]))
            ys.append(int(counts[slot]))
    return S1Sketch(
        float(epsilon),
        int(s),
        delta,
        deg,
        np.array(owners, dtype=np.int64),
        np.array(nbrs, dtype=np.int64),
        np.array(ws, dtype=np.float64),
        np.array(ys, dtype=np.int64),
    )


def cut_s1_estimate(sk: S1Sketch, members) -> float:
    return sk.estimate(members)


def s1_outcome_space(p: WeightedGraph, s: int):
    """Per-vertex sample-multiset outcome spaces for exhaustive expectation."""
    spaces = []
    for u in range(p.n):
        nv, ne = p.neighbors(u)
        if nv.size == 0:
            spaces.append([])
            continue
        options = [
            (1.0 / nv.size, (int(nv[i]), float(p.edge_w[ne[i]]))) for i in range(nv.size)
        ]
        spaces.append(multiset_outcomes(options, s))
    return spaces


def s1_from_assignment(p: WeightedGraph, epsilon: float, s: int, assignment) -> S1Sketch:
    """Build the sketch that corresponds to one enumerated sampling outcome."""
    delta = np.zeros(p.n)
    np.add.at(delta, p.edge_u, p.edge_w)
    np.add.at(delta, p.edge_v, p.edge_w)
    deg = np.zeros(p.n, dtype=np.int64)
    np.add.at(deg, p.edge_u, 1)
    np.add.at(deg, p.edge_v, 1)
    owners, nbrs, ws, ys = [], [], [], []
    for u, table in enumerate(assignment):
        if not table:
            continue
        for (nbr, wgt), count in table:
            owners.append(u)
            nbrs.append(nbr)
            ws.append(wgt)
            ys.append(count)
    return S1Sketch(
        float(epsilon),
        int(s),
        delta,
        deg,
        np.array(owners, dtype=np.int64),
        np.array(nbrs, dtype=np.int64),
        np.array(ws, dtype=np.float64),
        np.array(ys, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Tier 2: polynomial-weight composite sketch


@dataclass
class ScaleClass:
    index: int  # weight class i: reweighted w in (5*2^-i, 5*2^(1-i)]
    q_u: np.ndarray  # stored cut edges, sketch-graph vertex ids
    q_v: np.ndarray
    q_w: np.ndarray  # reweighted (w~) values at this scale
    comps: list[tuple[np.ndarray, S1Sketch]]  # (vertex map, piece sketch)


@dataclass
class ScaleSketch:
    c: float
    classes: list[ScaleClass]


class CutSketchPoly:
    """Cut sketch for graphs whose weight ratio is polynomially bounded."""

    kind = "cut_poly"

    def __init__(self, epsilon, n, verbatim=None, sparsifier=None, ladder=None, scales=None):
        self.epsilon = float(epsilon)
        self.n = int(n)
        self.verbatim = verbatim
        self.sparsifier = sparsifier
        self.ladder = ladder if ladder is not None else np.empty(0)
        self.scales: list[ScaleSketch] = scales if scales is not None else []

    @property
    def is_verbatim(self) -> bool:
        return self.verbatim is not None

    def estimate(self, members, *, detail: bool = False):
        s = as_cut_query(self.n, members)
        if self.is_verbatim:
            value = cut_weight(self.verbatim, s)
            return QueryResult(value, {"mode": "verbatim"}) if detail else value
        diag: dict = {"mode": "sketch"}
        if not s.any() or s.all():
            return QueryResult(0.0, diag) if detail else 0.0
        c_tilde = cut_weight(self.sparsifier, s)
        diag["c_tilde"] = c_tilde
        if c_tilde <= 0.0:
            return QueryResult(0.0, diag) if detail else 0.0
        target = c_tilde / LADDER_BASE**2
        idx = int(np.searchsorted(self.ladder, target, side="right")) - 1
        idx = min(max(idx, 0), len(self.ladder) - 1)
        scale = self.scales[idx]
        c = scale.c
        diag.update(c=c, scale_index=idx)
        total = 0.0
        per_class = []
        for cls in scale.classes:
            q_contrib = 0.0
            if cls.q_u.size:
                crossing = s[cls.q_u] != s[cls.q_v]
                q_contrib = float(cls.q_w[crossing].sum())
            comp_contrib = 0.0
            for vmap, sk in cls.comps:
                comp_contrib += sk.estimate(s[vmap])
            per_class.append((cls.index, q_contrib, comp_contrib))
            total += q_contrib + comp_contrib
        diag["per_class"] = per_class
        value = c * total
        if detail:
            diag["bytes_touched"] = len(self.to_bytes())  # whole-sketch upper bound
            return QueryResult(value, diag)
        return value

    def word_count(self) -> int:
        if self.is_verbatim:
            return 3 * self.verbatim.m
        words = 3 * self.sparsifier.m + len(self.ladder)
        for sc in self.scales:
            for cls in sc.classes:
                words += 3 * int(cls.q_u.size)
                words += sum(sk.word_count() for _, sk in cls.comps)
        return words

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64(self.epsilon)
        w.varint(self.n)
        w.varint(1 if self.is_verbatim else 0)
        if self.is_verbatim:
            serialize.write_graph(w, self.verbatim)
            return serialize.envelope(self.kind, w.getvalue())
        sub = Writer()
        serialize.write_graph(sub, self.sparsifier)
        w.section(sub.getvalue())
        sub = Writer()
        sub.f64_array(self.ladder)
        w.section(sub.getvalue())
        body = Writer()
        body.varint(len(self.scales))
        for sc in self.scales:
            body.f64(sc.c)
            body.varint(len(sc.classes))
            for cls in sc.classes:
                body.varint(cls.index)
                body.int_array(cls.q_u)
                body.int_array(cls.q_v)
                body.f64_array(cls.q_w)
                body.varint(len(cls.comps))
                for vmap, sk in cls.comps:
                    body.int_array(vmap)
                    sk.write(body)
        w.section(body.getvalue())
        return serialize.envelope(self.kind, w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "CutSketchPoly":
        kind, r = serialize.open_envelope(data)
        if kind != cls.kind:
            raise QuadsketchError(f"expected {cls.kind}, found {kind}")
        eps = r.f64()
        n = r.varint()
        if r.varint():
            return cls(eps, n, verbatim=serialize.read_graph(r))
        sparsifier = serialize.read_graph(r.section())
        ladder = r.section().f64_array()
        body = r.section()
        scales = []
        for _ in range(body.varint()):
            c = body.f64()
            classes = []
            for _ in range(body.varint()):
                index = body.varint()
                q_u = body.int_array()
                q_v = body.int_array()
                q_w = body.f64_array()
                comps = []
                for _ in range(body.varint()):
                    vmap = body.int_array()
                    comps.append((vmap, S1Sketch.read(body)))
                classes.append(ScaleClass(index, q_u, q_v, q_w, comps))
            scales.append(ScaleSketch(c, classes))
        return cls(eps, n, sparsifier=sparsifier, ladder=ladder, scales=scales)


def build_ladder(g: WeightedGraph) -> np.ndarray:
    """Base-1.4 value ladder anchored four steps below w_min, covering every
    possible 1.2-approximate cut value of g."""
    wmin = float(g.edge_w.min())
    lo = wmin / LADDER_BASE**4
    top = 1.5 * g.total_weight
    count = max(1, math.ceil(math.log(top / lo) / math.log(LADDER_BASE)) + 1)
    return lo * LADDER_BASE ** np.arange(count)


EPSILON_WINDOW_TOP = 1.0 / 30.0


def _use_verbatim(n: int, m: int, epsilon: float, mode: str) -> bool:
    if mode not in ("auto", "pipeline"):
        raise ValueError("mode must be 'auto' or 'pipeline'")
    if n < 2 or m == 0 or epsilon < 1.0 / n:
        return True  # below 1/n the whole graph is the smaller sketch
    if mode == "auto" and epsilon > EPSILON_WINDOW_TOP:
        return True  # outside the analysed window: store the graph
    return False


def cut_basic_build(
    g: WeightedGraph,
    epsilon: float,
    seed: int,
    *,
    mode: str = "auto",
    sparsifier_accuracy: float = SPARSIFIER_ACCURACY,
) -> CutSketchPoly:
    """Composite sketch for the polynomial-weight regime.

    mode "auto" stores the graph verbatim whenever eps falls outside
    [1/n, 1/30] (below 1/n the graph is smaller than the sketch; above 1/30
    the constants of the analysis no longer apply). mode "pipeline" runs the
    ladder construction for any eps >= 1/n, which the size-scaling and
    failure-rate experiments rely on.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    if _use_verbatim(g.n, g.m, epsilon, mode):
        return CutSketchPoly(epsilon, g.n, verbatim=g)
    h = sparsify(g, SparsifierConfig(sparsifier_accuracy, "cut", derive_seed(seed, "H")))
    ladder = build_ladder(g)
    scales = []
    for i, c in enumerate(ladder.tolist()):
        prep = cut_preprocessing(g, c, epsilon, derive_seed(seed, "scale", i))
        classes = []
        for cl in prep.classes:
            comps = []
            for k, comp in enumerate(cl.result.components):
                sk = cut_s1_build(
                    comp.graph, epsilon, derive_seed(seed, "scale", i, "cls", cl.index, "comp", k)
                )
                comps.append((comp.vmap, sk))
            cross = cl.result
            classes.append(
                ScaleClass(
                    cl.index,
                    cross.cross_u.copy(),
                    cross.cross_v.copy(),
                    cross.cross_w.copy(),
                    comps,
                )
            )
        scales.append(ScaleSketch(c, classes))
    return CutSketchPoly(epsilon, g.n, sparsifier=h, ladder=ladder, scales=scales)


def cut_basic_estimate(sk: CutSketchPoly, members, *, detail: bool = False):
    return sk.estimate(members, detail=detail)


# ---------------------------------------------------------------------------
# Tier 3: general weights via a maximum spanning forest


def mst_max(g: WeightedGraph) -> list[tuple[int, int, float]]:
    """Maximum-weight spanning forest, Kruskal order (ties by edge index)."""
    order = np.lexsort((np.arange(g.m), -g.edge_w))
    uf = UnionFind(g.n)
    out = []
    for e in order.tolist():
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        if uf.union(u, v):
            out.append((u, v, float(g.edge_w[e])))
    return out


@dataclass
class GeneralScale:
    j: int  # tree-edge index this slice was built for
    labels: np.ndarray  # original vertex -> contracted vertex id
    comps: list[tuple[np.ndarray, CutSketchPoly]]  # (contracted-id map, sketch)


class CutSketchGeneral:
    """Cut sketch for arbitrary positive weights."""

    kind = "cut_general"

    def __init__(self, epsilon, n, verbatim=None, tree=None, stored=None):
        self.epsilon = float(epsilon)
        self.n = int(n)
        self.verbatim = verbatim
        self.tree = tree if tree is not None else []  # ordered (u, v, w)
        self.stored: list[GeneralScale] = stored if stored is not None else []

    @property
    def is_verbatim(self) -> bool:
        return self.verbatim is not None

    def estimate(self, members, *, detail: bool = False):
        s = as_cut_query(self.n, members)
        if self.is_verbatim:
            value = cut_weight(self.verbatim, s)
            return QueryResult(value, {"mode": "verbatim"}) if detail else value
        diag: dict = {"mode": "sketch"}
        j = None
        for idx, (u, v, _) in enumerate(self.tree):
            if s[u] != s[v]:
                j = idx
                break
        if j is None:
            return QueryResult(0.0, diag) if detail else 0.0
        stored_js = [gs.j for gs in self.stored]
        pos = int(np.searchsorted(stored_js, j, side="right")) - 1
        if pos < 0:
            raise SketchConsistencyError("no stored scale at or before the query slice")
        gs = self.stored[pos]
        diag.update(j=j, k=gs.j, w_ej=self.tree[j][2], w_ek=self.tree[gs.j][2])
        # contraction classes must not straddle the query
        counts = np.bincount(gs.labels, minlength=int(gs.labels.max()) + 1)
        ones = np.bincount(gs.labels, weights=s.astype(float), minlength=counts.size)
        straddle = (ones > 0) & (ones < counts)
        if np.any(straddle):
            raise SketchConsistencyError(
                "a contracted vertex class straddles the query; this query is "
                "outside the model (or the sketch is corrupt)"
            )
        contracted = ones == counts
        total = 0.0
        for vmap, poly in gs.comps:
            total += poly.estimate(contracted[vmap])
        if detail:
            diag["n_components"] = len(gs.comps)
            return QueryResult(total, diag)
        return total

    def word_count(self) -> int:
        if self.is_verbatim:
            return 3 * self.verbatim.m
        words = 3 * len(self.tree)
        for gs in self.stored:
            words += sum(p.word_count() for _, p in gs.comps)
        return words

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64(self.epsilon)
        w.varint(self.n)
        w.varint(1 if self.is_verbatim else 0)
        if self.is_verbatim:
            serialize.write_graph(w, self.verbatim)
            return serialize.envelope(self.kind, w.getvalue())
        tw = Writer()
        tw.varint(len(self.tree))
        for u, v, wt in self.tree:
            tw.varint(u)
            tw.varint(v)
            tw.f64(wt)
        w.section(tw.getvalue())
        body = Writer()
        body.varint(len(self.stored))
        for gs in self.stored:
            body.varint(gs.j)
            body.int_array(gs.labels)
            body.varint(len(gs.comps))
            for vmap, poly in gs.comps:
                body.int_array(vmap)
                body.section(poly.to_bytes())
        w.section(body.getvalue())
        return serialize.envelope(self.kind, w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "CutSketchGeneral":
        kind, r = serialize.open_envelope(data)
        if kind != cls.kind:
            raise QuadsketchError(f"expected {cls.kind}, found {kind}")
        eps = r.f64()
        n = r.varint()
        if r.varint():
            return cls(eps, n, verbatim=serialize.read_graph(r))
        tr = r.section()
        tree = []
        for _ in range(tr.varint()):
            u = tr.varint()
            v = tr.varint()
            wt = tr.f64()
            tree.append((u, v, wt))
        body = r.section()
        stored = []
        for _ in range(body.varint()):
            j = body.varint()
            labels = body.int_array()
            comps = []
            for _ in range(body.varint()):
                vmap = body.int_array()
                comps.append((vmap, CutSketchPoly.from_bytes(bytes(body.section().data))))
            stored.append(GeneralScale(j, labels, comps))
        return cls(eps, n, tree=tree, stored=stored)


def _contract(g: WeightedGraph, j_weight: float, n_global: int):
    """Contraction labels and the contracted finite-weight graph for scale j."""
    keep = g.edge_w >= j_weight / n_global**3
    infinite = g.edge_w >= n_global**2 * j_weight
    uf = UnionFind(g.n)
    for e in np.flatnonzero(infinite).tolist():
        uf.union(int(g.edge_u[e]), int(g.edge_v[e]))
    roots = {}
    labels = np.empty(g.n, dtype=np.int64)
    for v in range(g.n):
        r = uf.find(v)
        if r not in roots:
            roots[r] = len(roots)
        labels[v] = roots[r]
    finite = keep & ~infinite
    cu, cv, cw = labels[g.edge_u[finite]], labels[g.edge_v[finite]], g.edge_w[finite]
    loop = cu == cv  # finite edges swallowed by a contraction class
    gp = WeightedGraph(len(roots), _arrays=(cu[~loop], cv[~loop], cw[~loop]))
    return labels, gp


def cut_sketch_build(
    g: WeightedGraph, epsilon: float, seed: int, *, mode: str = "auto"
) -> CutSketchGeneral:
    """General-weight cut sketch: spanning forest plus basic sketches of the
    polynomially-sliced graphs G'_j selected by the factor-2 halving rule.

    The mode knob mirrors cut_basic_build.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    if _use_verbatim(g.n, g.m, epsilon, mode):
        return CutSketchGeneral(epsilon, g.n, verbatim=g)
    tree = mst_max(g)
    stored: list[GeneralScale] = []
    last_w = None
    for j, (_, _, wj) in enumerate(tree):
        if last_w is not None and last_w / wj < 2.0:
            continue
        last_w = wj
        labels, gp = _contract(g, wj, g.n)
        comp_labels = connected_components(gp)
        comps = []
        for lab in range(int(comp_labels.max()) + 1 if gp.n else 0):
            vmask = comp_labels == lab
            if vmask.sum() < 2:
                continue
            sub, vmap = gp.induced_subgraph(vmask)
            poly = cut_basic_build(
                sub, epsilon, derive_seed(seed, "slice", j, "comp", lab), mode=mode
            )
            comps.append((vmap, poly))
        stored.append(GeneralScale(j, labels, comps))
    return CutSketchGeneral(epsilon, g.n, tree=tree, stored=stored)


def cut_sketch_estimate(sk: CutSketchGeneral, members, *, detail: bool = False):
    return sk.estimate(members, detail=detail)


# ---------------------------------------------------------------------------
# Median amplification


def amplified_estimate(builder, g: WeightedGraph, query, epsilon: float, reps: int, seed: int) -> float:
    """Median of `reps` independent sketch builds' estimates (reps odd)."""
    if reps < 1 or reps % 2 == 0:
        raise ValueError("reps must be odd and positive")
    vals = []
    for i in range(reps):
        sk = builder(g, epsilon, derive_seed(seed, "rep", i))
        vals.append(sk.estimate(query))
    return float(median(vals))
