"""The "for each" spectral sketches.

* ``S2Sketch``: light vertices keep all incident edges; heavy vertices keep
  exact degrees plus about eps^{-5/3} weight-proportional samples of their
  heavy-heavy edges.
* ``SpectralBasicSketch``: sparsify, split into factor-2 weight classes,
  partition each at conductance c_alpha * eps^{1/3}, S2-sketch the pieces and
  store the cut edges exactly.
* ``S3Sketch``: degree-banded directed pieces; arcs from low out-degree tails
  are stored, the rest sampled at each head with about eps^{-8/5} draws.
* ``SpectralImprovedSketch``: degree-class partition; low/verbatim classes
  stored exactly, banded classes S3-sketched.

Estimator sums are accumulated with math.fsum to bound rounding drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadsketchError
from .graph import (
    DirectedGraph,
    WeightedGraph,
    as_spectral_query,
    quadratic_form,
)
from .oracle import multiset_outcomes
from .partition import (
    degree_class_partition,
    spectral_preprocessing,
)
from .rng import derive_seed, rng_for
from . import serialize
from .serialize import Reader, Writer
from .sparsify import SparsifierConfig, sparsify

H_MODES = ("lemma", "algorithm")


def _xlx(x: np.ndarray, eu: np.ndarray, ev: np.ndarray, ew: np.ndarray) -> float:
    d = x[eu] - x[ev]
    return float(np.dot(ew, d * d))


# ---------------------------------------------------------------------------
# S2: light/heavy split with heavy-heavy sampling


@dataclass
class S2Sketch:
    epsilon: float
    alpha: float  # real-valued threshold parameter
    draws: int  # ceil(alpha), used for sampling and normalization
    gamma: float
    delta: np.ndarray  # weighted degrees
    light: np.ndarray  # bool mask
    su: np.ndarray  # stored edges (every edge incident to a light vertex)
    sv: np.ndarray
    sw: np.ndarray
    delta_l: np.ndarray  # heavy-to-heavy weighted degree (0 for light)
    owner: np.ndarray  # flattened heavy samples
    nbr: np.ndarray
    w: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return int(self.delta.size)

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        t1 = float(np.dot(self.delta, x * x))
        t2 = 2.0 * float(np.dot(self.sw, x[self.su] * x[self.sv])) if self.su.size else 0.0
        t3 = 0.0
        if self.owner.size:
            t3 = float(
                np.dot(
                    self.delta_l[self.owner] / self.draws,
                    self.y * x[self.owner] * x[self.nbr],
                )
            )
        return math.fsum((t1, -t2, -t3))

    def word_count(self) -> int:
        return 2 * self.n + 3 * int(self.su.size) + 3 * int(self.owner.size)

    def write(self, w: Writer) -> None:
        w.f64(self.epsilon)
        w.f64(self.alpha)
        w.varint(self.draws)
        w.f64(self.gamma)
        w.f64_array(self.delta)
        w.int_array(self.light.astype(np.int64))
        w.int_array(self.su)
        w.int_array(self.sv)
        w.f64_array(self.sw)
        w.f64_array(self.delta_l)
        w.int_array(self.owner)
        w.int_array(self.nbr)
        w.f64_array(self.w)
        w.int_array(self.y)

    @classmethod
    def read(cls, r: Reader) -> "S2Sketch":
        eps = r.f64()
        alpha = r.f64()
        draws = r.varint()
        gamma = r.f64()
        delta = r.f64_array()
        light = r.int_array().astype(bool)
        su = r.int_array()
        sv = r.int_array()
        sw = r.f64_array()
        dl = r.f64_array()
        owner = r.int_array()
        nbr = r.int_array()
        wts = r.f64_array()
        y = r.int_array()
        return cls(eps, alpha, draws, gamma, delta, light, su, sv, sw, dl, owner, nbr, wts, y)


def _s2_heavy_structure(p: WeightedGraph, alpha: float):
    delta = np.zeros(p.n)
    np.add.at(delta, p.edge_u, p.edge_w)
    np.add.at(delta, p.edge_v, p.edge_w)
    gamma = float(p.edge_w.min()) if p.m else 0.0
    light = delta <= gamma * alpha
    incident_light = light[p.edge_u] | light[p.edge_v]
    su, sv, sw = p.edge_u[incident_light], p.edge_v[incident_light], p.edge_w[incident_light]
    delta_l = np.zeros(p.n)
    hh = ~incident_light
    np.add.at(delta_l, p.edge_u[hh], p.edge_w[hh])
    np.add.at(delta_l, p.edge_v[hh], p.edge_w[hh])
    return delta, gamma, light, (su, sv, sw), delta_l, hh


def spectral_s2_build(
    p: WeightedGraph, epsilon: float, seed: int, *, alpha: float | None = None, c_alpha: float = 1.0
) -> S2Sketch:
    if alpha is None:
        alpha = c_alpha * epsilon ** (-5.0 / 3.0)
    draws = math.ceil(alpha)
    delta, gamma, light, (su, sv, sw), delta_l, hh = _s2_heavy_structure(p, alpha)
    rng = rng_for(seed, "s2")
    owners, nbrs, ws, ys = [], [], [], []
    hh_idx = np.flatnonzero(hh)
    for u in np.flatnonzero(~light).tolist():
        nv, ne = p.neighbors(u)
        keep = ~(light[nv])
        nv, ne = nv[keep], ne[keep]
        if nv.size == 0 or delta_l[u] <= 0:
            continue
        probs = p.edge_w[ne] / delta_l[u]
        counts = np.bincount(rng.choice(nv.size, size=draws, p=probs), minlength=nv.size)
        for slot in np.flatnonzero(counts):
            owners.append(u)
            nbrs.append(int(nv[slot]))
            ws.append(float(p.edge_w[ne[slot]]))
            ys.append(int(counts[slot]))
    return S2Sketch(
        float(epsilon),
        float(alpha),
        draws,
        gamma,
        delta,
        light,
        su,
        sv,
        sw,
        delta_l,
        np.array(owners, dtype=np.int64),
        np.array(nbrs, dtype=np.int64),
        np.array(ws, dtype=np.float64),
        np.array(ys, dtype=np.int64),
    )


def spectral_s2_estimate(sk: S2Sketch, x) -> float:
    return sk.estimate(x)


def s2_outcome_space(p: WeightedGraph, alpha: float):
    """Per-heavy-vertex sample spaces for exhaustive expectation."""
    draws = math.ceil(alpha)
    delta, gamma, light, _, delta_l, _ = _s2_heavy_structure(p, alpha)
    spaces = []
    for u in range(p.n):
        if light[u] or delta_l[u] <= 0:
            spaces.append([])
            continue
        nv, ne = p.neighbors(u)
        keep = ~(light[nv])
        nv, ne = nv[keep], ne[keep]
        options = [
            (float(p.edge_w[e]) / float(delta_l[u]), (int(v), float(p.edge_w[e])))
            for v, e in zip(nv.tolist(), ne.tolist())
        ]
        spaces.append(multiset_outcomes(options, draws))
    return spaces


def s2_from_assignment(p: WeightedGraph, epsilon: float, alpha: float, assignment) -> S2Sketch:
    draws = math.ceil(alpha)
    delta, gamma, light, (su, sv, sw), delta_l, _ = _s2_heavy_structure(p, alpha)
    owners, nbrs, ws, ys = [], [], [], []
    for u, table in enumerate(assignment):
        if not table:
            continue
        for (nbr, wgt), count in table:
            owners.append(u)
            nbrs.append(nbr)
            ws.append(wgt)
            ys.append(count)
    return S2Sketch(
        float(epsilon),
        float(alpha),
        draws,
        gamma,
        delta,
        light,
        su,
        sv,
        sw,
        delta_l,
        np.array(owners, dtype=np.int64),
        np.array(nbrs, dtype=np.int64),
        np.array(ws, dtype=np.float64),
        np.array(ys, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Basic composite: weight classes + conductance partition + S2 pieces


@dataclass
class BasicClass:
    weight_class: int
    verbatim: WeightedGraph | None  # set when gamma <= eps^2 (stored exactly)
    vmap_verbatim: np.ndarray | None
    q_u: np.ndarray
    q_v: np.ndarray
    q_w: np.ndarray
    comps: list[tuple[np.ndarray, S2Sketch]]


class SpectralBasicSketch:
    kind = "spectral_basic"

    def __init__(self, epsilon, n, verbatim=None, classes=None, events=None):
        self.epsilon = float(epsilon)
        self.n = int(n)
        self.verbatim = verbatim
        self.classes: list[BasicClass] = classes if classes is not None else []
        self.events: list[str] = events if events is not None else []

    @property
    def is_verbatim(self) -> bool:
        return self.verbatim is not None

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        if self.is_verbatim:
            return quadratic_form(self.verbatim, x)
        terms = []
        for cls in self.classes:
            if cls.verbatim is not None:
                terms.append(quadratic_form(cls.verbatim, x[cls.vmap_verbatim]))
                continue
            if cls.q_u.size:
                terms.append(_xlx(x, cls.q_u, cls.q_v, cls.q_w))
            for vmap, sk in cls.comps:
                terms.append(sk.estimate(x[vmap]))
        return math.fsum(terms)

    def word_count(self) -> int:
        if self.is_verbatim:
            return 3 * self.verbatim.m
        words = 0
        for cls in self.classes:
            if cls.verbatim is not None:
                words += 3 * cls.verbatim.m
            else:
                words += 3 * int(cls.q_u.size)
                words += sum(sk.word_count() for _, sk in cls.comps)
        return words

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64(self.epsilon)
        w.varint(self.n)
        w.varint(1 if self.is_verbatim else 0)
        if self.is_verbatim:
            serialize.write_graph(w, self.verbatim)
            return serialize.envelope(self.kind, w.getvalue())
        body = Writer()
        body.varint(len(self.classes))
        for cls in self.classes:
            body.varint(cls.weight_class)
            body.varint(1 if cls.verbatim is not None else 0)
            if cls.verbatim is not None:
                serialize.write_graph(body, cls.verbatim)
                body.int_array(cls.vmap_verbatim)
                continue
            body.int_array(cls.q_u)
            body.int_array(cls.q_v)
            body.f64_array(cls.q_w)
            body.varint(len(cls.comps))
            for vmap, sk in cls.comps:
                body.int_array(vmap)
                sk.write(body)
        w.section(body.getvalue())
        ev = Writer()
        ev.varint(len(self.events))
        for e in self.events:
            data = e.encode()
            ev.varint(len(data))
            ev.buf += data
        w.section(ev.getvalue())
        return serialize.envelope(self.kind, w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SpectralBasicSketch":
        kind, r = serialize.open_envelope(data)
        if kind != cls.kind:
            raise QuadsketchError(f"expected {cls.kind}, found {kind}")
        eps = r.f64()
        n = r.varint()
        if r.varint():
            return cls(eps, n, verbatim=serialize.read_graph(r))
        body = r.section()
        classes = []
        for _ in range(body.varint()):
            j = body.varint()
            if body.varint():
                g = serialize.read_graph(body)
                vmap = body.int_array()
                classes.append(BasicClass(j, g, vmap, *_empty_q(), []))
                continue
            q_u = body.int_array()
            q_v = body.int_array()
            q_w = body.f64_array()
            comps = []
            for _ in range(body.varint()):
                vmap = body.int_array()
                comps.append((vmap, S2Sketch.read(body)))
            classes.append(BasicClass(j, None, None, q_u, q_v, q_w, comps))
        ev = r.section()
        events = []
        for _ in range(ev.varint()):
            k = ev.varint()
            events.append(ev.data[ev.pos : ev.pos + k].decode())
            ev.pos += k
        return cls(eps, n, classes=classes, events=events)


def _empty_q():
    return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)


def spectral_basic_build(
    g: WeightedGraph, epsilon: float, seed: int, *, c_alpha: float = 1.0
) -> SpectralBasicSketch:
    """Sparsify, then per factor-2 weight class partition at conductance
    h = c_alpha * eps^{1/3} and S2-sketch every piece."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    if g.n < 2 or g.m == 0 or epsilon <= 1.0 / g.n:
        return SpectralBasicSketch(epsilon, g.n, verbatim=g)
    g2 = sparsify(g, SparsifierConfig(epsilon, "spectral", derive_seed(seed, "sparsify")))
    if g2.m == 0:
        return SpectralBasicSketch(epsilon, g.n, verbatim=g2)
    h = c_alpha * epsilon ** (1.0 / 3.0)
    wmin = float(g2.edge_w.min())
    wcls = np.floor(np.log2(g2.edge_w / wmin)).astype(np.int64)
    classes = []
    events = []
    for j in np.unique(wcls):
        eidx = np.flatnonzero(wcls == j)
        sub, vmap = g2.edge_subgraph(eidx)
        gamma = float(sub.edge_w.min())
        if gamma <= epsilon**2:
            # the S1/S2 analysis needs gamma > eps^2; store the class exactly
            events.append(f"class {int(j)} stored verbatim: gamma <= eps^2")
            classes.append(BasicClass(int(j), sub, vmap, *_empty_q(), []))
            continue
        part = spectral_preprocessing(sub, h)
        comps = []
        for k, comp in enumerate(part.components):
            sk = spectral_s2_build(
                comp.graph,
                epsilon,
                derive_seed(seed, "cls", int(j), "comp", k),
                c_alpha=c_alpha,
            )
            comps.append((vmap[comp.vmap], sk))
        classes.append(
            BasicClass(
                int(j),
                None,
                None,
                vmap[part.cross_u],
                vmap[part.cross_v],
                part.cross_w.copy(),
                comps,
            )
        )
    return SpectralBasicSketch(epsilon, g.n, classes=classes, events=events)


def spectral_basic_estimate(sk: SpectralBasicSketch, x) -> float:
    return sk.estimate(x)


# ---------------------------------------------------------------------------
# S3: degree-banded directed pieces


@dataclass
class S3Component:
    vmap: np.ndarray  # component vertex -> piece vertex
    in_deg: np.ndarray  # weighted in-degree per component vertex
    deg: np.ndarray  # weighted undirected degree per component vertex
    su: np.ndarray  # stored arcs (tail out-degree below half-band)
    sv: np.ndarray
    sw: np.ndarray
    owner: np.ndarray  # sample tables (owner = head vertex)
    nbr: np.ndarray  # sampled tail
    w: np.ndarray
    y: np.ndarray


@dataclass
class S3Sketch:
    epsilon: float
    beta: float
    draws: int
    kappa: int
    h: float
    n: int
    components: list[S3Component]
    q_u: np.ndarray
    q_v: np.ndarray
    q_w: np.ndarray

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        terms = []
        if self.q_u.size:
            terms.append(_xlx(x, self.q_u, self.q_v, self.q_w))
        for comp in self.components:
            xc = x[comp.vmap]
            t1 = float(np.dot(comp.deg, xc * xc))
            t2 = (
                2.0 * float(np.dot(comp.sw, xc[comp.su] * xc[comp.sv]))
                if comp.su.size
                else 0.0
            )
            t3 = 0.0
            if comp.owner.size:
                t3 = 2.0 * float(
                    np.dot(
                        comp.in_deg[comp.owner] / self.draws,
                        comp.y * xc[comp.owner] * xc[comp.nbr],
                    )
                )
            terms.append(math.fsum((t1, -t2, -t3)))
        return math.fsum(terms)

    def word_count(self) -> int:
        words = 3 * int(self.q_u.size)
        for comp in self.components:
            words += 2 * int(comp.deg.size)
            words += 3 * int(comp.su.size) + 3 * int(comp.owner.size)
        return words

    def write(self, w: Writer) -> None:
        w.f64(self.epsilon)
        w.f64(self.beta)
        w.varint(self.draws)
        w.varint(self.kappa)
        w.f64(self.h)
        w.varint(self.n)
        w.int_array(self.q_u)
        w.int_array(self.q_v)
        w.f64_array(self.q_w)
        w.varint(len(self.components))
        for comp in self.components:
            w.int_array(comp.vmap)
            w.f64_array(comp.in_deg)
            w.f64_array(comp.deg)
            w.int_array(comp.su)
            w.int_array(comp.sv)
            w.f64_array(comp.sw)
            w.int_array(comp.owner)
            w.int_array(comp.nbr)
            w.f64_array(comp.w)
            w.int_array(comp.y)

    @classmethod
    def read(cls, r: Reader) -> "S3Sketch":
        eps = r.f64()
        beta = r.f64()
        draws = r.varint()
        kappa = r.varint()
        h = r.f64()
        n = r.varint()
        q_u = r.int_array()
        q_v = r.int_array()
        q_w = r.f64_array()
        comps = []
        for _ in range(r.varint()):
            vmap = r.int_array()
            in_deg = r.f64_array()
            deg = r.f64_array()
            su = r.int_array()
            sv = r.int_array()
            sw = r.f64_array()
            owner = r.int_array()
            nbr = r.int_array()
            wts = r.f64_array()
            y = r.int_array()
            comps.append(S3Component(vmap, in_deg, deg, su, sv, sw, owner, nbr, wts, y))
        return cls(eps, beta, draws, kappa, h, n, comps, q_u, q_v, q_w)


def _arc_order_as_undirected(p: DirectedGraph) -> np.ndarray:
    """arc index of each edge of p.undirected() (no parallel pairs exist)."""
    lo = np.minimum(p.arc_u, p.arc_v)
    hi = np.maximum(p.arc_u, p.arc_v)
    return np.lexsort((hi, lo))


def _s3_component_structure(p: DirectedGraph, comp_arcs: np.ndarray, vmap: np.ndarray, threshold: float):
    """Classify a component's arcs into stored/sampled by tail out-degree."""
    inv = np.full(p.n, -1, dtype=np.int64)
    inv[vmap] = np.arange(vmap.size)
    tails = inv[p.arc_u[comp_arcs]]
    heads = inv[p.arc_v[comp_arcs]]
    ws = p.arc_w[comp_arcs]
    out_deg = np.zeros(vmap.size, dtype=np.int64)
    np.add.at(out_deg, tails, 1)
    in_deg = np.zeros(vmap.size)
    np.add.at(in_deg, heads, ws)
    deg = np.zeros(vmap.size)
    np.add.at(deg, tails, ws)
    np.add.at(deg, heads, ws)
    stored_mask = out_deg[tails] < threshold
    return tails, heads, ws, out_deg, in_deg, deg, stored_mask


def spectral_s3_build(
    p: DirectedGraph,
    epsilon: float,
    kappa: int,
    seed: int,
    *,
    beta: float | None = None,
    c_beta: float = 1.0,
    h_mode: str = "lemma",
) -> S3Sketch:
    """Sketch one degree-band piece (buddy orientation given by p).

    h_mode "lemma" uses the conductance threshold 2^-kappa; "algorithm" uses
    beta * eps^2 instead (the two readings disagree in the source material;
    the lemma's value is the default).
    """
    if h_mode not in H_MODES:
        raise ValueError(f"h_mode must be one of {H_MODES}")
    if beta is None:
        beta = c_beta * epsilon ** (-8.0 / 5.0)
    draws = math.ceil(beta)
    h = 2.0 ** (-kappa) if h_mode == "lemma" else beta * epsilon**2
    und = p.undirected()
    part = spectral_preprocessing(und, h)
    arc_of_edge = _arc_order_as_undirected(p)
    threshold = (2.0 ** (kappa - 1)) * beta
    comps = []
    for comp in part.components:
        comp_arcs = arc_of_edge[comp.edge_idx]
        tails, heads, ws, out_deg, in_deg, deg, stored_mask = _s3_component_structure(
            p, comp_arcs, comp.vmap, threshold
        )
        su, sv, sw = tails[stored_mask], heads[stored_mask], ws[stored_mask]
        rng = rng_for(seed, "s3", len(comps))
        owners, nbrs, wss, ys = [], [], [], []
        heavy_idx = np.flatnonzero(~stored_mask)
        if heavy_idx.size:
            by_head: dict[int, list[int]] = {}
            for a in heavy_idx.tolist():
                by_head.setdefault(int(heads[a]), []).append(a)
            for u in sorted(by_head):
                arcs = by_head[u]
                total_in = in_deg[u]
                if total_in <= 0:
                    continue
                probs = [float(ws[a]) / total_in for a in arcs]
                slack = max(0.0, 1.0 - sum(probs))
                counts = np.bincount(
                    rng.choice(len(arcs) + 1, size=draws, p=probs + [slack]),
                    minlength=len(arcs) + 1,
                )
                for slot in np.flatnonzero(counts[: len(arcs)]):
                    a = arcs[slot]
                    owners.append(u)
                    nbrs.append(int(tails[a]))
                    wss.append(float(ws[a]))
                    ys.append(int(counts[slot]))
        comps.append(
            S3Component(
                comp.vmap,
                in_deg,
                deg,
                su,
                sv,
                sw,
                np.array(owners, dtype=np.int64),
                np.array(nbrs, dtype=np.int64),
                np.array(wss, dtype=np.float64),
                np.array(ys, dtype=np.int64),
            )
        )
    return S3Sketch(
        float(epsilon),
        float(beta),
        draws,
        int(kappa),
        h,
        p.n,
        comps,
        part.cross_u.copy(),
        part.cross_v.copy(),
        part.cross_w.copy(),
    )


def spectral_s3_estimate(sk: S3Sketch, x) -> float:
    return sk.estimate(x)


def s3_outcome_space(p: DirectedGraph, kappa: int, beta: float):
    """Sample spaces per (component, head vertex) at the lemma threshold.

    Returns (spaces, context) where context rebuilds sketches via
    s3_from_assignment.
    """
    draws = math.ceil(beta)
    und = p.undirected()
    part = spectral_preprocessing(und, 2.0 ** (-kappa))
    arc_of_edge = _arc_order_as_undirected(p)
    threshold = (2.0 ** (kappa - 1)) * beta
    spaces = []
    meta = []
    for ci, comp in enumerate(part.components):
        comp_arcs = arc_of_edge[comp.edge_idx]
        tails, heads, ws, out_deg, in_deg, deg, stored_mask = _s3_component_structure(
            p, comp_arcs, comp.vmap, threshold
        )
        heavy_idx = np.flatnonzero(~stored_mask)
        by_head: dict[int, list[int]] = {}
        for a in heavy_idx.tolist():
            by_head.setdefault(int(heads[a]), []).append(a)
        for u in sorted(by_head):
            arcs = by_head[u]
            total_in = in_deg[u]
            options = [
                (float(ws[a]) / total_in, (int(tails[a]), float(ws[a]))) for a in arcs
            ]
            slack = max(0.0, 1.0 - sum(pr for pr, _ in options))
            if slack > 0:
                options.append((slack, None))
            spaces.append(multiset_outcomes(options, draws))
            meta.append((ci, u))
    return spaces, (part, arc_of_edge, threshold, meta, draws)


def s3_from_assignment(
    p: DirectedGraph, epsilon: float, kappa: int, beta: float, context, assignment
) -> S3Sketch:
    part, arc_of_edge, threshold, meta, draws = context
    comps = []
    tables: dict[int, dict[int, list]] = {}
    for (ci, u), table in zip(meta, assignment):
        if table:
            tables.setdefault(ci, {})[u] = table
    for ci, comp in enumerate(part.components):
        comp_arcs = arc_of_edge[comp.edge_idx]
        tails, heads, ws, out_deg, in_deg, deg, stored_mask = _s3_component_structure(
            p, comp_arcs, comp.vmap, threshold
        )
        su, sv, sw = tails[stored_mask], heads[stored_mask], ws[stored_mask]
        owners, nbrs, wss, ys = [], [], [], []
        for u, table in sorted(tables.get(ci, {}).items()):
            for payload, count in table:
                if payload is None:
                    continue
                tail, wgt = payload
                owners.append(u)
                nbrs.append(tail)
                wss.append(wgt)
                ys.append(count)
        comps.append(
            S3Component(
                comp.vmap,
                in_deg,
                deg,
                su,
                sv,
                sw,
                np.array(owners, dtype=np.int64),
                np.array(nbrs, dtype=np.int64),
                np.array(wss, dtype=np.float64),
                np.array(ys, dtype=np.int64),
            )
        )
    h = 2.0 ** (-kappa)
    return S3Sketch(
        float(epsilon),
        float(beta),
        draws,
        int(kappa),
        h,
        p.n,
        comps,
        part.cross_u.copy(),
        part.cross_v.copy(),
        part.cross_w.copy(),
    )


# ---------------------------------------------------------------------------
# Improved composite: degree-class partition + S3 pieces


@dataclass
class ImprovedClass:
    kind: str  # "verbatim" | "low" | "band"
    vmap: np.ndarray  # piece vertex -> original vertex
    graph: WeightedGraph | None  # exact storage for verbatim/low classes
    s3: S3Sketch | None
    kappa: int | None
    weight_class: int | None
    depth: int


class SpectralImprovedSketch:
    kind = "spectral_improved"

    def __init__(self, epsilon, n, verbatim=None, classes=None, info=None):
        self.epsilon = float(epsilon)
        self.n = int(n)
        self.verbatim = verbatim
        self.classes: list[ImprovedClass] = classes if classes is not None else []
        self.info = info or {}

    @property
    def is_verbatim(self) -> bool:
        return self.verbatim is not None

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        if self.is_verbatim:
            return quadratic_form(self.verbatim, x)
        terms = []
        for cls in self.classes:
            if cls.graph is not None:
                terms.append(quadratic_form(cls.graph, x[cls.vmap]))
            else:
                terms.append(cls.s3.estimate(x[cls.vmap]))
        return math.fsum(terms)

    def word_count(self) -> int:
        if self.is_verbatim:
            return 3 * self.verbatim.m
        words = 0
        for cls in self.classes:
            words += 3 * cls.graph.m if cls.graph is not None else cls.s3.word_count()
        return words

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64(self.epsilon)
        w.varint(self.n)
        w.varint(1 if self.is_verbatim else 0)
        if self.is_verbatim:
            serialize.write_graph(w, self.verbatim)
            return serialize.envelope(self.kind, w.getvalue())
        body = Writer()
        body.varint(len(self.classes))
        for cls in self.classes:
            body.varint({"verbatim": 0, "low": 1, "band": 2}[cls.kind])
            body.int_array(cls.vmap)
            body.varint(cls.kappa if cls.kappa is not None else 0)
            body.varint(cls.weight_class + 1 if cls.weight_class is not None else 0)
            body.varint(cls.depth)
            if cls.graph is not None:
                serialize.write_graph(body, cls.graph)
            else:
                sub = Writer()
                cls.s3.write(sub)
                body.section(sub.getvalue())
        w.section(body.getvalue())
        return serialize.envelope(self.kind, w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SpectralImprovedSketch":
        kind, r = serialize.open_envelope(data)
        if kind != cls.kind:
            raise QuadsketchError(f"expected {cls.kind}, found {kind}")
        eps = r.f64()
        n = r.varint()
        if r.varint():
            return cls(eps, n, verbatim=serialize.read_graph(r))
        body = r.section()
        classes = []
        kinds = {0: "verbatim", 1: "low", 2: "band"}
        for _ in range(body.varint()):
            ck = kinds[body.varint()]
            vmap = body.int_array()
            kappa = body.varint()
            wc = body.varint()
            depth = body.varint()
            if ck in ("verbatim", "low"):
                g = serialize.read_graph(body)
                classes.append(
                    ImprovedClass(ck, vmap, g, None, None, wc - 1 if wc else None, depth)
                )
            else:
                s3 = S3Sketch.read(body.section())
                classes.append(
                    ImprovedClass(ck, vmap, None, s3, kappa, wc - 1 if wc else None, depth)
                )
        return cls(eps, n, classes=classes)


def spectral_improved_build(
    g: WeightedGraph,
    epsilon: float,
    seed: int,
    *,
    c_beta: float = 1.0,
    h_mode: str = "lemma",
) -> SpectralImprovedSketch:
    """Degree-class partition; banded pieces get S3 sketches, the rest is
    stored exactly."""
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 1/2)")
    if g.n < 2 or g.m == 0 or epsilon <= 1.0 / g.n:
        return SpectralImprovedSketch(epsilon, g.n, verbatim=g)
    dcp = degree_class_partition(g, epsilon, derive_seed(seed, "partition"), c_beta=c_beta)
    classes = []
    for ci, dc in enumerate(dcp.classes):
        if dc.kind in ("verbatim", "low"):
            classes.append(
                ImprovedClass(
                    dc.kind, dc.vmap, dc.piece.undirected(), None, None, dc.weight_class, dc.depth
                )
            )
        else:
            s3 = spectral_s3_build(
                dc.piece,
                epsilon,
                dc.band,
                derive_seed(seed, "class", ci),
                c_beta=c_beta,
                h_mode=h_mode,
            )
            classes.append(
                ImprovedClass("band", dc.vmap, None, s3, dc.band, dc.weight_class, dc.depth)
            )
    info = {"recursion_depth": dcp.recursion_depth, "n_classes": len(dcp.classes)}
    return SpectralImprovedSketch(epsilon, g.n, classes=classes, info=info)


def spectral_improved_estimate(sk: SpectralImprovedSketch, x) -> float:
    return sk.estimate(x)
