"""Simulated multi-server minimum-cut protocol.

Edges are partitioned across k servers. Each server sends serialized
messages to an in-process coordinator: an amplified "for each" cut sketch of
its share (accuracy eps) and a classical cut sparsifier at fixed accuracy
0.2. The coordinator merges the sparsifiers (cut sparsifiers compose
additively under graph union), enumerates every cut within factor 1.5 of the
merged minimum (exhaustively for n <= 20, by repeated random contraction
above), scores each candidate as the sum of the servers' median sketch
estimates, and returns the argmin. Message bytes are what the experiment
measures; there is no real networking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutsketch import CutSketchGeneral, cut_sketch_build
from .errors import QuadsketchError
from .graph import UnionFind, WeightedGraph, cut_weight, format_graph, is_connected
from .oracle import enumerate_cut_values, min_cut_exact
from .rng import derive_seed, rng_for
from .serialize import graph_bytes
from .sparsify import SparsifierConfig, sparsify

SPARSIFIER_ACCURACY = 0.2
NEAR_MIN_FACTOR = 1.5
EXHAUSTIVE_CANDIDATE_CAP = 20
DEFAULT_VERTEX_GUARD = 64
STRATEGIES = ("round_robin", "random", "by_vertex_hash")


def partition_edges(g: WeightedGraph, k: int, strategy: str = "round_robin", seed: int = 0):
    """Partition edge indices into k subsets; deterministic given seed."""
    if k < 1:
        raise ValueError("need at least one server")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    m = g.m
    if strategy == "round_robin":
        owner = np.arange(m, dtype=np.int64) % k
    elif strategy == "random":
        owner = rng_for(seed, "edge-partition").integers(0, k, size=m)
    else:
        owner = np.array(
            [derive_seed(seed, "vh", int(u), int(v)) % k for u, v in zip(g.edge_u, g.edge_v)],
            dtype=np.int64,
        )
    return [np.flatnonzero(owner == i) for i in range(k)]


@dataclass
class ServerShare:
    server_id: int
    graph: WeightedGraph  # the share, on the full vertex set
    sketches: list[CutSketchGeneral]  # reps independent builds
    sparsifier: WeightedGraph

    def estimate(self, members) -> float:
        vals = sorted(sk.estimate(members) for sk in self.sketches)
        return vals[len(vals) // 2]


@dataclass
class ProtocolTranscript:
    n: int
    m: int
    k: int
    epsilon: float
    reps: int
    seed: int
    sketch_bytes: list[int]
    sparsifier_bytes: list[int]
    candidate_count: int
    best_members: np.ndarray
    best_estimate: float
    merged_min_cut: float
    info: dict = field(default_factory=dict)

    @property
    def total_bytes(self) -> int:
        return sum(self.sketch_bytes) + sum(self.sparsifier_bytes)


def _canonical(members: np.ndarray) -> np.ndarray:
    return ~members if members[0] else members


def karger_cut(g: WeightedGraph, rng) -> np.ndarray:
    """One weighted random-contraction run; returns one side as a bool mask."""
    keys = rng.exponential(1.0, size=g.m) / g.edge_w
    order = np.argsort(keys, kind="stable")
    uf = UnionFind(g.n)
    comps = g.n
    for e in order.tolist():
        if comps <= 2:
            break
        if uf.union(int(g.edge_u[e]), int(g.edge_v[e])):
            comps -= 1
    root0 = uf.find(0)
    members = np.array([uf.find(v) == root0 for v in range(g.n)])
    return _canonical(members)


def near_min_cut_candidates(
    merged: WeightedGraph, seed: int, karger_rounds: int | None = None
) -> tuple[list[np.ndarray], float]:
    """All cuts within NEAR_MIN_FACTOR of the merged minimum (n <= 20), or a
    sampled superset built from Stoer-Wagner, singletons and Karger runs."""
    n = merged.n
    best_val, best_members = min_cut_exact(merged)
    limit = NEAR_MIN_FACTOR * best_val
    seen: dict[bytes, np.ndarray] = {}

    def add(members: np.ndarray):
        mem = _canonical(members)
        if not mem.any() or mem.all():
            return
        if cut_weight(merged, mem) <= limit + 1e-12:
            seen.setdefault(mem.tobytes(), mem)

    if n <= EXHAUSTIVE_CANDIDATE_CAP:
        masks, vals = enumerate_cut_values(merged)
        for mask in masks[vals <= limit + 1e-12].tolist():
            members = np.zeros(n, dtype=bool)
            for b in range(n - 1):
                members[b] = bool((mask >> b) & 1)
            add(members)
    else:
        add(best_members)
        eye = np.eye(n, dtype=bool)
        for v in range(n):
            add(eye[v])
        if karger_rounds is None:
            karger_rounds = max(256, 2 * n * math.ceil(math.log2(max(n, 2))))
        rng = rng_for(seed, "karger")
        for _ in range(karger_rounds):
            add(karger_cut(merged, rng))
    candidates = [seen[k] for k in sorted(seen)]
    return candidates, best_val


def run_protocol(
    g: WeightedGraph,
    k: int,
    epsilon: float,
    reps: int = 9,
    seed: int = 0,
    *,
    strategy: str = "round_robin",
    vertex_guard: int = DEFAULT_VERTEX_GUARD,
    karger_rounds: int | None = None,
) -> ProtocolTranscript:
    """Run the full protocol and account every transmitted byte."""
    if g.n > vertex_guard:
        raise QuadsketchError(f"protocol guard: n={g.n} exceeds {vertex_guard}")
    if not is_connected(g):
        raise QuadsketchError("protocol requires a connected input graph")
    if reps < 1 or reps % 2 == 0:
        raise ValueError("reps must be odd and positive")
    shares = []
    sketch_bytes = []
    sparsifier_bytes = []
    reps_transmitted = reps
    for i, eidx in enumerate(partition_edges(g, k, strategy, seed)):
        share_graph = WeightedGraph(
            g.n, _arrays=(g.edge_u[eidx], g.edge_v[eidx], g.edge_w[eidx])
        )
        first = cut_sketch_build(share_graph, epsilon, derive_seed(seed, "server", i, "rep", 0))
        if first.is_verbatim:
            # deterministic sketch: all repetitions are byte-identical, so a
            # single copy is transmitted and the median is a no-op
            sketches = [first]
            reps_transmitted = 1
        else:
            sketches = [first] + [
                cut_sketch_build(share_graph, epsilon, derive_seed(seed, "server", i, "rep", r))
                for r in range(1, reps)
            ]
        sparsifier = sparsify(
            share_graph,
            SparsifierConfig(
                SPARSIFIER_ACCURACY, "cut", derive_seed(seed, "server", i, "sparsifier")
            ),
        )
        shares.append(ServerShare(i, share_graph, sketches, sparsifier))
        sketch_bytes.append(sum(len(sk.to_bytes()) for sk in sketches))
        sparsifier_bytes.append(len(graph_bytes(sparsifier)))
    merged = WeightedGraph(
        g.n,
        _arrays=(
            np.concatenate([s.sparsifier.edge_u for s in shares]),
            np.concatenate([s.sparsifier.edge_v for s in shares]),
            np.concatenate([s.sparsifier.edge_w for s in shares]),
        ),
    )
    candidates, merged_min = near_min_cut_candidates(merged, seed, karger_rounds)
    if not candidates:
        raise QuadsketchError("no candidate cuts found (degenerate input)")
    best_members = None
    best_score = math.inf
    for members in candidates:
        score = sum(share.estimate(members) for share in shares)
        if score < best_score:
            best_score = score
            best_members = members
    return ProtocolTranscript(
        g.n,
        g.m,
        k,
        float(epsilon),
        reps,
        seed,
        sketch_bytes,
        sparsifier_bytes,
        len(candidates),
        best_members,
        float(best_score),
        float(merged_min),
        info={"strategy": strategy, "reps_transmitted": reps_transmitted},
    )


def raw_edge_list_bytes(g: WeightedGraph) -> int:
    """Size of the plain text edge-list interchange format for g."""
    return len(format_graph(g).encode())


def exact_protocol_score(g: WeightedGraph, k: int, members, *, strategy="round_robin", seed=0) -> float:
    """Sum of exact share cut weights (the additivity baseline for tests)."""
    total = 0.0
    for eidx in partition_edges(g, k, strategy, seed):
        share = WeightedGraph(g.n, _arrays=(g.edge_u[eidx], g.edge_v[eidx], g.edge_w[eidx]))
        total += cut_weight(share, members)
    return total
