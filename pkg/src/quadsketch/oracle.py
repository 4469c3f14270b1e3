"""Independent brute-force ground truth used by the test suite and CLI.

Everything here is deterministic: Stoer-Wagner for global minimum cut, dense
symmetric eigensolves for spectra, and exhaustive enumeration of estimator
sample spaces for exact expectations.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from .errors import QuadsketchError, TooLargeError
from .graph import (
    WeightedGraph,
    connected_components,
    degrees,
    is_connected,
)

MIN_CUT_VERTEX_CAP = 256
EIG_VERTEX_CAP = 512
OUTCOME_SPACE_CAP = 10**6


def fingerprint(g: WeightedGraph) -> str:
    """Stable hash of the canonical edge list."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(g.n).encode())
    h.update(g.edge_u.astype("<i8").tobytes())
    h.update(g.edge_v.astype("<i8").tobytes())
    h.update(g.edge_w.astype("<f8").tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    value: float
    method: str  # exhaustive | stoer_wagner | dense_eig
    instance: str  # fingerprint of the queried graph


def min_cut_exact(g: WeightedGraph) -> tuple[float, np.ndarray]:
    """Deterministic global minimum cut (value, member bit vector).

    Stoer-Wagner on a dense adjacency matrix; capped at n <= 256. For a
    disconnected input returns 0 with one connected component as witness.
    """
    if g.n > MIN_CUT_VERTEX_CAP:
        raise TooLargeError("instance too large for the Stoer-Wagner oracle")
    if g.n < 2:
        raise QuadsketchError("minimum cut needs at least two vertices")
    if not is_connected(g):
        labels = connected_components(g)
        return 0.0, labels == labels[0]
    adj = g.adjacency_matrix()
    groups: list[list[int]] = [[i] for i in range(g.n)]
    active = list(range(g.n))
    best_val = math.inf
    best_side: list[int] = []
    while len(active) > 1:
        order = active
        a = order[0]
        in_a = np.zeros(g.n, dtype=bool)
        in_a[a] = True
        wsum = adj[a].copy()
        added = [a]
        for _ in range(len(order) - 1):
            cand = [v for v in order if not in_a[v]]
            weights = wsum[cand]
            nxt = cand[int(np.argmax(weights))]
            added.append(nxt)
            in_a[nxt] = True
            wsum += adj[nxt]
        s, t = added[-2], added[-1]
        cut_of_phase = float(wsum[t] - adj[t, t])
        if cut_of_phase < best_val:
            best_val = cut_of_phase
            best_side = list(groups[t])
        # merge t into s
        adj[s] += adj[t]
        adj[:, s] += adj[:, t]
        adj[t] = 0.0
        adj[:, t] = 0.0
        adj[s, s] = 0.0
        groups[s].extend(groups[t])
        active.remove(t)
    members = np.zeros(g.n, dtype=bool)
    members[best_side] = True
    return best_val, members


def enumerate_cut_values(g: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    """All 2^(n-1)-1 distinct cuts (masks over bits 0..n-2) and their weights."""
    if g.n > 21:
        raise TooLargeError("too many subsets to enumerate")
    if g.n < 2:
        raise QuadsketchError("no nontrivial cuts")
    masks = np.arange(1, 1 << (g.n - 1), dtype=np.int64)
    vals = np.zeros(masks.size)
    for u, v, w in zip(g.edge_u.tolist(), g.edge_v.tolist(), g.edge_w.tolist()):
        vals += (((masks >> u) ^ (masks >> v)) & 1) * w
    return masks, vals


def min_cut_exhaustive(g: WeightedGraph) -> tuple[float, np.ndarray]:
    masks, vals = enumerate_cut_values(g)
    i = int(np.argmin(vals))
    members = np.zeros(g.n, dtype=bool)
    for b in range(g.n - 1):
        members[b] = bool((int(masks[i]) >> b) & 1)
    return float(vals[i]), members


def normalized_laplacian(g: WeightedGraph) -> np.ndarray:
    delta, _ = degrees(g)
    if np.any(delta <= 0):
        raise QuadsketchError("normalized Laplacian undefined with isolated vertex")
    inv_sqrt = 1.0 / np.sqrt(delta)
    a = g.adjacency_matrix()
    return np.eye(g.n) - (inv_sqrt[:, None] * a) * inv_sqrt[None, :]


def lambda1_normalized(g: WeightedGraph) -> float:
    """Second-smallest eigenvalue of D^{-1/2} L D^{-1/2} (dense solve)."""
    if g.n > EIG_VERTEX_CAP:
        raise TooLargeError("instance too large for the dense eigensolve")
    if g.n < 2:
        raise QuadsketchError("lambda_1 needs at least two vertices")
    if not is_connected(g):
        raise QuadsketchError("lambda_1 oracle requires a connected graph")
    vals = np.linalg.eigvalsh(normalized_laplacian(g))
    if abs(vals[0]) > 1e-8:
        raise QuadsketchError(f"lambda_0 = {vals[0]:.3e} not within 1e-8 of zero")
    return float(vals[1])


def min_cut_report(g: WeightedGraph) -> OracleReport:
    val, _ = min_cut_exact(g)
    return OracleReport("min_cut", val, "stoer_wagner", fingerprint(g))


def lambda1_report(g: WeightedGraph) -> OracleReport:
    return OracleReport("lambda1_normalized", lambda1_normalized(g), "dense_eig", fingerprint(g))


# ---------------------------------------------------------------------------
# Exhaustive expectation of a randomized estimator.
#
# An outcome space is a list of independent units; each unit is a list of
# (probability, payload) pairs summing to 1. The driver enumerates the full
# product space and returns sum(prob * evaluate(assignment)).


def multiset_outcomes(
    options: Sequence[tuple[float, object]], draws: int
) -> list[tuple[float, tuple]]:
    """All multisets of `draws` i.i.d. picks with multinomial probabilities.

    Each returned payload is a tuple of (option payload, multiplicity) pairs
    restricted to options that were picked at least once.
    """
    if draws == 0 or not options:
        return [(1.0, ())]
    out = []
    idx = range(len(options))
    fact = math.factorial(draws)
    for combo in combinations_with_replacement(idx, draws):
        counts: dict[int, int] = {}
        for i in combo:
            counts[i] = counts.get(i, 0) + 1
        coeff = fact
        prob = 1.0
        for i, c in counts.items():
            coeff //= math.factorial(c)
            prob *= options[i][0] ** c
        payload = tuple((options[i][1], c) for i, c in sorted(counts.items()))
        out.append((coeff * prob, payload))
    return out


def estimator_expectation_exhaustive(
    spaces: Sequence[Sequence[tuple[float, object]]],
    evaluate: Callable[[tuple], float],
) -> float:
    """Exact expectation by enumerating every joint sampling outcome."""
    total = 1
    for unit in spaces:
        total *= max(1, len(unit))
        if total > OUTCOME_SPACE_CAP:
            raise TooLargeError("sample-outcome space exceeds the enumeration cap")
    terms: list[float] = []

    def rec(i: int, prob: float, acc: list):
        if i == len(spaces):
            terms.append(prob * evaluate(tuple(acc)))
            return
        unit = spaces[i]
        if not unit:
            acc.append(None)
            rec(i + 1, prob, acc)
            acc.pop()
            return
        for p, payload in unit:
            if p == 0.0:
                continue
            acc.append(payload)
            rec(i + 1, prob * p, acc)
            acc.pop()

    rec(0, 1.0, [])
    return math.fsum(terms)
