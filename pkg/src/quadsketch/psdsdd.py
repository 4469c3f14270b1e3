"""SDD-to-Laplacian reduction and the JL sketch for general PSD matrices.

Dense matrices only (n <= 4096): the point here is the reduction and the
random-projection baseline, not sparse linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadsketchError
from .graph import WeightedGraph, as_spectral_query
from .rng import rng_for
from . import serialize
from .serialize import Writer
from .spectral import SpectralImprovedSketch, spectral_improved_build

MATRIX_VERTEX_CAP = 4096
SYMMETRY_TOL = 1e-12
PSD_EIG_TOL = 1e-9
JL_CONSTANT = 8.0  # r = ceil(C_JL * eps^-2 * ln(1/delta))


def check_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] > MATRIX_VERTEX_CAP:
        raise ValueError(f"matrix side exceeds the {MATRIX_VERTEX_CAP} guard")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return a


def check_sdd(a: np.ndarray) -> None:
    """Raise naming the first row violating diagonal dominance."""
    off = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
    slack = np.diag(a) - off
    bad = np.flatnonzero(slack < -1e-9 * max(1.0, float(np.abs(a).max(initial=0.0))))
    if bad.size:
        i = int(bad[0])
        raise QuadsketchError(
            f"matrix is not SDD: row {i} has diagonal {a[i, i]!r} < off-diagonal sum {off[i]!r}"
        )


def check_psd(a: np.ndarray) -> np.ndarray:
    """Eigenvalues, validated against the -1e-9 * ||A|| tolerance."""
    vals, vecs = np.linalg.eigh(a)
    norm = max(float(np.abs(vals).max(initial=0.0)), 1e-300)
    if float(vals.min(initial=0.0)) < -PSD_EIG_TOL * norm:
        raise QuadsketchError(
            f"matrix is not PSD: smallest eigenvalue {vals.min():.3e} "
            f"below tolerance {-PSD_EIG_TOL * norm:.3e}"
        )
    return vals, vecs


def sdd_to_laplacian(a) -> tuple[np.ndarray, WeightedGraph]:
    """Split A = D + B (D diagonal slack, B with row sums of |off-diag| on
    the diagonal) and build the 2n-vertex Laplacian of B's doubled graph.

    Then x^T A x = x^T D x + 0.5 * y^T L y with y = (x, -x): negative entries
    B_ij < 0 become edges (i, j) and (i+n, j+n) of weight -B_ij, positive
    entries become edges (i, j+n) and (j, i+n) of weight B_ij.
    """
    a = check_matrix(a)
    check_sdd(a)
    n = a.shape[0]
    off = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
    diag_slack = np.diag(a) - off
    edges = []
    iu, ju = np.triu_indices(n, k=1)
    for i, j in zip(iu.tolist(), ju.tolist()):
        b = a[i, j]
        if b < 0:
            edges.append((i, j, -b))
            edges.append((i + n, j + n, -b))
        elif b > 0:
            edges.append((i, j + n, b))
            edges.append((j, i + n, b))
    return diag_slack, WeightedGraph(2 * n, edges)


def embed_query(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([x, -x])


# ---------------------------------------------------------------------------
# SDD sketch: reduction composed with the improved spectral sketch


class SddSketch:
    kind = "sdd"

    def __init__(self, diag: np.ndarray, lap_sketch: SpectralImprovedSketch):
        self.diag = diag
        self.lap_sketch = lap_sketch

    @property
    def n(self) -> int:
        return int(self.diag.size)

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        exact = float(np.dot(self.diag, x * x))
        return exact + 0.5 * self.lap_sketch.estimate(embed_query(x))

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64_array(self.diag)
        w.section(self.lap_sketch.to_bytes())
        return serialize.envelope(self.kind, w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SddSketch":
        kind, r = serialize.open_envelope(data)
        if kind != cls.kind:
            raise QuadsketchError(f"expected {cls.kind}, found {kind}")
        diag = r.f64_array()
        lap = SpectralImprovedSketch.from_bytes(bytes(r.section().data))
        return cls(diag, lap)


def sdd_sketch_build(a, epsilon: float, seed: int) -> SddSketch:
    diag, lap = sdd_to_laplacian(a)
    return SddSketch(diag, spectral_improved_build(lap, epsilon, seed))


def sdd_sketch_estimate(sk: SddSketch, x) -> float:
    return sk.estimate(x)


# ---------------------------------------------------------------------------
# JL sketch for PSD matrices


@dataclass
class JlSketch:
    kind = "jl"

    sb: np.ndarray  # r x n projected factor
    epsilon: float
    delta: float
    seed: int

    @property
    def r(self) -> int:
        return int(self.sb.shape[0])

    @property
    def n(self) -> int:
        return int(self.sb.shape[1])

    def estimate(self, x) -> float:
        x = as_spectral_query(self.n, x)
        v = self.sb @ x
        return float(np.dot(v, v))

    def to_bytes(self) -> bytes:
        w = Writer()
        w.f64(self.epsilon)
        w.f64(self.delta)
        w.varint(self.seed)
        w.varint(self.r)
        w.varint(self.n)
        w.f64_array(self.sb.reshape(-1))
        return serialize.envelope("jl", w.getvalue())

    @classmethod
    def from_bytes(cls, data: bytes) -> "JlSketch":
        kind, r = serialize.open_envelope(data)
        if kind != "jl":
            raise QuadsketchError(f"expected jl, found {kind}")
        eps = r.f64()
        delta = r.f64()
        seed = r.varint()
        rows = r.varint()
        cols = r.varint()
        sb = r.f64_array().reshape(rows, cols)
        return cls(sb, eps, delta, seed)


def jl_rows(epsilon: float, delta: float) -> int:
    return math.ceil(JL_CONSTANT * epsilon**-2 * math.log(1.0 / delta))


def jl_build(a, epsilon: float, delta: float, seed: int) -> JlSketch:
    """Factor A = B^T B by eigendecomposition (negative eigenvalues clamped
    to 0) and store S B for a Rademacher/sqrt(r) projection S."""
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError("epsilon and delta must be in (0, 1)")
    a = check_matrix(a)
    vals, vecs = check_psd(a)
    b = (np.sqrt(np.clip(vals, 0.0, None))[:, None]) * vecs.T  # B^T B = A
    r = jl_rows(epsilon, delta)
    rng = rng_for(seed, "jl")
    s = rng.choice((-1.0, 1.0), size=(r, a.shape[0])) / math.sqrt(r)
    return JlSketch(s @ b, float(epsilon), float(delta), int(seed))


def jl_estimate(sk: JlSketch, x) -> float:
    return sk.estimate(x)


# ---------------------------------------------------------------------------
# Matrix file format: first line "n", then n rows of n decimals.


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise QuadsketchError("empty matrix file")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise QuadsketchError("first line of a matrix file must be n") from None
    if len(lines) != n + 1:
        raise QuadsketchError(f"expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        row = [float(tok) for tok in ln.split()]
        if len(row) != n:
            raise QuadsketchError(f"expected {n} entries per row")
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def format_matrix(a: np.ndarray) -> str:
    out = [str(a.shape[0])]
    for row in a:
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        return parse_matrix(f.read())
