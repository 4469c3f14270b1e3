"""Binary sketch envelope.

Layout: magic ``QSK1``, one version byte, one kind byte, then length-prefixed
sections. Integers are unsigned LEB128 varints, floats are little-endian
IEEE-754 doubles (weights are kept exact; byte length of the envelope is the
official size metric of a sketch).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import QuadsketchError
from .graph import DirectedGraph, WeightedGraph

MAGIC = b"QSK1"
VERSION = 1

KINDS = {
    "graph": 0,
    "s1": 1,
    "cut_poly": 2,
    "cut_general": 3,
    "s2": 4,
    "s3": 5,
    "spectral_basic": 6,
    "spectral_improved": 7,
    "jl": 8,
    "sdd": 9,
}
_KIND_NAMES = {v: k for k, v in KINDS.items()}


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def varint(self, x: int) -> None:
        x = int(x)
        if x < 0:
            raise ValueError("varint must be non-negative")
        while True:
            b = x & 0x7F
            x >>= 7
            if x:
                self.buf.append(b | 0x80)
            else:
                self.buf.append(b)
                return

    def f64(self, x: float) -> None:
        self.buf += struct.pack("<d", x)

    def int_array(self, a) -> None:
        a = np.asarray(a)
        self.varint(a.size)
        for x in a.tolist():
            self.varint(x)

    def f64_array(self, a) -> None:
        """Length, then either raw doubles or a small-dictionary encoding.

        Arrays with few distinct values (unit weights, reweighted classes)
        shrink to one byte per entry; the round-trip is bit-exact either way.
        """
        a = np.asarray(a, dtype=np.float64)
        self.varint(a.size)
        if a.size == 0:
            return
        distinct = np.unique(a)
        if distinct.size <= 255 and distinct.size < a.size:
            self.buf.append(1)
            self.buf.append(distinct.size)
            self.buf += distinct.astype("<f8").tobytes()
            idx = np.searchsorted(distinct, a).astype(np.uint8)
            self.buf += idx.tobytes()
        else:
            self.buf.append(0)
            self.buf += a.astype("<f8").tobytes()

    def section(self, payload: bytes) -> None:
        self.varint(len(payload))
        self.buf += payload

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varint(self) -> int:
        x = 0
        shift = 0
        while True:
            if self.pos >= len(self.data):
                raise QuadsketchError("truncated sketch data")
            b = self.data[self.pos]
            self.pos += 1
            x |= (b & 0x7F) << shift
            if not b & 0x80:
                return x
            shift += 7

    def f64(self) -> float:
        (x,) = struct.unpack_from("<d", self.data, self.pos)
        self.pos += 8
        return x

    def int_array(self, dtype=np.int64) -> np.ndarray:
        k = self.varint()
        return np.array([self.varint() for _ in range(k)], dtype=dtype)

    def f64_array(self) -> np.ndarray:
        k = self.varint()
        if k == 0:
            return np.empty(0, dtype=np.float64)
        tag = self.data[self.pos]
        self.pos += 1
        if tag == 1:
            d = self.data[self.pos]
            self.pos += 1
            table = np.frombuffer(self.data, dtype="<f8", count=d, offset=self.pos)
            self.pos += 8 * d
            idx = np.frombuffer(self.data, dtype=np.uint8, count=k, offset=self.pos)
            self.pos += k
            return table.astype(np.float64)[idx]
        a = np.frombuffer(self.data, dtype="<f8", count=k, offset=self.pos).astype(
            np.float64
        )
        self.pos += 8 * k
        return a

    def section(self) -> "Reader":
        k = self.varint()
        sub = Reader(self.data[self.pos : self.pos + k])
        self.pos += k
        return sub


def write_graph(w: Writer, g: WeightedGraph) -> None:
    w.varint(g.n)
    w.varint(g.m)
    w.int_array(g.edge_u)
    w.int_array(g.edge_v)
    w.f64_array(g.edge_w)


def read_graph(r: Reader) -> WeightedGraph:
    n = r.varint()
    m = r.varint()
    u = r.int_array()
    v = r.int_array()
    wts = r.f64_array()
    if u.size != m or v.size != m or wts.size != m:
        raise QuadsketchError("inconsistent graph payload")
    return WeightedGraph(n, _arrays=(u, v, wts))


def write_digraph(w: Writer, g: DirectedGraph) -> None:
    w.varint(g.n)
    w.varint(g.m)
    w.int_array(g.arc_u)
    w.int_array(g.arc_v)
    w.f64_array(g.arc_w)


def read_digraph(r: Reader) -> DirectedGraph:
    n = r.varint()
    r.varint()
    u = r.int_array()
    v = r.int_array()
    wts = r.f64_array()
    return DirectedGraph(n, _arrays=(u, v, wts))


def envelope(kind: str, payload: bytes) -> bytes:
    return MAGIC + bytes([VERSION, KINDS[kind]]) + payload


def open_envelope(data: bytes) -> tuple[str, Reader]:
    if data[:4] != MAGIC:
        raise QuadsketchError("not a quadsketch file (bad magic)")
    if data[4] != VERSION:
        raise QuadsketchError(f"unsupported format version {data[4]}")
    kind = _KIND_NAMES.get(data[5])
    if kind is None:
        raise QuadsketchError(f"unknown sketch kind byte {data[5]}")
    return kind, Reader(data[6:])


def graph_bytes(g: WeightedGraph) -> bytes:
    w = Writer()
    write_graph(w, g)
    return envelope("graph", w.getvalue())


def graph_from_bytes(data: bytes) -> WeightedGraph:
    kind, r = open_envelope(data)
    if kind != "graph":
        raise QuadsketchError(f"expected a graph payload, found {kind}")
    return read_graph(r)
