"""Oriented planar cut membranes and their crossings with lattice edges.

A membrane is a planar patch ``{x : normal . x = offset}`` restricted by an
optional radial window around ``center`` and any number of strict linear
bounds ``direction . x > bound_offset``. A directed segment crosses it with
sign +1 when it passes from the negative side (``normal . x < offset``) to
the non-negative side at a point inside the patch, and -1 the other way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutError
from .lattice import CORNER_OFFSETS, Lattice
from .pointcloud import CloudTransform


@dataclass(frozen=True)
class CutMembrane:
    normal: tuple
    offset: float = 0.0
    center: tuple | None = None
    inner_radius: float = 0.0
    outer_radius: float = float("inf")
    bounds: tuple = ()
    tag: tuple = ()
    kind: str = "half-plane"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise CutError("membrane normal must be nonzero")
        object.__setattr__(self, "normal", tuple((n / norm).tolist()))
        object.__setattr__(self, "offset", float(self.offset) / norm)
        if self.center is not None:
            object.__setattr__(self, "center", tuple(np.asarray(self.center, float).reshape(3).tolist()))
        bounds = []
        for d, o in self.bounds:
            d = np.asarray(d, dtype=float).reshape(3)
            bounds.append((tuple(d.tolist()), float(o)))
        object.__setattr__(self, "bounds", tuple(bounds))
        object.__setattr__(self, "tag", tuple(self.tag))
        if self.inner_radius < 0 or self.outer_radius <= self.inner_radius:
            raise CutError("membrane radii must satisfy 0 <= inner < outer")

    @classmethod
    def from_dict(cls, d):
        kind = d.get("type", "half-plane")
        if kind not in ("half-plane", "annulus"):
            raise CutError(f"unknown membrane type {kind!r}")
        try:
            bounds = [(b["direction"], b.get("offset", 0.0)) for b in d.get("bounds", [])]
            if kind == "half-plane" and "direction" in d:
                bounds.append((d["direction"], d.get("direction_offset", 0.0)))
            outer = d.get("outer_radius")
            return cls(
                normal=d["normal"],
                offset=d.get("offset", 0.0),
                center=d.get("center", [0.0, 0.0, 0.0] if kind == "annulus" else None),
                inner_radius=d.get("inner_radius", d.get("radius", 0.0)),
                outer_radius=float("inf") if outer is None else outer,
                bounds=tuple(bounds),
                tag=tuple(d.get("tag", ())),
                kind=kind,
            )
        except (KeyError, TypeError) as exc:
            raise CutError(f"malformed membrane spec {d!r}: {exc}") from None

    def to_dict(self):
        out = {"type": self.kind, "normal": list(self.normal), "offset": self.offset}
        if self.center is not None:
            out["center"] = list(self.center)
        if self.inner_radius:
            out["inner_radius"] = self.inner_radius
        if np.isfinite(self.outer_radius):
            out["outer_radius"] = self.outer_radius
        if self.bounds:
            out["bounds"] = [{"direction": list(d), "offset": o} for d, o in self.bounds]
        if self.tag:
            out["tag"] = list(self.tag)
        return out

    def transformed(self, transform: CloudTransform) -> "CutMembrane":
        """The same membrane expressed in normalized coordinates."""
        s, t = transform.scale, transform.translation
        n = np.asarray(self.normal)
        bounds = tuple((d, s * (o + float(np.dot(d, t)))) for d, o in self.bounds)
        return CutMembrane(
            normal=self.normal,
            offset=s * (self.offset + float(n @ t)),
            center=None if self.center is None else tuple(transform.forward(self.center).tolist()),
            inner_radius=self.inner_radius * s,
            outer_radius=self.outer_radius * s,
            bounds=bounds,
            tag=self.tag,
            kind=self.kind,
        )

    def side(self, x) -> np.ndarray:
        return np.asarray(x) @ np.asarray(self.normal) - self.offset >= 0

    def in_patch(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        ok = np.ones(len(x), dtype=bool)
        if self.center is not None and (self.inner_radius > 0 or np.isfinite(self.outer_radius)):
            rel = x - np.asarray(self.center)
            rel = rel - np.outer(rel @ np.asarray(self.normal), self.normal)
            rad = np.linalg.norm(rel, axis=1)
            ok &= (rad > self.inner_radius) & (rad < self.outer_radius)
        for d, o in self.bounds:
            ok &= x @ np.asarray(d) > o
        return ok

    def crossings(self, p, q) -> tuple[np.ndarray, np.ndarray]:
        """Signed crossing and segment parameter of each segment ``p[k] -> q[k]``."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        q = np.atleast_2d(np.asarray(q, dtype=float))
        n = np.asarray(self.normal)
        sp, sq = self.side(p), self.side(q)
        sign = np.zeros(len(p), dtype=np.int64)
        t = np.full(len(p), np.nan)
        idx = np.flatnonzero(sp != sq)
        if len(idx) == 0:
            return sign, t
        dp = p[idx] @ n - self.offset
        dq = q[idx] @ n - self.offset
        tt = dp / (dp - dq)
        hit = p[idx] + tt[:, None] * (q[idx] - p[idx])
        inside = self.in_patch(hit)
        sel = idx[inside]
        sign[sel] = np.where(sq[sel], 1, -1)
        t[sel] = tt[inside]
        return sign, t


def load_membranes(spec) -> list[CutMembrane]:
    """Membranes from a JSON-like object: a list, or a dict with a ``membranes`` key."""
    if isinstance(spec, dict):
        spec = spec.get("membranes", spec.get("cuts"))
    if not isinstance(spec, list):
        raise CutError("cuts spec must be a list of membranes")
    return [CutMembrane.from_dict(d) for d in spec]


@dataclass(frozen=True)
class EdgeCrossings:
    """Per-edge crossing signs ``(E, m)`` and parameters along the edge ``(E, m)``."""

    sign: np.ndarray
    t: np.ndarray


def edge_crossings(lattice: Lattice, membranes) -> EdgeCrossings:
    pos = lattice.coords
    p, q = pos[lattice.edges[:, 0]], pos[lattice.edges[:, 1]]
    signs, ts = [], []
    for m in membranes:
        s, t = m.crossings(p, q)
        signs.append(s)
        ts.append(t)
    return EdgeCrossings(np.stack(signs, axis=1), np.stack(ts, axis=1))


@dataclass(frozen=True)
class DirectedEdges:
    """Edge indices and orientations (+1 along the stored edge, -1 against)."""

    index: np.ndarray
    sign: np.ndarray


def square_edges(lattice: Lattice, squares=None) -> DirectedEdges:
    """The four directed edges ``v0->v1->v2->v3->v0`` of each lattice square."""
    sq = lattice.squares() if squares is None else squares
    idx = np.empty(sq.shape, dtype=np.int64)
    sgn = np.empty(sq.shape, dtype=np.int64)
    for k in range(4):
        u, v = sq[:, k], sq[:, (k + 1) % 4]
        idx[:, k], sgn[:, k] = find_edges(lattice, u, v)
    return DirectedEdges(idx, sgn)


def _edge_keys(lattice):
    nv = lattice.num_vertices
    return lattice.edges[:, 0] * nv + lattice.edges[:, 1]


def find_edges(lattice: Lattice, u, v):
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    nv = lattice.num_vertices
    keys = _edge_keys(lattice)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    want = lo * nv + hi
    pos = np.clip(np.searchsorted(keys, want), 0, len(keys) - 1)
    if len(keys) == 0 or np.any(keys[pos] != want):
        raise CutError("vertex pair is not a lattice edge")
    sign = np.where(lattice.edges[pos, 0] == u, 1, -1)
    return pos, sign


def cell_corner_paths(lattice: Lattice, corners) -> DirectedEdges:
    """Directed edge paths from corner 0 to every other corner of each cell.

    Returns arrays of shape ``(M, 8, 3)``; unused path slots have index -1.
    Corner offsets are walked x first, then y, then z.
    """
    corners = np.asarray(corners, dtype=np.int64)
    m = len(corners)
    idx = np.full((m, 8, 3), -1, dtype=np.int64)
    sgn = np.zeros((m, 8, 3), dtype=np.int64)
    code = {tuple(off): c for c, off in enumerate(CORNER_OFFSETS.tolist())}
    for c, off in enumerate(CORNER_OFFSETS.tolist()):
        cur = [0, 0, 0]
        for ax in range(3):
            if not off[ax]:
                continue
            nxt = list(cur)
            nxt[ax] = 1
            a = corners[:, code[tuple(cur)]]
            b = corners[:, code[tuple(nxt)]]
            e, s = find_edges(lattice, a, b)
            idx[:, c, ax] = e
            sgn[:, c, ax] = s
            cur = nxt
    return DirectedEdges(idx, sgn)
