"""Cubic-lattice approximation of the epsilon-neighborhood of a point cloud.

Vertices are the nodes of the grid ``(Z/n)^3`` lying strictly within
distance ``epsilon`` of some cloud point; edges join axis neighbors. All
edge weights are 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import LatticeError
from .pointcloud import PointCloud

# corner c of a cell sits at offset CORNER_OFFSETS[c] = (c >> 2 & 1, c >> 1 & 1, c & 1)
CORNER_OFFSETS = np.array([[(c >> 2) & 1, (c >> 1) & 1, c & 1] for c in range(8)], dtype=np.int64)

_CANDIDATE_CHUNK = 4096


@dataclass(frozen=True)
class LatticeParams:
    n: int = 32
    epsilon: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise LatticeError(f"resolution n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 2.5 / self.n)
        eps = float(self.epsilon)
        if not eps > 0:
            raise LatticeError("epsilon must be positive")
        if eps < np.sqrt(3) / (2 * self.n):
            raise LatticeError(
                f"epsilon={eps:g} is below sqrt(3)/(2n)={np.sqrt(3) / (2 * self.n):g}; "
                "increase epsilon or n"
            )
        object.__setattr__(self, "epsilon", eps)

    @property
    def h(self) -> float:
        return 1.0 / self.n


class _KeyCodec:
    """Packs integer triples inside a padded bounding box into sortable int64 keys."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.int64) - 2
        self.size = np.asarray(hi, dtype=np.int64) - self.lo + 3
        self.strides = np.array([self.size[1] * self.size[2], self.size[2], 1], dtype=np.int64)

    def encode(self, ijk):
        rel = np.asarray(ijk, dtype=np.int64) - self.lo
        inside = np.all((rel >= 0) & (rel < self.size), axis=-1)
        keys = np.where(inside, rel @ self.strides, -1)
        return keys


@dataclass(frozen=True, eq=False)
class Lattice:
    params: LatticeParams
    ijk: np.ndarray
    edges: np.ndarray
    edge_axis: np.ndarray
    cloud_distance: tuple[float, float]
    _codec: _KeyCodec = field(repr=False)
    _keys: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def h(self) -> float:
        return self.params.h

    @property
    def num_vertices(self) -> int:
        return len(self.ijk)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def coords(self) -> np.ndarray:
        return self.ijk / self.n

    @property
    def weights(self) -> np.ndarray:
        return np.ones(len(self.edges))

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_vertices)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        nv = self.num_vertices
        a, b = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(a))
        return sparse.csr_matrix(
            (data, (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(nv, nv)
        )

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        """Sparse ``L`` with ``(L f)(i) = sum_{j ~ i} (f(j) - f(i))``."""
        adj = self.adjacency
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (adj - sparse.diags(deg)).tocsr()

    def lookup(self, ijk) -> np.ndarray:
        """Dense indices of integer grid triples, -1 where the node is not a vertex."""
        keys = self._codec.encode(ijk)
        pos = np.searchsorted(self._keys, keys)
        pos = np.clip(pos, 0, len(self._keys) - 1)
        hit = (keys >= 0) & (self._keys[pos] == keys)
        return np.where(hit, pos, -1)

    def cell_of(self, points) -> np.ndarray:
        return np.floor(np.asarray(points, dtype=float) * self.n).astype(np.int64)

    def cell_corners(self, cells) -> np.ndarray:
        """``(M, 8)`` corner vertex indices of integer cells, -1 for missing corners."""
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
        corners = cells[:, None, :] + CORNER_OFFSETS[None, :, :]
        return self.lookup(corners.reshape(-1, 3)).reshape(-1, 8)

    def full_cells(self, points) -> np.ndarray:
        """Corner indices of the cells enclosing ``points``; raises if any is incomplete."""
        corners = self.cell_corners(self.cell_of(points))
        bad = np.flatnonzero(np.any(corners < 0, axis=1))
        if len(bad):
            p = np.asarray(points, dtype=float).reshape(-1, 3)[bad[0]]
            raise LatticeError(
                f"point outside lattice hull: {len(bad)} point(s) have incomplete cells "
                f"(first at {p.tolist()}); increase epsilon"
            )
        return corners

    def squares(self) -> np.ndarray:
        """All unit lattice squares as ``(S, 4)`` vertex cycles."""
        out = []
        for ax1, ax2 in ((0, 1), (0, 2), (1, 2)):
            e1 = np.zeros(3, dtype=np.int64)
            e2 = np.zeros(3, dtype=np.int64)
            e1[ax1] = 1
            e2[ax2] = 1
            c0 = self.ijk
            v1 = self.lookup(c0 + e1)
            v2 = self.lookup(c0 + e1 + e2)
            v3 = self.lookup(c0 + e2)
            ok = (v1 >= 0) & (v2 >= 0) & (v3 >= 0)
            v0 = np.arange(self.num_vertices)
            out.append(np.stack([v0[ok], v1[ok], v2[ok], v3[ok]], axis=1))
        return np.concatenate(out, axis=0)

    def stats(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.params.epsilon,
            "vertices": self.num_vertices,
            "edges": self.num_edges,
            "min_cloud_distance": self.cloud_distance[0],
            "max_cloud_distance": self.cloud_distance[1],
        }

    def dump(self, path) -> None:
        """Write ``v i j k`` lines followed by ``e a b`` lines."""
        with open(path, "w") as fh:
            for i, j, k in self.ijk:
                fh.write(f"v {i} {j} {k}\n")
            for a, b in self.edges:
                fh.write(f"e {a} {b}\n")


def _candidate_nodes(points, n, eps):
    cells = np.unique(np.floor(points * n).astype(np.int64), axis=0)
    reach = int(np.ceil(eps * n))
    rng = np.arange(-reach, reach + 2)
    offsets = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    chunks = []
    for start in range(0, len(cells), _CANDIDATE_CHUNK):
        block = cells[start:start + _CANDIDATE_CHUNK]
        cand = (block[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
        chunks.append(np.unique(cand, axis=0))
    return np.unique(np.concatenate(chunks, axis=0), axis=0)


def build_lattice(cloud: PointCloud, params: LatticeParams) -> Lattice:
    pts = cloud.points
    if len(pts) == 0:
        raise LatticeError("cannot build a lattice from an empty cloud")
    n, eps = params.n, params.epsilon
    cand = _candidate_nodes(pts, n, eps)
    tree = cKDTree(pts)
    dist, _ = tree.query(cand / n, k=1, distance_upper_bound=eps)
    keep = dist < eps
    ijk = cand[keep]
    if len(ijk) == 0:
        raise LatticeError("empty lattice: no grid node lies within epsilon of the cloud")
    dist = dist[keep]

    codec = _KeyCodec(ijk.min(axis=0), ijk.max(axis=0))
    keys = codec.encode(ijk)
    order = np.argsort(keys, kind="stable")
    ijk, keys, dist = ijk[order], keys[order], dist[order]

    edges, axes = [], []
    for ax in range(3):
        step = np.zeros(3, dtype=np.int64)
        step[ax] = 1
        nb_keys = codec.encode(ijk + step)
        pos = np.clip(np.searchsorted(keys, nb_keys), 0, len(keys) - 1)
        hit = keys[pos] == nb_keys
        src = np.flatnonzero(hit)
        edges.append(np.stack([src, pos[hit]], axis=1))
        axes.append(np.full(len(src), ax, dtype=np.int8))
    edges = np.concatenate(edges, axis=0).astype(np.int64)
    axes = np.concatenate(axes)
    eorder = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, axes = edges[eorder], axes[eorder]

    lat = Lattice(params, ijk, edges, axes, (float(dist.min()), float(dist.max())), codec, keys)
    if lat.num_vertices > 1:
        ncomp, _ = connected_components(lat.adjacency, directed=False)
        if ncomp != 1:
            raise LatticeError(
                f"lattice graph is disconnected ({ncomp} components); increase epsilon"
            )
    return lat


def boundary_vertex_sets(lattice: Lattice, cloud: PointCloud) -> list[np.ndarray]:
    """Vertex sets V1..V4: union of enclosing-cell corners of points labeled 1..4."""
    if cloud.labels is None or not cloud.has_arcs:
        raise LatticeError("cloud carries no boundary-arc labels")
    sets = []
    for k in (1, 2, 3, 4):
        pts = cloud.points[cloud.labels == k]
        corners = lattice.full_cells(pts)
        sets.append(np.unique(corners.ravel()))
    for a, b in ((0, 2), (1, 3)):
        if np.intersect1d(sets[a], sets[b]).size:
            raise LatticeError(
                f"opposite arcs touch: V{a + 1} and V{b + 1} share vertices; increase n"
            )
    return sets


def trilinear_weights(lattice: Lattice, points) -> tuple[np.ndarray, np.ndarray]:
    """Corner indices ``(M, 8)`` and blending weights ``(M, 8)`` for each point."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    corners = lattice.full_cells(points)
    local = points * lattice.n - lattice.cell_of(points)
    w = np.ones((len(points), 8))
    for c in range(8):
        for ax in range(3):
            t = local[:, ax]
            w[:, c] *= t if CORNER_OFFSETS[c, ax] else 1.0 - t
    return corners, w


def trilinear_interpolate(lattice: Lattice, field, points) -> np.ndarray:
    """Blend vertex values over the enclosing cell of each point.

    ``field`` has shape ``(V,)`` or ``(V, k)``; a single 3-vector point
    returns a single value.
    """
    field = np.asarray(field, dtype=float)
    single = np.ndim(points) == 1
    corners, w = trilinear_weights(lattice, points)
    vals = field[corners]
    if field.ndim == 1:
        out = np.einsum("mc,mc->m", w, vals)
    else:
        out = np.einsum("mc,mck->mk", w, vals)
    return out[0] if single else out


def edge_differences(lattice: Lattice, field) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    return field[lattice.edges[:, 1]] - field[lattice.edges[:, 0]]


def euclidean_edge_lengths(lattice: Lattice, field) -> np.ndarray:
    d = edge_differences(lattice, field)
    return np.abs(d) if d.ndim == 1 else np.linalg.norm(d, axis=1)


def dirichlet_energy(lattice: Lattice, edge_length) -> float:
    """Half the weighted sum of squared edge lengths.

    ``edge_length`` is an array of per-edge lengths or a callable taking the
    ``(E, 2)`` edge array and returning them.
    """
    lengths = edge_length(lattice.edges) if callable(edge_length) else edge_length
    lengths = np.asarray(lengths, dtype=float)
    if lengths.shape != (lattice.num_edges,):
        raise ValueError("need one length per edge")
    return 0.5 * float(np.sum(lattice.weights * lengths ** 2))
