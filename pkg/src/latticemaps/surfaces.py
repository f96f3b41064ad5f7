"""Sampled analytic test surfaces.

Every generator is deterministic for a given seed and returns a
:class:`PointCloud` in the surface's own coordinates (not normalized).
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .pointcloud import PointCloud

KINDS = ("sphere", "ellipsoid", "slab", "lshape", "torus", "genus2")

GENUS2_DEFAULTS = {"c": 1.25, "R": 1.0, "r": 0.45, "blend": 0.1}


def _check_count(count):
    if int(count) != count or count < 100:
        raise InputError(f"count must be an integer >= 100, got {count}")
    return int(count)


def sample_sphere(count, radius=1.0, seed=0):
    count = _check_count(count)
    if not radius > 0:
        raise InputError("radius must be positive")
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(count, 3))
    return PointCloud(radius * v / np.linalg.norm(v, axis=1, keepdims=True))


def sample_ellipsoid(count, axes=(2.0, 1.0, 1.0), seed=0):
    count = _check_count(count)
    a = np.asarray(axes, dtype=float)
    if a.shape != (3,) or np.any(a <= 0):
        raise InputError("ellipsoid needs three positive semi-axes")
    rng = np.random.default_rng(seed)
    # area element of u -> a*u on the unit sphere is |(a1 a2 a3) * u / a|
    wmax = np.prod(a) / a.min()
    out = []
    have = 0
    while have < count:
        u = rng.normal(size=(2 * count, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        w = np.prod(a) * np.linalg.norm(u / a, axis=1)
        keep = rng.random(len(u)) * wmax < w
        out.append(u[keep] * a)
        have += int(keep.sum())
    return PointCloud(np.concatenate(out)[:count])


def _sample_polyline(rng, vertices, count):
    vertices = np.asarray(vertices, dtype=float)
    seg = np.diff(vertices, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    s = np.sort(rng.random(count)) * lengths.sum()
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    t = (s - cum[idx]) / lengths[idx]
    return vertices[idx] + t[:, None] * seg[idx]


def _sample_planar(rng, count, inside, bbox, arcs, area, perimeter):
    """Interior points by rejection plus labeled points along four boundary arcs."""
    density = np.sqrt(count / area)
    n_bound = [max(8, int(np.ceil(2 * density * np.linalg.norm(np.diff(np.asarray(a, float), axis=0),
                                                               axis=1).sum())))
               for a in arcs]
    n_int = count - sum(n_bound)
    if n_int < count // 2:
        raise InputError("count too small for the boundary sampling density")
    (x0, y0), (x1, y1) = bbox
    pts = []
    have = 0
    while have < n_int:
        cand = rng.random((2 * n_int, 2)) * [x1 - x0, y1 - y0] + [x0, y0]
        cand = cand[inside(cand)]
        pts.append(cand)
        have += len(cand)
    interior = np.concatenate(pts)[:n_int]
    xy = [interior]
    labels = [np.zeros(n_int, dtype=np.int64)]
    for k, (arc, nb) in enumerate(zip(arcs, n_bound), start=1):
        xy.append(_sample_polyline(rng, arc, nb))
        labels.append(np.full(nb, k, dtype=np.int64))
    xy = np.concatenate(xy)
    pts3 = np.column_stack([xy, np.zeros(len(xy))])
    return PointCloud(pts3, np.concatenate(labels))


def sample_slab(count, width=2.0, height=1.0, seed=0):
    """Flat rectangle ``[0, width] x [0, height]`` in the plane z = 0.

    Arc labels: 1 bottom, 2 right, 3 top, 4 left.
    """
    count = _check_count(count)
    if not (width > 0 and height > 0):
        raise InputError("slab sides must be positive")
    rng = np.random.default_rng(seed)
    w, h = float(width), float(height)
    arcs = [[(0, 0), (w, 0)], [(w, 0), (w, h)], [(w, h), (0, h)], [(0, h), (0, 0)]]
    return _sample_planar(rng, count, lambda p: np.ones(len(p), dtype=bool),
                          ((0, 0), (w, h)), arcs, w * h, 2 * (w + h))


def sample_lshape(count, seed=0):
    """L-shaped flat domain ``[0,2]x[0,1] U [0,1]x[1,2]`` with four corner-split arcs."""
    count = _check_count(count)
    rng = np.random.default_rng(seed)
    arcs = [
        [(0, 0), (2, 0)],
        [(2, 0), (2, 1), (1, 1)],
        [(1, 1), (1, 2), (0, 2)],
        [(0, 2), (0, 0)],
    ]

    def inside(p):
        return (p[:, 1] <= 1) | (p[:, 0] <= 1)

    return _sample_planar(rng, count, inside, ((0, 0), (2, 2)), arcs, 3.0, 8.0)


def sample_torus(count, R=2.0, r=1.0, seed=0):
    """Torus of revolution about the z-axis, area-uniform."""
    count = _check_count(count)
    if not (R > r > 0):
        raise InputError("torus needs R > r > 0")
    rng = np.random.default_rng(seed)
    us, vs = [], []
    have = 0
    while have < count:
        u = rng.random(2 * count) * 2 * np.pi
        v = rng.random(2 * count) * 2 * np.pi
        keep = rng.random(2 * count) * (R + r) < R + r * np.cos(v)
        us.append(u[keep])
        vs.append(v[keep])
        have += int(keep.sum())
    u = np.concatenate(us)[:count]
    v = np.concatenate(vs)[:count]
    rho = R + r * np.cos(v)
    return PointCloud(np.column_stack([rho * np.cos(u), rho * np.sin(u), r * np.sin(v)]))


def _torus_sdf(p, cx, R, r):
    rho = np.hypot(p[:, 0] - cx, p[:, 1])
    return np.hypot(rho - R, p[:, 2]) - r


def _smin(a, b, k):
    h = np.maximum(k - np.abs(a - b), 0.0) / k
    return np.minimum(a, b) - h * h * k / 4.0


def genus2_field(p, c=1.25, R=1.0, r=0.45, blend=0.1):
    """Implicit function of two blended tori centered at ``(+-c, 0, 0)``."""
    p = np.atleast_2d(p)
    return _smin(_torus_sdf(p, -c, R, r), _torus_sdf(p, c, R, r), blend)


def _project_to_level(p, func, iters=30):
    step = 1e-6
    for _ in range(iters):
        f = func(p)
        grad = np.empty_like(p)
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = step
            grad[:, ax] = (func(p + e) - func(p - e)) / (2 * step)
        p = p - (f / np.einsum("ij,ij->i", grad, grad))[:, None] * grad
    return p


def sample_genus2(count, c=1.25, R=1.0, r=0.45, blend=0.1, seed=0):
    """Two blended tori of revolution sharing the axis direction z.

    Samples each torus area-uniformly, drops samples buried in the other
    torus, and projects the rest onto the blended level set.
    """
    count = _check_count(count)
    if not (R > r > 0 and c > R and c - R < r):
        raise InputError("genus2 needs R > r > 0, c > R and c - R < r (tubes must merge)")

    def func(q):
        return genus2_field(q, c, R, r, blend)

    rng = np.random.default_rng(seed)
    chunks = []
    have = 0
    while have < count:
        sub = int(rng.integers(1 << 31))
        base = sample_torus(max(count, 100), R, r, seed=sub).points
        side = np.where(rng.random(len(base)) < 0.5, -1.0, 1.0)
        cand = base + np.column_stack([side * c, np.zeros(len(base)), np.zeros(len(base))])
        other = np.where(side < 0, _torus_sdf(cand, c, R, r), _torus_sdf(cand, -c, R, r))
        cand = cand[other > 0.5 * blend]
        cand = _project_to_level(cand, func)
        ok = np.abs(func(cand)) < 1e-10
        chunks.append(cand[ok])
        have += int(ok.sum())
    pts = np.concatenate(chunks)[:count]
    return PointCloud(pts)


def generate(kind, count, seed=0, **shape):
    if kind == "sphere":
        return sample_sphere(count, shape.get("radius", 1.0), seed)
    if kind == "ellipsoid":
        return sample_ellipsoid(count, shape.get("axes", (2.0, 1.0, 1.0)), seed)
    if kind == "slab":
        return sample_slab(count, shape.get("width", 2.0), shape.get("height", 1.0), seed)
    if kind == "lshape":
        return sample_lshape(count, seed)
    if kind == "torus":
        return sample_torus(count, shape.get("R", 2.0), shape.get("r", 1.0), seed)
    if kind == "genus2":
        params = {**GENUS2_DEFAULTS, **{k: v for k, v in shape.items() if k in GENUS2_DEFAULTS}}
        return sample_genus2(count, seed=seed, **params)
    raise InputError(f"unknown surface kind {kind!r}; choose from {', '.join(KINDS)}")
