"""Harmonic and conformal maps of genus >= 2 clouds onto hyperbolic surfaces.

Points live on the upper sheet of the hyperboloid ``z^2 - x^2 - y^2 = 1``
and deck transformations are 3x3 Lorentz matrices. Cut membranes carry
generator words; an edge ``i -> j`` crossing membranes with words
``w1, w2, ...`` (in order along the edge) gets the transformation
``alpha_ij = w1^s1 w2^s2 ...`` so that ``f(i) ~ alpha_ij f(j)``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .cuts import CutMembrane, cell_corner_paths, edge_crossings, square_edges
from .errors import CutError, GeometryError, InputError, SolverError
from .lattice import Lattice, LatticeParams, build_lattice, trilinear_weights
from .pointcloud import CloudTransform, PointCloud, normalize_cloud
from .surfaces import GENUS2_DEFAULTS

log = logging.getLogger(__name__)

J = np.diag([-1.0, -1.0, 1.0])
APEX = np.array([0.0, 0.0, 1.0])


def lorentz(p, q) -> np.ndarray:
    """Pairing ``p_z q_z - p_x q_x - p_y q_y`` along the last axis."""
    p, q = np.asarray(p), np.asarray(q)
    return p[..., 2] * q[..., 2] - p[..., 0] * q[..., 0] - p[..., 1] * q[..., 1]


def hyperboloid_project(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm2 = lorentz(v, v)
    if np.any(norm2 <= 0) or np.any(v[..., 2] <= 0):
        raise GeometryError("hyperboloid projection needs future-pointing timelike vectors")
    return v / np.sqrt(norm2)[..., None]


def chord(p, q) -> np.ndarray:
    """Minkowski length ``sqrt(-<p - q, p - q>)`` of the chord between two hyperboloid points."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return np.sqrt(np.maximum(-lorentz(d, d), 0.0))


def hyp_distance(p, q) -> np.ndarray:
    """``arccosh <p, q>``, evaluated as ``2 asinh(chord / 2)`` to keep short distances accurate."""
    return 2.0 * np.arcsinh(0.5 * chord(p, q))


def cosh_center(points, weights=None) -> np.ndarray:
    """Minimizer of ``sum_k w_k (cosh d(., p_k) - 1)``: the projected Euclidean mean."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise InputError("cosh_center needs a nonempty (k, 3) array")
    mean = pts.mean(axis=0) if weights is None else np.average(pts, axis=0, weights=weights)
    return hyperboloid_project(mean)


def to_disk(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[..., :2] / (1.0 + p[..., 2:3])


def from_disk(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    if np.any(r2 >= 1):
        raise GeometryError("disk coordinates must lie in the open unit disk")
    return np.concatenate([2 * w, 1 + r2], axis=-1) / (1 - r2)


# -- isometries -------------------------------------------------------------

def rotation(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def boost(t) -> np.ndarray:
    """Translation along the x-axis by hyperbolic distance ``t``."""
    c, s = np.cosh(t), np.sinh(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def iso_inverse(a) -> np.ndarray:
    a = np.asarray(a)
    return J @ np.swapaxes(a, -1, -2) @ J


def isometry_error(a) -> float:
    """Largest violation among ``A^T J A = J``, ``det A = 1`` and ``A_33 >= 1``."""
    a = np.asarray(a, dtype=float)
    err = float(np.abs(a.T @ J @ a - J).max())
    err = max(err, abs(float(np.linalg.det(a)) - 1.0))
    if a[2, 2] < 1 - 1e-12:
        err = max(err, 1.0 - a[2, 2])
    return err


def check_isometry(a, tol=1e-9, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise InputError(f"{name} must be 3x3")
    scale = max(1.0, float(np.abs(a).max())) ** 2
    if isometry_error(a) > tol * scale:
        raise GeometryError(f"{name} is not an orientation- and future-preserving Lorentz isometry")
    return a


def commutator(a, b) -> np.ndarray:
    return a @ b @ iso_inverse(a) @ iso_inverse(b)


# -- groups -------------------------------------------------------------------

_WORD = re.compile(r"^([ab])(\d+)(\^(-?1))?$")


def generator_names(genus: int) -> list[str]:
    return [f"{c}{k}" for k in range(1, genus + 1) for c in "ab"]


@dataclass(frozen=True)
class FuchsianGroupSpec:
    """Surface group generators ``a1, b1, ..., ag, bg`` with ``prod [a_k, b_k] = I``."""

    genus: int
    generators: tuple
    relation_tolerance: float = 1e-9

    def __post_init__(self):
        if int(self.genus) != self.genus or self.genus < 2:
            raise InputError(f"genus must be an integer >= 2, got {self.genus}")
        gens = tuple(np.array(g, dtype=float) for g in self.generators)
        if len(gens) != 2 * self.genus:
            raise InputError(f"genus {self.genus} needs {2 * self.genus} generators, got {len(gens)}")
        for name, g in zip(generator_names(self.genus), gens):
            check_isometry(g, name=f"generator {name}")
            g.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        res = self.relation_residual
        if res > self.relation_tolerance:
            raise GeometryError(f"surface-group relation fails: residual {res:.3e} exceeds "
                                f"tolerance {self.relation_tolerance:.1e}")

    @property
    def relation(self) -> np.ndarray:
        out = np.eye(3)
        for k in range(self.genus):
            out = out @ commutator(self.generators[2 * k], self.generators[2 * k + 1])
        return out

    @property
    def relation_residual(self) -> float:
        """Relative mismatch of the two halves of the relation, ``|P - S^-1| / |P|``."""
        half = (self.genus + 1) // 2
        head, tail = np.eye(3), np.eye(3)
        for k in range(self.genus):
            c = commutator(self.generators[2 * k], self.generators[2 * k + 1])
            if k < half:
                head = head @ c
            else:
                tail = tail @ c
        scale = max(1.0, float(np.abs(head).max()))
        return float(np.abs(head - iso_inverse(tail)).max()) / scale

    def generator(self, name: str) -> np.ndarray:
        names = generator_names(self.genus)
        if name not in names:
            raise CutError(f"unknown generator {name!r}; group has {', '.join(names)}")
        return self.generators[names.index(name)]

    def word(self, tokens) -> np.ndarray:
        """Product of tokens like ``"a1"`` or ``"b2^-1"``, left to right.

        ``tokens`` is a sequence or a whitespace-separated string.
        """
        if isinstance(tokens, str):
            tokens = tokens.split()
        out = np.eye(3)
        for tok in tokens:
            m = _WORD.match(str(tok).strip())
            if not m:
                raise CutError(f"malformed generator token {tok!r}")
            g = self.generator(m.group(1) + m.group(2))
            out = out @ (iso_inverse(g) if m.group(4) == "-1" else g)
        return out

    def conjugated(self, a) -> "FuchsianGroupSpec":
        a = check_isometry(a, name="conjugating isometry")
        ai = iso_inverse(a)
        return FuchsianGroupSpec(self.genus, tuple(a @ g @ ai for g in self.generators),
                                 self.relation_tolerance)

    def to_dict(self):
        return {
            "genus": self.genus,
            "matrices": [g.tolist() for g in self.generators],
            "relation_tolerance": self.relation_tolerance,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            genus = int(d["genus"])
            mats = tuple(np.asarray(m, dtype=float).reshape(3, 3) for m in d["matrices"])
            tol = float(d.get("relation_tolerance", 1e-9))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed group spec: {exc}") from None
        return cls(genus, mats, tol)


def octagon_group(relation_tolerance=1e-9) -> FuchsianGroupSpec:
    """The genus-2 group of the regular hyperbolic octagon with interior angles pi/4.

    Side ``j`` is paired with side ``i`` by ``rot(theta_i) boost(2d) rot(pi - theta_j)``,
    where ``d`` is the inradius and ``theta_k = k pi / 4`` the side directions.
    """
    d = np.arccosh(1.0 / np.tan(np.pi / 8))
    theta = [k * np.pi / 4 for k in range(8)]

    def pair(j, i):
        return rotation(theta[i]) @ boost(2 * d) @ rotation(np.pi - theta[j])

    return FuchsianGroupSpec(2, (pair(2, 0), pair(1, 3), pair(6, 4), pair(5, 7)), relation_tolerance)


def twist_family(base: FuchsianGroupSpec):
    """Dehn-twist-like deformation along the separating curve of a genus-2 group.

    ``C(t)`` translates by hyperbolic distance ``t`` along the axis of
    ``S = [a1, b1]``. It commutes with ``S``, so conjugating ``a2, b2`` by
    ``C(t)`` keeps the relation.
    """
    if base.genus != 2:
        raise InputError("twist_family is defined for genus 2")
    a1, b1, a2, b2 = base.generators
    s = commutator(a1, b1)
    # trace of a Lorentz translation by l is 1 + 2 cosh l
    length = float(np.arccosh((np.trace(s) - 1.0) / 2.0))
    log_s = np.real(linalg.logm(s)) / length

    def family(params):
        t = float(np.atleast_1d(params)[0])
        c = np.real(linalg.expm(t * log_s))
        ci = iso_inverse(c)
        return FuchsianGroupSpec(2, (a1, b1, c @ a2 @ ci, c @ b2 @ ci), base.relation_tolerance)

    return family


def conjugation_family(base: FuchsianGroupSpec, direction=(1.0, 0.0)):
    """``A(t) Gamma A(t)^-1`` with ``A(t)`` a boost of length ``t`` along ``direction``."""
    ang = float(np.arctan2(direction[1], direction[0]))
    r, ri = rotation(ang), rotation(-ang)

    def family(params):
        t = float(np.atleast_1d(params)[0])
        return base.conjugated(r @ boost(t) @ ri)

    return family


# -- cut systems ----------------------------------------------------------------

@dataclass(frozen=True)
class HypCutSystem:
    membranes: tuple

    def __post_init__(self):
        ms = tuple(self.membranes)
        for m in ms:
            if not m.tag:
                raise CutError("every hyperbolic membrane needs a generator-word tag")
        object.__setattr__(self, "membranes", ms)

    def check_group(self, group: FuchsianGroupSpec):
        for m in self.membranes:
            group.word(m.tag)
        if len(self.membranes) < 2 * group.genus:
            raise CutError(f"genus {group.genus} needs at least {2 * group.genus} membranes")

    def transformed(self, transform: CloudTransform) -> "HypCutSystem":
        return HypCutSystem(tuple(m.transformed(transform) for m in self.membranes))

    def to_dict(self):
        return {"membranes": [m.to_dict() for m in self.membranes]}

    @classmethod
    def from_dict(cls, d):
        from .cuts import load_membranes
        return cls(tuple(load_membranes(d)))


def genus2_cuts(c=GENUS2_DEFAULTS["c"], R=GENUS2_DEFAULTS["R"]) -> HypCutSystem:
    """Cut system for the blended double torus centered at ``(+-c, 0, 0)`` with axis z.

    The outer meridians carry ``a1`` and ``b2``; the inner equators are split
    into upper and lower halves; the bridge arc over the middle carries
    ``[a1, b1]``. The words make every junction close.
    """
    up, down = ((0, 1, 0), 0.0), ((0, -1, 0), 0.0)

    def disk(cx, half, tag):
        return CutMembrane(normal=(0, 0, 1), center=(cx, 0, 0), outer_radius=R, bounds=(half,),
                           tag=tag, kind="annulus")

    return HypCutSystem((
        CutMembrane(normal=(0, 1, 0), bounds=(((-1, 0, 0), c),), tag=("a1",)),
        disk(-c, up, ("b1^-1",)),
        disk(-c, down, ("a1", "b1^-1", "a1^-1")),
        CutMembrane(normal=(0, 1, 0), bounds=(((0, 0, 1), 0.0), ((1, 0, 0), -c), ((-1, 0, 0), -c)),
                    tag=("a1", "b1", "a1^-1", "b1^-1")),
        disk(c, up, ("a2^-1",)),
        disk(c, down, ("b2", "a2^-1", "b2^-1")),
        CutMembrane(normal=(0, 1, 0), bounds=(((1, 0, 0), c),), tag=("b2",)),
    ))


@dataclass(frozen=True)
class EdgeTransforms:
    """Deck transformations of the stored edges that cross at least one membrane.

    ``index[k]`` is an edge ``a -> b`` with ``f(a) ~ matrices[k] @ f(b)``; every
    other edge carries the identity.
    """

    num_edges: int
    index: np.ndarray
    matrices: np.ndarray

    def full(self) -> np.ndarray:
        out = np.broadcast_to(np.eye(3), (self.num_edges, 3, 3)).copy()
        out[self.index] = self.matrices
        return out

    def conjugated(self, a) -> "EdgeTransforms":
        return EdgeTransforms(self.num_edges, self.index, a @ self.matrices @ iso_inverse(a))


def _edge_words(crossings, group, membranes):
    tags = [group.word(m.tag) for m in membranes]
    tags_inv = [iso_inverse(t) for t in tags]
    sign, t = crossings.sign, crossings.t
    hits = np.flatnonzero(np.any(sign != 0, axis=1))
    mats = np.empty((len(hits), 3, 3))
    for k, e in enumerate(hits):
        which = np.flatnonzero(sign[e])
        order = which[np.argsort(t[e, which], kind="stable")]
        m = np.eye(3)
        for w in order:
            m = m @ (tags[w] if sign[e, w] > 0 else tags_inv[w])
        mats[k] = m
    return hits, mats


def square_closure_residual(lattice: Lattice, transforms: EdgeTransforms) -> np.ndarray:
    """Per square, ``max |alpha_01 alpha_12 alpha_23 alpha_30 - I|`` relative to the matrix scale."""
    sq = lattice.squares()
    if len(sq) == 0:
        return np.zeros(0)
    nontrivial = np.zeros(transforms.num_edges, dtype=bool)
    nontrivial[transforms.index] = True
    de = square_edges(lattice, sq)
    touched = np.flatnonzero(np.any(nontrivial[de.index], axis=1))
    out = np.zeros(len(sq))
    if touched.size == 0:
        return out
    full = transforms.full()
    for s in touched:
        prod = np.eye(3)
        scale = 1.0
        for k in range(4):
            m = full[de.index[s, k]]
            m = m if de.sign[s, k] > 0 else iso_inverse(m)
            prod = prod @ m
            scale *= max(1.0, float(np.abs(m).max()))
        out[s] = float(np.abs(prod - np.eye(3)).max()) / scale
    return out


def edge_transformations(lattice: Lattice, cuts: HypCutSystem, group: FuchsianGroupSpec,
                         closure_tol=1e-9) -> EdgeTransforms:
    cuts.check_group(group)
    crossings = edge_crossings(lattice, cuts.membranes)
    hits, mats = _edge_words(crossings, group, cuts.membranes)
    tr = EdgeTransforms(lattice.num_edges, hits, mats)
    res = square_closure_residual(lattice, tr)
    bad = np.flatnonzero(res > closure_tol)
    if bad.size:
        corners = lattice.ijk[lattice.squares()[bad[0]]].tolist()
        raise CutError(f"membrane intersects lattice non-transversally: {bad.size} squares fail "
                       f"closure (worst {res.max():.2e}), first at grid nodes {corners}")
    return tr


# -- energies and residuals -----------------------------------------------------------

def _transformed_heads(lattice, transforms, f):
    """``alpha_ab f(b)`` for every stored edge ``a -> b``."""
    out = f[lattice.edges[:, 1]].copy()
    if len(transforms.index):
        out[transforms.index] = np.einsum("kij,kj->ki", transforms.matrices,
                                          f[lattice.edges[transforms.index, 1]])
    return out


def edge_lengths(lattice: Lattice, transforms: EdgeTransforms, f) -> np.ndarray:
    return hyp_distance(f[lattice.edges[:, 0]], _transformed_heads(lattice, transforms, f))


def cosh_energy(lattice: Lattice, transforms: EdgeTransforms, f) -> tuple[float, float]:
    """``(E0, E)``: ``sum (cosh l - 1)`` and the Dirichlet energy ``1/2 sum l^2``."""
    f = np.asarray(f, dtype=float)
    ch = chord(f[lattice.edges[:, 0]], _transformed_heads(lattice, transforms, f))
    w = lattice.weights
    # cosh l - 1 = chord^2 / 2
    length = 2.0 * np.arcsinh(0.5 * ch)
    return 0.5 * float(np.sum(w * ch * ch)), 0.5 * float(np.sum(w * length ** 2))


class _NeighborSums:
    """``Q_i = sum_j alpha_ij f(j)`` via the adjacency plus corrections on cut edges."""

    def __init__(self, lattice: Lattice, transforms: EdgeTransforms):
        self.adj = lattice.adjacency
        e = lattice.edges[transforms.index]
        m = transforms.matrices
        eye = np.eye(3)
        # a -> b uses alpha, b -> a uses alpha^-1
        self.rows = np.concatenate([e[:, 0], e[:, 1]])
        self.cols = np.concatenate([e[:, 1], e[:, 0]])
        self.delta = np.concatenate([m - eye, iso_inverse(m) - eye])

    def __call__(self, f, rows=None):
        q = self.adj @ f if rows is None else self.adj[rows] @ f
        if len(self.rows):
            corr = np.einsum("kij,kj->ki", self.delta, f[self.cols])
            if rows is None:
                np.add.at(q, self.rows, corr)
            else:
                pos = np.full(self.adj.shape[0], -1)
                pos[rows] = np.arange(len(rows))
                sel = pos[self.rows] >= 0
                np.add.at(q, pos[self.rows[sel]], corr[sel])
        return q


def stationarity_residual(lattice: Lattice, transforms: EdgeTransforms, f) -> np.ndarray:
    """Norm of ``sum_j sinh(l_ij) e_ij``, the tangential part of ``Q_i`` at ``f(i)``."""
    f = np.asarray(f, dtype=float)
    q = _NeighborSums(lattice, transforms)(f)
    tangent = q - lorentz(f, q)[:, None] * f
    return np.sqrt(np.maximum(-lorentz(tangent, tangent), 0.0))


def cosh_cm_step(lattice: Lattice, transforms: EdgeTransforms, f) -> np.ndarray:
    """Simultaneous update: every vertex moves to the cosh-center of its lifted neighbors."""
    q = _NeighborSums(lattice, transforms)(np.asarray(f, dtype=float))
    return hyperboloid_project(q)


def _geodesic_overshoot(x, c, omega):
    """Point on the geodesic from ``x`` through ``c``, at distance ``|1 - omega| d(x, c)`` past ``c``."""
    delta = x - c
    k = np.sqrt(np.maximum(-lorentz(delta, delta), 0.0))
    d = 2.0 * np.arcsinh(0.5 * k)
    s = (1.0 - omega) * d
    small = d < 1e-8
    ratio = np.where(small, 1.0 - omega, np.sinh(s) / np.where(small, 1.0, np.sinh(d)))
    # x - cosh(d) c = delta - (k^2 / 2) c
    out = np.cosh(s)[:, None] * c + ratio[:, None] * (delta - 0.5 * (k * k)[:, None] * c)
    return hyperboloid_project(out), d


@dataclass
class HypFlowStats:
    iterations: int = 0
    converged: bool = False
    max_displacement: float = float("nan")
    max_stationarity: float = float("nan")
    omega: float = 1.0
    energy_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "max_displacement": self.max_displacement,
            "max_stationarity": self.max_stationarity,
            "omega": self.omega,
            "initial_cosh_energy": self.energy_trace[0] if self.energy_trace else None,
            "final_cosh_energy": self.energy_trace[-1] if self.energy_trace else None,
        }


DEFAULT_OMEGA = 1.9


def harmonic_hyperbolic(lattice: Lattice, transforms: EdgeTransforms, *, tol=1e-7,
                        max_iters=5000, omega=DEFAULT_OMEGA, init=None):
    """Ordered cosh-center sweeps until no vertex moves farther than ``tol``.

    Vertices are split by grid parity; each half is moved to (or, with
    ``omega > 1``, past) the cosh-center of its lifted neighbors while the
    other half is held fixed. Each move lowers that vertex's share of
    ``E0``, so the trace is non-increasing; this is asserted up to rounding.
    """
    if not 0 < omega < 2:
        raise InputError(f"relaxation factor must lie in (0, 2), got {omega}")
    nv = lattice.num_vertices
    f = np.tile(APEX, (nv, 1)) if init is None else hyperboloid_project(np.array(init, float))
    if f.shape != (nv, 3):
        raise InputError("init must hold one hyperboloid point per vertex")
    sums = _NeighborSums(lattice, transforms)
    parity = lattice.ijk.sum(axis=1) % 2
    colors = [np.flatnonzero(parity == p) for p in (0, 1)]
    stats = HypFlowStats(omega=float(omega))
    e0 = cosh_energy(lattice, transforms, f)[0]
    stats.energy_trace.append(e0)
    while stats.iterations < max_iters:
        moved = 0.0
        for rows in colors:
            if len(rows) == 0:
                continue
            center = hyperboloid_project(sums(f, rows))
            new, _ = _geodesic_overshoot(f[rows], center, omega)
            moved = max(moved, float(hyp_distance(f[rows], new).max()))
            f[rows] = new
        stats.iterations += 1
        e_new = cosh_energy(lattice, transforms, f)[0]
        if e_new > e0 + 1e-10 * max(1.0, abs(e0)):
            raise SolverError(f"cosh energy increased from {e0!r} to {e_new!r} at sweep "
                              f"{stats.iterations}")
        e0 = e_new
        stats.energy_trace.append(e0)
        stats.max_displacement = moved
        if moved <= tol:
            stats.converged = True
            break
    stats.max_stationarity = float(stationarity_residual(lattice, transforms, f).max(initial=0.0))
    return f, stats


# -- extension and pipeline ---------------------------------------------------------------

def lifted_extension(lattice: Lattice, transforms: EdgeTransforms, f, points) -> np.ndarray:
    """Weighted cosh-center of each cell's corners, lifted to corner 0's sheet."""
    corners, w = trilinear_weights(lattice, points)
    paths = cell_corner_paths(lattice, corners)
    full = transforms.full()
    full_inv = iso_inverse(full)
    vals = f[corners].copy()
    for c in range(1, 8):
        mat = np.broadcast_to(np.eye(3), (len(corners), 3, 3)).copy()
        for ax in range(3):
            e = paths.index[:, c, ax]
            use = e >= 0
            if not use.any():
                continue
            step = np.where((paths.sign[:, c, ax] > 0)[:, None, None], full[e], full_inv[e])
            mat = np.where(use[:, None, None], mat @ step, mat)
        vals[:, c] = np.einsum("mij,mj->mi", mat, vals[:, c])
    return hyperboloid_project(np.einsum("mc,mci->mi", w, vals))


def euler_characteristic(genus: int) -> int:
    return 2 - 2 * genus


def normalized_energy(energy: float, genus: int) -> float:
    return energy / (-2.0 * np.pi * euler_characteristic(genus))


@dataclass
class HyperbolicResult:
    params: np.ndarray
    group: FuchsianGroupSpec
    field: np.ndarray
    points: np.ndarray
    lattice: Lattice
    transforms: EdgeTransforms
    stats: HypFlowStats
    cosh_energy: float
    energy: float
    evaluations: int
    transform: CloudTransform
    cuts: HypCutSystem

    @property
    def disk_points(self) -> np.ndarray:
        return to_disk(self.points)

    @property
    def normalized_energy(self) -> float:
        return normalized_energy(self.energy, self.group.genus)

    def report(self):
        p = self.lattice.params
        return {
            "parameters": np.atleast_1d(self.params).tolist(),
            "energy": self.energy,
            "cosh_energy": self.cosh_energy,
            "normalized_energy": self.normalized_energy,
            "normalized_energy_per_layer": self.normalized_energy / (2.0 * p.epsilon * p.n),
            "iterations": self.stats.iterations,
            "flow": self.stats.to_dict(),
            "evaluations": self.evaluations,
            "relation_residual": self.group.relation_residual,
            "group": self.group.to_dict(),
            "cuts": self.cuts.to_dict(),
            "lattice": self.lattice.stats(),
            "transform": self.transform.to_dict(),
        }


def _prepare(cloud, params, cuts):
    normed, transform = normalize_cloud(cloud)
    lattice = build_lattice(normed, params)
    return normed, transform, lattice, cuts.transformed(transform)


def harmonic_hyperbolic_pipeline(cloud: PointCloud, params: LatticeParams, cuts: HypCutSystem,
                                 group: FuchsianGroupSpec, *, tol=1e-7, max_iters=5000,
                                 omega=DEFAULT_OMEGA) -> HyperbolicResult:
    return conformal_hyperbolic(cloud, params, cuts, lambda _: group, np.zeros(0), tol=tol,
                                max_iters=max_iters, omega=omega)


def conformal_hyperbolic(cloud: PointCloud, params: LatticeParams, cuts: HypCutSystem, family,
                         x0, *, tol=1e-7, max_iters=5000, omega=DEFAULT_OMEGA,
                         search_options=None, lattice=None) -> HyperbolicResult:
    """Minimize the harmonic-map energy over ``family(x)`` by Nelder-Mead.

    ``family`` maps a parameter vector to a :class:`FuchsianGroupSpec`;
    parameters whose group fails validation are penalized. Each evaluation
    warm-starts from the previous converged map. An empty ``x0`` evaluates
    the single group ``family(x0)``.
    """
    normed, transform = normalize_cloud(cloud)
    if lattice is None:
        lattice = build_lattice(normed, params)
    local_cuts = cuts.transformed(transform)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    cache = {}
    warm = {"f": None}

    def evaluate(x):
        key = tuple(np.round(np.atleast_1d(x), 15).tolist())
        if key in cache:
            return cache[key]
        try:
            group = family(np.asarray(x))
            tr = edge_transformations(lattice, local_cuts, group)
        except (GeometryError, CutError) as exc:
            log.info("rejecting family parameter %s: %s", key, exc)
            cache[key] = (np.inf, None)
            return cache[key]
        f, st = harmonic_hyperbolic(lattice, tr, tol=tol, max_iters=max_iters, omega=omega,
                                    init=warm["f"])
        warm["f"] = f
        e0, e = cosh_energy(lattice, tr, f)
        cache[key] = (e, (group, tr, f, st, e0))
        return cache[key]

    if x0.size == 0:
        best_x = x0
    else:
        opts = {"xatol": 1e-4, "fatol": 1e-9, "maxfev": 200}
        opts.update(search_options or {})
        res = optimize.minimize(lambda x: evaluate(x)[0], x0, method="Nelder-Mead", options=opts)
        best_x = res.x
    energy, payload = evaluate(best_x)
    if payload is None:
        raise GeometryError("no valid group found in the family")
    group, tr, f, st, e0 = payload
    pts = lifted_extension(lattice, tr, f, normed.points)
    return HyperbolicResult(
        params=np.asarray(best_x), group=group, field=f, points=pts, lattice=lattice,
        transforms=tr, stats=st, cosh_energy=e0, energy=energy, evaluations=len(cache),
        transform=transform, cuts=cuts,
    )
