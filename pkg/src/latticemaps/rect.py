"""Harmonic and conformal maps of disk-type clouds onto rectangles.

The target of parameter ``a`` is ``[0, 1/a] x [0, a]``. Arc ``V1`` maps to
the bottom side, ``V2`` right, ``V3`` top and ``V4`` left. The boundary data
is linear in ``1/a`` and ``a``, so two unit solves give ``f_a`` for every
``a`` at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InputError
from .lattice import (Lattice, LatticeParams, boundary_vertex_sets, build_lattice, dirichlet_energy,
                      euclidean_edge_lengths, trilinear_interpolate)
from .linsolve import solve_dirichlet
from .pointcloud import CloudTransform, PointCloud, normalize_cloud


def _pins(lo_set, hi_set):
    idx = np.concatenate([lo_set, hi_set])
    vals = np.concatenate([np.zeros(len(lo_set)), np.ones(len(hi_set))])
    return idx, vals


def solve_unit_harmonic(lattice: Lattice, sets, *, tol=1e-10, precond="jacobi"):
    """Unit solves ``u1`` (0 on V4, 1 on V2) and ``u2`` (0 on V1, 1 on V3)."""
    v1, v2, v3, v4 = (np.asarray(s, dtype=np.int64) for s in sets)
    u1, st1 = solve_dirichlet(lattice, *_pins(v4, v2), tol=tol, precond=precond)
    u2, st2 = solve_dirichlet(lattice, *_pins(v1, v3), tol=tol, precond=precond)
    return u1, u2, st1 + st2


@dataclass
class RectangleMap:
    field: np.ndarray
    a: float

    @property
    def width(self) -> float:
        return 1.0 / self.a

    @property
    def height(self) -> float:
        return self.a


def scale_unit_fields(u1, u2, a) -> RectangleMap:
    """``f_a = (u1 / a, a * u2)`` from the unit solves."""
    if not a > 0:
        raise InputError(f"rectangle parameter must be positive, got {a}")
    return RectangleMap(np.column_stack([np.asarray(u1) / a, a * np.asarray(u2)]), float(a))


def harmonic_rectangle(lattice: Lattice, sets, a, *, tol=1e-10) -> RectangleMap:
    u1, u2, _ = solve_unit_harmonic(lattice, sets, tol=tol)
    return scale_unit_fields(u1, u2, a)


def rectangle_energy(lattice: Lattice, field) -> float:
    return dirichlet_energy(lattice, euclidean_edge_lengths(lattice, field))


def unit_energies(lattice: Lattice, u1, u2) -> tuple[float, float]:
    return (dirichlet_energy(lattice, euclidean_edge_lengths(lattice, np.asarray(u1)[:, None])),
            dirichlet_energy(lattice, euclidean_edge_lengths(lattice, np.asarray(u2)[:, None])))


def parameter_from_energies(e1: float, e2: float) -> float:
    """Minimizer ``(E1/E2)^(1/4)`` of ``E1/a^2 + E2*a^2``."""
    if not (e1 > 0 and e2 > 0):
        raise GeometryError(f"degenerate boundary constraints: unit energies E1={e1}, E2={e2}")
    return float((e1 / e2) ** 0.25)


def optimal_rectangle_parameter(lattice: Lattice, sets, *, tol=1e-10):
    """``(a_bar, E1, E2)`` for the arcs ``sets``."""
    u1, u2, _ = solve_unit_harmonic(lattice, sets, tol=tol)
    e1, e2 = unit_energies(lattice, u1, u2)
    return parameter_from_energies(e1, e2), e1, e2


def rectangle_energy_at(e1: float, e2: float, a: float) -> float:
    return e1 / a ** 2 + e2 * a ** 2


@dataclass
class RectangleResult:
    a: float
    points: np.ndarray
    lattice_map: RectangleMap
    lattice: Lattice
    e1: float
    e2: float
    energy: float
    corner_vertices: int
    solver: list
    transform: CloudTransform

    @property
    def energy_per_layer(self) -> float:
        # the shell is about 2*eps*n lattice layers thick
        p = self.lattice.params
        return self.energy / (2.0 * p.epsilon * p.n)

    def report(self):
        return {
            "a": self.a,
            "E1": self.e1,
            "E2": self.e2,
            "energy": self.energy,
            "conformality_gap": self.energy - 1.0,
            "energy_per_layer": self.energy_per_layer,
            "corner_vertices": self.corner_vertices,
            "solver": [s.to_dict() for s in self.solver],
            "lattice": self.lattice.stats(),
            "transform": self.transform.to_dict(),
        }


def _corner_count(sets):
    v1, v2, v3, v4 = sets
    return int(sum(np.intersect1d(a, b).size for a, b in ((v1, v2), (v2, v3), (v3, v4), (v4, v1))))


def _prepare(cloud, params):
    normed, transform = normalize_cloud(cloud)
    lattice = build_lattice(normed, params)
    sets = boundary_vertex_sets(lattice, normed)
    return normed, transform, lattice, sets


def _finish(normed, transform, lattice, sets, u1, u2, stats, a):
    e1, e2 = unit_energies(lattice, u1, u2)
    if a is None:
        a = parameter_from_energies(e1, e2)
    rmap = scale_unit_fields(u1, u2, a)
    pts = trilinear_interpolate(lattice, rmap.field, normed.points)
    return RectangleResult(
        a=float(a), points=pts, lattice_map=rmap, lattice=lattice, e1=e1, e2=e2,
        energy=rectangle_energy_at(e1, e2, a), corner_vertices=_corner_count(sets),
        solver=stats, transform=transform,
    )


def harmonic_rectangle_pipeline(cloud: PointCloud, params: LatticeParams, a: float, *,
                                tol=1e-10) -> RectangleResult:
    """Harmonic map to the rectangle of a fixed parameter ``a``."""
    if not a > 0:
        raise InputError(f"rectangle parameter must be positive, got {a}")
    normed, transform, lattice, sets = _prepare(cloud, params)
    u1, u2, stats = solve_unit_harmonic(lattice, sets, tol=tol)
    return _finish(normed, transform, lattice, sets, u1, u2, stats, a)


def conformal_rectangle(cloud: PointCloud, params: LatticeParams, *, tol=1e-10) -> RectangleResult:
    """Energy-minimizing rectangle: ``a`` chosen by the closed form."""
    normed, transform, lattice, sets = _prepare(cloud, params)
    u1, u2, stats = solve_unit_harmonic(lattice, sets, tol=tol)
    return _finish(normed, transform, lattice, sets, u1, u2, stats, None)
