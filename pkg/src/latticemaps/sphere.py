"""Harmonic maps of genus-0 clouds to the unit sphere by projected heat flow.

Each step moves every vertex along the tangential part of its Laplacian,
projects back to the sphere, then recenters the whole image at the
origin (the mass-center correction) and projects again.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .lattice import Lattice, LatticeParams, build_lattice, trilinear_interpolate
from .linsolve import apply_laplacian
from .pointcloud import CloudTransform, PointCloud, normalize_cloud

log = logging.getLogger(__name__)


@dataclass
class FlowStats:
    iterations: int = 0
    initial_residual: float = float("nan")
    final_residual: float = float("nan")
    converged: bool = False
    halvings: int = 0
    stalled: bool = False
    energy_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "initial_residual": self.initial_residual,
            "final_residual": self.final_residual,
            "step_halvings": self.halvings,
            "stalled": self.stalled,
            "energy_trace_length": len(self.energy_trace),
            "final_energy": self.energy_trace[-1] if self.energy_trace else None,
        }


def radial_project(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise GeometryError("cannot radially project the zero vector")
    return v / norm


def center_correction(field, tol=1e-13, max_rounds=50) -> np.ndarray:
    """Translate by ``c`` and renormalize so the mass center of the result is the origin.

    ``c`` solves ``mean(pi(f - c)) = 0`` by Newton's method; the Jacobian of
    the mean is ``-mean((I - h h^T) / |f - c|)`` with ``h = pi(f - c)``.
    """
    field = np.asarray(field, dtype=float)
    shift = field.mean(axis=0)
    eye = np.eye(3)
    for _ in range(max_rounds):
        rel = field - shift
        r = np.linalg.norm(rel, axis=1)
        if np.any(r == 0):
            raise GeometryError("cannot radially project the zero vector")
        h = rel / r[:, None]
        c = h.mean(axis=0)
        if np.linalg.norm(c) <= tol:
            return h
        jac = (eye * np.mean(1 / r) - np.einsum("i,ij,ik->jk", 1 / r, h, h) / len(h))
        shift = shift + np.linalg.solve(jac, c)
    raise GeometryError(f"mass-center correction did not settle (|c| = {np.linalg.norm(c):.3e})")


def tangential_residual(lattice: Lattice, field) -> np.ndarray:
    return _tangential(apply_laplacian(lattice, field), field)


def sphere_energy(lattice: Lattice, field) -> float:
    """Chordal energy: half the sum of squared Euclidean edge lengths."""
    d = field[lattice.edges[:, 1]] - field[lattice.edges[:, 0]]
    return 0.5 * float(np.einsum("ij,ij->", d, d))


def _tangential(lf, field):
    return lf - np.einsum("ij,ij->i", lf, field)[:, None] * field


def sphere_flow_step(lattice: Lattice, field, dt: float, residual=None) -> np.ndarray:
    """One explicit step of the projected heat flow followed by recentering.

    The displacement is ``+dt * L_tan f``: ``L`` is negative semidefinite, so
    this is the energy-decreasing direction. ``residual`` may pass a
    precomputed ``L_tan f``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    field = np.asarray(field, dtype=float)
    if residual is None:
        residual = tangential_residual(lattice, field)
    moved = radial_project(field + dt * residual)
    return center_correction(moved)


def default_dt(lattice: Lattice) -> float:
    # just inside the explicit-step stability limit of the checkerboard mode
    return 0.95 / max(int(lattice.degree.max(initial=1)), 1)


def _max_norm(v):
    return float(np.sqrt(np.einsum("ij,ij->i", v, v).max(initial=0.0)))


def run_sphere_flow(lattice: Lattice, init, dt=None, tol=1e-7, max_iters=200_000,
                    max_halvings=40, rtol=0.0):
    """Iterate until ``max |L_tan f| <= tol * mean_degree`` or ``max_iters``.

    With ``rtol > 0`` the flow also stops once the residual has dropped to
    ``rtol`` times its initial value.

    If a step raises the energy, its step size is halved (up to
    ``max_halvings`` times) so accepted iterates never increase the energy.
    """
    f = radial_project(init)
    dt0 = default_dt(lattice) if dt is None else float(dt)
    deg = lattice.degree
    mean_deg = float(deg.mean()) if len(deg) else 0.0
    stats = FlowStats()
    tan = tangential_residual(lattice, f)
    res = _max_norm(tan)
    stats.initial_residual = res
    energy = sphere_energy(lattice, f)
    stats.energy_trace.append(energy)
    target = max(tol * mean_deg, rtol * res)
    while res > target and stats.iterations < max_iters:
        step = dt0
        for _ in range(max_halvings + 1):
            cand = sphere_flow_step(lattice, f, step, residual=tan)
            e_new = sphere_energy(lattice, cand)
            if e_new <= energy:
                break
            step *= 0.5
            stats.halvings += 1
        else:
            log.warning("sphere flow stalled at residual %.3e", res)
            stats.stalled = True
            break
        f, energy = cand, e_new
        stats.iterations += 1
        stats.energy_trace.append(energy)
        tan = tangential_residual(lattice, f)
        res = _max_norm(tan)
    stats.final_residual = res
    stats.converged = res <= target
    return f, stats


@dataclass
class SphereResult:
    points: np.ndarray
    field: np.ndarray
    lattice: Lattice
    stats: FlowStats
    transform: CloudTransform

    def report(self):
        return {
            "flow": self.stats.to_dict(),
            "energy": self.stats.energy_trace[-1],
            "lattice": self.lattice.stats(),
            "transform": self.transform.to_dict(),
        }


def sphere_map_pipeline(cloud: PointCloud, params: LatticeParams, dt=None, tol=1e-7,
                        max_iters=200_000, rtol=0.0) -> SphereResult:
    normed, transform = normalize_cloud(cloud)
    lattice = build_lattice(normed, params)
    pos = lattice.coords
    if np.any(np.linalg.norm(pos, axis=1) < 1e-6):
        raise GeometryError(
            "a lattice vertex lies at the origin; the cloud must enclose the origin "
            "with clearance (translate it or shrink epsilon)"
        )
    field_, stats = run_sphere_flow(lattice, radial_project(pos), dt=dt, tol=tol,
                                    max_iters=max_iters, rtol=rtol)
    mapped = radial_project(trilinear_interpolate(lattice, field_, normed.points))
    return SphereResult(mapped, field_, lattice, stats, transform)
