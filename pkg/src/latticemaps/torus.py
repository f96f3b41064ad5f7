"""Harmonic and conformal maps of genus-1 clouds onto flat tori ``C / (Z + tau Z)``.

Two oriented cut membranes define a shift cocycle on directed edges: an edge
crossing membrane 1 lifts by ``+-1`` and one crossing membrane 2 by
``+-tau``. The harmonic map is ``f1 + tau * f2`` where each ``f_k`` solves a
singular Poisson problem, so the energy is an explicit quadratic in ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cuts import CutMembrane, cell_corner_paths, edge_crossings, square_edges
from .errors import CutError, GeometryError
from .lattice import Lattice, LatticeParams, build_lattice, trilinear_weights
from .linsolve import apply_laplacian, solve_singular
from .pointcloud import CloudTransform, PointCloud, normalize_cloud

SIGN_CONVENTION = ("an edge lifts by +1 (membrane 1) or +tau (membrane 2) when it passes from "
                   "the negative to the non-negative side of the membrane normal")


def revolution_cuts(R: float) -> list[CutMembrane]:
    """Membranes for a torus of revolution about the z-axis with major radius ``R``.

    Membrane 1 is the half-plane ``y = 0, x > 0`` (cuts every meridian loop
    winding around the axis). Membrane 2 is the outer annulus of the plane
    ``z = 0`` beyond radius ``R`` (cuts every loop around the tube).
    """
    return [
        CutMembrane(normal=(0, 1, 0), offset=0.0, bounds=(((1, 0, 0), 0.0),)),
        CutMembrane(normal=(0, 0, 1), offset=0.0, center=(0, 0, 0), inner_radius=R, kind="annulus"),
    ]


@dataclass(frozen=True)
class ShiftCocycle:
    """Integer shifts ``(E, 2)`` for each stored edge ``edges[e, 0] -> edges[e, 1]``."""

    shifts: np.ndarray

    def directed(self, edge_index, sign):
        return self.shifts[edge_index] * np.asarray(sign)[..., None]

    def vertex_rhs(self, lattice: Lattice) -> np.ndarray:
        """``b_k(i) = -sum_j s_k(i -> j)`` as an ``(V, 2)`` integer array."""
        b = np.zeros((lattice.num_vertices, 2), dtype=np.int64)
        np.add.at(b, lattice.edges[:, 0], -self.shifts)
        np.add.at(b, lattice.edges[:, 1], self.shifts)
        return b


def check_closure(lattice: Lattice, shifts: np.ndarray) -> None:
    sq = lattice.squares()
    if len(sq) == 0:
        return
    de = square_edges(lattice, sq)
    total = np.einsum("sk,skc->sc", de.sign, shifts[de.index])
    bad = np.flatnonzero(np.any(total != 0, axis=1))
    if bad.size:
        corners = lattice.ijk[sq[bad[0]]].tolist()
        raise CutError(f"membrane intersects lattice non-transversally: {bad.size} squares fail "
                       f"closure, first at grid nodes {corners}")


def build_shift_cocycle(lattice: Lattice, cuts) -> ShiftCocycle:
    cuts = list(cuts)
    if len(cuts) != 2:
        raise CutError(f"a torus needs exactly two cut membranes, got {len(cuts)}")
    shifts = edge_crossings(lattice, cuts).sign
    check_closure(lattice, shifts)
    return ShiftCocycle(shifts)


def lifted_differences(lattice: Lattice, cocycle: ShiftCocycle, f1, f2):
    a, b = lattice.edges[:, 0], lattice.edges[:, 1]
    d1 = np.asarray(f1)[b] + cocycle.shifts[:, 0] - np.asarray(f1)[a]
    d2 = np.asarray(f2)[b] + cocycle.shifts[:, 1] - np.asarray(f2)[a]
    return d1, d2


@dataclass
class TorusHarmonic:
    f1: np.ndarray
    f2: np.ndarray
    tau: complex
    solver: list

    @property
    def field(self) -> np.ndarray:
        return self.f1 + self.tau * self.f2

    def at(self, tau) -> "TorusHarmonic":
        return TorusHarmonic(self.f1, self.f2, complex(tau), self.solver)


def _check_tau(tau):
    tau = complex(tau)
    if not tau.imag > 0:
        raise GeometryError(f"torus modulus needs Im(tau) > 0, got {tau}")
    return tau


def harmonic_torus(lattice: Lattice, cocycle: ShiftCocycle, tau, *, tol=1e-10) -> TorusHarmonic:
    tau = _check_tau(tau)
    b = cocycle.vertex_rhs(lattice)
    # each edge contributes +s and -s, so the integer sums vanish exactly
    assert not b.sum(axis=0).any()
    fields, stats = solve_singular(lattice, b.astype(float), tol=tol)
    return TorusHarmonic(fields[:, 0], fields[:, 1], tau, stats)


def balanced_residual(lattice: Lattice, cocycle: ShiftCocycle, f1, f2) -> np.ndarray:
    """Per-vertex ``sum_j Delta f_k(i -> j)`` for both components, ``(V, 2)``."""
    b = cocycle.vertex_rhs(lattice)
    lf = apply_laplacian(lattice, np.column_stack([f1, f2]))
    return lf - b


@dataclass(frozen=True)
class QuadraticCoefficients:
    P: float
    Q: float
    R_re: float
    R_im: float

    def energy(self, tau) -> float:
        x, y = complex(tau).real, complex(tau).imag
        return self.P + 2 * (x * self.R_re + y * self.R_im) + (x * x + y * y) * self.Q

    def to_dict(self):
        return {"P": self.P, "Q": self.Q, "R_re": self.R_re, "R_im": self.R_im}


def energy_coefficients(lattice: Lattice, cocycle: ShiftCocycle, f1, f2) -> QuadraticCoefficients:
    d1, d2 = lifted_differences(lattice, cocycle, f1, f2)
    w = lattice.weights
    # real fields: Delta f1 * conj(i Delta f2) has no real part, so R_im vanishes
    return QuadraticCoefficients(
        P=0.5 * float(np.sum(w * d1 * d1)),
        Q=0.5 * float(np.sum(w * d2 * d2)),
        R_re=0.5 * float(np.sum(w * d1 * d2)),
        R_im=0.0,
    )


def lifted_energy(lattice: Lattice, cocycle: ShiftCocycle, f1, f2, tau):
    """``(energy, coefficients)`` with energy ``1/2 sum |Delta f1 + tau Delta f2|^2``."""
    d1, d2 = lifted_differences(lattice, cocycle, f1, f2)
    z = d1 + complex(tau) * d2
    e = 0.5 * float(np.sum(lattice.weights * (z.real ** 2 + z.imag ** 2)))
    return e, energy_coefficients(lattice, cocycle, f1, f2)


def optimal_tau(P, Q, R_re, R_im=0.0) -> complex:
    """Minimizer of ``(P + 2(x R_re + y R_im) + (x^2 + y^2) Q) / y`` over ``y > 0``."""
    if not Q > 0:
        raise GeometryError(f"degenerate torus data: Q = {Q} must be positive")
    x = -R_re / Q
    disc = (P + 2 * x * R_re + x * x * Q) / Q
    if not disc > 0:
        raise GeometryError(f"degenerate torus data: non-positive discriminant {disc}")
    return complex(x, np.sqrt(disc))


def normalized_energy(coeffs: QuadraticCoefficients, tau) -> float:
    return coeffs.energy(tau) / complex(tau).imag


def reduce_modulus(tau, max_steps=1000) -> tuple[complex, np.ndarray]:
    """SL(2,Z) reduction to ``|Re tau| <= 1/2, |tau| >= 1``.

    Returns the reduced modulus and the integer matrix ``[[a, b], [c, d]]``
    with ``reduced = (a tau + b) / (c tau + d)``.
    """
    tau = _check_tau(tau)
    m = np.eye(2, dtype=np.int64)
    for _ in range(max_steps):
        k = int(np.round(tau.real))
        if k:
            tau -= k
            m = np.array([[1, -k], [0, 1]]) @ m
        if abs(tau) < 1 - 1e-12:
            tau = -1 / tau
            m = np.array([[0, -1], [1, 0]]) @ m
        else:
            break
    return tau, m


@dataclass
class TorusResult:
    tau: complex
    points: np.ndarray
    harmonic: TorusHarmonic
    coefficients: QuadraticCoefficients
    lattice: Lattice
    cuts: list
    transform: CloudTransform
    max_residual: float

    @property
    def energy(self) -> float:
        return self.coefficients.energy(self.tau)

    @property
    def normalized_energy(self) -> float:
        return normalized_energy(self.coefficients, self.tau)

    @property
    def tau_reduced(self) -> complex:
        return reduce_modulus(self.tau)[0]

    def report(self):
        red, mat = reduce_modulus(self.tau)
        p = self.lattice.params
        return {
            "tau": [self.tau.real, self.tau.imag],
            "tau_reduced": [red.real, red.imag],
            "reduction_matrix": mat.tolist(),
            "energy": self.energy,
            "normalized_energy": self.normalized_energy,
            "normalized_energy_per_layer": self.normalized_energy / (2.0 * p.epsilon * p.n),
            "coefficients": self.coefficients.to_dict(),
            "residuals": {
                "balanced_max": self.max_residual,
                "solver": [s.to_dict() for s in self.harmonic.solver],
            },
            "sign_convention": SIGN_CONVENTION,
            "cuts": [c.to_dict() for c in self.cuts],
            "lattice": self.lattice.stats(),
            "transform": self.transform.to_dict(),
        }


def lifted_extension(lattice: Lattice, cocycle: ShiftCocycle, f1, f2, points) -> np.ndarray:
    """Trilinear extension of the lifts ``(f1, f2)``; corners are lifted to corner 0's sheet."""
    corners, w = trilinear_weights(lattice, points)
    paths = cell_corner_paths(lattice, corners)
    valid = paths.index >= 0
    idx = np.where(valid, paths.index, 0)
    shift = cocycle.shifts[idx] * (paths.sign * valid)[..., None]
    lift = shift.sum(axis=2)
    v1 = np.asarray(f1)[corners] + lift[..., 0]
    v2 = np.asarray(f2)[corners] + lift[..., 1]
    return np.column_stack([np.sum(w * v1, axis=1), np.sum(w * v2, axis=1)])


def _prepare(cloud, params, cuts):
    normed, transform = normalize_cloud(cloud)
    lattice = build_lattice(normed, params)
    local = [c.transformed(transform) for c in cuts]
    return normed, transform, lattice, build_shift_cocycle(lattice, local)


def _result(normed, transform, lattice, cocycle, harm, tau, cuts):
    coeffs = energy_coefficients(lattice, cocycle, harm.f1, harm.f2)
    lift = lifted_extension(lattice, cocycle, harm.f1, harm.f2, normed.points)
    z = lift[:, 0] + tau * lift[:, 1]
    res = balanced_residual(lattice, cocycle, harm.f1, harm.f2)
    return TorusResult(
        tau=tau, points=np.column_stack([z.real, z.imag]), harmonic=harm.at(tau),
        coefficients=coeffs, lattice=lattice, cuts=list(cuts), transform=transform,
        max_residual=float(np.abs(res).max(initial=0.0)),
    )


def harmonic_torus_pipeline(cloud: PointCloud, params: LatticeParams, cuts, tau, *,
                            tol=1e-10) -> TorusResult:
    tau = _check_tau(tau)
    normed, transform, lattice, cocycle = _prepare(cloud, params, cuts)
    harm = harmonic_torus(lattice, cocycle, tau, tol=tol)
    return _result(normed, transform, lattice, cocycle, harm, tau, cuts)


def conformal_torus(cloud: PointCloud, params: LatticeParams, cuts, *, tol=1e-10) -> TorusResult:
    normed, transform, lattice, cocycle = _prepare(cloud, params, cuts)
    harm = harmonic_torus(lattice, cocycle, 1j, tol=tol)
    coeffs = energy_coefficients(lattice, cocycle, harm.f1, harm.f2)
    tau = optimal_tau(coeffs.P, coeffs.Q, coeffs.R_re, coeffs.R_im)
    return _result(normed, transform, lattice, cocycle, harm, tau, cuts)
