"""Lattice Laplacian and preconditioned conjugate-gradient solves.

Sign convention: ``(L f)(i) = sum_{j ~ i} (f(j) - f(i))``, so ``L`` is
negative semidefinite and the solver works with ``A = -L`` restricted to
the free vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import linalg as spla

from .errors import SolverError
from .lattice import Lattice


def laplacian_matrix(lattice: Lattice):
    return lattice.laplacian


def apply_laplacian(lattice: Lattice, field) -> np.ndarray:
    return lattice.laplacian @ np.asarray(field, dtype=float)


@dataclass
class SolveStats:
    iterations: int
    relative_residual: float
    max_residual: float

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "relative_residual": self.relative_residual,
            "max_residual": self.max_residual,
        }


def _preconditioner(A, kind):
    if kind == "jacobi":
        diag = A.diagonal()
        inv_diag = np.divide(1.0, diag, out=np.ones_like(diag), where=diag > 0)
        return lambda r: inv_diag * r
    if kind == "ilu":
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-4, fill_factor=10)
        return ilu.solve
    raise ValueError(f"unknown preconditioner {kind!r}")


def pcg(A, b, *, precond="jacobi", tol=1e-8, abs_tol=0.0, max_iter=None, x0=None, scale=None):
    """Preconditioned CG for symmetric positive (semi)definite ``A``.

    Stops when ``||b - A x||_2 <= tol * scale`` and ``max|b - A x| <= abs_tol``;
    ``scale`` defaults to ``||b||_2``.
    """
    n = len(b)
    if max_iter is None:
        max_iter = max(10 * n, 10)
    M = precond if callable(precond) else _preconditioner(A, precond)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    ref = np.linalg.norm(b) if scale is None else scale
    if ref == 0.0:
        return x, SolveStats(0, 0.0, float(np.abs(r).max(initial=0.0)))
    target = tol * ref

    def done(res):
        return np.linalg.norm(res) <= target and np.abs(res).max(initial=0.0) <= abs_tol

    if done(r):
        return x, SolveStats(0, float(np.linalg.norm(r) / ref), float(np.abs(r).max(initial=0.0)))
    z = M(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        denom = p @ Ap
        if denom <= 0:
            raise SolverError("CG breakdown: matrix is not positive definite on the search space",
                              residual=float(np.linalg.norm(r) / ref))
        alpha = rz / denom
        x += alpha * p
        r -= alpha * Ap
        if it % 50 == 0:
            r = b - A @ x
        if done(r):
            r = b - A @ x
            if done(r):
                return x, SolveStats(it, float(np.linalg.norm(r) / ref), float(np.abs(r).max()))
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rel = float(np.linalg.norm(r) / ref)
    raise SolverError(f"CG did not converge in {max_iter} iterations (relative residual {rel:.3e})",
                      residual=rel)


def _as_columns(values):
    values = np.asarray(values, dtype=float)
    return (values[:, None], True) if values.ndim == 1 else (values, False)


def solve_dirichlet(lattice: Lattice, pinned_idx, pinned_values, *, tol=1e-8, precond="jacobi",
                    max_iter=None):
    """Harmonic extension of pinned values: ``L f = 0`` on free vertices.

    ``pinned_values`` has shape ``(P,)`` or ``(P, k)``. Returns the full field
    and per-component solve stats.
    """
    pinned_idx = np.asarray(pinned_idx, dtype=np.int64)
    if pinned_idx.size == 0:
        raise SolverError("Dirichlet solve needs at least one pinned vertex")
    vals, scalar = _as_columns(pinned_values)
    if len(vals) != len(pinned_idx):
        raise ValueError("one pinned value per pinned vertex required")
    nv = lattice.num_vertices
    is_pinned = np.zeros(nv, dtype=bool)
    is_pinned[pinned_idx] = True
    free = np.flatnonzero(~is_pinned)
    out = np.zeros((nv, vals.shape[1]))
    out[pinned_idx] = vals
    stats = []
    if len(free) == 0:
        return (out[:, 0] if scalar else out), stats

    Lmat = laplacian_matrix(lattice)
    A = (-Lmat[free][:, free]).tocsr()
    B = Lmat[free][:, np.flatnonzero(is_pinned)]
    M = _preconditioner(A, precond)
    deg = lattice.degree[free]
    for c in range(vals.shape[1]):
        rhs = B @ out[is_pinned, c]
        vscale = max(np.abs(vals[:, c]).max(initial=0.0), 1.0)
        x, st = pcg(A, rhs, precond=M, tol=tol, abs_tol=tol * vscale * deg.min(),
                    max_iter=max_iter, scale=max(np.linalg.norm(rhs), tol))
        out[free, c] = x
        stats.append(st)
    return (out[:, 0] if scalar else out), stats


def solve_singular(lattice: Lattice, rhs, *, tol=1e-8, precond="jacobi", max_iter=None):
    """Zero-mean solution of ``L f = rhs`` for compatible (zero-sum) ``rhs``."""
    cols, scalar = _as_columns(rhs)
    norms = np.linalg.norm(cols, axis=0)
    sums = cols.sum(axis=0)
    bad = np.abs(sums) > 1e-10 * norms
    if np.any(bad):
        raise SolverError(f"incompatible rhs: component sums {sums.tolist()} are not zero")
    A = (-laplacian_matrix(lattice)).tocsr()
    M = _preconditioner(A, precond)
    out = np.zeros_like(cols)
    stats = []
    deg_min = lattice.degree.min(initial=1)
    for c in range(cols.shape[1]):
        b = -(cols[:, c] - cols[:, c].mean())
        bscale = max(np.abs(b).max(initial=0.0), 1.0)
        x, st = pcg(A, b, precond=M, tol=tol, abs_tol=tol * bscale * max(deg_min, 1),
                    max_iter=max_iter, scale=max(np.linalg.norm(b), tol))
        out[:, c] = x - x.mean()
        stats.append(st)
    return (out[:, 0] if scalar else out), stats
