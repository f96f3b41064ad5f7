"""Point-cloud ingestion and normalization.

Clouds are stored as an ``(N, 3)`` float array plus an optional ``(N,)``
integer label array. Label 0 marks interior points, labels 1..4 mark the
four boundary arcs of a disk-type surface, in counter-clockwise order
starting from the bottom side of the target rectangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

ARC_LABELS = frozenset({1, 2, 3, 4})


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InputError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (len(pts),):
                raise InputError("labels must have one entry per point")
            if not np.all(np.isin(lab, [0, 1, 2, 3, 4])):
                raise InputError("labels must lie in {0, 1, 2, 3, 4}")
            lab = lab.astype(np.int64)
            present = set(np.unique(lab).tolist()) - {0}
            if present and present != ARC_LABELS:
                raise InputError(
                    f"boundary labels present {sorted(present)}; need all of 1..4 or none"
                )
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    def __len__(self):
        return len(self.points)

    @property
    def has_arcs(self) -> bool:
        return self.labels is not None and bool(np.any(self.labels != 0))


@dataclass(frozen=True)
class CloudTransform:
    """Maps input coordinates ``x`` to normalized ``(x + translation) * scale``."""

    translation: np.ndarray
    scale: float

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "translation", t)
        if not self.scale > 0:
            raise InputError("transform scale must be positive")

    def forward(self, x):
        return (np.asarray(x, dtype=float) + self.translation) * self.scale

    def inverse(self, y):
        return np.asarray(y, dtype=float) / self.scale - self.translation

    def to_dict(self):
        return {"translation": self.translation.tolist(), "scale": float(self.scale)}


def _parse_rows(fh, path, ncol):
    rows = []
    for lineno, line in enumerate(fh, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fields = s.split()
        if len(fields) != ncol:
            raise InputError(
                f"{path}:{lineno}: malformed row, expected {ncol} columns, got {len(fields)}"
            )
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            raise InputError(f"{path}:{lineno}: malformed row, non-numeric field") from None
    return rows


def load_point_cloud(path, format: str = "xyz") -> PointCloud:
    """Read an ``xyz`` (3 columns) or ``labeled-xyz`` (4 columns) file.

    Blank lines and lines starting with ``#`` are skipped.
    """
    if format not in ("xyz", "labeled-xyz"):
        raise InputError(f"unknown cloud format {format!r}")
    ncol = 3 if format == "xyz" else 4
    try:
        with open(Path(path)) as fh:
            rows = _parse_rows(fh, path, ncol)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path}: empty cloud")
    data = np.array(rows)
    if ncol == 3:
        return PointCloud(data)
    lab = data[:, 3]
    if not np.all(lab == np.round(lab)):
        raise InputError(f"{path}: labels must be integers")
    return PointCloud(data[:, :3], lab.astype(np.int64))


def save_point_cloud(path, cloud: PointCloud) -> None:
    with open(Path(path), "w") as fh:
        if cloud.labels is None:
            for p in cloud.points:
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        else:
            for p, lab in zip(cloud.points, cloud.labels):
                fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {int(lab)}\n")


def normalize_cloud(cloud: PointCloud) -> tuple[PointCloud, CloudTransform]:
    """Center the cloud at its centroid and scale its max coordinate magnitude to 1."""
    pts = cloud.points
    if len(pts) == 0:
        raise InputError("cannot normalize an empty cloud")
    translation = -pts.mean(axis=0)
    centered = pts + translation
    extent = np.abs(centered).max()
    if extent <= 1e-300 or np.ptp(pts, axis=0).max() == 0.0:
        raise InputError("degenerate cloud: all points identical")
    transform = CloudTransform(translation, 1.0 / extent)
    return PointCloud(transform.forward(pts), cloud.labels), transform
