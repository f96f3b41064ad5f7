"""Meshless harmonic and conformal maps of sampled surfaces.

A point cloud is replaced by the cubic lattice of grid nodes near it; maps to
the sphere, rectangles, flat tori and hyperbolic surfaces are computed on
that lattice and extended back to the points by trilinear interpolation.
"""

from .errors import (CutError, GeometryError, InputError, LatticeError, LatticeMapsError,
                     SolverError)
from .lattice import Lattice, LatticeParams, build_lattice
from .pointcloud import CloudTransform, PointCloud, load_point_cloud, normalize_cloud

__version__ = "0.1.0"

__all__ = [
    "CloudTransform",
    "CutError",
    "GeometryError",
    "InputError",
    "Lattice",
    "LatticeError",
    "LatticeMapsError",
    "LatticeParams",
    "PointCloud",
    "SolverError",
    "build_lattice",
    "load_point_cloud",
    "normalize_cloud",
]
