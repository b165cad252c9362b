"""Planar background removal with seeded RANSAC.

Stall scans carry large flat structures (floor, walls) around the animal.
Each pass fits the dominant plane from random 3-point hypotheses, refines
it by total least squares on its inliers, and strips the inliers while
they still account for at least ``min_plane_fraction`` of the remaining
cloud. All randomness flows through a seeded PCG64 stream, so results are
reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloud, EmptyResult, TooFewPoints
from .pointcloud import PointCloud, as_points

_HYPOTHESIS_CHUNK = 256


@dataclass(frozen=True)
class PlaneModel:
    """Plane {p : normal . p + offset = 0} with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,):
            raise ValueError("normal must be a 3-vector")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("normal must be unit length")
        object.__setattr__(self, "normal", n)

    def distances(self, points) -> np.ndarray:
        """Unsigned point-to-plane distances."""
        pts = as_points(points)
        return np.abs(pts @ self.normal + self.offset)


@dataclass(frozen=True)
class RansacParams:
    """Knobs for plane fitting and removal.

    ``inlier_threshold`` is metres, or a fraction of the cloud's
    bounding-box diagonal when ``threshold_is_relative`` is set. The
    defaults are sized for a stall scene: floor plus up to three walls.
    """

    inlier_threshold: float = 0.01
    threshold_is_relative: bool = True
    max_iterations: int = 1000
    min_plane_fraction: float = 0.2
    max_planes: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0 < self.min_plane_fraction < 1:
            raise ValueError("min_plane_fraction must be in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.max_planes < 1:
            raise ValueError("max_planes must be >= 1")


def resolve_threshold(points, params: RansacParams) -> float:
    """Absolute inlier threshold in metres for this cloud."""
    if not params.threshold_is_relative:
        return params.inlier_threshold
    pts = as_points(points)
    diagonal = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if diagonal == 0.0:
        raise DegenerateCloud("all points coincide; bounding box has no diagonal")
    return params.inlier_threshold * diagonal


def _check_not_collinear(pts: np.ndarray) -> None:
    centred = pts - pts.mean(axis=0)
    cov = (centred.T @ centred) / pts.shape[0]
    eigvals = np.linalg.eigvalsh(cov)  # ascending
    if eigvals[1] <= 1e-12 * max(eigvals[2], 1e-300):
        raise DegenerateCloud("points are collinear (or coincident); no plane is defined")


def _tls_plane(pts: np.ndarray) -> PlaneModel:
    """Total-least-squares plane: smallest eigenvector of the covariance."""
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    cov = (centred.T @ centred) / pts.shape[0]
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    flip = np.argmax(np.abs(normal))
    if normal[flip] < 0:
        normal = -normal
    return PlaneModel(normal=normal, offset=float(-normal @ centroid))


def fit_plane_ransac(
    cloud,
    params: RansacParams,
    *,
    rng: np.random.Generator | None = None,
    threshold: float | None = None,
) -> tuple[PlaneModel, np.ndarray]:
    """Fit the dominant plane; return it with the sorted inlier index array.

    The winning hypothesis maximises inlier count over ``max_iterations``
    random 3-point samples (ties go to the earliest hypothesis), then gets
    refined by total least squares on its inliers; the returned inlier set
    is re-evaluated against the refined plane.
    """
    pts = as_points(cloud)
    n = pts.shape[0]
    if n < 3:
        raise TooFewPoints(f"plane fitting needs >= 3 points, got {n}")
    _check_not_collinear(pts)
    if threshold is None:
        threshold = resolve_threshold(pts, params)
    if rng is None:
        rng = np.random.default_rng(params.seed)

    samples = rng.integers(0, n, size=(params.max_iterations, 3))
    distinct = (
        (samples[:, 0] != samples[:, 1])
        & (samples[:, 0] != samples[:, 2])
        & (samples[:, 1] != samples[:, 2])
    )
    a = pts[samples[:, 0]]
    normals = np.cross(pts[samples[:, 1]] - a, pts[samples[:, 2]] - a)
    lengths = np.linalg.norm(normals, axis=1)
    valid = distinct & (lengths > 1e-300)

    best_count = -1
    best_idx = -1
    valid_rows = np.flatnonzero(valid)
    for start in range(0, valid_rows.size, _HYPOTHESIS_CHUNK):
        rows = valid_rows[start : start + _HYPOTHESIS_CHUNK]
        unit = normals[rows] / lengths[rows, None]
        offs = -np.einsum("ij,ij->i", unit, a[rows])
        dist = np.abs(pts @ unit.T + offs)  # (n, chunk)
        counts = (dist <= threshold).sum(axis=0)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count = int(counts[j])
            best_idx = int(rows[j])
    if best_idx < 0:
        raise DegenerateCloud("no valid 3-point hypothesis found")

    unit = normals[best_idx] / lengths[best_idx]
    off = float(-unit @ a[best_idx])
    inliers = np.flatnonzero(np.abs(pts @ unit + off) <= threshold)
    plane = _tls_plane(pts[inliers])
    inliers = np.flatnonzero(plane.distances(pts) <= threshold)
    return plane, inliers


def segment_planes(cloud, params: RansacParams) -> tuple[PointCloud, list[PlaneModel]]:
    """Iteratively strip dominant planes; return the residue and the planes.

    The relative threshold is resolved once against the input cloud, so
    every pass uses the same absolute tolerance.
    """
    pts = as_points(cloud)
    keep = np.ones(pts.shape[0], dtype=bool)
    threshold = resolve_threshold(pts, params)
    rng = np.random.default_rng(params.seed)
    planes: list[PlaneModel] = []

    while len(planes) < params.max_planes:
        current_rows = np.flatnonzero(keep)
        if current_rows.size < 3:
            break
        try:
            plane, inl = fit_plane_ransac(pts[current_rows], params, rng=rng, threshold=threshold)
        except (DegenerateCloud, TooFewPoints):
            if planes:
                break
            raise
        if inl.size / current_rows.size < params.min_plane_fraction:
            break
        keep[current_rows[inl]] = False
        planes.append(plane)

    if not keep.any():
        raise EmptyResult("plane removal deleted every point")
    return PointCloud(pts[keep]), planes


def remove_planes(cloud, params: RansacParams) -> PointCloud:
    """Planar-background-free copy of `cloud`, original point order kept."""
    cleaned, _ = segment_planes(cloud, params)
    return cleaned
