"""Shared domain types and coordinate-frame utilities.

Points are plain float64 numpy arrays: shape (3,) for a single point and
(N, 3) for point sets. All operations here are pure; the types are treated
as immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class EmptyScanError(ValidationError):
    """Operation requires a nonempty scan."""


class NumericalError(ArithmeticError):
    """A numeric operation failed (singular matrix, indefinite covariance)."""


def as_point(p) -> np.ndarray:
    """Coerce to a finite (3,) float array."""
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"non-finite point: {a}")
    return a


def as_points(pts) -> np.ndarray:
    """Coerce to a finite (N, 3) float array; N may be 0."""
    a = np.asarray(pts, dtype=float)
    if a.size == 0:
        return a.reshape(0, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValidationError(f"expected an (N, 3) array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("non-finite coordinates in point set")
    return a


@dataclass(frozen=True)
class Pose:
    """Rigid transform from the local sensor frame to the global frame.

    `translation` is the local origin expressed in the global frame;
    `rotation` is a proper orthonormal 3x3 matrix. Invalid rotations are
    rejected, never normalized.
    """

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = as_point(self.translation)
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValidationError("rotation must be a finite 3x3 matrix")
        if not np.allclose(R.T @ R, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValidationError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ValidationError("rotation determinant is not +1")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", R)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.eye(3))

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(-(Rt @ self.translation), Rt)


@dataclass(frozen=True)
class Scan:
    """One LiDAR frame: timestamp, local-frame points, and the ego-pose."""

    t: float
    points: np.ndarray
    pose: Pose

    def __post_init__(self):
        if not np.isfinite(self.t):
            raise ValidationError("scan timestamp must be finite")
        object.__setattr__(self, "points", as_points(self.points))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Measurement:
    """Validated detection: a global-frame centroid with its point support."""

    t: float
    position: np.ndarray
    support: int

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        if self.support < 1:
            raise ValidationError("measurement support must be >= 1")


def to_global(p, pose: Pose) -> np.ndarray:
    """Transform a local-frame point into the global frame."""
    return pose.rotation @ as_point(p) + pose.translation


def to_global_many(points, pose: Pose) -> np.ndarray:
    """Vectorized `to_global` over an (N, 3) point set."""
    pts = as_points(points)
    return pts @ pose.rotation.T + pose.translation


def mean_range(scan: Scan) -> float:
    """Mean Euclidean norm of the scan's local-frame points."""
    if len(scan) == 0:
        raise EmptyScanError("mean_range requires a nonempty scan")
    return float(np.linalg.norm(scan.points, axis=1).mean())
