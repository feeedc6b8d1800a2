"""Point-cloud and rigid-pose primitives.

6-D continuous rotation codec (two stacked column seeds, Gram-Schmidt
decode), bidirectional Chamfer distance, contact-map extraction by
distance thresholding, and deterministic farthest-point sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    BoundsError,
    EmptyInputError,
    InputError,
    InvalidRotationError,
)

__all__ = [
    "BasePose",
    "GraspConfig",
    "ContactMap",
    "rot6d_encode",
    "rot6d_decode",
    "chamfer",
    "extract_contact_map",
    "farthest_point_sample",
]


@dataclass
class BasePose:
    """Hand base pose: 3-D position plus 6-D continuous rotation."""

    position: np.ndarray  # (3,)
    rot6d: np.ndarray  # (6,), two stacked 3-D column seeds

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rot6d = np.asarray(self.rot6d, dtype=float).reshape(6)
        if not (np.isfinite(self.position).all() and np.isfinite(self.rot6d).all()):
            raise InputError("base pose contains non-finite entries")

    def rotation_matrix(self) -> np.ndarray:
        return rot6d_decode(self.rot6d)


@dataclass
class GraspConfig:
    """A grasp: base pose plus joint angles for one hand specification."""

    base: BasePose
    joints: np.ndarray  # (K,) radians
    hand_id: str

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float).reshape(-1)
        if not np.isfinite(self.joints).all():
            raise InputError("joint vector contains non-finite entries")

    def as_vector(self) -> np.ndarray:
        """Flat [position(3), rot6d(6), joints(K)] layout."""
        return np.concatenate([self.base.position, self.base.rot6d, self.joints])

    @classmethod
    def from_vector(cls, vec, n_joints: int, hand_id: str) -> "GraspConfig":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != 9 + n_joints:
            raise InputError(
                f"config vector has size {vec.size}, expected {9 + n_joints}"
            )
        return cls(BasePose(vec[:3], vec[3:9]), vec[9:], hand_id)


@dataclass
class ContactMap:
    """Object-surface points in contact, with outward unit normals."""

    points: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(self.points) != len(self.normals):
            raise InputError("contact points and normals differ in length")
        if len(self.normals):
            norms = np.linalg.norm(self.normals, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise InputError("contact normals must have unit norm within 1e-9")

    def __len__(self):
        return len(self.points)


def rot6d_encode(R) -> np.ndarray:
    """Encode an orthonormal 3x3 matrix as its first two columns.

    Raises InvalidRotationError if R is not orthonormal within 1e-6 or
    has non-positive determinant.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"expected 3x3 matrix, got shape {R.shape}")
    if not np.isfinite(R).all():
        raise InvalidRotationError("rotation matrix contains non-finite entries")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6:
        raise InvalidRotationError("matrix is not orthonormal within 1e-6")
    if np.linalg.det(R) <= 0:
        raise InvalidRotationError("matrix has non-positive determinant")
    return np.concatenate([R[:, 0], R[:, 1]])


def rot6d_decode(r6) -> np.ndarray:
    """Gram-Schmidt two 3-D seeds into a proper rotation matrix."""
    r6 = np.asarray(r6, dtype=float).reshape(-1)
    if r6.shape != (6,):
        raise InvalidRotationError(f"expected 6 entries, got {r6.shape}")
    a, b = r6[:3], r6[3:]
    na = np.linalg.norm(a)
    if na <= 1e-9:
        raise InvalidRotationError("first rotation seed has near-zero norm")
    c1 = a / na
    b_perp = b - (b @ c1) * c1
    nb = np.linalg.norm(b_perp)
    if nb <= 1e-9:
        raise InvalidRotationError("rotation seeds are parallel within tolerance")
    c2 = b_perp / nb
    c3 = np.cross(c1, c2)
    return np.column_stack([c1, c2, c3])


def chamfer(A, B) -> float:
    """Bidirectional sum of squared nearest-neighbor distances."""
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3)
    if len(A) == 0 or len(B) == 0:
        raise EmptyInputError("chamfer requires two nonempty point clouds")
    d2 = cdist(A, B, "sqeuclidean")
    return float(d2.min(axis=1).sum() + d2.min(axis=0).sum())


def extract_contact_map(object_points, object_normals, hand_points, tau) -> ContactMap:
    """Object points whose nearest hand point lies within tau.

    Returns an empty map (valid) when no point qualifies.
    """
    if tau <= 0:
        raise InputError("tau must be positive")
    object_points = np.asarray(object_points, dtype=float).reshape(-1, 3)
    object_normals = np.asarray(object_normals, dtype=float).reshape(-1, 3)
    hand_points = np.asarray(hand_points, dtype=float).reshape(-1, 3)
    if len(object_points) == 0:
        raise EmptyInputError("object cloud is empty")
    if len(object_points) != len(object_normals):
        raise InputError("object points and normals differ in length")
    if len(hand_points) == 0:
        return ContactMap(np.empty((0, 3)), np.empty((0, 3)))
    d = cdist(object_points, hand_points).min(axis=1)
    mask = d <= tau
    return ContactMap(object_points[mask], object_normals[mask])


def farthest_point_sample(points, k: int) -> list[int]:
    """Greedy farthest-point subsampling; deterministic.

    Seed index maximizes distance from the centroid (ties: lowest index);
    each later pick maximizes the min distance to the chosen set.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    if not 1 <= k <= n:
        raise BoundsError(f"k={k} outside [1, {n}]")
    centroid = points.mean(axis=0)
    # np.argmax returns the first (lowest-index) maximizer on ties.
    chosen = [int(np.argmax(np.linalg.norm(points - centroid, axis=1)))]
    min_d = np.linalg.norm(points - points[chosen[0]], axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(min_d))
        chosen.append(nxt)
        min_d = np.minimum(min_d, np.linalg.norm(points - points[nxt], axis=1))
    return chosen
