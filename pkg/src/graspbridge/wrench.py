"""Grasp wrench space construction and Monte-Carlo hull IoU.

Wrenches are built as w = [f; c x f] with f = alpha * n per contact. Hull
membership for single queries is decided by a small linear feasibility
program; the Monte-Carlo IoU estimator precomputes facet halfspaces once
per hull so that millions of samples reduce to one matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import DegenerateHullError, EmptyInputError, InputError, ShapeError

__all__ = [
    "ContactPoint",
    "WrenchHull",
    "build_wrenches",
    "hull_membership",
    "mc_hull_iou",
]

# Vertex sets flatter than this (smallest singular value of the centered
# matrix) are treated as volume-free and rejected.
FLATNESS_TOL = 1e-9

_MC_CHUNK = 1 << 17  # fixed chunk size keeps the stream reproducible


@dataclass
class ContactPoint:
    """A contact: position c, unit normal n (force direction), scale alpha."""

    c: np.ndarray
    n: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(3)
        self.n = np.asarray(self.n, dtype=float).reshape(3)
        if abs(np.linalg.norm(self.n) - 1.0) > 1e-9:
            raise InputError("contact normal must have unit norm within 1e-9")
        if not self.alpha > 0:
            raise InputError("contact force scale alpha must be positive")


@dataclass
class WrenchHull:
    """6-D wrench vertex set with an active dimensionality of 3 or 6.

    dims=3 restricts all hull operations to the first three (force)
    coordinates, the spatial reduction used during training.
    """

    vertices: np.ndarray  # (k, 6)
    dims: int = 6

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 6)
        if self.dims not in (3, 6):
            raise InputError(f"dims must be 3 or 6, got {self.dims}")
        if not np.isfinite(self.vertices).all():
            raise InputError("wrench vertices contain non-finite entries")

    def active_vertices(self) -> np.ndarray:
        return self.vertices[:, : self.dims]

    def reduced(self) -> "WrenchHull":
        """The same vertex set viewed in its first three spatial dims."""
        return WrenchHull(self.vertices, dims=3)


def build_wrenches(contacts: list[ContactPoint]) -> WrenchHull:
    """Stack one unit wrench [f; c x f], f = alpha*n, per contact."""
    if len(contacts) == 0:
        raise EmptyInputError("cannot build wrenches from zero contacts")
    rows = []
    for cp in contacts:
        f = cp.alpha * cp.n
        rows.append(np.concatenate([f, np.cross(cp.c, f)]))
    return WrenchHull(np.array(rows), dims=6)


def _check_volume(vertices: np.ndarray, what: str = "vertex set"):
    """Reject flat sets: smallest singular value of centered matrix < tol."""
    k, d = vertices.shape
    if k < d + 1:
        raise DegenerateHullError(
            f"{what} has {k} vertices, fewer than {d + 1} needed in {d}-D"
        )
    centered = vertices - vertices.mean(axis=0)
    if np.linalg.svd(centered, compute_uv=False)[-1] < FLATNESS_TOL:
        raise DegenerateHullError(f"{what} is flat in {d}-D")


def hull_membership(vertices, query, tol: float = 1e-9) -> bool:
    """True iff query lies within tol of the convex hull of vertices.

    Solves min t s.t. sum(lam) = 1, lam >= 0, |V^T lam - q|_inf <= t and
    compares the optimum against tol. Exact for the desk-scale vertex
    counts this package handles.
    """
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    query = np.asarray(query, dtype=float).reshape(-1)
    k, d = vertices.shape
    if d != query.size:
        raise ShapeError(f"query dim {query.size} != vertex dim {d}")
    if k == 1:
        return bool(np.max(np.abs(vertices[0] - query)) <= tol)
    # Variables: lam (k entries), t. Objective: minimize t.
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_eq = np.concatenate([np.ones((1, k)), np.zeros((1, 1))], axis=1)
    b_eq = np.ones(1)
    # V^T lam - q <= t  and  -(V^T lam - q) <= t
    VT = vertices.T  # (d, k)
    ones_t = np.ones((d, 1))
    A_ub = np.block([[VT, -ones_t], [-VT, -ones_t]])
    b_ub = np.concatenate([query, -query])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k + [(0, None)], method="highs")
    if not res.success:
        raise InputError(f"membership LP failed: {res.message}")
    return bool(res.fun <= tol)


def _halfspaces(vertices: np.ndarray):
    """Facet inequalities A x <= b of conv(vertices) via exact hull."""
    hull = ConvexHull(vertices)
    return hull.equations[:, :-1], -hull.equations[:, -1]


def mc_hull_iou(A: WrenchHull, B: WrenchHull, n_samples: int, seed: int) -> float:
    """Monte-Carlo IoU of two convex hulls in their active dimension.

    Samples once, uniformly in the joint bounding box, and tests each
    point against both hulls (sample-once convention keeps the estimate
    exactly symmetric in A and B). Deterministic for a fixed seed.
    """
    if A.dims != B.dims:
        raise ShapeError(f"hull dims differ: {A.dims} vs {B.dims}")
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    va, vb = A.active_vertices(), B.active_vertices()
    _check_volume(va, "first hull")
    _check_volume(vb, "second hull")
    Ha, ba = _halfspaces(va)
    Hb, bb = _halfspaces(vb)

    allv = np.concatenate([va, vb])
    lo, hi = allv.min(axis=0), allv.max(axis=0)

    rng = np.random.default_rng(seed)
    n_both = 0
    n_either = 0
    remaining = n_samples
    # qhull facet offsets carry ~1e-12 rounding; accept on the boundary.
    eps = 1e-9
    while remaining > 0:
        m = min(_MC_CHUNK, remaining)
        pts = rng.uniform(lo, hi, size=(m, lo.size))
        in_a = np.all(pts @ Ha.T <= ba + eps, axis=1)
        in_b = np.all(pts @ Hb.T <= bb + eps, axis=1)
        n_both += int(np.count_nonzero(in_a & in_b))
        n_either += int(np.count_nonzero(in_a | in_b))
        remaining -= m
    if n_either == 0:
        return 0.0
    return n_both / n_either
