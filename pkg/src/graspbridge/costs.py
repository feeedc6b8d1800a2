"""Physics-informed OT ground costs and batch cost-matrix assembly.

Four costs: base-pose distance, contact-map Chamfer distance, wrench-hull
IoU complement, and max-effect (manipulability) distance. All are
symmetric and vanish on identical inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AnnotationError, DegenerateHullError, EmptyInputError, ShapeError
from .geometry import ContactMap, GraspConfig, chamfer, rot6d_decode
from .wrench import WrenchHull, mc_hull_iou

__all__ = [
    "CostKind",
    "GraspAnnotation",
    "d_pose",
    "d_contact",
    "d_wrench",
    "max_effect",
    "d_jac",
    "cost_matrix",
]

COST_TAGS = ("pose", "contact", "wrench", "jacobian")


@dataclass
class CostKind:
    """Selected ground cost plus its Monte-Carlo settings.

    dims applies to the wrench cost only: 3 selects the spatial (force)
    reduction used during training, 6 the full wrench space.
    """

    tag: str
    n_samples: int = 100_000
    seed: int = 0
    dims: int = 3

    def __post_init__(self):
        if self.tag not in COST_TAGS:
            raise AnnotationError(f"unknown cost tag {self.tag!r}; choose from {COST_TAGS}")
        if self.dims not in (3, 6):
            raise AnnotationError(f"dims must be 3 or 6, got {self.dims}")


@dataclass
class GraspAnnotation:
    """A grasp with everything the four costs need.

    contact/wrenches may be None for grasps whose contact map came up
    empty; cost_matrix substitutes a penalty for such entries.
    """

    config: GraspConfig
    contact: Optional[ContactMap] = None
    wrenches: Optional[WrenchHull] = None
    manip: Optional[np.ndarray] = None  # (6,) max-effect vector

    def __post_init__(self):
        if self.contact is not None and len(self.contact) == 0:
            self.contact = None
        if self.manip is not None:
            self.manip = np.asarray(self.manip, dtype=float).reshape(6)
            if np.any(self.manip < 0):
                raise AnnotationError("max-effect entries must be nonnegative")


def d_pose(a: GraspConfig, b: GraspConfig) -> float:
    """Squared position distance plus squared Frobenius rotation distance.

    Rotations are compared as decoded 3x3 matrices, so the value does not
    depend on how the same rotation was seeded.
    """
    dh = a.base.position - b.base.position
    dR = rot6d_decode(a.base.rot6d) - rot6d_decode(b.base.rot6d)
    return float(dh @ dh + np.sum(dR * dR))


def d_contact(a: ContactMap, b: ContactMap) -> float:
    """Bidirectional Chamfer distance between two contact maps."""
    if a is None or b is None or len(a) == 0 or len(b) == 0:
        raise EmptyInputError("contact cost requires nonempty contact maps")
    return chamfer(a.points, b.points)


def d_wrench(a: WrenchHull, b: WrenchHull, n_samples: int, seed: int) -> float:
    """1 - Monte-Carlo hull IoU; degenerate hulls cost the maximum 1.0."""
    try:
        return 1.0 - mc_hull_iou(a, b, n_samples, seed)
    except DegenerateHullError as exc:
        warnings.warn(f"degenerate wrench hull, substituting cost 1.0: {exc}")
        return 1.0


def max_effect(J) -> np.ndarray:
    """Per-row maximum absolute Jacobian entry, m_i = max_j |J_ij|."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != 6 or J.shape[1] < 1:
        raise ShapeError(f"Jacobian must be 6 x (>=1), got shape {J.shape}")
    return np.abs(J).max(axis=1)


def d_jac(m_a, m_b) -> float:
    """Squared L2 distance between max-effect vectors."""
    m_a = np.asarray(m_a, dtype=float).reshape(-1)
    m_b = np.asarray(m_b, dtype=float).reshape(-1)
    diff = m_a - m_b
    return float(diff @ diff)


def _pair_cost(a: GraspAnnotation, b: GraspAnnotation, kind: CostKind):
    """Scalar cost for one pair; NaN marks pairs needing the penalty fill."""
    if kind.tag == "pose":
        return d_pose(a.config, b.config)
    if kind.tag == "contact":
        if a.contact is None or b.contact is None:
            return np.nan
        return d_contact(a.contact, b.contact)
    if kind.tag == "wrench":
        if a.wrenches is None or b.wrenches is None:
            return np.nan
        ha = WrenchHull(a.wrenches.vertices, dims=kind.dims)
        hb = WrenchHull(b.wrenches.vertices, dims=kind.dims)
        return d_wrench(ha, hb, kind.n_samples, kind.seed)
    if kind.tag == "jacobian":
        if a.manip is None or b.manip is None:
            raise AnnotationError("jacobian cost requires max-effect vectors")
        return d_jac(a.manip, b.manip)
    raise AnnotationError(f"unknown cost tag {kind.tag!r}")


def cost_matrix(batch_a, batch_b, kind: CostKind) -> np.ndarray:
    """Pairwise ground-cost matrix between two annotation batches.

    Pairs with a missing contact map or degenerate wrench set are filled
    with the 99th percentile of the finite entries so a training batch
    never aborts; if every entry is missing the matrix falls back to 1.0.
    """
    if len(batch_a) == 0 or len(batch_b) == 0:
        raise EmptyInputError("cost_matrix requires nonempty batches")
    C = np.empty((len(batch_a), len(batch_b)))
    for i, a in enumerate(batch_a):
        for j, b in enumerate(batch_b):
            C[i, j] = _pair_cost(a, b, kind)
    missing = np.isnan(C)
    if missing.any():
        finite = C[~missing]
        penalty = float(np.percentile(finite, 99)) if finite.size else 1.0
        C[missing] = penalty
    return C
