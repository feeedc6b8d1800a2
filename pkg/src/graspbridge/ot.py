"""Entropic optimal transport: log-domain Sinkhorn and pair sampling.

Iterations run on dual potentials with stabilized log-sum-exp so that
small regularization strengths (the brute-force-oracle regime) do not
underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePlanError, InputError

__all__ = ["TransportPlan", "sinkhorn", "sample_pairs", "default_eps"]


@dataclass
class TransportPlan:
    """Nonnegative coupling with prescribed marginals."""

    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    eps: float
    iterations_used: int
    marginal_error: float

    @property
    def converged(self) -> bool:
        return self.marginal_error < self._tol

    _tol: float = 1e-6


def default_eps(C, scale: float = 0.1) -> float:
    """scale times the median of the positive cost entries.

    Relative scaling keeps the regularization knob meaningful across
    ground costs of very different magnitudes. Falls back to 1.0 when
    the matrix has no positive entry (constant-zero cost).
    """
    C = np.asarray(C, dtype=float)
    positive = C[C > 0]
    if positive.size == 0:
        return 1.0
    return float(scale * np.median(positive))


def _logsumexp(M, axis):
    mx = M.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(M - mx).sum(axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn(C, a, b, eps, max_iter: int = 10_000, tol: float = 1e-6) -> TransportPlan:
    """Log-domain Sinkhorn for the entropically regularized plan.

    Stops when the larger of the row/column marginal violations (L-inf)
    drops below tol, or after max_iter sweeps; a non-converged plan is
    still returned, with marginal_error above tol.
    """
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if C.ndim != 2 or C.shape != (a.size, b.size):
        raise InputError(f"cost shape {C.shape} incompatible with marginals")
    if not np.isfinite(C).all():
        raise InputError("cost matrix contains non-finite entries")
    if np.any(C < 0):
        raise InputError("cost matrix must be nonnegative")
    if np.any(a <= 0) or np.any(b <= 0):
        raise InputError("marginals must be strictly positive")
    if abs(a.sum() - 1) > 1e-9 or abs(b.sum() - 1) > 1e-9:
        raise InputError("marginals must sum to 1 within 1e-9")
    if not eps > 0:
        raise InputError("eps must be positive")

    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    it = 0
    err = np.inf
    for it in range(1, max_iter + 1):
        f = eps * (log_a - _logsumexp((g[None, :] - C) / eps, axis=1))
        g = eps * (log_b - _logsumexp((f[:, None] - C) / eps, axis=0))
        # After the g update, column sums are exact; check rows.
        log_pi = (f[:, None] + g[None, :] - C) / eps
        pi = np.exp(log_pi)
        err = max(
            float(np.abs(pi.sum(axis=1) - a).max()),
            float(np.abs(pi.sum(axis=0) - b).max()),
        )
        if err < tol:
            break
    plan = TransportPlan(pi=pi, a=a, b=b, eps=eps, iterations_used=it,
                         marginal_error=err, _tol=tol)
    assert np.all(plan.pi >= 0)
    return plan


def sample_pairs(plan: TransportPlan, n: int, seed: int) -> list[tuple[int, int]]:
    """n independent categorical draws over the flattened plan."""
    total = plan.pi.sum()
    if not total > 0:
        raise DegeneratePlanError("transport plan carries no mass")
    if n == 0:
        return []
    p = (plan.pi / total).ravel()
    rng = np.random.default_rng(seed)
    flat = rng.choice(p.size, size=n, p=p)
    ncol = plan.pi.shape[1]
    return [(int(k) // ncol, int(k) % ncol) for k in flat]
