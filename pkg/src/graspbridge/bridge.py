"""Brownian-bridge path sampling and closed-form regression targets.

The conditional path between a coupled pair (x0, x1) is Gaussian with
mean (1-t)x0 + t*x1 and std sigma*sqrt(t(1-t)). Two flow-target
conventions are provided: "derived" (default), the unique field whose
flow preserves those Gaussian marginals, and "literal", an alternative
prefactor kept for comparison. The score loss uses the rescaled
weighting so its target is simply the negated noise draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EndpointError, InputError

__all__ = [
    "BridgeSample",
    "bridge_params",
    "sample_bridge",
    "cond_flow_target",
    "cond_score_target",
    "lambda_schedule",
    "training_targets",
    "make_training_batch",
]

FLOW_CONVENTIONS = ("derived", "literal")
LAMBDA_VARIANTS = ("rescaled", "unitvar")

DEFAULT_T_MIN = 1e-3


@dataclass
class BridgeSample:
    """One training row for the score/flow regressors."""

    t: float
    x_t: np.ndarray
    noise: np.ndarray
    flow_target: np.ndarray
    score_loss_target: np.ndarray  # -noise under the rescaled convention
    lambda_t: float


def bridge_params(t, x0, x1, sigma):
    """Mean and std of the pinned path at time t."""
    if not 0 <= t <= 1:
        raise InputError(f"t={t} outside [0, 1]")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    mu_t = (1 - t) * x0 + t * x1
    sigma_t = sigma * np.sqrt(t * (1 - t))
    return mu_t, float(sigma_t)


def _check_interior(t, t_min=DEFAULT_T_MIN):
    if not t_min < t < 1 - t_min:
        raise EndpointError(f"t={t} outside the open training interval "
                            f"({t_min}, {1 - t_min})")


def sample_bridge(t, x0, x1, sigma, rng, t_min=DEFAULT_T_MIN) -> BridgeSample:
    """Draw x_t = mu_t + sigma_t * eps and fill every regression target."""
    _check_interior(t, t_min)
    mu_t, sigma_t = bridge_params(t, x0, x1, sigma)
    noise = rng.standard_normal(mu_t.shape)
    x_t = mu_t + sigma_t * noise
    return BridgeSample(
        t=float(t),
        x_t=x_t,
        noise=noise,
        flow_target=cond_flow_target(t, x_t, x0, x1),
        score_loss_target=-noise,
        lambda_t=lambda_schedule(t, sigma, "rescaled"),
    )


def cond_flow_target(t, x, x0, x1, convention: str = "derived"):
    """Closed-form conditional flow drift.

    derived: (x1-x0) + (1-2t)/(2t(1-t)) * (x - mu_t), the generator of
    the Gaussian path. literal: prefactor (1-2t)/(1-t) instead.
    """
    if convention not in FLOW_CONVENTIONS:
        raise InputError(f"unknown flow convention {convention!r}")
    if not 0 < t < 1:
        raise EndpointError(f"t={t} not in (0, 1)")
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    mu_t = (1 - t) * x0 + t * x1
    if convention == "derived":
        pref = (1 - 2 * t) / (2 * t * (1 - t))
    else:
        pref = (1 - 2 * t) / (1 - t)
    return (x1 - x0) + pref * (x - mu_t)


def cond_score_target(t, x, x0, x1, sigma):
    """Conditional score (mu_t - x) / (sigma^2 t(1-t))."""
    if not 0 < t < 1:
        raise EndpointError(f"t={t} not in (0, 1)")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    mu_t = (1 - t) * np.asarray(x0, dtype=float) + t * np.asarray(x1, dtype=float)
    return (mu_t - x) / (sigma**2 * t * (1 - t))


def lambda_schedule(t, sigma, variant: str = "rescaled") -> float:
    """Score-loss weight.

    unitvar: sigma * sqrt(t(1-t)), which standardizes the raw score
    target. rescaled: 2*sqrt(t(1-t))/sigma, under which the weighted
    score residual becomes lambda*s + noise with no small divisors;
    training default.
    """
    if variant not in LAMBDA_VARIANTS:
        raise InputError(f"unknown lambda variant {variant!r}")
    if not 0 <= t <= 1:
        raise InputError(f"t={t} outside [0, 1]")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    root = np.sqrt(t * (1 - t))
    if variant == "unitvar":
        return float(sigma * root)
    return float(2 * root / sigma)


def training_targets(t, x0, x1, sigma, rng, t_min=DEFAULT_T_MIN) -> BridgeSample:
    """One complete loss row (flow target, weighted score target)."""
    return sample_bridge(t, x0, x1, sigma, rng, t_min=t_min)


def make_training_batch(x0s, x1s, sigma, rng, t_min=DEFAULT_T_MIN,
                        flow_convention: str = "derived",
                        lambda_variant: str = "rescaled"):
    """Vectorized batch of training rows for coupled pairs.

    Returns (t, x_t, noise, flow_target, lambda_t) arrays with leading
    batch dimension; t is drawn uniformly on (t_min, 1-t_min). Under
    either lambda variant the weighted score residual is
    lambda_t * s_theta + noise; the variant only changes which multiple
    of the score the network converges to.
    """
    if flow_convention not in FLOW_CONVENTIONS:
        raise InputError(f"unknown flow convention {flow_convention!r}")
    if lambda_variant not in LAMBDA_VARIANTS:
        raise InputError(f"unknown lambda variant {lambda_variant!r}")
    x0s = np.asarray(x0s, dtype=float)
    x1s = np.asarray(x1s, dtype=float)
    if x0s.shape != x1s.shape:
        raise InputError(f"endpoint shapes differ: {x0s.shape} vs {x1s.shape}")
    n = x0s.shape[0]
    t = rng.uniform(t_min, 1 - t_min, size=n)
    tc = t[:, None]
    mu = (1 - tc) * x0s + tc * x1s
    sigma_t = sigma * np.sqrt(t * (1 - t))
    noise = rng.standard_normal(x0s.shape)
    x_t = mu + sigma_t[:, None] * noise
    if flow_convention == "derived":
        pref = ((1 - 2 * t) / (2 * t * (1 - t)))[:, None]
    else:
        pref = ((1 - 2 * t) / (1 - t))[:, None]
    flow_target = (x1s - x0s) + pref * (x_t - mu)
    if lambda_variant == "rescaled":
        lam = 2 * np.sqrt(t * (1 - t)) / sigma
    else:
        lam = sigma * np.sqrt(t * (1 - t))
    return t, x_t, noise, flow_target, lam
