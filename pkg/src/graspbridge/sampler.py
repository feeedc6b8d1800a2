"""Forward integration of the learned dynamics.

Euler-Maruyama for the SDE and Euler/RK4 for the probability-flow ODE,
on a uniform grid clipped to [t_min, 1 - t_min] where the training
targets are well defined. Drift fields may be given either as MLPParams
or as plain callables (t, x) -> drift, which is how the analytic-target
oracles plug in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InputError
from .nets import MLPParams, net_forward

__all__ = ["Trajectory", "em_integrate", "ode_integrate"]

SCORE_SCALES = ("rescaled", "unitvar")
DEFAULT_T_MIN = 1e-3


@dataclass
class Trajectory:
    """Time grid plus the matching sequence of states."""

    times: np.ndarray  # (n_steps + 1,)
    states: np.ndarray  # (n_steps + 1, *state_shape)

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


def _as_field(net, context):
    if callable(net):
        return net
    if isinstance(net, MLPParams):
        return lambda t, x: net_forward(net, x, t, context)
    raise InputError("drift must be MLPParams or a callable (t, x) -> drift")


def _grid(n_steps: int, t_min: float) -> np.ndarray:
    if n_steps < 1:
        raise InputError("n_steps must be >= 1")
    if not 0 < t_min < 0.5:
        raise InputError("t_min must lie in (0, 0.5)")
    return np.linspace(t_min, 1 - t_min, n_steps + 1)


def em_integrate(v_net, s_net, x0, sigma, n_steps: int, rng, context=None,
                 t_min: float = DEFAULT_T_MIN,
                 score_scale: str = "rescaled") -> Trajectory:
    """Euler-Maruyama: x += (v + kappa*s) dt + sigma*sqrt(dt)*xi.

    kappa = 1 for a score net trained under the rescaled weighting
    (which already outputs (sigma^2/2) * score) and sigma^2/2 for one
    trained under the unit-variance weighting.
    """
    if score_scale not in SCORE_SCALES:
        raise InputError(f"unknown score scale {score_scale!r}")
    if sigma < 0:
        raise InputError("sigma must be nonnegative")
    v_fn = _as_field(v_net, context)
    s_fn = _as_field(s_net, context)
    kappa = 1.0 if score_scale == "rescaled" else sigma**2 / 2.0
    times = _grid(n_steps, t_min)
    x = np.asarray(x0, dtype=float).copy()
    states = np.empty((n_steps + 1, *x.shape))
    states[0] = x
    for i in range(n_steps):
        t, dt = times[i], times[i + 1] - times[i]
        drift = v_fn(t, x) + kappa * s_fn(t, x)
        x = x + drift * dt + sigma * np.sqrt(dt) * rng.standard_normal(x.shape)
        if not np.isfinite(x).all():
            raise DivergenceError(f"non-finite state at step {i + 1}", step=i + 1)
        states[i + 1] = x
    return Trajectory(times, states)


def ode_integrate(v_net, x0, n_steps: int, method: str = "rk4", context=None,
                  t_min: float = DEFAULT_T_MIN) -> Trajectory:
    """Deterministic integration of the flow field alone."""
    if method not in ("euler", "rk4"):
        raise InputError(f"method must be 'euler' or 'rk4', got {method!r}")
    v_fn = _as_field(v_net, context)
    times = _grid(n_steps, t_min)
    x = np.asarray(x0, dtype=float).copy()
    states = np.empty((n_steps + 1, *x.shape))
    states[0] = x
    for i in range(n_steps):
        t, dt = times[i], times[i + 1] - times[i]
        if method == "euler":
            x = x + v_fn(t, x) * dt
        else:
            k1 = v_fn(t, x)
            k2 = v_fn(t + dt / 2, x + dt / 2 * k1)
            k3 = v_fn(t + dt / 2, x + dt / 2 * k2)
            k4 = v_fn(t + dt, x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(x).all():
            raise DivergenceError(f"non-finite state at step {i + 1}", step=i + 1)
        states[i + 1] = x
    return Trajectory(times, states)
