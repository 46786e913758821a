"""Two-part spike-and-slab lasso prior: densities, E-step expectations,
theta updates, and adaptive penalty scales.

Model, per smoothed variable j with linear coefficient ``b_j`` and nonlinear
coefficients ``b*_j1..b*_jK``:

    b_j  | g_j  ~ (1 - g_j)  DE(0, s0) + g_j  DE(0, s1)
    b*_jk| g*_j ~ (1 - g*_j) DE(0, s0) + g*_j DE(0, s1)   (iid over k)
    g_j  | t_j  ~ Bernoulli(t_j)
    g*_j | g_j, t_j ~ Bernoulli(g_j * t_j)
    t_j ~ Beta(a, b)

The E-step expectations below are derived from this hierarchy with the
coefficients held fixed at their current values, conditioning blockwise:
the linear indicator's expectation uses the linear coefficient's mixture
densities, and the group indicator is updated conditionally on the linear
one, so the effect hierarchy p_non <= p_lin holds by construction.  The
theta update maximizes the expected log posterior treating the two
indicators as two Bernoulli(t_j) draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import SslgamError

THETA_CLAMP = 1e-6


@dataclass(frozen=True)
class SSLConfig:
    """Prior scales, hyperparameters, and solver controls.

    Parameters
    ----------
    s0, s1 : float
        Spike and slab double-exponential scales, 0 < s0 <= s1.  Setting
        s0 == s1 degenerates to an ordinary lasso with penalty 1/s1.
    a, b : float
        Beta hyperparameters of the per-variable inclusion probability;
        the default (1, 1) is a uniform prior.
    max_em_iter : int
        Cap on EM iterations.
    tol : float
        Relative tolerance on the penalized objective for EM convergence.
    penalize_null : bool
        Linear (null-space) coefficients carry the spike-and-slab prior;
        must be True (reserved for future basis kinds).
    fixed_inclusion : float, optional
        When set, every inclusion probability is pinned to this value and
        the E-step is skipped, which reduces the fit to a plain
        L1-penalized model with penalty ``penalty_scale(fixed_inclusion)``.
    """

    s0: float = 0.04
    s1: float = 0.5
    a: float = 1.0
    b: float = 1.0
    max_em_iter: int = 100
    tol: float = 1e-4
    penalize_null: bool = True
    fixed_inclusion: float | None = None
    # inner-solver controls
    cd_tol: float = 1e-9
    irls_tol: float = 1e-8
    max_cd_sweeps: int = 1000
    max_irls: int = 50
    cd_active_set: bool = True

    def __post_init__(self):
        if not (0.0 < self.s0 <= self.s1):
            raise SslgamError("require 0 < s0 <= s1")
        if self.a < 1.0 or self.b < 1.0:
            raise SslgamError("beta hyperparameters must satisfy a >= 1, b >= 1")
        if not self.penalize_null:
            raise SslgamError("penalize_null=False is not supported")
        if self.fixed_inclusion is not None and not (0.0 <= self.fixed_inclusion <= 1.0):
            raise SslgamError("fixed_inclusion must lie in [0, 1]")


@dataclass
class InclusionState:
    """Posterior expectations for one variable: E[g], E[g*], and theta."""

    p_lin: float
    p_non: float
    theta: float

    def validate(self) -> None:
        for v in (self.p_lin, self.p_non, self.theta):
            if not (0.0 <= v <= 1.0):
                raise SslgamError(f"inclusion state out of [0, 1]: {self}")
        if self.p_non > self.p_lin + 1e-12:
            raise SslgamError(f"effect hierarchy violated: {self}")


def de_density(beta: float, s: float) -> float:
    """Double-exponential (Laplace) density exp(-|beta|/s) / (2 s)."""
    if s <= 0:
        raise SslgamError("double-exponential scale must be positive")
    return math.exp(-abs(beta) / s) / (2.0 * s)


def e_step_linear(beta: float, theta: float, cfg: SSLConfig) -> float:
    """Posterior probability that a single coefficient came from the slab.

    Computed in log space:  p = expit(logit(theta) + log f1 - log f0),
    with f0, f1 the spike/slab densities at ``beta``.
    """
    if not (0.0 < theta < 1.0):
        raise SslgamError("theta must lie strictly inside (0, 1)")
    log_ratio = abs(beta) * (1.0 / cfg.s0 - 1.0 / cfg.s1) + math.log(cfg.s0 / cfg.s1)
    return float(expit(logit(theta) + log_ratio))


def e_step_group(
    betas: np.ndarray, theta: float, p_lin: float, cfg: SSLConfig
) -> tuple[float, float]:
    """Group E-step for the nonlinear indicator.

    Returns ``(factor, p_non)``.  ``factor`` is the conditional slab
    probability of the group indicator given the linear indicator is on,
    ``theta * m1 / (theta * m1 + (1 - theta) * m0)`` with m1 and m0 the
    slab and spike density products over the group; ``p_non`` multiplies it
    into the supplied ``p_lin``, so the effect hierarchy
    ``p_non <= p_lin`` holds by construction.  Density products are
    accumulated in log space so large groups cannot underflow.
    """
    betas = np.asarray(betas, dtype=float).ravel()
    if betas.size == 0:
        raise SslgamError("e_step_group requires at least one coefficient")
    if not (0.0 < theta < 1.0):
        raise SslgamError("theta must lie strictly inside (0, 1)")
    log_ratio = float(
        np.sum(np.abs(betas)) * (1.0 / cfg.s0 - 1.0 / cfg.s1)
        + betas.size * math.log(cfg.s0 / cfg.s1)
    )
    factor = float(expit(logit(theta) + log_ratio))
    p_non = min(p_lin * factor, p_lin)
    return factor, p_non


def update_theta(p_lin: float, p_non: float, cfg: SSLConfig) -> float:
    """Maximizer of the expected log posterior of theta.

    The two indicator expectations are treated as two Bernoulli(theta)
    draws, giving (a - 1 + p_lin + p_non) / (a + b), clamped away from the
    absorbing boundaries.
    """
    theta = (cfg.a - 1.0 + p_lin + p_non) / (cfg.a + cfg.b)
    return float(np.clip(theta, THETA_CLAMP, 1.0 - THETA_CLAMP))


def _update_theta_single(p: float, cfg: SSLConfig) -> float:
    """Theta maximizer for a lone parametric coefficient (one draw)."""
    theta = (cfg.a - 1.0 + p) / (cfg.a + cfg.b - 1.0)
    return float(np.clip(theta, THETA_CLAMP, 1.0 - THETA_CLAMP))


def penalty_scale(p: float, cfg: SSLConfig) -> float:
    """Adaptive L1 weight from the conditional double-exponential scale.

    The prior is treated as a double exponential with conditional scale
    S = (1 - p) s0 + p s1, giving each coefficient the weight 1/S:
    1/s0 for a pure spike, 1/s1 for a pure slab, strictly decreasing in p.
    """
    return 1.0 / ((1.0 - p) * cfg.s0 + p * cfg.s1)
