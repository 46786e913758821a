"""Shared EM machinery: inclusion state, E-step, penalties, theta terms."""

from __future__ import annotations

import math

import numpy as np

from .basis import GroupStructure
from .errors import SchemaError
from .prior import (
    InclusionState,
    SSLConfig,
    _update_theta_single,
    e_step_group,
    e_step_linear,
    penalty_scale,
    update_theta,
)


def init_state(groups: GroupStructure) -> dict[str, InclusionState]:
    state: dict[str, InclusionState] = {}
    for var, grp in groups.smooth.items():
        if grp.null_cols.size != 1 or grp.pen_cols.size < 1:
            raise SchemaError(
                f"smooth group {var!r} must have exactly one null column and "
                "at least one penalized column"
            )
        state[var] = InclusionState(p_lin=0.5, p_non=0.5, theta=0.5)
    for col in groups.parametric_cols:
        state[groups.column_names[col]] = InclusionState(p_lin=0.5, p_non=0.0, theta=0.5)
    return state


def snapshot(state: dict[str, InclusionState]) -> dict[str, InclusionState]:
    return {k: InclusionState(v.p_lin, v.p_non, v.theta) for k, v in state.items()}


def penalties_from_state(
    groups: GroupStructure, state: dict[str, InclusionState], cfg: SSLConfig
) -> np.ndarray:
    """Per-column adaptive L1 weights implied by the current inclusion state."""
    lam = np.empty(groups.n_columns)
    for var, grp in groups.smooth.items():
        st = state[var]
        lam[grp.null_cols] = penalty_scale(st.p_lin, cfg)
        lam[grp.pen_cols] = penalty_scale(st.p_non, cfg)
    for col in groups.parametric_cols:
        lam[col] = penalty_scale(state[groups.column_names[col]].p_lin, cfg)
    return lam


def e_step(
    beta: np.ndarray,
    groups: GroupStructure,
    state: dict[str, InclusionState],
    cfg: SSLConfig,
) -> np.ndarray:
    """Update every variable's inclusion state in place; return penalties."""
    if cfg.fixed_inclusion is not None:
        p = cfg.fixed_inclusion
        for var in groups.smooth:
            state[var].p_lin = p
            state[var].p_non = p
        for col in groups.parametric_cols:
            state[groups.column_names[col]].p_lin = p
        return penalties_from_state(groups, state, cfg)
    for var, grp in groups.smooth.items():
        st = state[var]
        p_lin = e_step_linear(float(beta[grp.null_cols[0]]), st.theta, cfg)
        _, p_non = e_step_group(beta[grp.pen_cols], st.theta, p_lin, cfg)
        st.p_lin, st.p_non = p_lin, p_non
        st.theta = update_theta(p_lin, p_non, cfg)
    for col in groups.parametric_cols:
        st = state[groups.column_names[col]]
        p = e_step_linear(float(beta[col]), st.theta, cfg)
        st.p_lin, st.p_non = p, 0.0
        st.theta = _update_theta_single(p, cfg)
    return penalties_from_state(groups, state, cfg)


def theta_terms(
    groups: GroupStructure, state: dict[str, InclusionState], cfg: SSLConfig
) -> float:
    """Expected log posterior contribution of the theta parameters."""
    total = 0.0
    for var in groups.smooth:
        st = state[var]
        total += (cfg.a - 1.0 + st.p_lin + st.p_non) * math.log(st.theta)
        total += (cfg.b + 1.0 - st.p_lin - st.p_non) * math.log(1.0 - st.theta)
    for col in groups.parametric_cols:
        st = state[groups.column_names[col]]
        total += (cfg.a - 1.0 + st.p_lin) * math.log(st.theta)
        total += (cfg.b - st.p_lin) * math.log(1.0 - st.theta)
    return total
