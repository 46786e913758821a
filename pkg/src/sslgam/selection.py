"""Cross-validation tuning over the spike-scale grid, predictive metrics,
bi-level variable selection reports, and fitted-curve extraction."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import rankdata

from .basis import AdditiveDesign, GroupStructure, SmoothTransform
from .cox import SurvivalResponse, c_index, cox_deviance, fit_cox
from .errors import (
    ConcordanceUndefinedError,
    GridBoundaryWarning,
    SchemaError,
    SslgamError,
    StratificationError,
    UnknownVariableError,
)
from .families import deviance as family_deviance
from .families import get_family
from .glm import FittedModel, _coerce_design, fit
from .prior import SSLConfig

__all__ = [
    "CVResult",
    "SelectionReport",
    "tune",
    "metrics_binomial",
    "metrics_gaussian",
    "metrics_poisson",
    "metrics_cox",
    "select_variables",
    "curve_data",
]

METRIC_COLUMNS = {
    "binomial": ["deviance", "auc", "mse", "mae", "misclassification"],
    "gaussian": ["deviance", "mse", "mae"],
    "poisson": ["deviance", "mse", "mae"],
    "cox": ["c_index", "deviance"],
}


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _auc(y: np.ndarray, score: np.ndarray) -> float:
    """Mann-Whitney AUC with midrank tie correction."""
    pos = y == 1.0
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SslgamError("AUC is undefined for a single-class response")
    ranks = rankdata(score)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def metrics_binomial(y, p_hat) -> dict[str, float]:
    """Deviance, AUC, MSE, MAE, and misclassification at threshold 0.5."""
    y = np.asarray(y, dtype=float).ravel()
    p_hat = np.asarray(p_hat, dtype=float).ravel()
    return {
        "deviance": family_deviance("binomial", y, p_hat),
        "auc": _auc(y, p_hat),
        "mse": float(np.mean((y - p_hat) ** 2)),
        "mae": float(np.mean(np.abs(y - p_hat))),
        "misclassification": float(np.mean((p_hat >= 0.5) != (y == 1.0))),
    }


def metrics_gaussian(y, mu) -> dict[str, float]:
    y = np.asarray(y, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    return {
        "deviance": family_deviance("gaussian", y, mu),
        "mse": float(np.mean((y - mu) ** 2)),
        "mae": float(np.mean(np.abs(y - mu))),
    }


def metrics_poisson(y, mu) -> dict[str, float]:
    y = np.asarray(y, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    return {
        "deviance": family_deviance("poisson", y, mu),
        "mse": float(np.mean((y - mu) ** 2)),
        "mae": float(np.mean(np.abs(y - mu))),
    }


def metrics_cox(eta, resp: SurvivalResponse) -> dict[str, float]:
    return {
        "c_index": c_index(eta, resp),
        "deviance": cox_deviance(eta, resp),
    }


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CVResult:
    """Out-of-fold metrics, one row per candidate spike scale."""

    family: str
    table: pd.DataFrame

    def best_s0(self, metric: str = "deviance", minimize: bool = True) -> float:
        values = self.table[metric].to_numpy()
        idx = int(np.argmin(values) if minimize else np.argmax(values))
        return float(self.table["s0"].iloc[idx])

    def is_boundary(self, metric: str = "deviance", minimize: bool = True) -> bool:
        values = self.table[metric].to_numpy()
        idx = int(np.argmin(values) if minimize else np.argmax(values))
        return idx in (0, len(values) - 1) and len(values) > 1

    def to_csv(self, path) -> None:
        self.table.to_csv(path, index=False)


def _assign_folds(rng: np.random.Generator, n: int, nfolds: int, labels) -> np.ndarray:
    """Shuffle-and-deal fold assignment, stratified by the given labels."""
    folds = np.empty(n, dtype=int)
    if labels is None:
        perm = rng.permutation(n)
        folds[perm] = np.arange(n) % nfolds
        return folds
    labels = np.asarray(labels)
    for value in np.unique(labels):
        idx = np.flatnonzero(labels == value)
        perm = rng.permutation(idx)
        folds[perm] = np.arange(idx.size) % nfolds
    return folds


def _folds_ok(folds: np.ndarray, nfolds: int, labels) -> bool:
    if labels is None:
        return all(np.sum(folds == f) > 0 for f in range(nfolds))
    labels = np.asarray(labels)
    classes = np.unique(labels)
    for f in range(nfolds):
        held = folds == f
        if not held.any() or held.all():
            return False
        for part in (held, ~held):
            if np.unique(labels[part]).size < classes.size:
                return False
    return True


def _draw_folds(rng, n, nfolds, labels, attempts: int = 10) -> np.ndarray:
    for _ in range(attempts):
        folds = _assign_folds(rng, n, nfolds, labels)
        if _folds_ok(folds, nfolds, labels):
            return folds
    raise StratificationError(
        f"could not build {nfolds} folds containing every outcome class "
        f"after {attempts} attempts"
    )


def _fit_fold(X, response, family, groups, cfg, train, iteration_hook):
    if family == "cox":
        resp = SurvivalResponse(response.time[train], response.status[train])
        model = fit_cox(X[train], resp, groups, cfg, iteration_hook=iteration_hook)
    else:
        model = fit(X[train], response[train], family, groups, cfg,
                    iteration_hook=iteration_hook)
    return model


def tune(
    design,
    response,
    family,
    groups: GroupStructure | None = None,
    cfg: SSLConfig | None = None,
    s0_grid=None,
    nfolds: int = 5,
    ncv: int = 1,
    fold_ids=None,
    seed: int = 0,
    *,
    n_jobs: int = 1,
    iteration_hook=None,
) -> CVResult:
    """Cross-validate the spike scale over a grid of candidates.

    Folds are assigned once per repetition (stratified by class for
    binomial outcomes and by event status for survival outcomes) and shared
    across the whole grid.  For every candidate and fold the model is fit
    on the training part, the held-out part is predicted, out-of-fold
    predictions are pooled, and one row of metrics per candidate is
    reported (averaged over repetitions when ``ncv > 1``).

    A fixed ``seed`` (or explicit ``fold_ids``) makes the result identical
    across runs and across serial or concurrent execution of the fold jobs.
    Emits :class:`GridBoundaryWarning` when the deviance-minimizing
    candidate sits on a grid endpoint.
    """
    cfg = cfg if cfg is not None else SSLConfig()
    is_cox = isinstance(family, str) and family == "cox"
    X, names = _coerce_design(design)
    if groups is None and names is not None:
        from .basis import make_group

        groups = make_group(names)
    n = X.shape[0]

    s0_grid = np.asarray(s0_grid, dtype=float).ravel()
    if s0_grid.size == 0:
        raise SchemaError("s0_grid must contain at least one value")
    if np.any(np.diff(s0_grid) <= 0):
        raise SchemaError("s0_grid must be strictly increasing")
    if np.any(s0_grid <= 0) or np.any(s0_grid > cfg.s1):
        raise SchemaError("s0 candidates must be positive and no larger than s1")
    if not (2 <= nfolds <= n):
        raise SchemaError(f"nfolds must lie in [2, {n}]")
    if ncv < 1:
        raise SchemaError("ncv must be a positive integer")

    if is_cox:
        if not isinstance(response, SurvivalResponse):
            raise SchemaError("cox tuning needs a SurvivalResponse")
        labels = response.status
        kind = "cox"
    else:
        response = np.asarray(response, dtype=float).ravel()
        fam = get_family(family)
        fam.validate_response(response)
        labels = response if fam.kind == "binomial" else None
        kind = fam.kind

    rng = np.random.default_rng(seed)
    if fold_ids is not None:
        fold_ids = np.asarray(fold_ids, dtype=int).ravel()
        if fold_ids.size != n:
            raise SchemaError("fold_ids length must match the number of rows")
        uniq = np.unique(fold_ids)
        if uniq.size < 2:
            raise SchemaError("fold_ids must define at least two folds")
        relabeled = np.searchsorted(uniq, fold_ids)
        rep_folds = [relabeled] * ncv
        nfolds = uniq.size
    else:
        rep_folds = [_draw_folds(rng, n, nfolds, labels) for _ in range(ncv)]

    jobs = [
        (rep, i, f)
        for rep in range(ncv)
        for i in range(s0_grid.size)
        for f in range(nfolds)
    ]

    def run_job(job):
        rep, i, f = job
        folds = rep_folds[rep]
        train = folds != f
        cfg_i = replace(cfg, s0=float(s0_grid[i]))
        model = _fit_fold(X, response, family, groups, cfg_i, train, iteration_hook)
        test = ~train
        eta = model.intercept + X[test] @ model.coefficients
        return job, test, eta

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(job) for job in jobs]

    # deterministic ordered reduction
    pooled = {(rep, i): np.empty(n) for rep in range(ncv) for i in range(s0_grid.size)}
    for (rep, i, _f), test, eta in sorted(results, key=lambda r: r[0]):
        pooled[(rep, i)][test] = eta

    rows = []
    for i, s0_val in enumerate(s0_grid):
        acc: dict[str, float] = {}
        for rep in range(ncv):
            eta = pooled[(rep, i)]
            if kind == "binomial":
                met = metrics_binomial(response, expit(eta))
            elif kind == "gaussian":
                met = metrics_gaussian(response, eta)
            elif kind == "poisson":
                met = metrics_poisson(response, np.exp(eta))
            else:
                met = metrics_cox(eta, response)
            for key, value in met.items():
                acc[key] = acc.get(key, 0.0) + value / ncv
        rows.append({"s0": float(s0_val), **acc})

    table = pd.DataFrame(rows, columns=["s0"] + METRIC_COLUMNS[kind])
    result = CVResult(family=kind, table=table)
    if result.is_boundary("deviance"):
        warnings.warn(
            "the deviance-minimizing s0 is a grid endpoint; consider a wider "
            "candidate range",
            GridBoundaryWarning,
            stacklevel=2,
        )
    return result


# ---------------------------------------------------------------------------
# bi-level selection and curves
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SelectionReport:
    """Selected parametric variables plus a Variable/Linear/Nonlinear table."""

    parametric: list[str]
    nonparametric: pd.DataFrame

    def to_json_dict(self) -> dict:
        return {
            "parametric": list(self.parametric),
            "nonparametric": [
                {
                    "variable": str(row.Variable),
                    "linear": bool(row.Linear),
                    "nonlinear": bool(row.Nonlinear),
                }
                for row in self.nonparametric.itertuples(index=False)
            ],
        }


def select_variables(model: FittedModel) -> SelectionReport:
    """Report which linear and nonlinear components carry nonzero weight.

    The solver produces exact zeros, so selection is a plain ``!= 0`` test:
    no thresholding.  Variables whose coefficients are all zero are left
    out of the report entirely.
    """
    beta = model.coefficients
    rows = []
    for var, grp in model.groups.smooth.items():
        linear = bool(np.any(beta[grp.null_cols] != 0.0))
        nonlinear = bool(np.any(beta[grp.pen_cols] != 0.0))
        if linear or nonlinear:
            rows.append({"Variable": var, "Linear": linear, "Nonlinear": nonlinear})
    parametric = [
        model.groups.column_names[col]
        for col in model.groups.parametric_cols
        if beta[col] != 0.0
    ]
    table = pd.DataFrame(rows, columns=["Variable", "Linear", "Nonlinear"])
    return SelectionReport(parametric=parametric, nonparametric=table)


def curve_data(
    model: FittedModel,
    var: str,
    transforms,
    x_min: float,
    x_max: float,
    n_points: int = 200,
) -> pd.DataFrame:
    """Fitted additive contribution of one variable on an equally spaced grid.

    The contribution is defined up to the vertical shift inherited from the
    sum-to-zero identifiability constraint; all other variables are held at
    zero contribution and the intercept is excluded.
    """
    if isinstance(transforms, AdditiveDesign):
        transforms = transforms.transforms
    if not isinstance(transforms, Mapping):
        transforms = {t.var: t for t in transforms}
    if var not in transforms:
        raise UnknownVariableError(f"no stored smooth transform for {var!r}")
    if n_points < 2:
        raise SchemaError("n_points must be at least 2")
    transform: SmoothTransform = transforms[var]
    grid = np.linspace(float(x_min), float(x_max), int(n_points))
    block = transform.apply(grid)
    col_idx = [model.column_names.index(name) for name in transform.column_names]
    contribution = block @ model.coefficients[col_idx]
    return pd.DataFrame({"x": grid, "contribution": contribution})
