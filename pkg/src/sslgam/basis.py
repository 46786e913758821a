"""Per-predictor spline design blocks with linear/nonlinear space isolation.

Each smooth term goes through three steps of matrix manipulation:

1. a cubic regression spline basis over knots placed at equally spaced
   quantiles of the predictor (extremes included), with the integrated
   squared second derivative as its roughness penalty;
2. absorption of the sum-to-zero identifiability constraint by
   reparameterizing onto the orthogonal complement of the constraint
   direction (a deterministic Householder completion), dropping one
   dimension;
3. eigendecomposition of the constrained penalty: eigenvectors with zero
   eigenvalue span the linear ("null") part of the smooth, the remaining
   directions form the penalized ("wiggly") part and are rescaled by
   inverse square-root eigenvalues so their penalty becomes the identity.

Columns are finally scaled to unit sample standard deviation and named
``<var>.pen1 .. <var>.pen(k-2), <var>.null1``.  The frozen
:class:`SmoothTransform` replays the identical mapping on new data, so
prediction-time design matrices are conformable with the training design;
values beyond the training knot range follow the linear extrapolation
natural to this basis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import (
    DegenerateBasisError,
    DegenerateKnotsError,
    MissingDataError,
    NonNumericColumnError,
    SpecParseError,
    UnknownVariableError,
    UnsupportedBasisError,
)

DEFAULT_K = 10
# relative cutoff below which a penalty eigenvalue counts as zero
NULL_EIG_RTOL = 1e-10

_SMOOTH_COL_RE = re.compile(r"^(?P<var>.+)\.(?P<kind>pen|null)(?P<idx>\d+)$")


# ---------------------------------------------------------------------------
# specification table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothSpec:
    """Declaration of one smooth term: variable, basis kind, dimension."""

    var: str
    basis: str = "cr"
    k: int = DEFAULT_K
    args: str = ""

    def __post_init__(self):
        if not self.var:
            raise SpecParseError("smooth spec with empty variable name")
        if self.basis != "cr":
            raise UnsupportedBasisError(
                f"variable {self.var!r}: basis {self.basis!r} is not supported "
                "(only 'cr')"
            )
        if self.k < 4:
            raise SpecParseError(
                f"variable {self.var!r}: k={self.k} is too small, a cubic "
                "regression spline needs k >= 4"
            )


def _parse_args_field(raw) -> tuple[int, str]:
    """Decode an Args cell like ``"bs='cr', k=7"``; empty/NA means defaults."""
    if raw is None or (isinstance(raw, float) and np.isnan(raw)):
        return DEFAULT_K, "cr"
    text = str(raw).strip()
    if text == "" or text.upper() == "NA":
        return DEFAULT_K, "cr"
    k, bs = DEFAULT_K, "cr"
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise SpecParseError(f"cannot parse smooth argument {part!r}")
        key, val = (s.strip() for s in part.split("=", 1))
        if key == "k":
            try:
                k = int(val)
            except ValueError:
                raise SpecParseError(f"k must be an integer, got {val!r}") from None
        elif key == "bs":
            bs = val.strip("'\"")
            if bs != "cr":
                raise UnsupportedBasisError(
                    f"basis {bs!r} is not supported (only 'cr')"
                )
        else:
            raise SpecParseError(f"unknown smooth argument {key!r}")
    return k, bs


def parse_spec_table(source) -> list[SmoothSpec]:
    """Read a Var/Func/Args table (CSV path or DataFrame) into SmoothSpecs."""
    if isinstance(source, (str, Path)):
        table = pd.read_csv(source, dtype=str)
    else:
        table = pd.DataFrame(source)
    cols = {c.strip().lower(): c for c in table.columns}
    for required in ("var", "func"):
        if required not in cols:
            raise SpecParseError(f"spec table is missing the {required!r} column")
    specs: list[SmoothSpec] = []
    seen: set[str] = set()
    for pos, row in table.iterrows():
        var = str(row[cols["var"]]).strip()
        func = str(row[cols["func"]]).strip()
        if func != "s":
            raise SpecParseError(
                f"spec row {pos}: Func must be 's', got {func!r}"
            )
        if var in seen:
            raise SpecParseError(f"spec row {pos}: duplicate variable {var!r}")
        seen.add(var)
        raw_args = row[cols["args"]] if "args" in cols else None
        if isinstance(raw_args, str) and raw_args.strip().upper() in ("", "NA"):
            raw_args = None
        k, bs = _parse_args_field(raw_args)
        specs.append(
            SmoothSpec(var=var, basis=bs, k=k, args="" if raw_args is None else str(raw_args))
        )
    return specs


# ---------------------------------------------------------------------------
# cubic regression spline primitives
# ---------------------------------------------------------------------------

def _crs_maps(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second-derivative map F (k x k) and penalty S (k x k) for CRS knots.

    The basis parameterizes a natural cubic spline by its values at the
    knots; F sends those values to second derivatives at the knots (zero in
    the first and last rows), and S = D' B^{-1} D is the integrated squared
    second derivative in the same coordinates.
    """
    k = knots.size
    h = np.diff(knots)
    D = np.zeros((k - 2, k))
    B = np.zeros((k - 2, k - 2))
    for i in range(k - 2):
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            B[i, i + 1] = h[i + 1] / 6.0
            B[i + 1, i] = h[i + 1] / 6.0
    F_inner = np.linalg.solve(B, D)
    F = np.zeros((k, k))
    F[1:-1] = F_inner
    S = D.T @ F_inner
    return F, (S + S.T) / 2.0


def _crs_design(x: np.ndarray, knots: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Evaluate the k value-interpolating CRS basis functions at x (n x k).

    Points outside the knot range are extended linearly, matching the
    natural boundary conditions of the spline.
    """
    k = knots.size
    h = np.diff(knots)
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, k - 2)
    xc = np.clip(x, knots[0], knots[-1])
    hj = h[idx]
    left = knots[idx + 1] - xc
    right = xc - knots[idx]
    a_min = left / hj
    a_pls = right / hj
    c_min = (left**3 / hj - hj * left) / 6.0
    c_pls = (right**3 / hj - hj * right) / 6.0
    eye = np.eye(k)
    design = (
        a_min[:, None] * eye[idx]
        + a_pls[:, None] * eye[idx + 1]
        + c_min[:, None] * F[idx]
        + c_pls[:, None] * F[idx + 1]
    )
    below = x < knots[0]
    if np.any(below):
        slope = (eye[1] - eye[0]) / h[0] - (h[0] / 3.0) * F[0] - (h[0] / 6.0) * F[1]
        design[below] = eye[0] + (x[below] - knots[0])[:, None] * slope
    above = x > knots[-1]
    if np.any(above):
        slope = (
            (eye[k - 1] - eye[k - 2]) / h[-1]
            + (h[-1] / 6.0) * F[k - 2]
            + (h[-1] / 3.0) * F[k - 1]
        )
        design[above] = eye[k - 1] + (x[above] - knots[-1])[:, None] * slope
    return design


def _householder_complement(c: np.ndarray) -> np.ndarray:
    """Orthonormal basis (k x (k-1)) of the complement of direction c.

    Columns 2..k of the Householder reflection that maps c onto the first
    coordinate axis; fully deterministic in c.
    """
    c = np.asarray(c, dtype=float)
    c = c / np.linalg.norm(c)
    v = c.copy()
    v[0] += 1.0 if c[0] >= 0 else -1.0
    v /= np.linalg.norm(v)
    H = np.eye(c.size) - 2.0 * np.outer(v, v)
    return H[:, 1:]


# ---------------------------------------------------------------------------
# transforms and design construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothTransform:
    """Frozen per-predictor mapping from raw values to design columns.

    Applying the transform to the training predictor reproduces the stored
    training block bit for bit, which is what makes prediction-time design
    matrices conformable.
    """

    var: str
    knots: np.ndarray
    constraint_map: np.ndarray   # k x (k-1), drops the sum-to-zero direction
    eigen_map: np.ndarray        # (k-1) x (k-1), penalized block then null block
    column_scales: np.ndarray    # positive, length k-1
    column_names: tuple[str, ...]

    @property
    def n_pen(self) -> int:
        return len(self.column_names) - 1

    def apply(self, x) -> np.ndarray:
        """Raw predictor values -> n x (k-1) design block."""
        x = np.asarray(x, dtype=float).ravel()
        if np.any(np.isnan(x)):
            raise MissingDataError(f"variable {self.var!r} has NA values")
        F, _ = _crs_maps(self.knots)
        raw = _crs_design(x, self.knots, F)
        return ((raw @ self.constraint_map) @ self.eigen_map) / self.column_scales


def build_smooth(spec: SmoothSpec, x) -> tuple[np.ndarray, SmoothTransform]:
    """Build one smooth term's design block and its frozen transform.

    Parameters
    ----------
    spec : SmoothSpec
        Variable name and basis dimension k.
    x : array-like
        Raw training values, length n > k with at least k distinct values.

    Returns
    -------
    block : ndarray, n x (k-1)
        Columns ordered ``pen1..pen(k-2), null1``, each summing to zero over
        the sample and scaled to unit sample standard deviation.
    transform : SmoothTransform
    """
    x = np.asarray(x, dtype=float).ravel()
    if np.any(np.isnan(x)):
        raise MissingDataError(f"variable {spec.var!r} has NA values")
    n, k = x.size, spec.k
    if n <= k:
        raise DegenerateKnotsError(
            f"variable {spec.var!r}: need more than k={k} observations, got {n}"
        )
    if np.unique(x).size < k:
        raise DegenerateKnotsError(
            f"variable {spec.var!r}: fewer than k={k} distinct values"
        )
    knots = np.quantile(x, np.linspace(0.0, 1.0, k))
    if np.any(np.diff(knots) <= 0):
        raise DegenerateKnotsError(
            f"variable {spec.var!r}: quantile knots are not strictly increasing"
        )

    F, S = _crs_maps(knots)
    raw = _crs_design(x, knots, F)
    Z = _householder_complement(raw.sum(axis=0))
    S_c = Z.T @ S @ Z
    S_c = (S_c + S_c.T) / 2.0

    eigvals, eigvecs = np.linalg.eigh(S_c)
    null_mask = eigvals < max(eigvals.max(), 0.0) * NULL_EIG_RTOL
    if int(null_mask.sum()) != 1:
        raise DegenerateBasisError(
            f"variable {spec.var!r}: expected a 1-dimensional penalty null "
            f"space, found {int(null_mask.sum())}"
        )
    pen_order = np.flatnonzero(~null_mask)[::-1]  # decreasing eigenvalue
    null_col = np.flatnonzero(null_mask)
    eigen_map = np.hstack(
        [eigvecs[:, pen_order] / np.sqrt(eigvals[pen_order]), eigvecs[:, null_col]]
    )

    unscaled = (raw @ Z) @ eigen_map
    scales = unscaled.std(axis=0, ddof=1)
    if not np.all(np.isfinite(scales)) or np.any(scales < 1e-12):
        raise DegenerateBasisError(
            f"variable {spec.var!r}: transformed design has a zero-variance column"
        )
    names = tuple(
        [f"{spec.var}.pen{i + 1}" for i in range(k - 2)] + [f"{spec.var}.null1"]
    )
    transform = SmoothTransform(
        var=spec.var,
        knots=knots,
        constraint_map=Z,
        eigen_map=eigen_map,
        column_scales=scales,
        column_names=names,
    )
    # go through apply() so training and prediction share one code path
    return transform.apply(x), transform


@dataclass(eq=False)
class AdditiveDesign:
    """Stacked design matrix for all smooth terms, with named columns."""

    matrix: np.ndarray
    column_names: list[str]
    transforms: dict[str, SmoothTransform] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, columns=self.column_names)


def _check_column(data: pd.DataFrame, var: str) -> np.ndarray:
    if var not in data.columns:
        raise UnknownVariableError(f"variable {var!r} not found in the data")
    col = data[var]
    if not pd.api.types.is_numeric_dtype(col):
        raise NonNumericColumnError(f"variable {var!r} is not numeric")
    if col.isna().any():
        raise MissingDataError(f"variable {var!r} has NA values")
    return col.to_numpy(dtype=float)


def construct_smooth_data(specs, data: pd.DataFrame) -> AdditiveDesign:
    """Build the full training design from a spec table and raw data.

    Per-variable blocks are concatenated in spec order; the returned design
    carries every :class:`SmoothTransform` for later prediction.
    """
    if not isinstance(specs, (list, tuple)):
        specs = parse_spec_table(specs)
    blocks: list[np.ndarray] = []
    names: list[str] = []
    transforms: dict[str, SmoothTransform] = {}
    for spec in specs:
        x = _check_column(data, spec.var)
        block, transform = build_smooth(spec, x)
        blocks.append(block)
        names.extend(transform.column_names)
        transforms[spec.var] = transform
    if blocks:
        matrix = np.hstack(blocks)
    else:
        matrix = np.zeros((len(data), 0))
    return AdditiveDesign(matrix=matrix, column_names=names, transforms=transforms)


def make_predict_dat(transforms, new_data: pd.DataFrame) -> pd.DataFrame:
    """Rebuild a conformable design matrix for new data.

    Uses the stored knots, constraint map, eigen map, and column scales;
    nothing is refit.  Feeding the training data back reproduces the
    training design exactly.
    """
    if isinstance(transforms, AdditiveDesign):
        transforms = transforms.transforms
    if isinstance(transforms, Mapping):
        ordered: Iterable[SmoothTransform] = transforms.values()
    else:
        ordered = list(transforms)
    blocks = []
    names: list[str] = []
    for transform in ordered:
        x = _check_column(new_data, transform.var)
        blocks.append(transform.apply(x))
        names.extend(transform.column_names)
    if not blocks:
        return pd.DataFrame(index=range(len(new_data)))
    return pd.DataFrame(np.hstack(blocks), columns=names)


# ---------------------------------------------------------------------------
# grouping
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SmoothGroup:
    """Column index sets of one smoothed variable."""

    var: str
    null_cols: np.ndarray
    pen_cols: np.ndarray


@dataclass(eq=False)
class GroupStructure:
    """Per-variable null/penalized column indices plus parametric columns."""

    smooth: dict[str, SmoothGroup]
    parametric_cols: np.ndarray
    column_names: list[str]

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    @classmethod
    def all_parametric(cls, column_names: list[str]) -> "GroupStructure":
        return cls(
            smooth={},
            parametric_cols=np.arange(len(column_names)),
            column_names=list(column_names),
        )


def make_group(column_names) -> GroupStructure:
    """Group design columns by variable from the ``.pen``/``.null`` naming.

    Names that do not follow the convention (or variables missing one of
    the two blocks) are treated as parametric columns.
    """
    column_names = [str(c) for c in column_names]
    found: dict[str, dict[str, list[tuple[int, int]]]] = {}
    parametric: list[int] = []
    for pos, name in enumerate(column_names):
        match = _SMOOTH_COL_RE.match(name)
        if match is None:
            parametric.append(pos)
            continue
        entry = found.setdefault(match["var"], {"pen": [], "null": []})
        entry[match["kind"]].append((int(match["idx"]), pos))
    smooth: dict[str, SmoothGroup] = {}
    for var, entry in found.items():
        if not entry["pen"] or not entry["null"]:
            # incomplete group: fall back to parametric handling
            parametric.extend(pos for _, pos in entry["pen"] + entry["null"])
            continue
        smooth[var] = SmoothGroup(
            var=var,
            null_cols=np.array([pos for _, pos in sorted(entry["null"])]),
            pen_cols=np.array([pos for _, pos in sorted(entry["pen"])]),
        )
    return GroupStructure(
        smooth=smooth,
        parametric_cols=np.array(sorted(parametric), dtype=int),
        column_names=column_names,
    )
