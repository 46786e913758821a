"""Versioned model archive: everything needed for later predict/curve calls.

One self-describing JSON file holds the smooth transforms, the group
structure, the fitted coefficients and inclusion state, the prior
configuration, and the spec table.  Floats survive the round trip exactly
(shortest-repr encoding), so reloaded models predict bit for bit.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .basis import GroupStructure, SmoothGroup, SmoothSpec, SmoothTransform
from .errors import ArchiveError
from .glm import FittedModel
from .prior import InclusionState, SSLConfig

FORMAT_TAG = "sslgam-model-archive"
FORMAT_VERSION = 1


@dataclass(eq=False)
class ModelArchive:
    """Container for one fitted pipeline."""

    family: str
    outcome: list[str]
    spec_table: list[SmoothSpec]
    parametric_vars: list[str]
    transforms: dict[str, SmoothTransform]
    model: FittedModel


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _transform_to_dict(t: SmoothTransform) -> dict:
    return {
        "var": t.var,
        "knots": t.knots.tolist(),
        "constraint_map": t.constraint_map.tolist(),
        "eigen_map": t.eigen_map.tolist(),
        "column_scales": t.column_scales.tolist(),
        "column_names": list(t.column_names),
    }


def _transform_from_dict(d: dict) -> SmoothTransform:
    return SmoothTransform(
        var=d["var"],
        knots=np.array(d["knots"], dtype=float),
        constraint_map=np.array(d["constraint_map"], dtype=float),
        eigen_map=np.array(d["eigen_map"], dtype=float),
        column_scales=np.array(d["column_scales"], dtype=float),
        column_names=tuple(d["column_names"]),
    )


def _groups_to_dict(g: GroupStructure) -> dict:
    return {
        "column_names": list(g.column_names),
        "smooth": [
            {
                "var": grp.var,
                "null_cols": grp.null_cols.tolist(),
                "pen_cols": grp.pen_cols.tolist(),
            }
            for grp in g.smooth.values()
        ],
        "parametric_cols": g.parametric_cols.tolist(),
    }


def _groups_from_dict(d: dict) -> GroupStructure:
    smooth = {
        entry["var"]: SmoothGroup(
            var=entry["var"],
            null_cols=np.array(entry["null_cols"], dtype=int),
            pen_cols=np.array(entry["pen_cols"], dtype=int),
        )
        for entry in d["smooth"]
    }
    return GroupStructure(
        smooth=smooth,
        parametric_cols=np.array(d["parametric_cols"], dtype=int),
        column_names=list(d["column_names"]),
    )


def save_archive(path, archive: ModelArchive) -> None:
    model = archive.model
    payload = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "family": archive.family,
        "outcome": list(archive.outcome),
        "config": asdict(model.config),
        "spec_table": [
            {"var": s.var, "basis": s.basis, "k": s.k, "args": s.args}
            for s in archive.spec_table
        ],
        "parametric_vars": list(archive.parametric_vars),
        "transforms": [_transform_to_dict(t) for t in archive.transforms.values()],
        "groups": _groups_to_dict(model.groups),
        "model": {
            "intercept": model.intercept,
            "coefficients": model.coefficients.tolist(),
            "column_names": list(model.column_names),
            "inclusion": {
                var: {"p_lin": st.p_lin, "p_non": st.p_non, "theta": st.theta}
                for var, st in model.inclusion.items()
            },
            "n_iter": model.n_iter,
            "converged": model.converged,
            "final_deviance": model.final_deviance,
            "dispersion": model.dispersion,
        },
    }
    atomic_write_text(path, json.dumps(payload, indent=1))


def load_archive(path) -> ModelArchive:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as err:
        raise ArchiveError(f"model archive {path} is not valid JSON: {err}") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise ArchiveError(f"{path} is not a model archive")
    if payload.get("version") != FORMAT_VERSION:
        raise ArchiveError(
            f"archive version {payload.get('version')!r} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    try:
        groups = _groups_from_dict(payload["groups"])
        m = payload["model"]
        model = FittedModel(
            intercept=float(m["intercept"]),
            coefficients=np.array(m["coefficients"], dtype=float),
            column_names=list(m["column_names"]),
            inclusion={
                var: InclusionState(d["p_lin"], d["p_non"], d["theta"])
                for var, d in m["inclusion"].items()
            },
            family=payload["family"],
            config=SSLConfig(**payload["config"]),
            groups=groups,
            n_iter=int(m["n_iter"]),
            converged=bool(m["converged"]),
            final_deviance=float(m["final_deviance"]),
            dispersion=None if m["dispersion"] is None else float(m["dispersion"]),
        )
        return ModelArchive(
            family=payload["family"],
            outcome=list(payload["outcome"]),
            spec_table=[
                SmoothSpec(var=s["var"], basis=s["basis"], k=s["k"], args=s["args"])
                for s in payload["spec_table"]
            ],
            parametric_vars=list(payload["parametric_vars"]),
            transforms={
                d["var"]: _transform_from_dict(d) for d in payload["transforms"]
            },
            model=model,
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ArchiveError(f"model archive {path} is malformed: {err}") from None
