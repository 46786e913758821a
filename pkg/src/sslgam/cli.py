"""Batch command line interface.

Subcommands: sim, fit, tune, predict, select, curve.  All outputs are CSV
or JSON, written atomically.  Exit codes:

    0  success
    2  usage errors (argparse)
    3  schema/data errors (missing columns, NA values, bad domains)
    4  parse errors (spec table rows, model archives)
    5  numeric failures in the solver
    6  I/O errors
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .archive import ModelArchive, atomic_write_text, load_archive, save_archive
from .basis import construct_smooth_data, make_group, make_predict_dat, parse_spec_table
from .cox import SurvivalResponse, fit_cox
from .errors import (
    NumericError,
    SchemaError,
    SpecParseError,
    SslgamError,
    UnknownVariableError,
)
from .glm import fit, predict
from .prior import SSLConfig
from .selection import curve_data, select_variables, tune
from .simulate import sim_bai

EXIT_SCHEMA = 3
EXIT_PARSE = 4
EXIT_NUMERIC = 5
EXIT_IO = 6

FAMILIES = ("gaussian", "binomial", "poisson", "cox")


@dataclass
class RunConfig:
    """Validated invocation parameters for the fit/tune pipeline."""

    data_path: str
    spec_path: str | None
    outcome: list[str]
    family: str
    s0: float
    s1: float
    parametric: list[str]
    seed: int
    model_path: str | None = None
    out_path: str | None = None
    s0_grid: np.ndarray | None = None
    nfolds: int = 5
    ncv: int = 1
    fold_file: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SchemaError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not (0 < self.s0 <= self.s1):
            raise SchemaError("spike/slab scales must satisfy 0 < s0 <= s1")
        if self.family == "cox" and len(self.outcome) != 2:
            raise SchemaError("cox outcomes need two columns: time,status")
        if self.family != "cox" and len(self.outcome) != 1:
            raise SchemaError("non-survival outcomes need exactly one column")
        if self.s0_grid is not None and (
            np.any(self.s0_grid <= 0) or np.any(self.s0_grid > self.s1)
        ):
            raise SchemaError("grid values must be positive and no larger than s1")


def _parse_ss(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise SchemaError("--ss expects two comma-separated scales, e.g. 0.04,0.5")
    return float(parts[0]), float(parts[1])


def _parse_grid(text: str) -> np.ndarray:
    if ":" in text:
        pieces = text.split(":")
        if len(pieces) != 3:
            raise SchemaError("--s0-grid range form is min:max:step")
        lo, hi, step = (float(p) for p in pieces)
        count = int(np.floor((hi - lo) / step + 1.0 + 1e-9))
        grid = lo + step * np.arange(max(count, 0))
    else:
        grid = np.array([float(p) for p in text.split(",") if p.strip()])
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise SchemaError("--s0-grid must be a strictly increasing sequence")
    return grid


def _read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


def _load_response(data: pd.DataFrame, rc: RunConfig):
    for col in rc.outcome:
        if col not in data.columns:
            raise SchemaError(f"outcome column {col!r} not found in the data")
    if rc.family == "cox":
        return SurvivalResponse(
            data[rc.outcome[0]].to_numpy(dtype=float),
            data[rc.outcome[1]].to_numpy(dtype=float),
        )
    col = data[rc.outcome[0]]
    if col.isna().any():
        raise SchemaError(f"outcome column {rc.outcome[0]!r} has NA values")
    return col.to_numpy(dtype=float)


def _build_design(data: pd.DataFrame, rc: RunConfig):
    """Smooth blocks in spec order, then raw parametric columns."""
    specs = parse_spec_table(rc.spec_path) if rc.spec_path else []
    sm = construct_smooth_data(specs, data)
    frame = sm.to_frame()
    for var in rc.parametric:
        if var not in data.columns:
            raise UnknownVariableError(f"parametric variable {var!r} not in the data")
        frame[var] = data[var].to_numpy(dtype=float)
    groups = make_group(list(frame.columns))
    return frame, groups, sm.transforms, specs


def _fit_model(frame, response, rc: RunConfig, groups, cfg: SSLConfig):
    if rc.family == "cox":
        return fit_cox(frame, response, groups, cfg)
    return fit(frame, response, rc.family, groups, cfg)


def _write_report(path, model, report) -> None:
    payload = {
        "family": model.family,
        "converged": model.converged,
        "n_iter": model.n_iter,
        "deviance": model.final_deviance,
        "dispersion": model.dispersion,
        "selection": report.to_json_dict(),
    }
    atomic_write_text(path, json.dumps(payload, indent=1))


def _archive_from(rc: RunConfig, specs, transforms, model) -> ModelArchive:
    return ModelArchive(
        family=rc.family,
        outcome=rc.outcome,
        spec_table=specs,
        parametric_vars=list(rc.parametric),
        transforms=transforms,
        model=model,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_sim(args) -> int:
    out = sim_bai(args.n, args.p, args.family, args.seed)
    atomic_write_text(args.out, out.data.to_csv(index=False))
    if args.truth_out:
        atomic_write_text(
            args.truth_out, pd.DataFrame({"eta": out.eta}).to_csv(index=False)
        )
    return 0


def _run_config_from(args, with_grid: bool = False) -> RunConfig:
    s0, s1 = _parse_ss(args.ss)
    rc = RunConfig(
        data_path=args.data,
        spec_path=args.spec,
        outcome=[c.strip() for c in args.outcome.split(",")],
        family=args.family,
        s0=s0,
        s1=s1,
        parametric=[c.strip() for c in args.parametric.split(",") if c.strip()],
        seed=args.seed,
        model_path=args.model,
        out_path=args.out,
    )
    if with_grid:
        rc = replace(
            rc,
            s0_grid=_parse_grid(args.s0_grid),
            nfolds=args.nfolds,
            ncv=args.ncv,
            fold_file=args.fold_file,
            jobs=args.jobs,
        )
        rc.__post_init__()
    return rc


def cmd_fit(args) -> int:
    rc = _run_config_from(args)
    data = _read_csv(rc.data_path)
    response = _load_response(data, rc)
    frame, groups, transforms, specs = _build_design(data, rc)
    cfg = SSLConfig(s0=rc.s0, s1=rc.s1)
    model = _fit_model(frame, response, rc, groups, cfg)
    report = select_variables(model)
    if rc.model_path:
        save_archive(rc.model_path, _archive_from(rc, specs, transforms, model))
    if rc.out_path:
        _write_report(rc.out_path, model, report)
    print(f"converged={model.converged} n_iter={model.n_iter} "
          f"deviance={model.final_deviance:.6g}")
    return 0


def cmd_tune(args) -> int:
    rc = _run_config_from(args, with_grid=True)
    data = _read_csv(rc.data_path)
    response = _load_response(data, rc)
    frame, groups, transforms, specs = _build_design(data, rc)
    cfg = SSLConfig(s0=rc.s0, s1=rc.s1)
    fold_ids = None
    if rc.fold_file:
        fold_ids = np.loadtxt(rc.fold_file, dtype=int, ndmin=1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cv = tune(
            frame,
            response,
            rc.family if rc.family == "cox" else rc.family,
            groups,
            cfg,
            rc.s0_grid,
            nfolds=rc.nfolds,
            ncv=rc.ncv,
            fold_ids=fold_ids,
            seed=rc.seed,
            n_jobs=rc.jobs,
        )
    for warning in caught:
        print(f"warning: {warning.message}", file=sys.stderr)
    if rc.out_path:
        atomic_write_text(rc.out_path, cv.table.to_csv(index=False))
    chosen = cv.best_s0("deviance")
    print(f"chosen s0: {chosen:g}")
    refit = _fit_model(frame, response, rc, groups, replace(cfg, s0=chosen))
    if rc.model_path:
        save_archive(rc.model_path, _archive_from(rc, specs, transforms, refit))
    return 0


def cmd_predict(args) -> int:
    archive = load_archive(args.model)
    data = _read_csv(args.data)
    frame = make_predict_dat(archive.transforms, data)
    for var in archive.parametric_vars:
        if var not in data.columns:
            raise UnknownVariableError(f"parametric variable {var!r} not in the data")
        frame[var] = data[var].to_numpy(dtype=float)
    newx = frame.to_numpy(dtype=float) if len(frame.columns) else np.zeros((len(data), 0))
    link = predict(archive.model, newx, type="link", offset=args.offset)
    response = predict(archive.model, newx, type="response", offset=args.offset)
    out = pd.DataFrame({"link": link, "response": response})
    atomic_write_text(args.out, out.to_csv(index=False))
    return 0


def cmd_select(args) -> int:
    archive = load_archive(args.model)
    report = select_variables(archive.model)
    text = json.dumps(report.to_json_dict(), indent=1)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        print(text)
    return 0


def cmd_curve(args) -> int:
    archive = load_archive(args.model)
    table = curve_data(
        archive.model,
        args.var,
        archive.transforms,
        args.min,
        args.max,
        n_points=args.n_points,
    )
    atomic_write_text(args.out, table.to_csv(index=False))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_pipeline_args(sub, grid: bool) -> None:
    sub.add_argument("--data", required=True, help="training data CSV")
    sub.add_argument("--spec", default=None, help="smooth spec CSV (Var,Func,Args)")
    sub.add_argument("--outcome", required=True,
                     help="outcome column (cox: time,status)")
    sub.add_argument("--family", required=True, choices=FAMILIES)
    sub.add_argument("--ss", default="0.04,0.5",
                     help="spike,slab scales (default 0.04,0.5)")
    sub.add_argument("--parametric", default="",
                     help="comma-separated unsmoothed raw columns")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--model", default=None, help="output model archive path")
    sub.add_argument("--out", default=None, help="output report path")
    if grid:
        sub.add_argument("--s0-grid", required=True, dest="s0_grid",
                         help="candidates: min:max:step or comma list")
        sub.add_argument("--nfolds", type=int, default=5)
        sub.add_argument("--ncv", type=int, default=1)
        sub.add_argument("--fold-file", default=None, dest="fold_file",
                         help="one integer fold label per row")
        sub.add_argument("--jobs", type=int, default=1,
                         help="concurrent fold jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sslgam",
        description="Sparse additive models with a spike-and-slab lasso prior.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("sim", help="write a simulated benchmark dataset")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--family", default="binomial", choices=FAMILIES[:3])
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--truth-out", default=None, dest="truth_out")
    sim.set_defaults(func=cmd_sim)

    fit_cmd = commands.add_parser("fit", help="fit at a fixed spike scale")
    _add_pipeline_args(fit_cmd, grid=False)
    fit_cmd.set_defaults(func=cmd_fit)

    tune_cmd = commands.add_parser("tune", help="cross-validate the spike scale")
    _add_pipeline_args(tune_cmd, grid=True)
    tune_cmd.set_defaults(func=cmd_tune)

    pred = commands.add_parser("predict", help="predict new data from an archive")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--offset", type=float, default=0.0)
    pred.add_argument("--out", required=True)
    pred.set_defaults(func=cmd_predict)

    sel = commands.add_parser("select", help="bi-level variable selection report")
    sel.add_argument("--model", required=True)
    sel.add_argument("--out", default=None)
    sel.set_defaults(func=cmd_select)

    curve = commands.add_parser("curve", help="fitted curve of one variable")
    curve.add_argument("--model", required=True)
    curve.add_argument("--var", required=True)
    curve.add_argument("--min", type=float, required=True)
    curve.add_argument("--max", type=float, required=True)
    curve.add_argument("--n-points", type=int, default=200, dest="n_points")
    curve.add_argument("--out", required=True)
    curve.set_defaults(func=cmd_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpecParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except SslgamError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
