"""Benchmark data generator: four signal functions plus pure-noise predictors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from scipy.special import expit

from .errors import SchemaError
from .families import get_family

__all__ = ["SimOutput", "sim_bai", "TRUE_FUNCTIONS"]

ETA_CLIP = 30.0


def _b1(x):
    return 5.0 * np.sin(2.0 * np.pi * x)


def _b2(x):
    return -4.0 * np.cos(2.0 * np.pi * x - 0.5)


def _b3(x):
    return 6.0 * (x - 0.5)


def _b4(x):
    return -5.0 * (x**2 - 0.3)


# identities of the generating functions, keyed by the predictor they act on
TRUE_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "x1": _b1,
    "x2": _b2,
    "x3": _b3,
    "x4": _b4,
}


@dataclass(eq=False)
class SimOutput:
    """Simulated dataset, true linear predictor, and generating functions."""

    data: pd.DataFrame
    eta: np.ndarray
    truth: dict[str, Callable[[np.ndarray], np.ndarray]]


def sim_bai(n: int, p: int, family="binomial", seed: int = 0) -> SimOutput:
    """Simulate ``n`` observations on ``p`` standard-normal predictors.

    The first four predictors drive the outcome through a sine, a cosine, a
    line, and a quadratic; predictors 5..p have no effect.  Gaussian
    outcomes add unit-variance noise, binomial outcomes are Bernoulli draws
    through the logit link, and poisson outcomes exponentiate a clipped
    linear predictor.  Fully reproducible for a fixed seed.
    """
    if n < 1:
        raise SchemaError("n must be a positive integer")
    if p < 4:
        raise SchemaError("need at least 4 predictors (the signal functions)")
    fam = get_family(family)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    eta = _b1(X[:, 0]) + _b2(X[:, 1]) + _b3(X[:, 2]) + _b4(X[:, 3])
    if fam.kind == "gaussian":
        y = eta + rng.standard_normal(n)
    elif fam.kind == "binomial":
        y = rng.binomial(1, expit(eta)).astype(float)
    else:
        y = rng.poisson(np.exp(np.clip(eta, -ETA_CLIP, ETA_CLIP))).astype(float)
    columns = {f"x{j + 1}": X[:, j] for j in range(p)}
    columns["y"] = y
    return SimOutput(data=pd.DataFrame(columns), eta=eta, truth=dict(TRUE_FUNCTIONS))
