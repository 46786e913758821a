"""Outcome families (gaussian, binomial, poisson) with canonical links.

Each family exposes the pieces the EM solver needs: response validation,
the null-model intercept, the mean function, the log likelihood, the
deviance, and the weights/working response of the quadratic expansion used
by iteratively reweighted least squares.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, gammaln, logit, xlogy

from .errors import SchemaError

# IRLS safeguards: linear predictors are clipped and weights floored so that
# separated binomial (and exploding poisson) fits stay finite.
ETA_CLIP = 30.0
WEIGHT_FLOOR = 1e-6
MU_EPS = 1e-10


class Family:
    """Base class; concrete families override everything below."""

    kind = "base"

    def validate_response(self, y: np.ndarray) -> None:
        if not np.all(np.isfinite(y)):
            raise SchemaError("response contains non-finite values")

    def null_intercept(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def mean(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loglik(self, y: np.ndarray, eta: np.ndarray) -> float:
        raise NotImplementedError

    def deviance(self, y: np.ndarray, mu: np.ndarray) -> float:
        raise NotImplementedError

    def irls(self, y: np.ndarray, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Weights and working response of the quadratic expansion at ``eta``."""
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Family {self.kind}>"


class Gaussian(Family):
    kind = "gaussian"

    def null_intercept(self, y):
        return float(np.mean(y))

    def mean(self, eta):
        return eta

    def loglik(self, y, eta):
        # unit working dispersion; constants dropped
        return float(-0.5 * np.sum((y - eta) ** 2))

    def deviance(self, y, mu):
        return float(np.sum((y - mu) ** 2))

    def irls(self, y, eta):
        return np.ones_like(y), y


class Binomial(Family):
    kind = "binomial"

    def validate_response(self, y):
        super().validate_response(y)
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise SchemaError("binomial response must be coded 0/1")

    def null_intercept(self, y):
        p = float(np.clip(np.mean(y), MU_EPS, 1.0 - MU_EPS))
        return float(logit(p))

    def mean(self, eta):
        return expit(eta)

    def loglik(self, y, eta):
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    def deviance(self, y, mu):
        mu = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
        return float(-2.0 * np.sum(y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))

    def irls(self, y, eta):
        eta_c = np.clip(eta, -ETA_CLIP, ETA_CLIP)
        mu = expit(eta_c)
        w = np.maximum(mu * (1.0 - mu), WEIGHT_FLOOR)
        z = eta_c + (y - mu) / w
        return w, z


class Poisson(Family):
    kind = "poisson"

    def validate_response(self, y):
        super().validate_response(y)
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise SchemaError("poisson response must be nonnegative integers")

    def null_intercept(self, y):
        return float(np.log(max(np.mean(y), MU_EPS)))

    def mean(self, eta):
        return np.exp(eta)

    def loglik(self, y, eta):
        return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))

    def deviance(self, y, mu):
        mu = np.maximum(mu, MU_EPS)
        return float(2.0 * np.sum(xlogy(y, y / mu) - (y - mu)))

    def irls(self, y, eta):
        eta_c = np.clip(eta, -ETA_CLIP, ETA_CLIP)
        mu = np.exp(eta_c)
        w = np.maximum(mu, WEIGHT_FLOOR)
        z = eta_c + (y - mu) / w
        return w, z


_FAMILIES = {f.kind: f for f in (Gaussian(), Binomial(), Poisson())}


def get_family(family: "Family | str") -> Family:
    """Resolve a family name to its singleton instance."""
    if isinstance(family, Family):
        return family
    try:
        return _FAMILIES[str(family).lower()]
    except KeyError:
        raise SchemaError(
            f"unknown family {family!r}; choose from {sorted(_FAMILIES)}"
        ) from None


def deviance(family: "Family | str", y, mu) -> float:
    """Deviance of fitted means ``mu`` against the response ``y``."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return get_family(family).deviance(y, mu)
