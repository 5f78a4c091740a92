"""Differentiable target distributions: Gaussian families and a 1-PL IRT posterior.

A target is represented by its potential energy ``V(q) = -log density(q)``
(up to an additive constant, which no algorithm here depends on) together
with the gradient ``dV/dq``.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .errors import ConfigurationError


class TargetModel(ABC):
    """A differentiable negative-log-density on R^N.

    Subclasses must set ``dimension`` and ``name`` and implement
    :meth:`potential` and :meth:`gradient`. Instances are immutable after
    construction and safe to share across concurrently running chains.
    """

    dimension: int
    name: str

    @abstractmethod
    def potential(self, q: np.ndarray) -> float:
        """Return V(q), finite for finite q."""

    @abstractmethod
    def gradient(self, q: np.ndarray) -> np.ndarray:
        """Return dV/dq as a length-N array."""

    def _check_point(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dimension,):
            raise ConfigurationError(
                f"{self.name}: expected point of dimension {self.dimension}, "
                f"got shape {q.shape}"
            )
        return q


class GaussianModel(TargetModel):
    """Zero-mean Gaussian with covariance ``sigma``.

    The potential is the quadratic form ``0.5 * q' inv(sigma) q``, evaluated
    through a Cholesky solve of the covariance rather than an explicit
    inverse, which stays stable for the near-singular banded case.
    """

    def __init__(self, covariance: np.ndarray, name: str = "gaussian"):
        covariance = np.asarray(covariance, dtype=float)
        if covariance.ndim != 2 or covariance.shape[0] != covariance.shape[1]:
            raise ConfigurationError("covariance must be a square matrix")
        if not np.allclose(covariance, covariance.T):
            raise ConfigurationError("covariance must be symmetric")
        self.dimension = covariance.shape[0]
        self.name = name
        self.covariance = covariance
        self._identity = bool(np.array_equal(covariance, np.eye(self.dimension)))
        if self._identity:
            self._cho = None
        else:
            try:
                self._cho = cho_factor(covariance)
            except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises ValueError
                raise ConfigurationError(f"covariance is not positive definite: {exc}")
            except ValueError as exc:
                raise ConfigurationError(f"covariance is not positive definite: {exc}")

    @classmethod
    def iid(cls, dimension: int) -> "GaussianModel":
        """Standard Gaussian with identity covariance."""
        if dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        return cls(np.eye(dimension), name=f"gauss_iid_{dimension}")

    @classmethod
    def two_dim_corr(cls, rho: float) -> "GaussianModel":
        """Two-dimensional Gaussian with unit variances and correlation rho."""
        if not -1.0 < rho < 1.0:
            raise ConfigurationError("rho must lie in (-1, 1)")
        cov = np.array([[1.0, rho], [rho, 1.0]])
        return cls(cov, name=f"gauss_2d_rho{rho}")

    @classmethod
    def banded(cls, dimension: int, rho: float) -> "GaussianModel":
        """Gaussian with covariance entries rho ** |i - j|."""
        if dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        if not -1.0 < rho < 1.0:
            raise ConfigurationError("rho must lie in (-1, 1)")
        idx = np.arange(dimension)
        cov = rho ** np.abs(idx[:, None] - idx[None, :])
        return cls(cov, name=f"gauss_banded_{dimension}_rho{rho}")

    def precision_apply(self, q: np.ndarray) -> np.ndarray:
        """Return inv(sigma) @ q via the cached factorization."""
        if self._identity:
            return np.array(q, dtype=float)
        return cho_solve(self._cho, q)

    def potential(self, q: np.ndarray) -> float:
        q = self._check_point(q)
        with np.errstate(over="ignore", invalid="ignore"):
            if self._identity:
                return float(0.5 * np.dot(q, q))
            return float(0.5 * np.dot(q, self.precision_apply(q)))

    def gradient(self, q: np.ndarray) -> np.ndarray:
        q = self._check_point(q)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.precision_apply(q)


class IrtModel(TargetModel):
    """Posterior of a 1-PL item response theory model.

    ``n_students`` binary responses ``y_i ~ Bernoulli(logistic(theta - b_i))``
    with independent Normal(0, prior_sd) priors on every ``b_i`` and on
    ``theta``. Parameters are ordered ``(b_1, ..., b_n, theta)``, so the
    dimension is ``n_students + 1``.
    """

    def __init__(self, responses: np.ndarray, prior_sd: float = 10.0, name: str = "irt"):
        responses = np.asarray(responses)
        if responses.ndim != 1 or responses.size < 1:
            raise ConfigurationError("responses must be a non-empty 1-D array")
        if not np.all((responses == 0) | (responses == 1)):
            raise ConfigurationError("responses must be 0/1 valued")
        if prior_sd <= 0:
            raise ConfigurationError("prior_sd must be positive")
        self.responses = responses.astype(float)
        self.n_students = int(responses.size)
        self.prior_sd = float(prior_sd)
        self.dimension = self.n_students + 1
        self.name = name

    def _split(self, q: np.ndarray) -> tuple[np.ndarray, float]:
        return q[:-1], q[-1]

    def potential(self, q: np.ndarray) -> float:
        q = self._check_point(q)
        b, theta = self._split(q)
        eta = theta - b
        with np.errstate(over="ignore", invalid="ignore"):
            # -log Bernoulli(y | logistic(eta)) = log(1 + exp(eta)) - y * eta
            nll = np.sum(np.logaddexp(0.0, eta) - self.responses * eta)
            prior = (np.dot(b, b) + theta * theta) / (2.0 * self.prior_sd**2)
        return float(nll + prior)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        q = self._check_point(q)
        b, theta = self._split(q)
        eta = theta - b
        with np.errstate(over="ignore", invalid="ignore"):
            resid = expit(eta) - self.responses
            grad = np.empty(self.dimension)
            grad[:-1] = -resid + b / self.prior_sd**2
            grad[-1] = np.sum(resid) + theta / self.prior_sd**2
        return grad


def generate_irt_data(
    n_students: int,
    true_theta: float = 0.75,
    ability_sd: float = 1.0,
    seed: int | None = None,
    prior_sd: float = 10.0,
) -> IrtModel:
    """Generate a synthetic 1-PL dataset and return the posterior model.

    Draws item difficulties ``b_i ~ Normal(0, ability_sd)`` and responses
    ``y_i ~ Bernoulli(logistic(true_theta - b_i))`` from a generator seeded
    with ``seed``, so the dataset is reproducible bit-exactly.
    """
    if n_students < 1:
        raise ConfigurationError("n_students must be >= 1")
    if ability_sd <= 0:
        raise ConfigurationError("ability_sd must be positive")
    if seed is None:
        raise ConfigurationError("a seed is required to generate IRT data")
    rng = np.random.default_rng(seed)
    difficulties = ability_sd * rng.standard_normal(n_students)
    probs = expit(true_theta - difficulties)
    responses = (rng.random(n_students) < probs).astype(int)
    return IrtModel(responses, prior_sd=prior_sd, name=f"irt_{n_students}")


def write_responses_csv(responses: np.ndarray, path: str | Path) -> None:
    """Write 0/1 responses as a single-column CSV with a header row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["response"])
        for y in np.asarray(responses).astype(int):
            writer.writerow([int(y)])


def read_responses_csv(path: str | Path) -> np.ndarray:
    """Read a single-column CSV of 0/1 responses (header optional)."""
    values = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            cell = row[0].strip()
            if cell == "" or cell.lower() == "response":
                continue
            if cell not in ("0", "1"):
                raise ConfigurationError(f"invalid response value {cell!r} in {path}")
            values.append(int(cell))
    if not values:
        raise ConfigurationError(f"no responses found in {path}")
    return np.array(values, dtype=int)
