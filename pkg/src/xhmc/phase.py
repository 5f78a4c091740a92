"""Phase-space points, the Euclidean-Gaussian kinetic energy, and the Hamiltonian.

The sampler works on the joint space z = (q, p). Lifting a position to phase
space means drawing a fresh momentum from the metric's Gaussian; projecting
back just drops the momentum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError
from .targets import TargetModel


class PhasePoint(NamedTuple):
    """A position/momentum pair."""

    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class EuclideanMetric:
    """Diagonal Euclidean metric defined by the diagonal of inv(M)."""

    inverse_mass: np.ndarray

    def __post_init__(self):
        inv = np.asarray(self.inverse_mass, dtype=float)
        if inv.ndim != 1 or inv.size < 1:
            raise ConfigurationError("inverse_mass must be a 1-D array")
        if not np.all(np.isfinite(inv)) or np.any(inv <= 0):
            raise ConfigurationError("inverse_mass entries must be positive and finite")
        object.__setattr__(self, "inverse_mass", inv)

    @property
    def dimension(self) -> int:
        return self.inverse_mass.size

    @classmethod
    def identity(cls, dimension: int) -> "EuclideanMetric":
        return cls(np.ones(dimension))


@dataclass(frozen=True)
class HamiltonianSystem:
    """A target model paired with a metric; H(z) = K(p) + V(q)."""

    model: TargetModel
    metric: EuclideanMetric = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.metric is None:
            object.__setattr__(self, "metric", EuclideanMetric.identity(self.model.dimension))
        if self.metric.dimension != self.model.dimension:
            raise ConfigurationError(
                f"metric dimension {self.metric.dimension} does not match "
                f"model dimension {self.model.dimension}"
            )

    @property
    def dimension(self) -> int:
        return self.model.dimension

    def kinetic(self, z: PhasePoint) -> float:
        """Kinetic energy 0.5 * p' inv(M) p."""
        p = z.p
        with np.errstate(over="ignore", invalid="ignore"):
            return float(0.5 * np.dot(p, self.metric.inverse_mass * p))

    def potential(self, z: PhasePoint) -> float:
        return self.model.potential(z.q)

    def gradient(self, z_or_q) -> np.ndarray:
        q = z_or_q.q if isinstance(z_or_q, PhasePoint) else z_or_q
        return self.model.gradient(q)

    def hamiltonian(self, z: PhasePoint) -> float:
        """Total energy; non-finite values propagate to the caller."""
        return self.kinetic(z) + self.model.potential(z.q)

    def virial_rate(self, z: PhasePoint, grad: np.ndarray | None = None) -> float:
        """Time derivative of the virial along the flow: 2K - q . dV/dq.

        Follows from Hamilton's equations for H = K + V; the analytic form
        avoids step-size sensitivity inside termination statistics.
        """
        if grad is None:
            grad = self.model.gradient(z.q)
        with np.errstate(over="ignore", invalid="ignore"):
            return float(2.0 * self.kinetic(z) - np.dot(z.q, grad))


def virial(z: PhasePoint) -> float:
    """The virial G = q . p."""
    return float(np.dot(z.q, z.p))


def flip_momentum(z: PhasePoint) -> PhasePoint:
    """Negate the momentum; an involution that preserves H."""
    return PhasePoint(z.q, -z.p)


def sample_momentum(metric: EuclideanMetric, rng: np.random.Generator) -> np.ndarray:
    """Draw p with independent components p_i ~ Normal(0, 1 / inverse_mass_i)."""
    scale = 1.0 / np.sqrt(metric.inverse_mass)
    return scale * rng.standard_normal(metric.dimension)
