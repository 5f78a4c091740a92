"""Termination statistics over trajectory segments.

Two dynamic criteria are supported: the Euclidean No-U-Turn test, which
compares the boundary momenta against the segment-summed momentum, and the
exhaustion test, which thresholds the canonically weighted mean of the
virial's time derivative. Both are evaluated from :class:`SegmentStats`
accumulators that merge associatively, so a binary-tree trajectory builder
only ever keeps O(depth) summaries in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .integrator import StepConfig, check_divergence, leapfrog_step
from .phase import EuclideanMetric, HamiltonianSystem, PhasePoint

NUTS = "nuts"
EXHAUSTION = "exhaustion"
STATIC_ONLY = "static_only"

WEIGHTED_MEAN = "weighted_mean"
PER_STATE = "per_state"


@dataclass(frozen=True)
class TerminationCriterion:
    """Selects a dynamic termination rule.

    kind: ``nuts``, ``exhaustion``, or ``static_only`` (never terminates).
    delta: exhaustion threshold, required for ``exhaustion``.
    exhaustion_norm: ``weighted_mean`` thresholds |sum w dG/dt| / sum w;
        ``per_state`` divides that statistic once more by the state count,
        which ties the meaning of delta to the step resolution.
    """

    kind: str = NUTS
    delta: float | None = None
    exhaustion_norm: str = WEIGHTED_MEAN

    def __post_init__(self):
        if self.kind not in (NUTS, EXHAUSTION, STATIC_ONLY):
            raise ConfigurationError(f"unknown termination kind {self.kind!r}")
        if self.kind == EXHAUSTION:
            if self.delta is None or not self.delta > 0:
                raise ConfigurationError("exhaustion requires delta > 0")
        if self.exhaustion_norm not in (WEIGHTED_MEAN, PER_STATE):
            raise ConfigurationError(
                f"unknown exhaustion_norm {self.exhaustion_norm!r}"
            )


def _signed_log_add(la: float, sa: float, lb: float, sb: float) -> tuple[float, float]:
    """Add two signed quantities stored as (log|x|, sign(x))."""
    if sa == 0.0:
        return lb, sb
    if sb == 0.0:
        return la, sa
    if sa == sb:
        return np.logaddexp(la, lb), sa
    if la == lb:
        return -math.inf, 0.0
    hi, lo = (la, lb) if la > lb else (lb, la)
    sign = sa if la > lb else sb
    return hi + math.log1p(-math.exp(lo - hi)), sign


@dataclass(frozen=True)
class SegmentStats:
    """Mergeable summary of a contiguous trajectory segment.

    rho is the plain sum of the full-step momenta over the segment's states;
    log_weight is log sum_z exp(-H(z)); the weighted virial rate
    sum_z exp(-H(z)) dG/dt(z) is carried as (log magnitude, sign) so that
    merging stays exact far outside floating-point range.
    """

    rho: np.ndarray
    log_weight: float
    log_abs_virial_rate: float
    virial_rate_sign: float
    n_states: int

    def __post_init__(self):
        if self.n_states < 1:
            raise ConfigurationError("a segment contains at least one state")

    def weighted_virial_rate_mean(self) -> float:
        """The exhaustion statistic |sum w dG/dt| / sum w."""
        if self.virial_rate_sign == 0.0:
            return 0.0
        return math.exp(self.log_abs_virial_rate - self.log_weight)


def segment_stats_single(
    sys: HamiltonianSystem,
    z: PhasePoint,
    h: float | None = None,
    grad: np.ndarray | None = None,
) -> SegmentStats:
    """Statistics of the singleton segment {z}; ``h``/``grad`` avoid recomputation."""
    if h is None:
        h = sys.hamiltonian(z)
    rate = sys.virial_rate(z, grad=grad)
    if rate == 0.0 or not math.isfinite(rate):
        log_abs, sign = -math.inf, 0.0
    else:
        log_abs, sign = -h + math.log(abs(rate)), math.copysign(1.0, rate)
    return SegmentStats(
        rho=np.array(z.p, dtype=float),
        log_weight=-h,
        log_abs_virial_rate=log_abs,
        virial_rate_sign=sign,
        n_states=1,
    )


def merge_stats(a: SegmentStats, b: SegmentStats) -> SegmentStats:
    """Combine the statistics of two adjacent segments; associative and commutative."""
    if a.rho.shape != b.rho.shape:
        raise ConfigurationError("cannot merge segments of different dimension")
    log_abs, sign = _signed_log_add(
        a.log_abs_virial_rate, a.virial_rate_sign, b.log_abs_virial_rate, b.virial_rate_sign
    )
    return SegmentStats(
        rho=a.rho + b.rho,
        log_weight=np.logaddexp(a.log_weight, b.log_weight),
        log_abs_virial_rate=log_abs,
        virial_rate_sign=sign,
        n_states=a.n_states + b.n_states,
    )


def check_nuts(
    stats: SegmentStats,
    z_minus: PhasePoint,
    z_plus: PhasePoint,
    metric: EuclideanMetric,
) -> bool:
    """No-U-Turn test: terminate when either boundary momentum opposes rho.

    Checking both ends makes the result independent of the direction in
    which the segment was built, which subtree validation relies on.
    """
    inv_rho = metric.inverse_mass * stats.rho
    return bool(np.dot(z_minus.p, inv_rho) < 0.0 or np.dot(z_plus.p, inv_rho) < 0.0)


def check_exhaustion(stats: SegmentStats, crit: TerminationCriterion) -> bool:
    """Exhaustion test: terminate when the weighted virial-rate mean is below delta."""
    if crit.kind != EXHAUSTION:
        raise ConfigurationError("criterion kind must be exhaustion")
    s = stats.weighted_virial_rate_mean()
    if crit.exhaustion_norm == PER_STATE:
        s = s / stats.n_states
    return s < crit.delta


def check_termination(
    crit: TerminationCriterion,
    stats: SegmentStats,
    z_minus: PhasePoint,
    z_plus: PhasePoint,
    metric: EuclideanMetric,
) -> bool:
    """Dispatch on the criterion kind; ``static_only`` never terminates."""
    if crit.kind == NUTS:
        return check_nuts(stats, z_minus, z_plus, metric)
    if crit.kind == EXHAUSTION:
        return check_exhaustion(stats, crit)
    return False


@dataclass
class KappaTrace:
    """Per-step termination statistics along a single forward trajectory.

    Arrays are indexed by step k = 1..n (time k * epsilon). ``nuts_stat`` is
    the boundary momentum dotted with the running mean momentum;
    ``exhaustion_weighted`` / ``exhaustion_per_state`` are the two
    normalizations of the exhaustion statistic; ``kappa_kinetic`` and
    ``kappa_potential`` are the running temporal averages
    (u(z_k) - u(z_0)) / t for u = kinetic and potential energy.
    """

    time: np.ndarray
    nuts_stat: np.ndarray
    exhaustion_weighted: np.ndarray
    exhaustion_per_state: np.ndarray
    kappa_kinetic: np.ndarray
    kappa_potential: np.ndarray
    kinetic_energy: np.ndarray
    potential_energy: np.ndarray
    kinetic0: float
    potential0: float
    divergent: bool = False
    _recurrence_rtol: float = field(default=1e-3, repr=False)

    def __len__(self) -> int:
        return self.time.size

    def nuts_crossing_time(self) -> float | None:
        """Time of the first negative No-U-Turn statistic, or None."""
        idx = np.nonzero(self.nuts_stat < 0.0)[0]
        return float(self.time[idx[0]]) if idx.size else None

    def exhaustion_crossing_time(self, delta: float, norm: str = WEIGHTED_MEAN) -> float | None:
        """Time of the first exhaustion statistic below ``delta``, or None."""
        stat = self.exhaustion_weighted if norm == WEIGHTED_MEAN else self.exhaustion_per_state
        idx = np.nonzero(stat < delta)[0]
        return float(self.time[idx[0]]) if idx.size else None

    def kinetic_recurrence_time(self, rtol: float | None = None) -> float | None:
        """First time the kinetic energy returns to its initial value.

        Detected as |K(t) - K(0)| falling below rtol times the running
        maximum of that deviation, which only triggers past a peak.
        """
        rtol = self._recurrence_rtol if rtol is None else rtol
        dev = np.abs(self.kinetic_energy - self.kinetic0)
        running_max = np.maximum.accumulate(dev)
        hit = (running_max > 0.0) & (dev <= rtol * running_max)
        idx = np.nonzero(hit)[0]
        return float(self.time[idx[0]]) if idx.size else None

    def first_crossings(self, deltas: tuple[float, ...] = (0.1, 0.01)) -> dict:
        """Summary dict of first-crossing times for each criterion."""
        out: dict = {
            "nuts_time": self.nuts_crossing_time(),
            "kinetic_kappa_time": self.kinetic_recurrence_time(),
            "exhaustion_time": {},
        }
        for delta in deltas:
            out["exhaustion_time"][repr(float(delta))] = self.exhaustion_crossing_time(delta)
        return out


def trace_kappa(
    sys: HamiltonianSystem,
    z0: PhasePoint,
    epsilon: float,
    n_steps: int,
    step_cfg: StepConfig | None = None,
) -> KappaTrace:
    """Integrate forward from z0 and record every termination statistic per step.

    A divergence truncates the trace and sets the divergent flag. The
    statistics follow the forward-only flow (the trajectory grows from z0
    one step at a time, with z0 always the left boundary).
    """
    if n_steps < 1:
        raise ConfigurationError("n_steps must be >= 1")
    if step_cfg is None:
        step_cfg = StepConfig(epsilon=epsilon)
    inv_mass = sys.metric.inverse_mass

    h0 = sys.hamiltonian(z0)
    k0 = sys.kinetic(z0)
    v0 = h0 - k0
    stats = segment_stats_single(sys, z0, h=h0)

    cols: dict[str, list[float]] = {name: [] for name in (
        "time", "nuts", "exh_w", "exh_s", "kap_k", "kap_v", "kin", "pot")}
    divergent = False
    z, grad = z0, None
    for k in range(1, n_steps + 1):
        z, grad = leapfrog_step(sys, z, epsilon, grad)
        kin = sys.kinetic(z)
        pot = sys.model.potential(z.q)
        h = kin + pot
        if check_divergence(h0, h, step_cfg):
            divergent = True
            break
        stats = merge_stats(stats, segment_stats_single(sys, z, h=h, grad=grad))
        t = k * epsilon
        cols["time"].append(t)
        cols["nuts"].append(float(np.dot(z.p, inv_mass * stats.rho) / stats.n_states))
        s = stats.weighted_virial_rate_mean()
        cols["exh_w"].append(s)
        cols["exh_s"].append(s / stats.n_states)
        cols["kap_k"].append((kin - k0) / t)
        cols["kap_v"].append((pot - v0) / t)
        cols["kin"].append(kin)
        cols["pot"].append(pot)

    return KappaTrace(
        time=np.array(cols["time"]),
        nuts_stat=np.array(cols["nuts"]),
        exhaustion_weighted=np.array(cols["exh_w"]),
        exhaustion_per_state=np.array(cols["exh_s"]),
        kappa_kinetic=np.array(cols["kap_k"]),
        kappa_potential=np.array(cols["kap_v"]),
        kinetic_energy=np.array(cols["kin"]),
        potential_energy=np.array(cols["pot"]),
        kinetic0=k0,
        potential0=v0,
        divergent=divergent,
    )
