"""Running seeded Markov chains and coarse step-size search.

Each draw composes lift (fresh momentum), numerical flow, and projection.
Chains derive their random streams from a counter-based generator keyed by
(seed, chain_index), so multi-chain runs are reproducible and independent
of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InitializationError, StepSearchError
from .integrator import StepConfig
from .phase import HamiltonianSystem
from .targets import GaussianModel
from .termination import EXHAUSTION, NUTS, STATIC_ONLY, TerminationCriterion
from .trajectory import (
    MULTINOMIAL,
    SLICE,
    TransitionRecord,
    dynamic_transition,
    static_metropolis_transition,
    static_uniform_transition,
)

STATIC_METROPOLIS = "static_metropolis"
STATIC_UNIFORM = "static_uniform"
ALGORITHM_NUTS = "nuts"
ALGORITHM_XHMC = "xhmc"

ALGORITHMS = (STATIC_METROPOLIS, STATIC_UNIFORM, ALGORITHM_NUTS, ALGORITHM_XHMC)

INIT_ZERO = "zero"
INIT_RANDOM_SHELL = "random_shell"


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to reproduce a run.

    ``state_sampler`` defaults per algorithm (slice for nuts, multinomial
    for xhmc); ``init`` is "zero", "random_shell", or an explicit vector,
    with None resolving to a model-dependent default (radius-1 shell for
    Gaussians, zeros otherwise).
    """

    algorithm: str
    step_size: float
    num_draws: int
    seed: int
    num_warmup: int = 0
    chains: int = 1
    L: int | None = None
    max_depth: int = 10
    delta: float = 0.1
    exhaustion_norm: str = "weighted_mean"
    state_sampler: str | None = None
    divergence_threshold: float = 1000.0
    signed_divergence: bool = False
    init: str | np.ndarray | None = None
    init_radius: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.num_draws < 1:
            raise ConfigurationError("num_draws must be >= 1")
        if self.num_warmup < 0:
            raise ConfigurationError("num_warmup must be >= 0")
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive")
        if self.chains < 1:
            raise ConfigurationError("chains must be >= 1")
        if self.algorithm in (STATIC_METROPOLIS, STATIC_UNIFORM) and self.L is None:
            raise ConfigurationError(f"{self.algorithm} requires L")
        if self.state_sampler == SLICE and self.algorithm != ALGORITHM_NUTS:
            raise ConfigurationError("the slice state sampler is only valid for nuts")

    def resolved_state_sampler(self) -> str:
        if self.state_sampler is not None:
            return self.state_sampler
        return SLICE if self.algorithm == ALGORITHM_NUTS else MULTINOMIAL

    def criterion(self) -> TerminationCriterion:
        if self.algorithm == ALGORITHM_NUTS:
            return TerminationCriterion(kind=NUTS)
        if self.algorithm == ALGORITHM_XHMC:
            return TerminationCriterion(
                kind=EXHAUSTION, delta=self.delta, exhaustion_norm=self.exhaustion_norm
            )
        return TerminationCriterion(kind=STATIC_ONLY)

    def step_config(self) -> StepConfig:
        return StepConfig(
            epsilon=self.step_size,
            divergence_threshold=self.divergence_threshold,
            signed_divergence=self.signed_divergence,
        )


@dataclass
class ChainOutput:
    """Draws plus per-draw transition statistics for one chain."""

    draws: np.ndarray
    energy: np.ndarray
    accept_stat: np.ndarray
    n_leapfrog: np.ndarray
    wasted_leapfrog: np.ndarray
    tree_depth: np.ndarray
    divergent: np.ndarray
    max_depth_hit: np.ndarray
    termination_time: np.ndarray
    total_grad_evals: int
    config: SamplerConfig
    chain_index: int = 0

    @property
    def num_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def dimension(self) -> int:
        return self.draws.shape[1]


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, chain_index)."""
    key = np.array([seed % 2**64, chain_index % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _initial_position(sys: HamiltonianSystem, cfg: SamplerConfig, rng) -> np.ndarray:
    init = cfg.init
    if init is None:
        init = INIT_RANDOM_SHELL if isinstance(sys.model, GaussianModel) else INIT_ZERO
    if isinstance(init, str):
        if init == INIT_ZERO:
            return np.zeros(sys.dimension)
        if init == INIT_RANDOM_SHELL:
            u = rng.standard_normal(sys.dimension)
            return cfg.init_radius * u / np.linalg.norm(u)
        raise ConfigurationError(f"unknown init {init!r}")
    q0 = np.asarray(init, dtype=float)
    if q0.shape != (sys.dimension,):
        raise ConfigurationError(
            f"init vector has shape {q0.shape}, expected ({sys.dimension},)"
        )
    return q0


def _make_transition(cfg: SamplerConfig) -> Callable:
    step_cfg = cfg.step_config()
    if cfg.algorithm == STATIC_METROPOLIS:
        return lambda sys, q, rng: static_metropolis_transition(sys, q, cfg.L, step_cfg, rng)
    if cfg.algorithm == STATIC_UNIFORM:
        return lambda sys, q, rng: static_uniform_transition(sys, q, cfg.L, step_cfg, rng)
    crit = cfg.criterion()
    sampler = cfg.resolved_state_sampler()
    return lambda sys, q, rng: dynamic_transition(
        sys, q, crit, cfg.max_depth, step_cfg, rng, state_sampler=sampler
    )


def run_chain(
    sys: HamiltonianSystem,
    cfg: SamplerConfig,
    chain_index: int = 0,
    on_draw: Callable[[int, TransitionRecord], None] | None = None,
) -> ChainOutput:
    """Run one chain: num_warmup discarded transitions, then num_draws recorded.

    Deterministic given (cfg, chain_index); ``on_draw`` is invoked with each
    recorded transition as it is produced (used to stream CSV output).
    """
    rng = chain_rng(cfg.seed, chain_index)
    transition = _make_transition(cfg)

    q = _initial_position(sys, cfg, rng)
    if not math.isfinite(sys.model.potential(q)):
        raise InitializationError("potential is not finite at the initial position")

    n = cfg.num_draws
    draws = np.empty((n, sys.dimension))
    energy = np.empty(n)
    accept_stat = np.empty(n)
    n_leapfrog = np.zeros(n, dtype=int)
    wasted = np.zeros(n, dtype=int)
    tree_depth = np.zeros(n, dtype=int)
    divergent = np.zeros(n, dtype=bool)
    max_depth_hit = np.zeros(n, dtype=bool)
    termination_time = np.empty(n)

    total_grads = 0
    for i in range(cfg.num_warmup + n):
        rec = transition(sys, q, rng)
        q = rec.next_q
        total_grads += rec.n_leapfrog + rec.wasted_leapfrog + 1
        j = i - cfg.num_warmup
        if j < 0:
            continue
        draws[j] = rec.next_q
        energy[j] = rec.energy
        accept_stat[j] = rec.accept_stat
        n_leapfrog[j] = rec.n_leapfrog
        wasted[j] = rec.wasted_leapfrog
        tree_depth[j] = rec.tree_depth
        divergent[j] = rec.divergent
        max_depth_hit[j] = rec.max_depth_hit
        termination_time[j] = rec.termination_time
        if on_draw is not None:
            on_draw(j, rec)

    return ChainOutput(
        draws=draws,
        energy=energy,
        accept_stat=accept_stat,
        n_leapfrog=n_leapfrog,
        wasted_leapfrog=wasted,
        tree_depth=tree_depth,
        divergent=divergent,
        max_depth_hit=max_depth_hit,
        termination_time=termination_time,
        total_grad_evals=total_grads,
        config=cfg,
        chain_index=chain_index,
    )


def run_chains(sys: HamiltonianSystem, cfg: SamplerConfig) -> list[ChainOutput]:
    """Run cfg.chains independent chains serially; outputs depend only on (cfg, index)."""
    return [run_chain(sys, cfg, chain_index=k) for k in range(cfg.chains)]


_SEARCH_FLOOR = 1e-8
_SEARCH_CEIL = 10.0


def coarse_step_search(
    sys: HamiltonianSystem,
    cfg: SamplerConfig,
    target_accept: float = 0.8,
    pilot_draws: int = 40,
) -> float:
    """Bracketed search for the largest step size meeting the acceptance target.

    Runs short pilot chains (at most 20) over step sizes in
    [1e-8, 10], bisecting in log space between a qualifying and a failing
    step size. Deterministic given cfg.seed.
    """
    if not 0.0 < target_accept < 1.0:
        raise ConfigurationError("target_accept must lie in (0, 1)")

    def qualifies(eps: float) -> bool:
        pilot = replace(
            cfg,
            step_size=eps,
            num_draws=pilot_draws,
            num_warmup=0,
            chains=1,
        )
        out = run_chain(sys, pilot, chain_index=0)
        return bool(np.mean(out.accept_stat) >= target_accept)

    if qualifies(_SEARCH_CEIL):
        return _SEARCH_CEIL
    if not qualifies(_SEARCH_FLOOR):
        raise StepSearchError(
            f"no step size in [{_SEARCH_FLOOR}, {_SEARCH_CEIL}] reaches mean "
            f"acceptance {target_accept}; set step_size manually"
        )
    lo = math.log2(_SEARCH_FLOOR)  # qualifies
    hi = math.log2(_SEARCH_CEIL)  # fails
    for _ in range(14):
        mid = 0.5 * (lo + hi)
        if qualifies(2.0**mid):
            lo = mid
        else:
            hi = mid
    return 2.0**lo
