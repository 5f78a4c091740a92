"""Transition kernels over numerical trajectories.

Three families are implemented:

* a static Metropolis kernel that integrates a fixed number of steps and
  accepts the momentum-flipped endpoint;
* a static uniform kernel that places the initial state at a uniformly
  random offset inside a fixed-length trajectory and samples the next state
  from the canonical weights, which makes every trajectory containing a
  state equally likely and hence preserves detailed balance;
* a dynamic kernel that doubles the trajectory in a random time direction
  until a termination criterion fires, rejecting any expansion whose
  interior already satisfies the criterion (or diverges) so that the final
  trajectory is reachable with equal probability from every state it
  contains.

State selection within a trajectory is multinomial in the canonical weights
exp(-H); the dynamic kernel can alternatively slice-sample the final
trajectory (the classic No-U-Turn configuration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .integrator import StepConfig, check_divergence, leapfrog_step
from .phase import HamiltonianSystem, PhasePoint, flip_momentum, sample_momentum
from .termination import (
    SegmentStats,
    TerminationCriterion,
    check_termination,
    merge_stats,
    segment_stats_single,
)

MULTINOMIAL = "multinomial"
SLICE = "slice"

CRITERION_HIT = "criterion_hit"
DIVERGENCE = "divergence"


@dataclass
class TreeSegment:
    """A contiguous trajectory segment with boundary states in time order.

    ``grad_minus``/``grad_plus`` cache the potential gradients at the
    boundaries so expansion never re-evaluates a gradient. ``accept_sum``
    accumulates min(1, exp(h0 - H(z))) over the segment's states. ``states``
    holds (point, energy) pairs for every state when state collection is on
    (slice sampling or enumeration tests) and is None otherwise.
    """

    z_minus: PhasePoint
    z_plus: PhasePoint
    grad_minus: np.ndarray
    grad_plus: np.ndarray
    proposal: PhasePoint
    stats: SegmentStats
    depth: int
    accept_sum: float = 0.0
    divergent: bool = False
    states: list[tuple[PhasePoint, float]] | None = None


@dataclass
class InvalidTree:
    """Failed expansion: the reason plus the cost spent finding out."""

    reason: str
    steps_taken: int
    accept_sum: float = 0.0


@dataclass
class TransitionRecord:
    """Per-draw summary of one transition."""

    next_q: np.ndarray
    energy: float
    accept_stat: float
    n_leapfrog: int
    wasted_leapfrog: int
    tree_depth: int
    divergent: bool
    max_depth_hit: bool
    termination_time: float


def _accept_term(h0: float, h: float) -> float:
    """min(1, exp(h0 - h)) with non-finite energies treated as zero."""
    if not math.isfinite(h):
        return 0.0
    return math.exp(min(0.0, h0 - h))


def _lift(sys, q, rng):
    """Draw a fresh momentum and return (z0, grad0, h0)."""
    grad0 = sys.gradient(q)
    p = sample_momentum(sys.metric, rng)
    z0 = PhasePoint(np.array(q, dtype=float), p)
    h0 = sys.hamiltonian(z0)
    return z0, grad0, h0


def static_metropolis_transition(
    sys: HamiltonianSystem,
    q: np.ndarray,
    L: int,
    cfg: StepConfig,
    rng: np.random.Generator,
) -> TransitionRecord:
    """Integrate L steps and Metropolis-accept the momentum-flipped endpoint.

    The acceptance probability is min(1, exp(-(H(z_L) - H(z_0)))); a
    divergence anywhere along the trajectory rejects automatically.
    """
    if L < 1:
        raise ConfigurationError("L must be >= 1")
    z0, grad, h0 = _lift(sys, q, rng)

    z, h = z0, h0
    accept_sum = 0.0
    steps = 0
    divergent = False
    for _ in range(L):
        z, grad = leapfrog_step(sys, z, cfg.epsilon, grad)
        h = sys.hamiltonian(z)
        steps += 1
        accept_sum += _accept_term(h0, h)
        if check_divergence(h0, h, cfg):
            divergent = True
            break

    if divergent:
        next_q = np.array(q, dtype=float)
    else:
        accept_prob = _accept_term(h0, h)
        z_prop = flip_momentum(z)
        next_q = np.array(z_prop.q if rng.random() < accept_prob else q, dtype=float)

    return TransitionRecord(
        next_q=next_q,
        energy=h0,
        accept_stat=accept_sum / steps,
        n_leapfrog=steps,
        wasted_leapfrog=0,
        tree_depth=0,
        divergent=divergent,
        max_depth_hit=False,
        termination_time=cfg.epsilon * steps,
    )


def static_uniform_transition(
    sys: HamiltonianSystem,
    q: np.ndarray,
    L: int,
    cfg: StepConfig,
    rng: np.random.Generator,
) -> TransitionRecord:
    """Sample uniformly among the L+1 trajectories of L steps containing z0.

    Draws an offset L' ~ U{0..L}, integrates L' steps backward and L - L'
    forward, then samples the reported state from the trajectory-wide
    multinomial in exp(-H). A divergence anywhere marks the draw divergent
    and falls back to the initial position.
    """
    if L < 0:
        raise ConfigurationError("L must be >= 0")
    offset = int(rng.integers(0, L + 1))
    z0, grad0, h0 = _lift(sys, q, rng)

    points = [z0]
    energies = [h0]
    accept_sum = 0.0
    steps = 0
    divergent = False
    for direction, n in ((-1, offset), (1, L - offset)):
        z, grad = z0, grad0
        for _ in range(n):
            z, grad = leapfrog_step(sys, z, direction * cfg.epsilon, grad)
            h = sys.hamiltonian(z)
            steps += 1
            accept_sum += _accept_term(h0, h)
            if check_divergence(h0, h, cfg):
                divergent = True
                break
            points.append(z)
            energies.append(h)
        if divergent:
            break

    if divergent:
        next_q = np.array(q, dtype=float)
    else:
        log_w = -np.array(energies)
        weights = np.exp(log_w - log_w.max())
        idx = rng.choice(len(points), p=weights / weights.sum())
        next_q = np.array(points[idx].q, dtype=float)

    return TransitionRecord(
        next_q=next_q,
        energy=h0,
        accept_stat=accept_sum / steps if steps else 1.0,
        n_leapfrog=steps,
        wasted_leapfrog=0,
        tree_depth=0,
        divergent=divergent,
        max_depth_hit=False,
        termination_time=cfg.epsilon * steps,
    )


def build_tree(
    sys: HamiltonianSystem,
    z_seed: PhasePoint,
    direction: int,
    depth: int,
    crit: TerminationCriterion,
    cfg: StepConfig,
    rng: np.random.Generator,
    grad_seed: np.ndarray | None = None,
    h0: float | None = None,
    collect_states: bool = False,
) -> TreeSegment | InvalidTree:
    """Integrate 2**depth fresh states away from (and excluding) z_seed.

    Recursively builds two half-depth subtrees; every internal merge checks
    the termination criterion on the merged segment (singletons are never
    checked) and any divergence or criterion hit invalidates the whole
    expansion. The returned proposal is sampled progressively: at each merge
    the second child's proposal replaces the first's with probability
    proportional to its total canonical weight, which composes to the exact
    trajectory-wide multinomial.

    ``h0`` is the reference energy for divergence checks (defaults to the
    seed's energy); ``grad_seed`` caches the gradient at the seed.
    """
    if depth < 0:
        raise ConfigurationError("depth must be >= 0")
    if direction not in (-1, 1):
        raise ConfigurationError("direction must be +1 or -1")
    if grad_seed is None:
        grad_seed = sys.gradient(z_seed.q)
    if h0 is None:
        h0 = sys.hamiltonian(z_seed)

    if depth == 0:
        z, grad = leapfrog_step(sys, z_seed, direction * cfg.epsilon, grad_seed)
        h = sys.hamiltonian(z)
        accept = _accept_term(h0, h)
        if check_divergence(h0, h, cfg):
            return InvalidTree(DIVERGENCE, 1, accept)
        return TreeSegment(
            z_minus=z,
            z_plus=z,
            grad_minus=grad,
            grad_plus=grad,
            proposal=z,
            stats=segment_stats_single(sys, z, h=h, grad=grad),
            depth=0,
            accept_sum=accept,
            states=[(z, h)] if collect_states else None,
        )

    inner = build_tree(
        sys, z_seed, direction, depth - 1, crit, cfg, rng,
        grad_seed=grad_seed, h0=h0, collect_states=collect_states,
    )
    if isinstance(inner, InvalidTree):
        return inner
    half = 2 ** (depth - 1)
    if direction == 1:
        far_z, far_grad = inner.z_plus, inner.grad_plus
    else:
        far_z, far_grad = inner.z_minus, inner.grad_minus
    outer = build_tree(
        sys, far_z, direction, depth - 1, crit, cfg, rng,
        grad_seed=far_grad, h0=h0, collect_states=collect_states,
    )
    accept_sum = inner.accept_sum + outer.accept_sum
    if isinstance(outer, InvalidTree):
        return InvalidTree(outer.reason, half + outer.steps_taken, accept_sum)

    stats = merge_stats(inner.stats, outer.stats)
    if direction == 1:
        lo, hi = inner, outer
    else:
        lo, hi = outer, inner
    if check_termination(crit, stats, lo.z_minus, hi.z_plus, sys.metric):
        return InvalidTree(CRITERION_HIT, 2 * half, accept_sum)

    p_outer = math.exp(
        outer.stats.log_weight
        - np.logaddexp(inner.stats.log_weight, outer.stats.log_weight)
    )
    proposal = outer.proposal if rng.random() < p_outer else inner.proposal

    states = None
    if collect_states:
        states = (lo.states or []) + (hi.states or [])
    return TreeSegment(
        z_minus=lo.z_minus,
        z_plus=hi.z_plus,
        grad_minus=lo.grad_minus,
        grad_plus=hi.grad_plus,
        proposal=proposal,
        stats=stats,
        depth=depth,
        accept_sum=accept_sum,
        states=states,
    )


def slice_sample_trajectory(
    sys: HamiltonianSystem,
    states: list[PhasePoint],
    rng: np.random.Generator,
    energies: list[float] | None = None,
) -> PhasePoint:
    """Slice-sample a state from a trajectory anchored at its first element z0.

    Draws u ~ U(0, 1) and picks uniformly among the states with
    exp(-H(z)) > u * exp(-H(z0)); z0 itself always qualifies, so the
    candidate set is nonempty by construction.
    """
    if not states:
        raise ConfigurationError("state list must be non-empty")
    if energies is None:
        energies = [sys.hamiltonian(z) for z in states]
    h0 = energies[0]
    u = rng.random()
    log_u = math.log(u) if u > 0.0 else -math.inf
    # exp(-h) > u * exp(-h0)  <=>  h0 - h > log u
    candidates = [i for i, h in enumerate(energies) if h0 - h > log_u]
    if not candidates:
        return states[0]
    return states[int(rng.choice(np.array(candidates)))]


def dynamic_transition(
    sys: HamiltonianSystem,
    q: np.ndarray,
    crit: TerminationCriterion,
    max_depth: int,
    cfg: StepConfig,
    rng: np.random.Generator,
    state_sampler: str = MULTINOMIAL,
) -> TransitionRecord:
    """Multiplicative trajectory expansion with subtree validation.

    Starting from the lifted singleton {z0}, repeatedly picks a uniformly
    random time direction, builds a same-size subtree from that boundary,
    and stops when the expansion is rejected (interior criterion hit or
    divergence) or the criterion holds on the full merged trajectory. A
    rejected expansion never discards the trajectory built so far; its
    steps are reported separately as wasted_leapfrog.
    """
    if max_depth < 1:
        raise ConfigurationError("max_depth must be >= 1")
    if state_sampler not in (MULTINOMIAL, SLICE):
        raise ConfigurationError(f"unknown state sampler {state_sampler!r}")
    collect = state_sampler == SLICE

    z0, grad0, h0 = _lift(sys, q, rng)
    stats = segment_stats_single(sys, z0, h=h0, grad=grad0)
    z_minus = z_plus = z0
    grad_minus = grad_plus = grad0
    proposal = z0
    states = [(z0, h0)] if collect else None

    n_leapfrog = 0
    wasted = 0
    accept_sum = 0.0
    divergent = False
    max_depth_hit = False
    depth = 0
    while True:
        if depth == max_depth:
            max_depth_hit = True
            break
        direction = 1 if rng.integers(0, 2) == 1 else -1
        if direction == 1:
            seed, grad_seed = z_plus, grad_plus
        else:
            seed, grad_seed = z_minus, grad_minus
        new = build_tree(
            sys, seed, direction, depth, crit, cfg, rng,
            grad_seed=grad_seed, h0=h0, collect_states=collect,
        )
        if isinstance(new, InvalidTree):
            wasted += new.steps_taken
            accept_sum += new.accept_sum
            divergent = new.reason == DIVERGENCE
            break

        n_leapfrog += new.stats.n_states
        accept_sum += new.accept_sum
        p_new = math.exp(
            new.stats.log_weight - np.logaddexp(stats.log_weight, new.stats.log_weight)
        )
        if rng.random() < p_new:
            proposal = new.proposal
        stats = merge_stats(stats, new.stats)
        if direction == 1:
            z_plus, grad_plus = new.z_plus, new.grad_plus
        else:
            z_minus, grad_minus = new.z_minus, new.grad_minus
        if collect:
            states.extend(new.states)
        depth += 1
        if check_termination(crit, stats, z_minus, z_plus, sys.metric):
            break

    if collect:
        pts = [z for z, _ in states]
        hs = [h for _, h in states]
        proposal = slice_sample_trajectory(sys, pts, rng, energies=hs)

    total_steps = n_leapfrog + wasted
    return TransitionRecord(
        next_q=np.array(proposal.q, dtype=float),
        energy=h0,
        accept_stat=accept_sum / total_steps if total_steps else 1.0,
        n_leapfrog=n_leapfrog,
        wasted_leapfrog=wasted,
        tree_depth=depth,
        divergent=divergent,
        max_depth_hit=max_depth_hit,
        termination_time=cfg.epsilon * n_leapfrog,
    )
