"""Multi-option least-squares Monte Carlo valuation of one sequence.

A sequence of zones is a chain of compound deferral options: exercising the
h-th zone creates the right to add the (h+1)-th.  Valuation runs a backward
recursion over time with a nested backward recursion over chain positions.
At each (time, position) the value of waiting is estimated by regressing the
discounted next-step option values on Hermite polynomials of the zone's
current ridership, across all simulated paths; each path then exercises when
the immediate payoff plus the next option's value beats that estimate.
Deferring a zone on a path blocks every later zone on that path at that
time, which keeps per-path stopping times non-decreasing along the chain.

The initial (t0) value of each option is the path average of its discounted
value at its stopping time; paths that never exercise contribute zero.  A
final sweep at t0 compares immediate investment against these continuation
values to fix the invest/defer decisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermevander

from .ridership import RidershipCache, payoff_threshold
from .scenario import Scenario
from .sequences import Sequence
from .stochastic import DemandPaths

NEVER = -1  # stopping-time sentinel: the option is never exercised

DEFAULT_BASIS_SIZE = 3

INVEST = "invest"
DEFER = "defer"


@dataclass(frozen=True)
class RegressionBasis:
    """Hermite least-squares fit of continuation targets on a standardized
    scalar state."""

    degree: int
    coefficients: np.ndarray
    state_mean: float
    state_std: float
    rank_deficient: bool


@dataclass(frozen=True)
class SequenceValuation:
    sequence: Sequence
    policy_value: float
    stopping_times: np.ndarray    # [H, P] indices into horizon_steps, NEVER=-1
    decisions_t0: tuple[str, ...]  # INVEST/DEFER per position
    per_zone_value_t0: np.ndarray  # [H] option values at t0


def continuation_fit(states, targets, j: int = DEFAULT_BASIS_SIZE):
    """Least-squares fit of ``targets`` on He_0..He_{j-1} of the standardized
    state, using all paths.

    Returns ``(basis, fitted)``.  A constant state degenerates to the target
    mean; a rank-deficient design falls back to the minimum-norm (lower
    effective degree) solution and is flagged.
    """
    states = np.asarray(states, dtype=float)
    targets = np.asarray(targets, dtype=float)
    p = states.shape[0]
    if j < 1:
        raise ValueError("basis size must be >= 1")
    if p < j:
        raise ValueError(f"need at least {j} paths for {j} basis functions, got {p}")
    mean = float(states.mean())
    std = float(states.std())
    if std <= 0.0 or not np.isfinite(std):
        fitted = np.full(p, targets.mean())
        coef = np.zeros(j)
        coef[0] = targets.mean()
        return RegressionBasis(j, coef, mean, 0.0, False), fitted
    z = (states - mean) / std
    design = hermevander(z, j - 1)
    coef, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    fitted = design @ coef
    return RegressionBasis(j, coef, mean, std, rank < j), fitted


def valuate_sequence(seq, paths: DemandPaths, scenario: Scenario,
                     covered=(), j: int = DEFAULT_BASIS_SIZE,
                     cache: RidershipCache | None = None) -> SequenceValuation:
    """Value one investment sequence by multi-option LSMC.

    ``covered`` zones are already in service: they join every ridership
    region and shift each position's interzone cost.  Passing a shared
    ``cache`` reuses cumulative ridership across sequences with common
    prefix sets; results are identical with or without it.
    """
    order = tuple(seq.order) if isinstance(seq, Sequence) else tuple(seq)
    seq = Sequence(order) if not isinstance(seq, Sequence) else seq
    covered = frozenset(covered)
    overlap = covered & set(order)
    if overlap:
        raise ValueError(f"sequence zones already covered: {sorted(overlap)}")
    h_len = len(order)
    if h_len == 0:
        return SequenceValuation(seq, 0.0, np.empty((0, paths.n_paths), dtype=int),
                                 (), np.empty(0))
    times = np.asarray(scenario.horizon_steps)
    n_steps = len(times)
    if paths.n_steps != n_steps:
        raise ValueError(
            f"paths cover {paths.n_steps} steps, scenario horizon has {n_steps}")
    n_paths = paths.n_paths
    if cache is None:
        cache = RidershipCache(scenario, paths, covered)

    # Marginal ridership of the h-th zone: cumulative(prefix_h) - cumulative(prefix_{h-1}).
    states = np.empty((h_len, n_steps, n_paths))
    state0 = np.empty(h_len)
    prev, prev0 = cache.cumulative(())
    for h in range(h_len):
        cur, cur0 = cache.cumulative(order[:h + 1])
        states[h] = cur - prev
        state0[h] = cur0 - prev0
        prev, prev0 = cur, cur0
    thresholds = np.array([payoff_threshold(h + 1, scenario, len(covered))
                           for h in range(h_len)])
    payoffs = states - thresholds[:, None, None]      # [H, T, P]
    payoffs0 = state0 - thresholds                    # [H]

    rho = scenario.discount_rate
    # 1-based h; row 0 unused, row h_len+1 is the empty chain (always 0).
    value = np.zeros((h_len + 2, n_paths))
    cash = np.zeros((h_len + 2, n_paths))
    tau = np.full((h_len + 2, n_paths), NEVER, dtype=int)

    for n in range(n_steps - 1, -1, -1):
        expiry = n == n_steps - 1
        disc = 1.0 if expiry else (1.0 + rho) ** (-(times[n + 1] - times[n]))
        value_next = value.copy()
        cash_next = cash.copy()
        tau_next = tau.copy()
        for h in range(h_len, 0, -1):
            if expiry:
                phi = np.zeros(n_paths)
            else:
                _, phi = continuation_fit(states[h - 1, n], disc * value_next[h], j)
            immediate = payoffs[h - 1, n] + value[h + 1]
            ex = immediate >= phi
            value[h, ex] = immediate[ex]
            cash[h, ex] = immediate[ex]
            tau[h, ex] = n
            defer = ~ex
            # Deferring h gates the whole tail of the chain on those paths.
            for m in range(h, h_len + 1):
                value[m, defer] = disc * value_next[m, defer]
                cash[m, defer] = cash_next[m, defer]
                tau[m, defer] = tau_next[m, defer]

    # Option value at t0: discounted value at each path's stopping time,
    # zero for paths that never exercise.
    exercised = tau[1:h_len + 1] != NEVER
    disc_at_tau = np.where(exercised,
                           (1.0 + rho) ** (-times[np.maximum(tau[1:h_len + 1], 0)]),
                           0.0)
    value_t0 = (disc_at_tau * cash[1:h_len + 1]).sum(axis=1) / n_paths

    # t0 invest/defer sweep: invest when today's payoff plus the next
    # option's t0 value beats waiting; a deferral defers the whole tail.
    f0 = np.zeros(h_len + 2)
    f0[1:h_len + 1] = value_t0
    decisions = [DEFER] * h_len
    for h in range(h_len, 0, -1):
        if payoffs0[h - 1] + f0[h + 1] >= f0[h]:
            decisions[h - 1] = INVEST
            f0[h] = payoffs0[h - 1] + f0[h + 1]
        else:
            for m in range(h - 1, h_len):
                decisions[m] = DEFER
    return SequenceValuation(
        sequence=seq,
        policy_value=float(f0[1]),
        stopping_times=tau[1:h_len + 1].copy(),
        decisions_t0=tuple(decisions),
        per_zone_value_t0=f0[1:h_len + 1].copy(),
    )
