"""Equilibrium MoD ridership and investment payoffs.

Hourly OD ridership responds to the generalized trip cost

    lambda_ij = Q_ij * exp(-gamma * (c_ij + a_IV * VoT * TIV_ij + a_W * TW))

where the expected wait time couples all pairs through the regional total:

    TW = 0.8 * lambda_u^(1/3) * v^(-2/3),   lambda_u = sum_ij lambda_ij.

The fixed point is found by iterating the two maps from lambda_0 = Q until
the wait time moves by less than ``tol`` minutes.  Because TW is the only
coupling, the iteration reduces to a scalar recursion on TW, which this
module exploits to evaluate many demand matrices in one vectorized sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

WAIT_TOL = 0.001      # minutes, convergence tolerance on TW
MAX_ITERATIONS = 1000


class ConvergenceError(RuntimeError):
    """Wait-time iteration failed to converge; carries the last gap."""

    def __init__(self, gap: float, iterations: int):
        super().__init__(
            f"ridership fixed point not converged after {iterations} "
            f"iterations (last wait-time gap {gap:.6g} min)")
        self.gap = gap
        self.iterations = iterations


@dataclass(frozen=True)
class RidershipResult:
    od_ridership: np.ndarray   # lambda_ij, trips/hour
    total: float               # lambda_u
    wait_time: float           # TW, minutes
    iterations: int


def _cost_factor(scenario: Scenario, idx: np.ndarray | None) -> np.ndarray:
    """exp(-gamma * (c + a_IV * VoT * TIV)) for the selected sub-zones."""
    price = scenario.trip_price
    tiv = scenario.in_vehicle_time
    if idx is not None:
        price = price[np.ix_(idx, idx)]
        tiv = tiv[np.ix_(idx, idx)]
    g = scenario.gamma
    return np.exp(-g * (price + scenario.alpha_iv * scenario.value_of_time * tiv))


def _wait_of(total, speed):
    return 0.8 * np.cbrt(total) * speed ** (-2.0 / 3.0)


def _iterate_wait(attracted_sum, init_total, scenario: Scenario, *,
                  tol=WAIT_TOL, cap=MAX_ITERATIONS, damping=1.0):
    """Scalar wait-time recursion, vectorized over independent demand slices.

    ``attracted_sum[m]`` is sum_ij Q_ij * cost_factor_ij for slice m and
    ``init_total[m]`` the slice's raw demand sum (lambda_0 = Q).  Returns the
    per-slice generalized-cost multiplier exp(-gamma*a_W*TW) entering the
    final ridership, plus totals, wait times and iteration counts.  Each
    slice stops on its own gap, so a slice behaves exactly as if run alone.
    """
    attracted_sum = np.atleast_1d(np.asarray(attracted_sum, dtype=float))
    m = attracted_sum.shape[0]
    coeff = scenario.gamma * scenario.alpha_wait
    tw = _wait_of(np.atleast_1d(np.asarray(init_total, dtype=float)), scenario.speed)
    mult = np.ones(m)
    total = np.array(np.atleast_1d(init_total), dtype=float)
    iters = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    while active.any():
        if iters[active].min() >= cap:
            gaps = np.abs(_wait_of(attracted_sum[active] * np.exp(-coeff * tw[active]),
                                   scenario.speed) - tw[active])
            raise ConvergenceError(float(gaps.max()), cap)
        iters[active] += 1
        mult_a = np.exp(-coeff * tw[active])
        total_a = attracted_sum[active] * mult_a
        tw_new = _wait_of(total_a, scenario.speed)
        gap = np.abs(tw_new - tw[active])
        mult[active] = mult_a
        total[active] = total_a
        tw[active] = tw[active] + damping * (tw_new - tw[active])
        done = gap < tol
        idx_active = np.flatnonzero(active)
        active[idx_active[done]] = False
    return mult, total, tw, iters


def equilibrium_ridership(demand: np.ndarray, scenario: Scenario,
                          subzone_index: np.ndarray | None = None, *,
                          initial_ridership: np.ndarray | None = None,
                          tol: float = WAIT_TOL, cap: int = MAX_ITERATIONS,
                          damping: float = 1.0) -> RidershipResult:
    """Fixed-point equilibrium ridership for one demand matrix.

    Parameters
    ----------
    demand
        Non-negative OD matrix over the selected sub-zones.
    subzone_index
        Row/column indices of ``demand`` within the scenario's sub-zone
        order; ``None`` means the full region.
    initial_ridership
        Optional alternative start (default: the demand itself).

    Raises
    ------
    ConvergenceError
        If the wait-time gap is still >= ``tol`` after ``cap`` iterations.
    """
    demand = np.asarray(demand, dtype=float)
    if demand.size == 0:
        raise ValueError("selected sub-zones must be nonempty")
    if demand.ndim != 2 or demand.shape[0] != demand.shape[1]:
        raise ValueError(f"demand must be square, got shape {demand.shape}")
    if np.any(demand < 0):
        raise ValueError("demand entries must be >= 0")
    n = scenario.n_subzones if subzone_index is None else len(subzone_index)
    if demand.shape[0] != n:
        raise ValueError(
            f"demand shape {demand.shape} does not match {n} selected sub-zones")
    factor = _cost_factor(scenario, subzone_index)
    start = demand if initial_ridership is None else np.asarray(initial_ridership)
    mult, total, tw, iters = _iterate_wait(
        (demand * factor).sum(), float(start.sum()), scenario,
        tol=tol, cap=cap, damping=damping)
    return RidershipResult(od_ridership=demand * factor * mult[0],
                           total=float(total[0]), wait_time=float(tw[0]),
                           iterations=int(iters[0]))


def cumulative_ridership(zone_set, demand_at_t: np.ndarray, scenario: Scenario,
                         covered=()) -> float:
    """Total equilibrium ridership over the sub-zones of ``covered | zone_set``.

    Depends only on the zone set (not on ordering).  An empty region has
    ridership 0.
    """
    zone_set = frozenset(zone_set)
    covered = frozenset(covered)
    overlap = zone_set & covered
    if overlap:
        raise ValueError(f"zone_set overlaps covered zones: {sorted(overlap)}")
    region = zone_set | covered
    if not region:
        return 0.0
    idx = scenario.subzone_indices(region)
    sub = np.asarray(demand_at_t, dtype=float)[np.ix_(idx, idx)]
    return equilibrium_ridership(sub, scenario, idx).total


def payoff_threshold(position_h: int, scenario: Scenario,
                     n_covered: int = 0) -> float:
    """Ridership cost of the zone at 1-based ``position_h``: its within-zone
    cost plus 2*(h-1+n_covered) interzone connections to zones already in
    service (earlier in the sequence or covered before it starts)."""
    if position_h < 1:
        raise ValueError("position_h is 1-based and must be >= 1")
    if n_covered < 0:
        raise ValueError("n_covered must be >= 0")
    links = 2 * (position_h - 1 + n_covered)
    return float(scenario.within_zone_cost + links * scenario.interzone_cost)


def zone_payoff(position_h: int, zone_ridership: float, scenario: Scenario,
                n_covered: int = 0) -> float:
    """Investment payoff X - (C_wz + 2*(h - 1 + n_covered) * C_iz) of the
    zone at ``position_h``.  May be negative."""
    return float(zone_ridership - payoff_threshold(position_h, scenario, n_covered))


class RidershipCache:
    """Memo of cumulative equilibrium ridership per zone subset.

    Valuing one sequence walks its prefixes; across sequences the prefixes
    repeat as *sets*, so totals for all horizon steps and paths are computed
    once per subset and reused.  ``covered`` zones are part of every region.
    Not thread-safe; use one cache per worker and share read-only inputs.
    """

    def __init__(self, scenario: Scenario, demand_paths, covered=()):
        self.scenario = scenario
        self.paths = demand_paths
        self.covered = frozenset(covered)
        self._memo: dict[frozenset, tuple[np.ndarray, float]] = {}
        self.hits = 0
        self.misses = 0

    def cumulative(self, prefix) -> tuple[np.ndarray, float]:
        """(totals over [steps x paths], total at t0) for covered | prefix."""
        key = frozenset(prefix)
        got = self._memo.get(key)
        if got is not None:
            self.hits += 1
            return got
        self.misses += 1
        region = key | self.covered
        if not region:
            out = (np.zeros((self.paths.n_steps, self.paths.n_paths)), 0.0)
            self._memo[key] = out
            return out
        scen = self.scenario
        idx = scen.subzone_indices(region)
        factor = _cost_factor(scen, idx)
        sub = self.paths.values[:, :, idx[:, None], idx[None, :]]  # [P,T,k,k]
        p, t = sub.shape[0], sub.shape[1]
        flat = sub.reshape(p * t, len(idx), len(idx))
        attracted = (flat * factor).sum(axis=(1, 2))
        init = flat.sum(axis=(1, 2))
        _, totals, _, _ = _iterate_wait(attracted, init, scen)
        by_step = totals.reshape(p, t).T.copy()  # [T,P]
        sub0 = scen.base_demand[np.ix_(idx, idx)]
        _, tot0, _, _ = _iterate_wait((sub0 * factor).sum(), sub0.sum(), scen)
        out = (by_step, float(tot0[0]))
        self._memo[key] = out
        return out
