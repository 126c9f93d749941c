"""Rolling-horizon sequential region design over realized demand paths.

An outer simulation realizes demand over decision epochs; at each epoch the
chosen policy re-optimizes the remaining candidate zones against a fresh
inner simulation rooted at the realized demand, and invest-decided zones
join the covered set for the rest of that path.  Per-path NPV discounts the
realized payoffs of the covered zones at every epoch; the profitability
measure divides each epoch's payoff by its ridership before discounting.
Policies are compared path-by-path with a paired t-test whose critical
values come from a built-in two-sided table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .lsmc import INVEST
from .policy import CR, CR_RNN, cr_policy, cr_rnn_policy
from .ridership import cumulative_ridership, zone_payoff
from .scenario import Scenario
from .stochastic import simulate_paths

INVEST_ALL = "invest-all"


@dataclass(frozen=True)
class EpochRecord:
    path: int
    epoch: int
    invested: tuple[str, ...]   # zones added this epoch, in sequence order
    covered: tuple[str, ...]    # full covered set after the epoch, in order
    payoff: float               # realized payoff sum over covered zones
    ridership: float            # realized ridership sum over covered zones


@dataclass(frozen=True)
class RolloutResult:
    policy_kind: str
    records: tuple[EpochRecord, ...]
    npv_per_path: np.ndarray
    pv_profit_per_path: np.ndarray
    pv_profit: float
    diff_stats: dict | None = None


# Two-sided critical values, df 1..30 then the normal limit.
_T_CRIT = {
    0.05: (12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262,
           2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101,
           2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052,
           2.048, 2.045, 2.042, 1.960),
    0.01: (63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250,
           3.169, 3.106, 3.055, 3.012, 2.977, 2.947, 2.921, 2.898, 2.878,
           2.861, 2.845, 2.831, 2.819, 2.807, 2.797, 2.787, 2.779, 2.771,
           2.763, 2.756, 2.750, 2.576),
    0.001: (636.619, 31.599, 12.924, 8.610, 6.869, 5.959, 5.408, 5.041,
            4.781, 4.587, 4.437, 4.318, 4.221, 4.140, 4.073, 4.015, 3.965,
            3.922, 3.883, 3.850, 3.819, 3.792, 3.768, 3.745, 3.725, 3.707,
            3.690, 3.674, 3.659, 3.646, 3.291),
}


def t_critical(df: int, alpha: float) -> float:
    if alpha not in _T_CRIT:
        raise ValueError(f"alpha must be one of {sorted(_T_CRIT)}, got {alpha}")
    if df < 1:
        raise ValueError("df must be >= 1")
    table = _T_CRIT[alpha]
    return table[df - 1] if df <= 30 else table[-1]


def paired_t_test(a, b, alpha: float = 0.05) -> dict:
    """Two-sided paired t-test of mean(a - b) = 0.

    Zero-variance differences give t = +-inf (significant) when the mean is
    nonzero and t = 0 (not significant) when every difference vanishes.
    The confidence interval always uses the alpha = 0.05 critical value.
    """
    if alpha not in _T_CRIT:
        raise ValueError(f"alpha must be one of {sorted(_T_CRIT)}, got {alpha}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    d = a - b
    n = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
        ci = (mean, mean)
        significant = mean != 0.0
    else:
        se = sd / math.sqrt(n)
        t = mean / se
        half = t_critical(df, 0.05) * se
        ci = (mean - half, mean + half)
        significant = abs(t) > t_critical(df, alpha)
    return {"mean_diff": mean, "ci": ci, "t": t, "df": df,
            "significant": significant, "alpha": alpha}


def _epoch_seed(master: int, path: int, epoch: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=(path, epoch))
               .generate_state(1)[0])


def _realized_totals(cov_order, demand, scenario):
    """Payoff and ridership sums over the covered zones (in investment
    order) at one realized demand matrix."""
    payoff = 0.0
    ridership = 0.0
    prev = 0.0
    for h, _ in enumerate(cov_order, start=1):
        cur = cumulative_ridership(cov_order[:h], demand, scenario)
        x = cur - prev
        payoff += zone_payoff(h, x, scenario)
        ridership += x
        prev = cur
    return payoff, ridership


def run_rollout(scenario: Scenario, *, n_paths: int, n_epochs: int, seed: int,
                policy_kind: str, initial_covered=(), inner_paths: int = 300,
                inner: dict | None = None, workers: int = 1) -> RolloutResult:
    """Simulate ``n_paths`` realized futures over ``n_epochs`` yearly epochs
    under one policy.

    ``initial_covered`` zones are in service from the start (positions 1..).
    ``inner`` carries cr_rnn_policy keyword arguments (frac_seq, pnr_max, k,
    thresholds...); each epoch re-seeds its inner simulation and policy from
    (seed, path, epoch) so runs are reproducible and epochs independent of
    path ordering.
    """
    if policy_kind not in (CR, CR_RNN, INVEST_ALL):
        raise ValueError(f"unknown policy kind {policy_kind!r}")
    if n_epochs < 1 or n_paths < 1:
        raise ValueError("n_paths and n_epochs must be >= 1")
    inner = dict(inner or {})
    initial = tuple(initial_covered)
    rho = scenario.discount_rate
    outer_scen = replace(scenario,
                         horizon_steps=tuple(float(e) for e in range(1, n_epochs + 1)))
    outer = simulate_paths(outer_scen, n_paths, seed)

    records = []
    npv = np.zeros(n_paths)
    pv_profit = np.zeros(n_paths)
    for p in range(n_paths):
        cov_order = list(initial)
        for e in range(1, n_epochs + 1):
            demand = outer.values[p, e - 1]
            remaining = sorted(set(scenario.zones) - set(cov_order))
            invested: tuple[str, ...] = ()
            if remaining:
                if policy_kind == INVEST_ALL:
                    if e == 1:
                        invested = tuple(remaining)
                else:
                    epoch_scen = replace(scenario, base_demand=demand)
                    epoch_seed = _epoch_seed(seed, p, e)
                    sim = simulate_paths(epoch_scen, inner_paths, epoch_seed)
                    try:
                        if policy_kind == CR:
                            res = cr_policy(epoch_scen, sim, covered=cov_order,
                                            workers=workers)
                        else:
                            res = cr_rnn_policy(epoch_scen, sim,
                                                covered=cov_order,
                                                seed=epoch_seed,
                                                workers=workers, **inner)
                    except Exception as exc:
                        raise RuntimeError(
                            f"{policy_kind} policy failed at path {p}, "
                            f"epoch {e}: {exc}") from exc
                    invested = tuple(
                        z for z in res.best_sequence.order
                        if res.decisions[z] == INVEST)
                cov_order.extend(invested)
            payoff, ridership = _realized_totals(tuple(cov_order), demand,
                                                 scenario)
            disc = (1.0 + rho) ** (-e)
            npv[p] += disc * payoff
            pv_profit[p] += disc * (payoff / ridership if ridership > 0 else 0.0)
            records.append(EpochRecord(p, e, invested, tuple(cov_order),
                                       payoff, ridership))
    return RolloutResult(
        policy_kind=policy_kind,
        records=tuple(records),
        npv_per_path=npv,
        pv_profit_per_path=pv_profit,
        pv_profit=float(pv_profit.mean()),
    )


def compare_rollouts(result: RolloutResult, benchmark: RolloutResult,
                     alpha: float = 0.05) -> RolloutResult:
    """Attach paired t-test statistics of per-path profitability differences
    (result minus benchmark) to ``result``."""
    stats = paired_t_test(result.pv_profit_per_path,
                          benchmark.pv_profit_per_path, alpha)
    stats["benchmark"] = benchmark.policy_kind
    return replace(result, diff_stats=stats)


def rollout_report(result: RolloutResult, out, config: dict | None = None) -> Path:
    """JSON report (per-epoch decision records, NPV list, profitability,
    t-test block) plus a CSV of the decision table."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": config or {},
        "policy_kind": result.policy_kind,
        "npv_per_path": result.npv_per_path.tolist(),
        "npv_mean": float(result.npv_per_path.mean()),
        "pv_profit_per_path": result.pv_profit_per_path.tolist(),
        "pv_profit": result.pv_profit,
        "diff_stats": result.diff_stats,
        "records": [
            {"path": r.path, "epoch": r.epoch,
             "invested": ",".join(r.invested), "covered": ",".join(r.covered),
             "payoff": r.payoff, "ridership": r.ridership}
            for r in result.records],
    }
    out.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "epoch", "invested", "covered",
                         "payoff", "ridership"])
        for r in result.records:
            writer.writerow([r.path, r.epoch, ",".join(r.invested),
                             ",".join(r.covered), repr(r.payoff),
                             repr(r.ridership)])
    return out
