"""Value a single investment ordering as a chain of deferral options.

Each zone in the ordering is an option: exercise it (invest, collect the
payoff, unlock the next zone) or wait.  Least-squares Monte Carlo regresses
the value of waiting on the zone's current ridership across simulated
futures and exercises path by path.  The result is the ordering's policy
value at t0, per-zone stopping times and today's invest/defer decisions.
"""

import numpy as np

from zoneinvest import (NEVER, Sequence, generate_synthetic_scenario,
                        simulate_paths, valuate_sequence)
from zoneinvest.policy import deterministic_npv

scen = generate_synthetic_scenario(seed=4, n_zones=5, subzones_per_zone=3,
                                   demand_scale=100.0)
paths = simulate_paths(scen, n_paths=300, seed=11)

seq = Sequence(scen.zones)
val = valuate_sequence(seq, paths, scen)
npv = deterministic_npv(seq.order, scen)

print("ordering:", str(seq))
print(f"policy value (expanded NPV): {val.policy_value:9.1f}")
print(f"invest-everything-now NPV:   {npv:9.1f}")
print(f"value of flexibility:        {val.policy_value - npv:9.1f}")

print("\nper-zone view:")
for h, zone in enumerate(seq.order):
    tau = val.stopping_times[h]
    never = (tau == NEVER).mean()
    exercised = tau[tau != NEVER]
    when = (f"median exercise year "
            f"{np.median([scen.horizon_steps[t] for t in exercised]):.0f}"
            if exercised.size else "never exercised")
    print(f"  {zone}: t0 decision {val.decisions_t0[h]:6s}, option value "
          f"{val.per_zone_value_t0[h]:8.1f}, {when}, "
          f"{100 * never:.0f}% of paths never invest")
