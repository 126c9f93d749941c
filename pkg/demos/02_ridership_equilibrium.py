"""Equilibrium ridership: demand damped by price, travel time and waiting.

Ridership on every OD pair decays exponentially with its generalized cost,
and one term of that cost, the expected wait, depends on total regional
ridership, so the two are iterated to a fixed point.  The payoff of adding
a zone is its marginal ridership minus a threshold that grows with the
number of interzone connections it opens.
"""

import numpy as np

from zoneinvest import (cumulative_ridership, equilibrium_ridership,
                        generate_synthetic_scenario, zone_payoff)

scen = generate_synthetic_scenario(seed=3, n_zones=3, subzones_per_zone=3,
                                   demand_scale=80.0)
res = equilibrium_ridership(scen.base_demand, scen)
print(f"potential demand {scen.base_demand.sum():.0f} trips/hr -> "
      f"equilibrium ridership {res.total:.0f} trips/hr")
print(f"wait time {res.wait_time:.2f} min, fixed point in "
      f"{res.iterations} iterations")

# congestion scaling gamma=0 removes the damping entirely
from dataclasses import replace
free = replace(scen, gamma=0.0)
print("with gamma=0 ridership equals demand:",
      np.allclose(equilibrium_ridership(free.base_demand, free).od_ridership,
                  free.base_demand))

# marginal ridership of growing the served region zone by zone
print("\nadding zones in order", scen.zones)
prev = 0.0
for h, zone in enumerate(scen.zones, start=1):
    cur = cumulative_ridership(scen.zones[:h], scen.base_demand, scen)
    marginal = cur - prev
    pay = zone_payoff(h, marginal, scen)
    print(f"  position {h} ({zone}): +{marginal:7.1f} riders/hr, "
          f"payoff {pay:8.1f} (threshold grows by 2x{h - 1} interzone links)")
    prev = cur
