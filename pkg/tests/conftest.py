import numpy as np
import pytest

from zoneinvest.scenario import DEFAULTS, Scenario, generate_synthetic_scenario


def make_scenario(demand, subzone_to_zone, volatility, *, cwz=0.0, ciz=0.0,
                  gamma=DEFAULTS["gamma"], drift=0.0, price=2.42, tiv=10.0,
                  horizon=DEFAULTS["horizon_steps"],
                  discount=DEFAULTS["discount_rate"]):
    """Hand-built scenario around an explicit demand matrix."""
    n = len(subzone_to_zone)
    demand = np.asarray(demand, dtype=float)
    zones = tuple(dict.fromkeys(subzone_to_zone.values()))
    return Scenario(
        zones=zones,
        subzone_to_zone=dict(subzone_to_zone),
        base_demand=demand,
        trip_price=np.full((n, n), float(price)),
        in_vehicle_time=np.full((n, n), float(tiv)),
        value_of_time=DEFAULTS["value_of_time"],
        alpha_wait=DEFAULTS["alpha_wait"],
        alpha_iv=DEFAULTS["alpha_iv"],
        gamma=gamma,
        speed=DEFAULTS["speed"],
        within_zone_cost=cwz,
        interzone_cost=ciz,
        zone_volatility=dict(volatility),
        drift=drift,
        discount_rate=discount,
        horizon_steps=horizon,
    )


def single_od_scenario(q0, *, sigma=0.3, strike=100.0, gamma=0.0, drift=0.0):
    """One zone, one sub-zone: with gamma=0 the state is the raw GBM demand
    and the payoff is demand - strike."""
    return make_scenario([[q0]], {"a1": "A"}, {"A": sigma}, cwz=strike,
                         gamma=gamma, drift=drift)


@pytest.fixture(scope="session")
def synth7():
    return generate_synthetic_scenario(1, 7, 3, 100.0)


@pytest.fixture(scope="session")
def two_zone():
    demand = [[40.0, 25.0, 10.0, 5.0],
              [20.0, 50.0, 8.0, 12.0],
              [9.0, 6.0, 45.0, 30.0],
              [4.0, 11.0, 22.0, 35.0]]
    mapping = {"a1": "A", "a2": "A", "b1": "B", "b2": "B"}
    return make_scenario(demand, mapping, {"A": 0.2, "B": 0.3},
                         cwz=10.0, ciz=4.0)
