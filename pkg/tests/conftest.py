import numpy as np
import pytest

from swiptplan.scenario import FlightPlan, Scenario, default_scenario


@pytest.fixture(scope="session")
def sc_default() -> Scenario:
    return default_scenario()


@pytest.fixture(scope="session")
def sc_single_user() -> Scenario:
    return default_scenario(
        users=(complex(-30.0, 0.0),),
        tx_power=(0.2,),
        sinr_thresholds=(0.1,),
        energy_requirements=(4e-5,),
    )


def tiny_scenario(seed: int = 0) -> Scenario:
    """One user, one element, one hover point; geometry jittered by seed."""
    rng = np.random.default_rng(seed)
    user = complex(-30.0 + rng.uniform(-4, 4), rng.uniform(-3, 3))
    return default_scenario(
        users=(user,),
        tx_power=(0.2,),
        sinr_thresholds=(0.1,),
        energy_requirements=(4e-5,),
        num_segments=2,
        num_elements=1,
    )


def tiny_plan(sc: Scenario, seed: int = 0, hover_time: float = 2.0) -> FlightPlan:
    rng = np.random.default_rng(seed + 17)
    hover = complex(-10.0 + rng.uniform(-5, 5), rng.uniform(0, 4))
    return FlightPlan((sc.uav_start, hover, sc.uav_end), (hover_time,))


def random_phi(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
