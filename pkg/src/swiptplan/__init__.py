"""Energy-minimizing flight and reflection planning for an aerial
power-and-data transmitter assisted by an amplifying reflective surface."""

from .scenario import (
    FlightPlan,
    ReflectionPlan,
    Scenario,
    ScenarioError,
    default_scenario,
    load_scenario,
    serialize_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "FlightPlan",
    "ReflectionPlan",
    "Scenario",
    "ScenarioError",
    "default_scenario",
    "load_scenario",
    "serialize_scenario",
    "__version__",
]
