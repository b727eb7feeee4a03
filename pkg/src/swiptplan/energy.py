"""Rotary-wing propulsion power and mission energy accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import FlightPlan, Scenario

__all__ = ["EnergyBreakdown", "propulsion_power", "hover_power", "uav_total_energy", "system_energy"]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Mission energy split: flight legs, hovering, radio, surface budget."""

    flight_energy: float
    hover_energy: float
    radiated_energy: float
    ris_energy: float

    @property
    def uav_total(self) -> float:
        return self.flight_energy + self.hover_energy + self.radiated_energy

    @property
    def total(self) -> float:
        return self.uav_total + self.ris_energy


def propulsion_power(sc: Scenario, v: float) -> float:
    """Level-flight propulsion power at speed ``v`` (blade + induced + parasite).

    ``P(v) = P0*(1 + 3v^2/U_tip^2)
           + Pi*(sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2))^(1/2)
           + 0.5*d0*rho*s*A*v^3``
    """
    blade = sc.p0 * (1.0 + 3.0 * v**2 / sc.u_tip**2)
    induced = sc.pi * math.sqrt(
        math.sqrt(1.0 + v**4 / (4.0 * sc.v0**4)) - v**2 / (2.0 * sc.v0**2)
    )
    parasite = 0.5 * sc.d0 * sc.rho * sc.rotor_solidity * sc.rotor_area * v**3
    return blade + induced + parasite


def hover_power(sc: Scenario) -> float:
    """Hover propulsion power ``P(0) = P0 + Pi``."""
    return sc.p0 + sc.pi


def uav_total_energy(sc: Scenario, plan: FlightPlan) -> EnergyBreakdown:
    """Energy drawn by the aircraft: constant-speed legs plus powered hovers.

    The surface's per-hover budget is accounted separately (see
    :func:`system_energy`), so ``ris_energy`` is zero here.
    """
    v = sc.cruise_speed
    flight = propulsion_power(sc, v) * sum(plan.segment_lengths()) / v
    total_hover_time = sum(plan.hover_times)
    hover = hover_power(sc) * total_hover_time
    radiated = sc.radiated_power_w * total_hover_time
    return EnergyBreakdown(flight, hover, radiated, 0.0)


def system_energy(sc: Scenario, plan: FlightPlan) -> EnergyBreakdown:
    """Total system energy under the configured surface mode.

    Passive mode charges the aircraft alone; active mode additionally charges
    the surface's full per-hover energy budget at every hover point,
    regardless of the realized draw.
    """
    breakdown = uav_total_energy(sc, plan)
    if sc.ris_mode == "active":
        ris = sc.ris_energy_budget * len(plan.hover_times)
        return EnergyBreakdown(
            breakdown.flight_energy, breakdown.hover_energy, breakdown.radiated_energy, ris
        )
    return breakdown
