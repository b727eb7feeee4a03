"""Problem instance definition, config ingestion, and shared geometry.

A :class:`Scenario` bundles everything that stays fixed during an
optimization run: node geometry, RF constants, power budgets, rotary-wing
propulsion constants, and algorithm knobs.  Positions in the horizontal
plane are stored as complex numbers ``x + 1j*y`` (meters); heights are
separate positive scalars.  All values are SI (meters, watts, joules,
radians); decibel quantities appear only in the config file, in keys with
an explicit ``_db``/``_dbm`` suffix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import yaml

__all__ = [
    "Scenario",
    "FlightPlan",
    "ReflectionPlan",
    "ScenarioError",
    "ROTARY_WING_DEFAULTS",
    "load_scenario",
    "serialize_scenario",
    "default_scenario",
    "link_distances",
]


class ScenarioError(ValueError):
    """Raised when a config fails to parse or violates an invariant."""


# Canonical rotary-wing propulsion constants (blade profile / induced /
# parasite model).  Overridable through the ``propulsion`` config block.
ROTARY_WING_DEFAULTS = {
    "p0_w": 79.8563,
    "pi_w": 88.6279,
    "u_tip_mps": 120.0,
    "v0_mps": 4.03,
    "d0": 0.6,
    "rho_kgm3": 1.225,
    "s": 0.05,
    "a_m2": 0.503,
}

_SQRT2 = math.sqrt(2.0)

# Five-user semicircle layout used by the bundled default scenario.
_DEFAULT_USERS = (
    complex(-30.0, 0.0),
    complex(-15.0 * _SQRT2, 15.0 * _SQRT2),
    complex(0.0, 30.0),
    complex(30.0, 0.0),
    complex(15.0 * _SQRT2 / 2.0, 15.0 * _SQRT2 / 2.0),
)


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance shared by every module.

    Safe to share across threads; all mutation happens by ``dataclasses.replace``.
    """

    # geometry
    ris_position: complex = 0.0 + 0.0j
    ris_height: float = 10.0
    users: tuple[complex, ...] = _DEFAULT_USERS
    uav_height: float = 20.0
    uav_start: complex = complex(-35.0, 0.0)
    uav_end: complex = complex(35.0, 0.0)
    num_segments: int = 5

    # RF
    num_elements: int = 32
    wavelength: float = 1.0
    element_spacing: float = 0.5
    mu_direct: float = 10.0
    mu_uav_ris: float = 10.0
    mu_ris_user: float = 10.0
    tau_direct: float = 2.4
    tau_uav_ris: float = 2.3
    tau_ris_user: float = 2.3
    reference_gain: float = 1e-3
    noise_user: float = 1e-11
    noise_ris: float = 1e-11

    # power / service requirements
    tx_power: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    split_ratio: float = 0.5
    sinr_thresholds: tuple[float, ...] = (0.1, 0.1, 0.1, 0.1, 0.1)
    energy_requirements: tuple[float, ...] = (4e-5,) * 5
    ris_energy_budget: float = 20.0
    ris_mode: str = "active"
    cruise_speed: float = 18.3
    radiated_power: float | None = None

    # propulsion (rotary-wing constants)
    p0: float = ROTARY_WING_DEFAULTS["p0_w"]
    pi: float = ROTARY_WING_DEFAULTS["pi_w"]
    u_tip: float = ROTARY_WING_DEFAULTS["u_tip_mps"]
    v0: float = ROTARY_WING_DEFAULTS["v0_mps"]
    d0: float = ROTARY_WING_DEFAULTS["d0"]
    rho: float = ROTARY_WING_DEFAULTS["rho_kgm3"]
    rotor_solidity: float = ROTARY_WING_DEFAULTS["s"]
    rotor_area: float = ROTARY_WING_DEFAULTS["a_m2"]

    # algorithm knobs
    tolerance: float = 1e-3
    x_max: int = 3
    n_max: int = 10
    r_max: int = 10

    def __post_init__(self) -> None:
        _validate(self)

    # -- derived quantities -------------------------------------------------

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_hovers(self) -> int:
        """Number of hover points (one per interior trajectory vertex)."""
        return self.num_segments - 1

    @property
    def total_tx_power(self) -> float:
        return float(sum(self.tx_power))

    @property
    def radiated_power_w(self) -> float:
        """Power radiated while hovering; defaults to the summed user powers."""
        if self.radiated_power is not None:
            return self.radiated_power
        return self.total_tx_power

    @property
    def ris_noise_w(self) -> float:
        """Effective reflect-side noise power: zero for a passive surface."""
        return self.noise_ris if self.ris_mode == "active" else 0.0

    def with_overrides(self, **kwargs) -> "Scenario":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class FlightPlan:
    """Hover positions ``q_0..q_L`` (endpoints fixed) and hover durations."""

    hover_positions: tuple[complex, ...]
    hover_times: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.hover_positions) != len(self.hover_times) + 2:
            raise ScenarioError(
                "flight plan needs L+1 vertices and L-1 hover times "
                f"(got {len(self.hover_positions)} vertices, {len(self.hover_times)} times)"
            )
        if any(t < 0 for t in self.hover_times):
            raise ScenarioError("hover times must be nonnegative")

    @property
    def interior(self) -> tuple[complex, ...]:
        """The hover points (excludes the fixed start/end vertices)."""
        return self.hover_positions[1:-1]

    def segment_lengths(self) -> list[float]:
        q = self.hover_positions
        return [abs(q[i] - q[i - 1]) for i in range(1, len(q))]

    def matches_endpoints(self, sc: Scenario) -> bool:
        return (
            abs(self.hover_positions[0] - sc.uav_start) < 1e-9
            and abs(self.hover_positions[-1] - sc.uav_end) < 1e-9
        )


@dataclass(frozen=True)
class ReflectionPlan:
    """Per-hover complex reflection vectors (amplitude * exp(j*phase))."""

    phi: tuple[tuple[complex, ...], ...]

    def __post_init__(self) -> None:
        for vec in self.phi:
            for entry in vec:
                if not (math.isfinite(entry.real) and math.isfinite(entry.imag)):
                    raise ScenarioError("reflection coefficients must be finite")

    @property
    def num_hovers(self) -> int:
        return len(self.phi)

    @property
    def num_elements(self) -> int:
        return len(self.phi[0]) if self.phi else 0


# ---------------------------------------------------------------------------
# validation


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def _validate(sc: Scenario) -> None:
    k = len(sc.users)
    _require(k >= 1, "need at least one user")
    _require(sc.num_elements >= 1, "num_elements must be >= 1")
    _require(sc.num_segments >= 2, "num_segments must be >= 2")
    _require(sc.ris_height > 0, "ris_height must be positive")
    _require(sc.uav_height > 0, "uav_height must be positive")
    _require(sc.uav_height > sc.ris_height, "uav must fly above the surface (uav_height > ris_height)")
    _require(0.0 <= sc.split_ratio <= 1.0, "split_ratio out of [0,1]")
    _require(sc.wavelength > 0, "wavelength must be positive")
    _require(0 < sc.element_spacing <= sc.wavelength, "element_spacing must be in (0, wavelength]")
    _require(len(sc.tx_power) == k, "tx_power length must match number of users")
    _require(len(sc.sinr_thresholds) == k, "sinr_thresholds length must match number of users")
    _require(len(sc.energy_requirements) == k, "energy_requirements length must match number of users")
    _require(all(p > 0 for p in sc.tx_power), "tx powers must be strictly positive")
    _require(all(g > 0 for g in sc.sinr_thresholds), "sinr thresholds must be strictly positive")
    _require(all(e > 0 for e in sc.energy_requirements), "energy requirements must be strictly positive")
    _require(sc.noise_user > 0, "noise_user must be strictly positive")
    _require(sc.noise_ris > 0, "noise_ris must be strictly positive")
    _require(sc.ris_energy_budget > 0, "ris_energy_budget must be strictly positive")
    _require(sc.reference_gain > 0, "reference_gain must be strictly positive")
    _require(sc.cruise_speed > 0, "cruise_speed must be strictly positive")
    _require(sc.ris_mode in ("active", "passive"), "ris_mode must be 'active' or 'passive'")
    _require(min(sc.mu_direct, sc.mu_uav_ris, sc.mu_ris_user) >= 0, "rician factors must be nonnegative")
    _require(min(sc.tau_direct, sc.tau_uav_ris, sc.tau_ris_user) > 0, "pathloss exponents must be positive")
    for name in ("p0", "pi", "u_tip", "v0", "d0", "rho", "rotor_solidity", "rotor_area"):
        _require(getattr(sc, name) > 0, f"propulsion constant {name} must be positive")
    _require(sc.tolerance > 0, "tolerance must be positive")
    _require(min(sc.x_max, sc.n_max, sc.r_max) >= 1, "iteration caps must be >= 1")
    if sc.radiated_power is not None:
        _require(sc.radiated_power > 0, "radiated_power_w must be strictly positive")
    # Decoding must remain possible against worst-case same-cell interference.
    for idx in range(k):
        other = sum(sc.tx_power) - sc.tx_power[idx]
        if sc.tx_power[idx] - sc.sinr_thresholds[idx] * other <= 0:
            raise ScenarioError(
                f"sinr threshold for user {idx + 1} unreachable: "
                "p_k - gamma_k * sum(p_j, j != k) must be positive"
            )


# ---------------------------------------------------------------------------
# geometry


def link_distances(sc: Scenario, q: complex, k: int) -> tuple[float, float, float, float, float]:
    """Link geometry for user ``k`` with the transmitter hovering at ``q``.

    Returns ``(d_direct, d_tx_ris, d_ris_user, cos_aoa, cos_aod)`` where the
    cosines are taken along the reflective array's axis (x-axis of the
    horizontal plane).
    """
    user = sc.users[k]
    d_direct = math.sqrt(abs(q - user) ** 2 + sc.uav_height**2)
    d_tx_ris = math.sqrt(abs(q - sc.ris_position) ** 2 + (sc.uav_height - sc.ris_height) ** 2)
    d_ris_user = math.sqrt(abs(user - sc.ris_position) ** 2 + sc.ris_height**2)
    cos_aoa = (sc.ris_position.real - q.real) / d_tx_ris
    cos_aod = (user.real - sc.ris_position.real) / d_ris_user
    return d_direct, d_tx_ris, d_ris_user, cos_aoa, cos_aod


# ---------------------------------------------------------------------------
# config ingestion

_DB = 10.0


def _db_to_linear(db: float) -> float:
    return _DB ** (db / 10.0)


def _linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def _as_xy(value, key: str) -> complex:
    try:
        x, y = value
        return complex(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{key} must be a [x, y] pair") from exc


def _per_user(value, k: int, key: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * k
    seq = [float(v) for v in value]
    if len(seq) != k:
        raise ScenarioError(f"{key} must be scalar or one value per user")
    return tuple(seq)


def load_scenario(config_text: str) -> Scenario:
    """Parse a YAML config into a validated :class:`Scenario`.

    Missing optional keys fall back to the documented defaults; a malformed
    document or an invariant violation raises :class:`ScenarioError` naming
    the offending key.
    """
    try:
        raw = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"config parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("config must be a mapping with geometry/rf/power/algorithm blocks")

    geo = raw.get("geometry", {}) or {}
    rf = raw.get("rf", {}) or {}
    power = raw.get("power", {}) or {}
    algo = raw.get("algorithm", {}) or {}
    prop = raw.get("propulsion", {}) or {}
    for name, block in (("geometry", geo), ("rf", rf), ("power", power),
                        ("algorithm", algo), ("propulsion", prop)):
        if not isinstance(block, dict):
            raise ScenarioError(f"{name} block must be a mapping")

    kwargs: dict = {}

    if "users" in geo:
        users = tuple(_as_xy(u, "geometry.users[i]") for u in geo["users"])
        if not users:
            raise ScenarioError("need at least one user")
        kwargs["users"] = users
    if "ris_position" in geo:
        kwargs["ris_position"] = _as_xy(geo["ris_position"], "geometry.ris_position")
    if "uav_start" in geo:
        kwargs["uav_start"] = _as_xy(geo["uav_start"], "geometry.uav_start")
    if "uav_end" in geo:
        kwargs["uav_end"] = _as_xy(geo["uav_end"], "geometry.uav_end")
    for src, dst in (("ris_height_m", "ris_height"), ("uav_height_m", "uav_height")):
        if src in geo:
            kwargs[dst] = float(geo[src])
    if "num_segments" in geo:
        kwargs["num_segments"] = int(geo["num_segments"])

    for src, dst in (
        ("num_elements", "num_elements"),
        ("wavelength_m", "wavelength"),
        ("element_spacing_m", "element_spacing"),
        ("rician_factor_direct", "mu_direct"),
        ("rician_factor_uav_ris", "mu_uav_ris"),
        ("rician_factor_ris_user", "mu_ris_user"),
        ("pathloss_exp_direct", "tau_direct"),
        ("pathloss_exp_uav_ris", "tau_uav_ris"),
        ("pathloss_exp_ris_user", "tau_ris_user"),
    ):
        if src in rf:
            kwargs[dst] = int(rf[src]) if dst == "num_elements" else float(rf[src])
    if "reference_gain_db" in rf:
        kwargs["reference_gain"] = _db_to_linear(float(rf["reference_gain_db"]))
    if "noise_user_dbm" in rf:
        kwargs["noise_user"] = _db_to_linear(float(rf["noise_user_dbm"]) - 30.0)
    if "noise_ris_dbm" in rf:
        kwargs["noise_ris"] = _db_to_linear(float(rf["noise_ris_dbm"]) - 30.0)

    k = len(kwargs.get("users", _DEFAULT_USERS))
    if "per_user_tx_power_w" in power:
        kwargs["tx_power"] = _per_user(power["per_user_tx_power_w"], k, "power.per_user_tx_power_w")
    if "split_ratio" in power:
        kwargs["split_ratio"] = float(power["split_ratio"])
    if "gamma_db" in power:
        gammas = _per_user(power["gamma_db"], k, "power.gamma_db")
        kwargs["sinr_thresholds"] = tuple(_db_to_linear(g) for g in gammas)
    if "e_req_mj" in power:
        reqs = _per_user(power["e_req_mj"], k, "power.e_req_mj")
        kwargs["energy_requirements"] = tuple(r * 1e-3 for r in reqs)
    if "ris_energy_budget_j" in power:
        kwargs["ris_energy_budget"] = float(power["ris_energy_budget_j"])
    if "ris_mode" in power:
        kwargs["ris_mode"] = str(power["ris_mode"])
    if "cruise_speed_mps" in power:
        kwargs["cruise_speed"] = float(power["cruise_speed_mps"])
    if "radiated_power_w" in power:
        kwargs["radiated_power"] = float(power["radiated_power_w"])
    elif "tx_power" in kwargs and "radiated_power" not in kwargs:
        pass  # default property sums the per-user powers

    for src, dst in (
        ("p0_w", "p0"),
        ("pi_w", "pi"),
        ("u_tip_mps", "u_tip"),
        ("v0_mps", "v0"),
        ("d0", "d0"),
        ("rho_kgm3", "rho"),
        ("s", "rotor_solidity"),
        ("a_m2", "rotor_area"),
    ):
        if src in prop:
            kwargs[dst] = float(prop[src])

    for src, dst in (("tolerance", "tolerance"), ("x_max", "x_max"), ("n_max", "n_max"), ("r_max", "r_max")):
        if src in algo:
            kwargs[dst] = float(algo[src]) if dst == "tolerance" else int(algo[src])

    return Scenario(**kwargs)


def serialize_scenario(sc: Scenario) -> str:
    """Emit a YAML config that round-trips through :func:`load_scenario`."""
    doc = {
        "geometry": {
            "ris_position": [sc.ris_position.real, sc.ris_position.imag],
            "ris_height_m": sc.ris_height,
            "uav_height_m": sc.uav_height,
            "uav_start": [sc.uav_start.real, sc.uav_start.imag],
            "uav_end": [sc.uav_end.real, sc.uav_end.imag],
            "num_segments": sc.num_segments,
            "users": [[u.real, u.imag] for u in sc.users],
        },
        "rf": {
            "num_elements": sc.num_elements,
            "wavelength_m": sc.wavelength,
            "element_spacing_m": sc.element_spacing,
            "rician_factor_direct": sc.mu_direct,
            "rician_factor_uav_ris": sc.mu_uav_ris,
            "rician_factor_ris_user": sc.mu_ris_user,
            "pathloss_exp_direct": sc.tau_direct,
            "pathloss_exp_uav_ris": sc.tau_uav_ris,
            "pathloss_exp_ris_user": sc.tau_ris_user,
            "reference_gain_db": _linear_to_db(sc.reference_gain),
            "noise_user_dbm": _linear_to_db(sc.noise_user) + 30.0,
            "noise_ris_dbm": _linear_to_db(sc.noise_ris) + 30.0,
        },
        "power": {
            "per_user_tx_power_w": list(sc.tx_power),
            "split_ratio": sc.split_ratio,
            "gamma_db": [_linear_to_db(g) for g in sc.sinr_thresholds],
            "e_req_mj": [e * 1e3 for e in sc.energy_requirements],
            "ris_energy_budget_j": sc.ris_energy_budget,
            "ris_mode": sc.ris_mode,
            "cruise_speed_mps": sc.cruise_speed,
        },
        "propulsion": {
            "p0_w": sc.p0,
            "pi_w": sc.pi,
            "u_tip_mps": sc.u_tip,
            "v0_mps": sc.v0,
            "d0": sc.d0,
            "rho_kgm3": sc.rho,
            "s": sc.rotor_solidity,
            "a_m2": sc.rotor_area,
        },
        "algorithm": {
            "tolerance": sc.tolerance,
            "x_max": sc.x_max,
            "n_max": sc.n_max,
            "r_max": sc.r_max,
        },
    }
    if sc.radiated_power is not None:
        doc["power"]["radiated_power_w"] = sc.radiated_power
    return yaml.safe_dump(doc, sort_keys=False)


def default_scenario(**overrides) -> Scenario:
    """The bundled five-user semicircle scenario (all fields overridable)."""
    return Scenario(**overrides)
