"""Hover-position and hover-time subproblem for fixed reflection vectors.

The mission energy (flight legs plus powered hovers) is minimized subject to
per-user SINR and charged-energy requirements and the surface's per-hover
energy budget.  Nonconvex pieces are replaced at each iterate by

* tangent minorants of the pathloss gains in the squared horizontal
  distance (``pathloss_tangents``),
* a tangent minorant of the squared distance to the surface
  (``horizontal_distance_tangent``),
* tangents of the harvest-share squares and of ``1/t``,
* a frozen cascaded phase profile inside the harvest quadratic form
  (re-expanded every iteration; its gap is audited a posteriori).

The fractional-power pathloss factor in the surface-energy constraint is
represented exactly for rational exponents through a geometric-mean tower of
rotated cones.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .channel import compute_stats, harvested_power, sinr
from .conic import ConicProgram, solve
from .energy import hover_power, propulsion_power, uav_total_energy
from .scenario import FlightPlan, Scenario

__all__ = [
    "PathlossTangent",
    "AffineTangent",
    "TrajectoryResult",
    "harvest_u_coefficients",
    "pathloss_tangents",
    "horizontal_distance_tangent",
    "build_trajectory_subproblem",
    "solve_trajectory_sca",
    "audit_exact_constraints",
]

log = logging.getLogger(__name__)

T_MIN = 1e-3  # hover-time floor for the 1/t tangent
T_CAP = 4096.0  # conditioning cap on hover times (above the doubling ladder)
Y_FLOOR = 1e-5  # harvest-share expansion floor


@dataclass(frozen=True)
class PathlossTangent:
    """Affine minorant of ``beta0 / (u + height_sq)^(tau/2)`` in ``u = |q - anchor|^2``."""

    anchor: complex
    value: float  # tangent value at the expansion point
    slope: float  # positive: minorant decreases in u
    u_n: float  # expansion point |q_n - anchor|^2

    def evaluate(self, q: complex) -> float:
        u = abs(q - self.anchor) ** 2
        return self.value - self.slope * (u - self.u_n)


@dataclass(frozen=True)
class AffineTangent:
    """Affine minorant of ``|q - anchor|^2`` expanded at ``q_n``."""

    anchor: complex
    q_n: complex

    @property
    def constant(self) -> float:
        # Q(q_n) - 2 (q_n - anchor) . q_n, written for the affine row
        dx = self.q_n.real - self.anchor.real
        dy = self.q_n.imag - self.anchor.imag
        return (dx**2 + dy**2) - 2.0 * (dx * self.q_n.real + dy * self.q_n.imag)

    @property
    def coef_x(self) -> float:
        return 2.0 * (self.q_n.real - self.anchor.real)

    @property
    def coef_y(self) -> float:
        return 2.0 * (self.q_n.imag - self.anchor.imag)

    def evaluate(self, q: complex) -> float:
        return self.constant + self.coef_x * q.real + self.coef_y * q.imag


def pathloss_tangents(
    sc: Scenario, q_n: complex, k: int
) -> tuple[PathlossTangent, PathlossTangent]:
    """Minorants of the direct-link and feeder-link gains at ``q_n``."""
    beta0 = sc.reference_gain

    u_d = abs(q_n - sc.users[k]) ** 2
    h_d = sc.uav_height**2
    base_d = u_d + h_d
    val_d = beta0 / base_d ** (sc.tau_direct / 2.0)
    slope_d = sc.tau_direct * beta0 / (2.0 * base_d ** (sc.tau_direct / 2.0 + 1.0))

    u_t = abs(q_n - sc.ris_position) ** 2
    h_t = (sc.uav_height - sc.ris_height) ** 2
    base_t = u_t + h_t
    val_t = beta0 / base_t ** (sc.tau_uav_ris / 2.0)
    slope_t = sc.tau_uav_ris * beta0 / (2.0 * base_t ** (sc.tau_uav_ris / 2.0 + 1.0))

    return (
        PathlossTangent(sc.users[k], val_d, slope_d, u_d),
        PathlossTangent(sc.ris_position, val_t, slope_t, u_t),
    )


def horizontal_distance_tangent(q_n: complex, anchor: complex) -> AffineTangent:
    """Tangent of the convex squared distance ``|q - anchor|^2`` at ``q_n``."""
    return AffineTangent(anchor, q_n)


def harvest_u_coefficients(
    sc: Scenario, beta_r: float, phi: np.ndarray, psi_n: np.ndarray
) -> tuple[float, float, float]:
    """Coefficients of the frozen-profile harvest approximation.

    With the cascaded profile frozen at ``psi_n`` the mean received power is
    ``(U1 + U3) * beta_t + U2 * sqrt(beta_d * beta_t) + beta_d``.
    """
    mu_d, mu_t, mu_r = sc.mu_direct, sc.mu_uav_ris, sc.mu_ris_user
    denom = (mu_r + 1.0) * (mu_t + 1.0)
    inner = np.vdot(psi_n, phi)
    u1 = mu_r * mu_t * beta_r / denom * float(np.abs(inner) ** 2)
    u2 = 2.0 * math.sqrt(mu_d * mu_r * mu_t * beta_r / ((mu_d + 1.0) * denom)) * float(
        np.real(inner)
    )
    u3 = (mu_r + mu_t + 1.0) * beta_r / denom * float(np.real(np.vdot(phi, phi)))
    return u1, u2, u3


def _conservative_fraction(a: float, max_den: int = 60) -> Fraction:
    """Rational ``p/q <= a`` closest to ``a`` with denominator <= max_den."""
    fr = Fraction(a).limit_denominator(max_den)
    if float(fr) > a:
        fr = Fraction(fr.numerator - 1, fr.denominator)
    return fr


class _Registry:
    """Column registry with per-variable natural scales.

    The solver sees columns in units where the expected solution magnitude is
    O(1); expressions written in physical units are converted on entry and
    solution values converted back on exit.  This is what keeps slack gains
    (1e-7), hover times (1e3), and coordinates (1e1) in one program tractable.
    """

    def __init__(self) -> None:
        self.names: dict[str, int] = {}
        self.scales: list[float] = []
        self.count = 0

    def var(self, name: str, scale: float = 1.0) -> int:
        if name not in self.names:
            self.names[name] = self.count
            self.scales.append(max(float(scale), 1e-300))
            self.count += 1
        return self.names[name]

    def __getitem__(self, name: str) -> int:
        return self.names[name]

    def scale_of(self, name: str) -> float:
        return self.scales[self.names[name]]

    def value(self, x: np.ndarray, name: str) -> float:
        idx = self.names[name]
        return float(x[idx] * self.scales[idx])


@dataclass
class _Expr:
    """Affine expression ``row @ x' + const`` over the scaled solver columns."""

    row: np.ndarray
    const: float = 0.0

    @staticmethod
    def of(n: int, reg: _Registry, name: str, coef: float = 1.0) -> "_Expr":
        idx = reg[name]
        row = np.zeros(n)
        row[idx] = coef * reg.scales[idx]
        return _Expr(row)

    @staticmethod
    def const_of(n: int, value: float) -> "_Expr":
        return _Expr(np.zeros(n), value)


def _add_rsoc(prog: ConicProgram, u: _Expr, v: _Expr, ws: list[_Expr]) -> None:
    # (rho*u, v/rho, w) spans the same rotated cone; balancing the first two
    # rows keeps tangent-slope reciprocals from wrecking the conditioning
    mag_u = max(np.max(np.abs(u.row)), abs(u.const), 1e-30)
    mag_v = max(np.max(np.abs(v.row)), abs(v.const), 1e-30)
    rho = math.sqrt(mag_v / mag_u)
    rows = np.vstack([rho * u.row, v.row / rho] + [w.row for w in ws])
    consts = np.array([rho * u.const, v.const / rho] + [w.const for w in ws])
    scale = max(np.max(np.abs(rows)), np.max(np.abs(consts)), 1e-30)
    prog.add_rsoc(rows / scale, consts / scale)


def _add_nonneg(prog: ConicProgram, expr: _Expr) -> None:
    scale = max(np.max(np.abs(expr.row)), abs(expr.const), 1e-30)
    prog.add_nonneg(expr.row[None, :] / scale, np.array([expr.const / scale]))


def _geomean_lower_bound(
    prog: ConicProgram,
    reg: _Registry,
    n: int,
    target: _Expr,
    slots: list[tuple[str, _Expr, float]],
    tag: str,
    target_scale: float,
) -> None:
    """Impose ``target <= geomean(slot values)`` with a rotated-cone tower.

    Each slot carries a magnitude estimate used to scale the auxiliary node
    variables.  Slots sharing a key collapse pairwise without auxiliary
    variables (``geomean(x, x) = x``), which keeps repeated factors cheap.
    The slot list is padded with copies of the target to the next power of
    two.
    """
    size = 1
    while size < len(slots):
        size *= 2
    level = list(slots) + [("__target__", target, target_scale)] * (size - len(slots))
    node_id = 0
    while len(level) > 1:
        groups: dict[str, list[tuple[_Expr, float]]] = {}
        order: list[str] = []
        for key, expr, mag in level:
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((expr, mag))
        nxt: list[tuple[str, _Expr, float]] = []
        leftovers: list[tuple[str, _Expr, float]] = []
        for key in order:
            items = groups[key]
            nxt.extend((key, items[0][0], items[0][1]) for _ in range(len(items) // 2))
            if len(items) % 2:
                leftovers.append((key, items[0][0], items[0][1]))
        for (k1, e1, m1), (k2, e2, m2) in zip(leftovers[::2], leftovers[1::2]):
            mag = math.sqrt(m1 * m2)
            node = reg.var(f"{tag}_node{node_id}", mag)
            node_id += 1
            node_expr = _Expr.of(n, reg, f"{tag}_node{node_id - 1}")
            _add_rsoc(prog, _Expr(0.5 * e1.row, 0.5 * e1.const), e2, [node_expr])
            nxt.append((f"{tag}_n{node_id}", node_expr, mag))
        level = nxt
    root_key, root = level[0][0], level[0][1]
    if root_key != "__target__":
        _add_nonneg(prog, _Expr(root.row - target.row, root.const - target.const))


@dataclass(frozen=True)
class TrajectoryVariables:
    """Decoded subproblem solution."""

    positions: tuple[complex, ...]
    times: tuple[float, ...]
    shares: np.ndarray  # y_{k,l}

    def to_plan(self, sc: Scenario) -> FlightPlan:
        return FlightPlan(
            (sc.uav_start, *self.positions, sc.uav_end),
            tuple(max(t, 0.0) for t in self.times),
        )


def _sqrt_gain_cap(sc: Scenario, q_n: complex, k: int, delta: float) -> float:
    """Upper bound of ``sqrt(beta_d * beta_t)`` within ``delta`` of ``q_n``."""
    d_d = max(abs(q_n - sc.users[k]) - delta, 0.0)
    d_t = max(abs(q_n - sc.ris_position) - delta, 0.0)
    gain_d = sc.reference_gain / (d_d**2 + sc.uav_height**2) ** (sc.tau_direct / 2.0)
    gain_t = sc.reference_gain / (
        d_t**2 + (sc.uav_height - sc.ris_height) ** 2
    ) ** (sc.tau_uav_ris / 2.0)
    return math.sqrt(gain_d * gain_t)


def build_trajectory_subproblem(
    sc: Scenario,
    phi: np.ndarray,
    q_n: np.ndarray,
    t_n: np.ndarray,
    y_n: np.ndarray | None = None,
    step_limit: float | None = None,
) -> tuple[ConicProgram, _Registry]:
    """Convex restriction of the hover-placement problem at ``(q_n, t_n, y_n)``.

    ``phi`` has shape (H, M); ``q_n`` complex (H,), ``t_n`` (H,), ``y_n`` (K, H).
    ``step_limit`` caps the per-hover move, keeping the frozen-profile
    surrogate honest (the solve loop adapts it from the exact audit).  When
    ``y_n`` is omitted, the share expansion points come from the surrogate
    harvest rates at the expansion point, which keeps it feasible for its own
    restriction.
    """
    n_hov = len(q_n)
    k_users = sc.num_users
    t_n = np.maximum(np.asarray(t_n, dtype=float), T_MIN)

    stats_n = compute_stats(sc, q_n)
    eta = sc.split_ratio
    delta = step_limit if step_limit is not None else max(
        abs(sc.uav_start), abs(sc.uav_end)
    )

    # frozen-profile coefficients and the surrogate rate at the expansion point
    u_coef = np.zeros((k_users, n_hov, 3))
    gain_caps = np.zeros((k_users, n_hov))
    w_expansion = np.zeros((k_users, n_hov))
    for k in range(k_users):
        for l in range(n_hov):
            u_coef[k, l] = harvest_u_coefficients(
                sc, stats_n.beta_r[k], phi[l], stats_n.psi[k, l]
            )
            gain_caps[k, l] = _sqrt_gain_cap(sc, q_n[l], k, delta)
            u1, u2, u3 = u_coef[k, l]
            cross_gain = (
                math.sqrt(stats_n.beta_d[k, l] * stats_n.beta_t[l])
                if u2 >= 0.0
                else gain_caps[k, l]
            )
            w_expansion[k, l] = max(
                (u1 + u3) * stats_n.beta_t[l] + u2 * cross_gain + stats_n.beta_d[k, l],
                0.0,
            )
    if y_n is None:
        y_n = np.zeros((k_users, n_hov))
        for k in range(k_users):
            rate = (1.0 - eta) * sc.tx_power[k] / sc.energy_requirements[k]
            for l in range(n_hov):
                y_n[k, l] = math.sqrt(max(rate * t_n[l] * w_expansion[k, l], 0.0))
    y_n = np.maximum(np.asarray(y_n, dtype=float), Y_FLOOR)

    # natural variable scales taken at the expansion point
    pos_scale = max(abs(sc.uav_start), abs(sc.uav_end), 1.0)
    height_sq = (sc.uav_height - sc.ris_height) ** 2

    reg = _Registry()
    for l in range(n_hov):
        reg.var(f"qx{l}", pos_scale)
        reg.var(f"qy{l}", pos_scale)
    for l in range(n_hov):
        reg.var(f"t{l}", max(t_n[l], 1.0))
    for i in range(sc.num_segments):
        reg.var(f"seg{i}", pos_scale)
    for l in range(n_hov):
        reg.var(f"z1_{l}", stats_n.beta_t[l])
    for k in range(k_users):
        for l in range(n_hov):
            reg.var(f"z2_{k}_{l}", stats_n.beta_d[k, l])
            reg.var(f"z3_{k}_{l}", math.sqrt(stats_n.beta_d[k, l] * stats_n.beta_t[l]))
            reg.var(f"y_{k}_{l}", max(y_n[k, l], 0.1))

    phi_norm_sq = np.array([float(np.real(np.vdot(phi[l], phi[l]))) for l in range(n_hov)])
    active_ris = sc.ris_mode == "active"
    frac = _conservative_fraction(sc.tau_uav_ris / 2.0)
    ris_hovers = [l for l in range(n_hov) if active_ris and phi_norm_sq[l] > 0.0]
    for l in ris_hovers:
        u_n_val = abs(q_n[l] - sc.ris_position) ** 2 + height_sq
        reg.var(f"w{l}", u_n_val ** (-float(frac)))
        if frac >= 1:
            reg.var(f"r{l}", 1.0 / u_n_val)

    # towers allocate their own node columns; a first pass discovers them and
    # the second pass assembles the exactly-sized program
    prog = None
    for attempt in range(2):
        n = reg.count if attempt else reg.count + 320 * max(1, len(ris_hovers))
        prog = ConicProgram(n, np.zeros(n))

        def expr(name: str, coef: float = 1.0) -> _Expr:
            return _Expr.of(n, reg, name, coef)

        c = np.zeros(n)
        fly_coef = propulsion_power(sc, sc.cruise_speed) / sc.cruise_speed
        hov_coef = hover_power(sc) + sc.radiated_power_w
        for i in range(sc.num_segments):
            c[reg[f"seg{i}"]] = fly_coef * reg.scale_of(f"seg{i}")
        for l in range(n_hov):
            c[reg[f"t{l}"]] = hov_coef * reg.scale_of(f"t{l}")
        prog.c = c

        # hover-time box
        for l in range(n_hov):
            _add_nonneg(prog, expr(f"t{l}"))
            _add_nonneg(prog, _Expr(-expr(f"t{l}").row, T_CAP))

        # trust region on hover moves
        if step_limit is not None:
            for l in range(n_hov):
                block = np.vstack(
                    [np.zeros(n), expr(f"qx{l}").row, expr(f"qy{l}").row]
                )
                consts = np.array([step_limit, -q_n[l].real, -q_n[l].imag])
                prog.add_soc(block / max(step_limit, 1.0), consts / max(step_limit, 1.0))

        # segment-length epigraphs
        verts: list[tuple[_Expr, _Expr]] = [
            (_Expr.const_of(n, sc.uav_start.real), _Expr.const_of(n, sc.uav_start.imag))
        ]
        for l in range(n_hov):
            verts.append((expr(f"qx{l}"), expr(f"qy{l}")))
        verts.append((_Expr.const_of(n, sc.uav_end.real), _Expr.const_of(n, sc.uav_end.imag)))
        for i in range(sc.num_segments):
            (x0, y0), (x1, y1) = verts[i], verts[i + 1]
            dx = _Expr(x1.row - x0.row, x1.const - x0.const)
            dy = _Expr(y1.row - y0.row, y1.const - y0.const)
            block = np.vstack([expr(f"seg{i}").row, dx.row, dy.row])
            consts = np.array([0.0, dx.const, dy.const])
            prog.add_soc(block / pos_scale, consts / pos_scale)

        # slack caps from the pathloss tangents + nonnegativity
        for l in range(n_hov):
            _, tan_t = pathloss_tangents(sc, q_n[l], 0)
            # feeder-link bound: slope * |q - ris|^2 <= value + slope*u_n - z1
            u_row = _Expr(-expr(f"z1_{l}").row, tan_t.value + tan_t.slope * tan_t.u_n)
            v_row = _Expr.const_of(n, 1.0 / (2.0 * tan_t.slope))
            w_rows = [
                _Expr(expr(f"qx{l}").row, -sc.ris_position.real),
                _Expr(expr(f"qy{l}").row, -sc.ris_position.imag),
            ]
            _add_rsoc(prog, u_row, v_row, w_rows)
            _add_nonneg(prog, expr(f"z1_{l}"))
            for k in range(k_users):
                tan_d, _ = pathloss_tangents(sc, q_n[l], k)
                u_row = _Expr(-expr(f"z2_{k}_{l}").row, tan_d.value + tan_d.slope * tan_d.u_n)
                v_row = _Expr.const_of(n, 1.0 / (2.0 * tan_d.slope))
                w_rows = [
                    _Expr(expr(f"qx{l}").row, -sc.users[k].real),
                    _Expr(expr(f"qy{l}").row, -sc.users[k].imag),
                ]
                _add_rsoc(prog, u_row, v_row, w_rows)
                _add_nonneg(prog, expr(f"z2_{k}_{l}"))
                # z1 * z2 >= z3^2
                _add_rsoc(
                    prog,
                    expr(f"z1_{l}", 0.5),
                    expr(f"z2_{k}_{l}"),
                    [expr(f"z3_{k}_{l}")],
                )

        def w_expr(k: int, l: int) -> _Expr:
            """Frozen-profile mean-power surrogate over the pathloss slacks.

            A nonnegative cross coefficient rides the geometric-mean slack; a
            negative one is multiplied by the trust-region cap on
            ``sqrt(beta_d * beta_t)`` so the surrogate cannot claim phantom
            harvest from the sign-free slack.
            """
            u1, u2, u3 = u_coef[k, l]
            e = _Expr(np.zeros(n))
            e.row += (u1 + u3) * expr(f"z1_{l}").row
            e.row += expr(f"z2_{k}_{l}").row
            if u2 >= 0.0:
                e.row += u2 * expr(f"z3_{k}_{l}").row
            else:
                e.const = u2 * gain_caps[k, l]
            return e

        # harvest rotated cones and share normalization
        for k in range(k_users):
            p_fac = (1.0 - eta) * sc.tx_power[k] / (2.0 * sc.energy_requirements[k])
            for l in range(n_hov):
                we = w_expr(k, l)
                _add_rsoc(
                    prog,
                    _Expr(p_fac * we.row, p_fac * we.const),
                    expr(f"t{l}"),
                    [expr(f"y_{k}_{l}")],
                )
            norm_row = _Expr(np.zeros(n), -1.0)
            for l in range(n_hov):
                norm_row.row += 2.0 * y_n[k, l] * expr(f"y_{k}_{l}").row
                norm_row.const -= y_n[k, l] ** 2
            _add_nonneg(prog, norm_row)

        # SINR with the same surrogate
        for k in range(k_users):
            gamma = sc.sinr_thresholds[k]
            coef = eta * (sc.tx_power[k] - gamma * (sc.total_tx_power - sc.tx_power[k]))
            for l in range(n_hov):
                rhs = gamma * (
                    stats_n.beta_r[k] * sc.ris_noise_w * phi_norm_sq[l] + sc.noise_user
                )
                we = w_expr(k, l)
                _add_nonneg(prog, _Expr(coef * we.row, coef * we.const - rhs))

        # surface energy budget: tangent of 1/t on the right, distance tangent
        # plus fractional-power epigraph on the left
        for l in ris_hovers:
            qbar = horizontal_distance_tangent(q_n[l], sc.ris_position)
            u_aff = _Expr(
                qbar.coef_x * expr(f"qx{l}").row + qbar.coef_y * expr(f"qy{l}").row,
                qbar.constant + height_sq,
            )
            u_n_val = abs(q_n[l] - sc.ris_position) ** 2 + height_sq
            w_var = expr(f"w{l}")
            w_mag = reg.scale_of(f"w{l}")
            if frac >= 1:
                r_var = expr(f"r{l}")
                _add_rsoc(prog, r_var, u_aff, [_Expr.const_of(n, math.sqrt(2.0))])
                p_num, q_den = frac.numerator, frac.denominator
                slots = [("w", w_var, w_mag)] * q_den + [
                    ("one", _Expr.const_of(n, 1.0), 1.0)
                ] * (p_num - q_den)
                _geomean_lower_bound(
                    prog, reg, n, r_var, slots, f"ris{l}", reg.scale_of(f"r{l}")
                )
            else:
                p_num, q_den = frac.numerator, frac.denominator
                slots = [("w", w_var, w_mag)] * q_den + [("u", u_aff, u_n_val)] * p_num
                _geomean_lower_bound(
                    prog, reg, n, _Expr.const_of(n, 1.0), slots, f"ris{l}", 1.0
                )
            draw = sc.total_tx_power * sc.reference_gain * phi_norm_sq[l]
            row = _Expr(
                -draw * w_var.row - (sc.ris_energy_budget / t_n[l] ** 2) * expr(f"t{l}").row,
                2.0 * sc.ris_energy_budget / t_n[l] - sc.ris_noise_w * phi_norm_sq[l],
            )
            _add_nonneg(prog, row)

        if attempt == 1:
            return prog, reg
    raise RuntimeError("unreachable")


@dataclass
class TrajectoryResult:
    plan: FlightPlan
    energy: float
    trace: list[dict] = field(default_factory=list)
    status: str = "converged"
    audit_violation: float = 0.0


def audit_exact_constraints(
    sc: Scenario, plan: FlightPlan, phi: np.ndarray
) -> dict[str, float]:
    """Relative violations of the exact SINR/harvest/surface-energy constraints."""
    stats = compute_stats(sc, plan.interior)
    worst_sinr = 0.0
    for k in range(sc.num_users):
        for l in range(stats.num_hovers):
            value = sinr(sc, stats, phi[l], k, l)
            worst_sinr = max(
                worst_sinr, (sc.sinr_thresholds[k] - value) / sc.sinr_thresholds[k]
            )
    worst_harvest = 0.0
    for k in range(sc.num_users):
        charged = sum(
            plan.hover_times[l] * harvested_power(sc, stats.second_moment(k, l, phi[l]), k)
            for l in range(stats.num_hovers)
        )
        worst_harvest = max(
            worst_harvest,
            (sc.energy_requirements[k] - charged) / sc.energy_requirements[k],
        )
    worst_ris = 0.0
    if sc.ris_mode == "active":
        for l in range(stats.num_hovers):
            draw = (sc.total_tx_power * stats.beta_t[l] + sc.ris_noise_w) * float(
                np.real(np.vdot(phi[l], phi[l]))
            )
            worst_ris = max(
                worst_ris,
                (draw * plan.hover_times[l] - sc.ris_energy_budget) / sc.ris_energy_budget,
            )
    return {
        "sinr": max(0.0, worst_sinr),
        "harvest": max(0.0, worst_harvest),
        "ris_energy": max(0.0, worst_ris),
    }


def tighten_hover_times(
    sc: Scenario, plan: FlightPlan, phi: np.ndarray, margin: float = 1.02
) -> FlightPlan:
    """Rescale hover times so the worst user's charged energy hits ``margin``.

    The charged energy is exactly linear in the hover times, so this is an
    exact feasibility repair (and a descent step whenever the requirement is
    oversupplied).  Per-hover surface-budget caps are respected when scaling
    up.
    """
    stats = compute_stats(sc, plan.interior)
    n_hov = stats.num_hovers
    worst = math.inf
    for k in range(sc.num_users):
        charged = sum(
            plan.hover_times[l] * harvested_power(sc, stats.second_moment(k, l, phi[l]), k)
            for l in range(n_hov)
        )
        worst = min(worst, charged / sc.energy_requirements[k])
    if not math.isfinite(worst) or worst <= 0.0:
        return plan
    rho = margin / worst
    times = []
    for l in range(n_hov):
        t_new = plan.hover_times[l] * rho
        if sc.ris_mode == "active":
            draw = (sc.total_tx_power * stats.beta_t[l] + sc.ris_noise_w) * float(
                np.real(np.vdot(phi[l], phi[l]))
            )
            if draw > 0.0:
                t_new = min(t_new, sc.ris_energy_budget / draw)
        times.append(min(max(t_new, 0.0), T_CAP))
    return FlightPlan(plan.hover_positions, tuple(times))


def _exact_shares(sc: Scenario, plan: FlightPlan, phi: np.ndarray) -> np.ndarray:
    """Harvest shares ``y_{k,l} = sqrt(t_l P_kl / E_k)`` at the current plan."""
    stats = compute_stats(sc, plan.interior)
    n_hov = stats.num_hovers
    shares = np.zeros((sc.num_users, n_hov))
    for k in range(sc.num_users):
        for l in range(n_hov):
            contrib = plan.hover_times[l] * harvested_power(
                sc, stats.second_moment(k, l, phi[l]), k
            ) / sc.energy_requirements[k]
            shares[k, l] = math.sqrt(max(contrib, 0.0))
    return shares


TRUST_INIT = 4.0  # meters
TRUST_MIN = 0.2
TRUST_MAX = 20.0


def solve_trajectory_sca(
    sc: Scenario,
    phi: np.ndarray,
    plan_init: FlightPlan,
    solver_tol: float = 1e-8,
    audit_tol: float = 0.01,
) -> TrajectoryResult:
    """Iterate the convex restriction; the accepted energy trace is nonincreasing.

    Hover moves are limited by an adaptive trust region: a candidate is
    accepted only when it lowers the exact mission energy and passes the
    exact-constraint audit within ``audit_tol``; otherwise the region shrinks
    and the same expansion point is retried.  This keeps every accepted
    iterate feasible for the exact constraints despite the frozen-profile
    surrogate having no bound direction.
    """
    plan = plan_init
    energy = uav_total_energy(sc, plan).uav_total
    trace: list[dict] = []
    status = "max_iterations"
    worst_audit = max(audit_exact_constraints(sc, plan, phi).values())
    trust = TRUST_INIT

    # exact descent first: trim oversupplied hover time before moving anything
    trimmed = tighten_hover_times(sc, plan, phi)
    trimmed_energy = uav_total_energy(sc, trimmed).uav_total
    if trimmed_energy < energy:
        audit0 = max(audit_exact_constraints(sc, trimmed, phi).values())
        if audit0 <= audit_tol:
            plan, energy, worst_audit = trimmed, trimmed_energy, audit0

    for it in range(1, sc.n_max + 1):
        q_n = np.array(plan.interior, dtype=complex)
        t_n = np.array(plan.hover_times, dtype=float)
        prog, reg = build_trajectory_subproblem(sc, phi, q_n, t_n, step_limit=trust)
        sol = solve(prog, tol=solver_tol)
        if not sol.optimal:
            audit = audit_exact_constraints(sc, plan, phi)
            binding = max(audit, key=audit.get)
            trace.append(
                {"stage": "trajectory", "n": it, "E_V": energy,
                 "solver_status": sol.status, "accepted": False,
                 "exact_audit_max_violation": audit[binding]}
            )
            status = f"solver_{sol.status}:{binding}"
            break
        n_hov = len(q_n)
        new_pos = tuple(
            complex(reg.value(sol.x, f"qx{l}"), reg.value(sol.x, f"qy{l}"))
            for l in range(n_hov)
        )
        new_times = tuple(max(reg.value(sol.x, f"t{l}"), 0.0) for l in range(n_hov))
        candidate = FlightPlan((sc.uav_start, *new_pos, sc.uav_end), new_times)
        # exact-arithmetic repair: surrogate overshoot only mis-sizes the
        # hover times, which the linear rescaling fixes outright
        candidate = tighten_hover_times(sc, candidate, phi)
        cand_energy = uav_total_energy(sc, candidate).uav_total
        audit = audit_exact_constraints(sc, candidate, phi)
        max_violation = max(audit.values())
        improved = bool(cand_energy <= energy * (1.0 + 10.0 * solver_tol))
        accept = bool(improved and max_violation <= audit_tol)
        trace.append(
            {"stage": "trajectory", "n": it, "E_V": cand_energy,
             "solver_status": sol.status, "accepted": accept,
             "exact_audit_max_violation": max_violation}
        )
        if not accept:
            trust *= 0.5
            if trust < TRUST_MIN:
                status = "stalled" if not improved else "audit_stop"
                break
            continue
        if log.isEnabledFor(logging.DEBUG):
            # complementary behavior of the share normalization: either the
            # normalization is active or the harvest cones carry slack
            for k in range(sc.num_users):
                total = sum(
                    reg.value(sol.x, f"y_{k}_{l}") ** 2 for l in range(n_hov)
                )
                log.debug(
                    "user %d share normalization sum(y^2) = %.6f (%s)",
                    k + 1, total, "active" if total <= 1.0 + 1e-6 else "slack",
                )
        converged = abs(cand_energy - energy) <= sc.tolerance * max(energy, 1e-9)
        plan, energy, worst_audit = candidate, cand_energy, max_violation
        trust = min(trust * 1.6, TRUST_MAX)
        if converged:
            status = "converged"
            break
    return TrajectoryResult(plan, energy, trace, status, worst_audit)
