"""Reflection-vector subproblem: max-min normalized charged energy.

For fixed hover positions and times, the reflection coefficients are chosen
to maximize the worst user's charged energy relative to its requirement,
subject to per-user SINR thresholds and the surface's per-hover energy
budget.  Both nonconvex constraint families are replaced by tangent
minorants at the current iterate, so every accepted iterate is feasible for
the exact constraints and the exact objective never decreases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats
from .conic import ConicProgram, complex_embed, solve
from .scenario import FlightPlan, ReflectionPlan, Scenario

__all__ = [
    "HarvestAggregates",
    "SinrQuadratic",
    "PhaseResult",
    "harvest_aggregates",
    "sinr_quadratic",
    "linearize_and_build",
    "initial_reflection",
    "solve_phase_sca",
]

log = logging.getLogger(__name__)

# Eigenvalues above -eps * scale count as nonnegative when repairing the
# quadratic SINR form.
_PSD_EPS = 1e-12


@dataclass(frozen=True)
class HarvestAggregates:
    """Per-user block data of the normalized charged energy ``h_k``.

    ``h_k(phi) = sum_l phi_l^H (w_kl A_kl) phi_l + 2 Re{(w_kl a_kl)^H phi_l} + zeta1_k``
    with ``w_kl = (1 - eta) p_k t_l / E_k``.
    """

    weights: np.ndarray  # (K, H)
    quad_blocks: np.ndarray  # (K, H, M, M) = w_kl * A_kl
    cross_blocks: np.ndarray  # (K, H, M) = w_kl * a_kl
    zeta1: np.ndarray  # (K,)

    def exact(self, phi: np.ndarray) -> np.ndarray:
        """Exact ``h_k`` for stacked reflection vectors ``phi`` of shape (H, M)."""
        k_users, n_hov = self.quad_blocks.shape[:2]
        out = self.zeta1.copy()
        for k in range(k_users):
            for l in range(n_hov):
                p = phi[l]
                out[k] += np.real(np.vdot(p, self.quad_blocks[k, l] @ p))
                out[k] += 2.0 * np.real(np.vdot(self.cross_blocks[k, l], p))
        return out

    def linear_coefficients(self, phi_n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tangent minorant data at ``phi_n``: coefficients ``b_k`` and consts ``zeta2_k``.

        ``f_k(phi) = 2 Re{b_k^H phi} + zeta2_k <= h_k(phi)`` with equality at
        ``phi = phi_n``.
        """
        k_users, n_hov, m = self.cross_blocks.shape
        b = np.zeros((k_users, n_hov, m), dtype=complex)
        zeta2 = self.zeta1.copy()
        for k in range(k_users):
            for l in range(n_hov):
                b[k, l] = self.quad_blocks[k, l] @ phi_n[l] + self.cross_blocks[k, l]
                zeta2[k] -= np.real(np.vdot(phi_n[l], self.quad_blocks[k, l] @ phi_n[l]))
        return b, zeta2

    def linearized(self, phi_n: np.ndarray, phi: np.ndarray) -> np.ndarray:
        b, zeta2 = self.linear_coefficients(phi_n)
        vals = zeta2.copy()
        for k in range(b.shape[0]):
            for l in range(b.shape[1]):
                vals[k] += 2.0 * np.real(np.vdot(b[k, l], phi[l]))
        return vals


@dataclass(frozen=True)
class SinrQuadratic:
    """Quadratic form of the SINR threshold: ``phi^H F phi + 2 Re{f^H phi} >= gamma_const``."""

    f_mat: np.ndarray
    f_vec: np.ndarray
    gamma_const: float
    lam_min: float  # smallest eigenvalue of f_mat (for the convexity repair)


def harvest_aggregates(
    sc: Scenario, stats: ChannelStats, hover_times
) -> HarvestAggregates:
    t = np.asarray(hover_times, dtype=float)
    k_users, n_hov, m = stats.cross.shape
    weights = np.zeros((k_users, n_hov))
    quad = np.zeros((k_users, n_hov, m, m), dtype=complex)
    cross = np.zeros((k_users, n_hov, m), dtype=complex)
    zeta1 = np.zeros(k_users)
    for k in range(k_users):
        scale = (1.0 - sc.split_ratio) * sc.tx_power[k] / sc.energy_requirements[k]
        for l in range(n_hov):
            w = scale * t[l]
            weights[k, l] = w
            quad[k, l] = w * stats.quad[k, l]
            cross[k, l] = w * stats.cross[k, l]
            zeta1[k] += w * stats.beta_d[k, l]
    return HarvestAggregates(weights, quad, cross, zeta1)


def sinr_quadratic(sc: Scenario, stats: ChannelStats, k: int, l: int) -> SinrQuadratic:
    eta = sc.split_ratio
    gamma = sc.sinr_thresholds[k]
    margin = sc.tx_power[k] - gamma * (sc.total_tx_power - sc.tx_power[k])
    if margin <= 0:
        log.warning(
            "SINR threshold for user %d cannot be met for any reflection vector "
            "(power margin %.3e <= 0)", k + 1, margin,
        )
    coef = eta * margin
    f_mat = coef * stats.quad[k, l].copy()
    f_mat[np.diag_indices_from(f_mat)] -= gamma * stats.beta_r[k] * sc.ris_noise_w
    f_vec = coef * stats.cross[k, l]
    gamma_const = gamma * sc.noise_user - coef * stats.beta_d[k, l]
    lam_min = float(np.linalg.eigvalsh(f_mat)[0])
    return SinrQuadratic(f_mat, f_vec, gamma_const, lam_min)


@dataclass(frozen=True)
class PhaseLayout:
    num_hovers: int
    num_elements: int

    @property
    def n_vars(self) -> int:
        return 2 * self.num_hovers * self.num_elements + 1

    @property
    def eps_col(self) -> int:
        return self.n_vars - 1

    def phi_cols(self, l: int) -> slice:
        w = 2 * self.num_elements
        return slice(l * w, (l + 1) * w)

    def pack(self, phi: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_vars)
        w = 2 * self.num_elements
        for l in range(self.num_hovers):
            out[l * w : l * w + self.num_elements] = phi[l].real
            out[l * w + self.num_elements : (l + 1) * w] = phi[l].imag
        return out

    def unpack(self, x: np.ndarray) -> np.ndarray:
        m = self.num_elements
        w = 2 * m
        phi = np.zeros((self.num_hovers, m), dtype=complex)
        for l in range(self.num_hovers):
            phi[l] = x[l * w : l * w + m] + 1j * x[l * w + m : (l + 1) * w]
        return phi


def _ris_draw_coefficient(sc: Scenario, stats: ChannelStats, l: int) -> float:
    """Mean emitted power per unit ``||phi||^2`` at hover ``l``."""
    return sc.total_tx_power * stats.beta_t[l] + sc.ris_noise_w


def _sinr_rows(
    layout: PhaseLayout,
    quads: list[list[SinrQuadratic]],
    phi_n: np.ndarray,
    margin_col: int | None,
    prog: ConicProgram,
) -> None:
    """Append linearized SINR constraints (with convexity repair when needed)."""
    n = prog.n_vars
    m = layout.num_elements
    for k, per_hover in enumerate(quads):
        for l, sq in enumerate(per_hover):
            mu = max(0.0, -sq.lam_min)
            if mu <= _PSD_EPS * max(1.0, abs(sq.lam_min)):
                mu = 0.0
            f_plus = sq.f_mat if mu == 0.0 else sq.f_mat + mu * np.eye(m)
            grad = f_plus @ phi_n[l] + sq.f_vec
            _, coef = complex_embed(np.zeros((m, m)), grad)
            const = -float(np.real(np.vdot(phi_n[l], f_plus @ phi_n[l]))) - sq.gamma_const
            row = np.zeros(n)
            row[layout.phi_cols(l)] = 2.0 * coef
            if margin_col is not None:
                row[margin_col] = 1.0
            scale = max(np.max(np.abs(row)), abs(const), 1e-30)
            if mu == 0.0:
                prog.add_nonneg(row[None, :] / scale, np.array([const / scale]))
            else:
                # affine part must also cover mu * ||phi_l||^2 (rotated cone)
                block = np.zeros((2 * m + 2, n))
                b = np.zeros(2 * m + 2)
                block[0] = row
                b[0] = const
                b[1] = 0.5
                cols = layout.phi_cols(l)
                block[2:, cols.start : cols.stop] = math.sqrt(mu) * np.eye(2 * m)
                bscale = max(np.max(np.abs(block)), abs(const), 1e-30)
                prog.add_rsoc(block / bscale, b / bscale)


def linearize_and_build(
    sc: Scenario,
    stats: ChannelStats,
    plan: FlightPlan,
    phi_n: np.ndarray,
    aggregates: HarvestAggregates | None = None,
    quads: list[list[SinrQuadratic]] | None = None,
) -> tuple[ConicProgram, PhaseLayout]:
    """Convex restriction of the max-min charged-energy subproblem at ``phi_n``."""
    n_hov = stats.num_hovers
    m = sc.num_elements
    layout = PhaseLayout(n_hov, m)
    if aggregates is None:
        aggregates = harvest_aggregates(sc, stats, plan.hover_times)
    if quads is None:
        quads = [
            [sinr_quadratic(sc, stats, k, l) for l in range(n_hov)]
            for k in range(sc.num_users)
        ]

    c = np.zeros(layout.n_vars)
    c[layout.eps_col] = -1.0  # maximize epsilon
    prog = ConicProgram(layout.n_vars, c)

    # harvest minorants: 2 Re{b_k^H phi} + zeta2_k - eps >= 0
    b_lin, zeta2 = aggregates.linear_coefficients(phi_n)
    for k in range(sc.num_users):
        row = np.zeros(layout.n_vars)
        for l in range(n_hov):
            _, coef = complex_embed(np.zeros((m, m)), b_lin[k, l])
            row[layout.phi_cols(l)] = 2.0 * coef
        row[layout.eps_col] = -1.0
        scale = max(np.max(np.abs(row)), abs(zeta2[k]), 1e-30)
        prog.add_nonneg(row[None, :] / scale, np.array([zeta2[k] / scale]))

    _sinr_rows(layout, quads, phi_n, None, prog)

    if sc.ris_mode == "active":
        for l in range(n_hov):
            t_l = plan.hover_times[l]
            if t_l <= 0.0:
                continue  # no hover, the energy constraint is vacuous
            cap_sq = sc.ris_energy_budget / (t_l * _ris_draw_coefficient(sc, stats, l))
            cap = math.sqrt(cap_sq)
            block = np.zeros((2 * m + 1, layout.n_vars))
            b = np.zeros(2 * m + 1)
            b[0] = cap
            cols = layout.phi_cols(l)
            block[1:, cols.start : cols.stop] = np.eye(2 * m)
            prog.add_soc(block / max(cap, 1.0), b / max(cap, 1.0))
    else:
        # passive surface: per-element unit-modulus bound
        for l in range(n_hov):
            cols = layout.phi_cols(l)
            for j in range(m):
                block = np.zeros((3, layout.n_vars))
                block[1, cols.start + j] = 1.0
                block[2, cols.start + m + j] = 1.0
                prog.add_soc(block, np.array([1.0, 0.0, 0.0]))
    return prog, layout


def _restoration_program(
    sc: Scenario,
    stats: ChannelStats,
    plan: FlightPlan,
    phi_n: np.ndarray,
    quads: list[list[SinrQuadratic]],
) -> tuple[ConicProgram, PhaseLayout]:
    """Maximize the worst SINR margin under the surface energy budget."""
    n_hov = stats.num_hovers
    m = sc.num_elements
    base = PhaseLayout(n_hov, m)
    n = base.n_vars  # margin variable reuses the epsilon column
    c = np.zeros(n)
    c[base.eps_col] = -1.0
    prog = ConicProgram(n, c)
    _sinr_rows(base, quads, phi_n, base.eps_col, prog)
    if sc.ris_mode == "active":
        for l in range(n_hov):
            t_l = plan.hover_times[l]
            if t_l <= 0.0:
                continue
            cap_sq = sc.ris_energy_budget / (t_l * _ris_draw_coefficient(sc, stats, l))
            cap = math.sqrt(cap_sq)
            block = np.zeros((2 * m + 1, n))
            b = np.zeros(2 * m + 1)
            b[0] = cap
            cols = base.phi_cols(l)
            block[1:, cols.start : cols.stop] = np.eye(2 * m)
            prog.add_soc(block / max(cap, 1.0), b / max(cap, 1.0))
    else:
        for l in range(n_hov):
            cols = base.phi_cols(l)
            for j in range(m):
                block = np.zeros((3, n))
                block[1, cols.start + j] = 1.0
                block[2, cols.start + m + j] = 1.0
                prog.add_soc(block, np.array([1.0, 0.0, 0.0]))
    # margin should not grow past feasibility; cap keeps the program bounded
    row = np.zeros(n)
    row[base.eps_col] = -1.0
    prog.add_nonneg(row[None, :], np.array([1.0]))
    return prog, base


def initial_reflection(
    sc: Scenario, stats: ChannelStats, plan: FlightPlan, budget_fraction: float = 0.8
) -> np.ndarray:
    """Co-phased starting point: each hover serves its nearest user.

    Active mode sizes the common amplitude to draw ``budget_fraction`` of the
    per-hover energy budget; passive mode uses unit amplitudes.
    """
    n_hov, m = stats.num_hovers, sc.num_elements
    phi = np.zeros((n_hov, m), dtype=complex)
    for l in range(n_hov):
        q = stats.positions[l]
        nearest = min(range(sc.num_users), key=lambda k: abs(sc.users[k] - q))
        direction = stats.psi[nearest, l]
        if sc.ris_mode == "active":
            t_l = max(plan.hover_times[l], 1e-3)
            cap_sq = sc.ris_energy_budget / (t_l * _ris_draw_coefficient(sc, stats, l))
            amp = math.sqrt(budget_fraction * cap_sq / m)
        else:
            amp = 1.0
        phi[l] = amp * direction
    return phi


@dataclass
class PhaseResult:
    reflection: ReflectionPlan
    phi: np.ndarray
    objective: float  # exact min_k h_k at the returned iterate
    trace: list[dict] = field(default_factory=list)
    status: str = "converged"


def _to_plan(phi: np.ndarray) -> ReflectionPlan:
    return ReflectionPlan(tuple(tuple(row) for row in phi))


def solve_phase_sca(
    sc: Scenario,
    stats: ChannelStats,
    plan: FlightPlan,
    phi_init: np.ndarray,
    solver_tol: float = 1e-8,
) -> PhaseResult:
    """Iterate the convex restriction until the max-min objective stalls.

    The reported objective sequence is the exact worst-user charged energy
    (normalized), which is nondecreasing across accepted iterates.  When the
    restriction is infeasible at the starting point, one margin-maximization
    pass restores feasibility before the main loop.
    """
    n_hov = stats.num_hovers
    aggregates = harvest_aggregates(sc, stats, plan.hover_times)
    quads = [
        [sinr_quadratic(sc, stats, k, l) for l in range(n_hov)]
        for k in range(sc.num_users)
    ]

    phi = np.array(phi_init, dtype=complex)
    trace: list[dict] = []
    best_phi = phi.copy()
    best_obj = float(np.min(aggregates.exact(phi)))
    status = "max_iterations"

    restored = False
    for r in range(1, sc.r_max + 1):
        prog, layout = linearize_and_build(sc, stats, plan, phi, aggregates, quads)
        sol = solve(prog, tol=solver_tol)
        if sol.status == "infeasible" and not restored:
            # margin maximization at the current expansion point; if the
            # tangent there is hopeless, retry once from the canonical
            # co-phased expansion before declaring infeasibility
            restored = True
            margin = -math.inf
            for anchor in (phi, initial_reflection(sc, stats, plan)):
                rest_prog, rest_layout = _restoration_program(sc, stats, plan, anchor, quads)
                rest = solve(rest_prog, tol=solver_tol)
                margin = -rest.objective if rest.optimal else -math.inf
                if rest.optimal and margin >= 0.0:
                    phi = rest_layout.unpack(rest.x)
                    break
            trace.append(
                {"stage": "phase", "r": r, "epsilon": best_obj,
                 "solver_status": "restoration", "kkt_gap": margin}
            )
            if margin < 0.0:
                status = "infeasible"
                break
            continue
        if not sol.optimal:
            status = f"solver_{sol.status}"
            trace.append(
                {"stage": "phase", "r": r, "epsilon": best_obj,
                 "solver_status": sol.status, "kkt_gap": sol.duality_gap}
            )
            break
        new_phi = layout.unpack(sol.x)
        exact = float(np.min(aggregates.exact(new_phi)))
        prev = best_obj
        trace.append(
            {"stage": "phase", "r": r, "epsilon": exact,
             "solver_status": sol.status, "kkt_gap": sol.duality_gap}
        )
        if exact >= best_obj:
            best_obj = exact
            best_phi = new_phi
        phi = new_phi
        if abs(exact - prev) <= sc.tolerance * max(abs(prev), 1e-12):
            status = "converged"
            break
    return PhaseResult(_to_plan(best_phi), best_phi, best_obj, trace, status)
