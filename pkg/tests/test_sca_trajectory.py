import math

import numpy as np
import pytest

from conftest import random_phi, tiny_scenario
from swiptplan.channel import compute_stats, pathloss
from swiptplan.conic import Cone, solve
from swiptplan.energy import propulsion_power, uav_total_energy
from swiptplan.optimizer import initialize
from swiptplan.sca_trajectory import (
    audit_exact_constraints,
    build_trajectory_subproblem,
    harvest_u_coefficients,
    horizontal_distance_tangent,
    pathloss_tangents,
    solve_trajectory_sca,
    tighten_hover_times,
    _conservative_fraction,
)
from swiptplan.scenario import FlightPlan, default_scenario, link_distances


def test_pathloss_tangent_exact_at_expansion():
    sc = default_scenario()
    rng = np.random.default_rng(0)
    for _ in range(50):
        q_n = complex(*rng.uniform(-40, 40, 2))
        k = int(rng.integers(sc.num_users))
        tan_d, tan_t = pathloss_tangents(sc, q_n, k)
        d_d, d_t, _, _, _ = link_distances(sc, q_n, k)
        beta_d = pathloss(sc.reference_gain, d_d, sc.tau_direct)
        beta_t = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
        assert tan_d.evaluate(q_n) == pytest.approx(beta_d, rel=1e-10)
        assert tan_t.evaluate(q_n) == pytest.approx(beta_t, rel=1e-10)


def test_pathloss_tangent_global_minorant():
    sc = default_scenario()
    rng = np.random.default_rng(1)
    q_n = complex(-9.0, 12.0)
    tan_d, tan_t = pathloss_tangents(sc, q_n, 1)
    for _ in range(1000):
        q = complex(*rng.uniform(-80, 80, 2))
        d_d, d_t, _, _, _ = link_distances(sc, q, 1)
        assert tan_d.evaluate(q) <= pathloss(sc.reference_gain, d_d, sc.tau_direct) + 1e-18
        assert tan_t.evaluate(q) <= pathloss(sc.reference_gain, d_t, sc.tau_uav_ris) + 1e-18


def test_pathloss_tangent_flat_in_far_field():
    sc = default_scenario(uav_height=2e4, ris_height=10.0)
    tan_d, _ = pathloss_tangents(sc, complex(5.0, 5.0), 0)
    assert tan_d.slope < 1e-15  # slope vanishes as altitude dominates


def test_distance_tangent_properties():
    rng = np.random.default_rng(2)
    anchor = complex(3.0, -4.0)
    q_n = complex(-7.0, 2.0)
    tan = horizontal_distance_tangent(q_n, anchor)
    assert tan.evaluate(q_n) == pytest.approx(abs(q_n - anchor) ** 2, rel=1e-12)
    for _ in range(1000):
        q = complex(*rng.uniform(-100, 100, 2))
        assert tan.evaluate(q) <= abs(q - anchor) ** 2 + 1e-12

    degenerate = horizontal_distance_tangent(anchor, anchor)
    assert degenerate.evaluate(anchor) == pytest.approx(0.0, abs=1e-12)
    for _ in range(100):
        q = complex(*rng.uniform(-50, 50, 2))
        assert degenerate.evaluate(q) == pytest.approx(0.0, abs=1e-12)
        assert abs(q - anchor) ** 2 >= degenerate.evaluate(q)


def test_u_coefficients_zero_reflection():
    sc = default_scenario(num_elements=4)
    psi = np.exp(-1j * np.linspace(0.0, 2.0, 4))
    u1, u2, u3 = harvest_u_coefficients(sc, 1e-6, np.zeros(4, dtype=complex), psi)
    assert u1 == u2 == u3 == 0.0


def test_u_coefficients_cophased():
    sc = default_scenario(num_elements=8)
    psi = np.exp(-1j * np.linspace(0.0, 3.0, 8))
    c = 2.5
    phi = c * psi  # co-phased: psi^H phi = c * M, real and maximal
    beta_r = 1.3e-6
    u1, u2, u3 = harvest_u_coefficients(sc, beta_r, phi, psi)
    mu = 10.0
    denom = (mu + 1.0) ** 2
    assert u1 == pytest.approx(mu * mu * beta_r / denom * (c * 8) ** 2, rel=1e-12)
    expected_u2 = 2.0 * math.sqrt(mu**3 * beta_r / ((mu + 1.0) * denom)) * c * 8
    assert u2 == pytest.approx(expected_u2, rel=1e-12)
    assert u3 == pytest.approx((2 * mu + 1) * beta_r / denom * (c**2 * 8), rel=1e-12)


def test_u_reconstruction_identity():
    """With the profile frozen at the expansion point, the surrogate equals
    the exact mean power."""
    sc = default_scenario(num_elements=8)
    stats = compute_stats(sc, [complex(-6.0, 7.0)])
    rng = np.random.default_rng(3)
    for k in range(sc.num_users):
        phi = random_phi(rng, 8, scale=10.0 ** rng.uniform(-1, 2))
        u1, u2, u3 = harvest_u_coefficients(sc, stats.beta_r[k], phi, stats.psi[k, 0])
        surrogate = (
            (u1 + u3) * stats.beta_t[0]
            + u2 * math.sqrt(stats.beta_d[k, 0] * stats.beta_t[0])
            + stats.beta_d[k, 0]
        )
        exact = stats.second_moment(k, 0, phi)
        assert surrogate == pytest.approx(exact, rel=1e-10)


def test_share_and_time_tangents():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        y_n = rng.uniform(0.01, 5.0)
        y = rng.uniform(-5.0, 5.0)
        assert 2.0 * y_n * y - y_n**2 <= y**2 + 1e-12
        t_n = rng.uniform(0.01, 100.0)
        t = rng.uniform(1e-6, 200.0)
        assert 2.0 / t_n - t / t_n**2 <= 1.0 / t + 1e-12


def test_conservative_fraction():
    fr = _conservative_fraction(1.15)
    assert float(fr) == pytest.approx(1.15, abs=1e-12)
    fr = _conservative_fraction(1.2)
    assert float(fr) == pytest.approx(1.2, abs=1e-12)
    fr = _conservative_fraction(math.pi / 2.0)
    assert float(fr) <= math.pi / 2.0  # never rounds up


def _assemble_expansion_point(sc, phi, plan, prog, reg):
    """Variable assignment at the expansion point, towers filled tightly."""
    q_n = np.array(plan.interior)
    stats = compute_stats(sc, q_n)
    h = len(q_n)
    vals = {}
    for l in range(h):
        vals[f"qx{l}"] = q_n[l].real
        vals[f"qy{l}"] = q_n[l].imag
        vals[f"t{l}"] = max(plan.hover_times[l], 1e-3)
        vals[f"z1_{l}"] = stats.beta_t[l]
    verts = [sc.uav_start, *q_n, sc.uav_end]
    for i in range(sc.num_segments):
        vals[f"seg{i}"] = abs(verts[i + 1] - verts[i])
    for k in range(sc.num_users):
        for l in range(h):
            vals[f"z2_{k}_{l}"] = stats.beta_d[k, l]
            vals[f"z3_{k}_{l}"] = math.sqrt(stats.beta_d[k, l] * stats.beta_t[l])
    frac = _conservative_fraction(sc.tau_uav_ris / 2.0)
    hsq = (sc.uav_height - sc.ris_height) ** 2
    for l in range(h):
        u = abs(q_n[l] - sc.ris_position) ** 2 + hsq
        if f"w{l}" in reg.names:
            vals[f"w{l}"] = u ** (-float(frac))
        if f"r{l}" in reg.names:
            vals[f"r{l}"] = 1.0 / u
    x = np.zeros(prog.n_vars)
    unset = set()
    for name, idx in reg.names.items():
        if name in vals:
            x[idx] = vals[name] / reg.scales[idx]
        elif name.startswith("y_"):
            pass  # shares filled from the harvest cones below
        else:
            unset.add(idx)
    # shares tight on their cones
    for k in range(sc.num_users):
        pass
    # fill shares and tower nodes by tightening the rotated cones in order
    for blk in prog.blocks:
        if blk.cone != Cone.RSOC or blk.a.shape[0] != 3:
            continue
        cols = np.nonzero(blk.a[2])[0]
        if len(cols) != 1:
            continue
        idx = int(cols[0])
        name = next(nm for nm, i in reg.names.items() if i == idx)
        if not (name.startswith("y_") or "node" in name):
            continue
        u = blk.a[0] @ x + blk.b[0]
        v = blk.a[1] @ x + blk.b[1]
        val = math.sqrt(max(2.0 * u * v, 0.0)) * (1.0 - 1e-9)
        x[idx] = val / blk.a[2, idx]
        unset.discard(idx)
    return x


def test_expansion_point_feasible_for_restriction():
    for mode in ("active", "passive"):
        sc = default_scenario(ris_mode=mode)
        phi, plan = initialize(sc)
        q_n = np.array(plan.interior)
        t_n = np.array(plan.hover_times)
        prog, reg = build_trajectory_subproblem(sc, phi, q_n, t_n, step_limit=4.0)
        x = _assemble_expansion_point(sc, phi, plan, prog, reg)
        assert prog.residual(x) <= 1e-6, mode


def test_trajectory_descent_and_audit():
    sc = default_scenario(n_max=8)
    phi, plan = initialize(sc)
    res = solve_trajectory_sca(sc, phi, plan)
    accepted = [row["E_V"] for row in res.trace if row["accepted"]]
    assert accepted, "no accepted iterate"
    for a, b in zip(accepted, accepted[1:]):
        assert b <= a * (1.0 + 1e-7)
    assert res.audit_violation <= 0.01
    assert res.energy <= uav_total_energy(sc, plan).uav_total


def test_tighten_is_exact_repair():
    sc = default_scenario()
    phi, plan = initialize(sc)
    slack_plan = FlightPlan(plan.hover_positions, tuple(3.0 * t for t in plan.hover_times))
    tightened = tighten_hover_times(sc, slack_plan, phi, margin=1.02)
    audit = audit_exact_constraints(sc, tightened, phi)
    assert audit["harvest"] == 0.0
    assert audit["ris_energy"] <= 1e-9
    assert uav_total_energy(sc, tightened).uav_total < uav_total_energy(sc, slack_plan).uav_total


def test_hover_moves_toward_user_as_requirement_grows():
    positions = []
    for e_req in (2e-6, 8e-6, 2e-5, 4e-5, 4.8e-5):
        sc = tiny_scenario(0).with_overrides(
            energy_requirements=(e_req,), num_elements=1, n_max=10
        )
        phi, plan = initialize(sc)
        res = solve_trajectory_sca(sc, phi, plan)
        positions.append(res.plan.interior[0])
    user = tiny_scenario(0).users[0]
    dists = [abs(q - user) for q in positions]
    # tighter requirements pull the hover point toward the user (allowing for
    # small solver wiggle between adjacent requirement levels)
    assert dists[-1] < dists[0] - 1.0
    for a, b in zip(dists, dists[1:]):
        assert b <= a + 0.5


def test_constraint_free_limit_recovers_straight_line():
    sc = tiny_scenario(0).with_overrides(
        energy_requirements=(1e-30,), sinr_thresholds=(1e-12,), n_max=10
    )
    phi, plan = initialize(sc)
    res = solve_trajectory_sca(sc, phi, plan)
    assert sum(res.plan.hover_times) < 1.0
    straight = propulsion_power(sc, sc.cruise_speed) * 70.0 / sc.cruise_speed
    assert res.energy <= straight * 1.02 + sum(res.plan.hover_times) * 200.0


def test_solution_passes_exact_audit_with_slack():
    sc = default_scenario(n_max=6)
    phi, plan = initialize(sc)
    res = solve_trajectory_sca(sc, phi, plan)
    audit = audit_exact_constraints(sc, res.plan, phi)
    assert max(audit.values()) <= 0.01
