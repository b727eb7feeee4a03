import numpy as np
import pytest

from swiptplan.channel import compute_stats
from swiptplan.energy import system_energy
from swiptplan.optimizer import InitializationError, initialize, run_algorithm1
from swiptplan.sca_phase import harvest_aggregates
from swiptplan.sca_trajectory import audit_exact_constraints
from swiptplan.scenario import default_scenario


def test_initialize_mild_requirement_keeps_default_hover_time():
    sc = default_scenario(energy_requirements=(1e-12,) * 5)
    phi, plan = initialize(sc)
    assert plan.hover_times == (2.0,) * sc.num_hovers


def test_initialize_negligible_requirement_is_trivially_feasible():
    sc = default_scenario(energy_requirements=(1e-300,) * 5)
    phi, plan = initialize(sc)
    assert plan.hover_times == (2.0,) * sc.num_hovers
    assert max(audit_exact_constraints(sc, plan, phi).values()) <= 0.01


def test_initialize_reference_scenario_passes_exact_audit():
    sc = default_scenario()  # M = 32, active
    phi, plan = initialize(sc)
    audit = audit_exact_constraints(sc, plan, phi)
    assert max(audit.values()) <= 0.01
    stats = compute_stats(sc, plan.interior)
    agg = harvest_aggregates(sc, stats, plan.hover_times)
    assert float(np.min(agg.exact(phi))) >= 1.0


def test_initialize_unreachable_requirement_names_constraint():
    sc = default_scenario(energy_requirements=(10.0,) * 5)  # 10 J per user: hopeless
    with pytest.raises(InitializationError, match="harvest"):
        initialize(sc)


def test_single_round_runs_each_stage_once():
    sc = default_scenario(x_max=1, n_max=3, r_max=3)
    res = run_algorithm1(sc)
    stages = [row["stage"] for row in res.trace if "stage" in row]
    assert "trajectory" in stages and "phase" in stages and "outer" in stages
    outer_rows = [row for row in res.trace if row.get("stage") == "outer"]
    assert len(outer_rows) == 1


def test_phase_acceptance_never_lowers_worst_margin():
    sc = default_scenario(x_max=3, n_max=5, r_max=4)
    res = run_algorithm1(sc)
    outer = [row for row in res.trace if row.get("stage") == "outer"]
    margins = [row["phase_objective"] for row in outer]
    # the accepted reflection always keeps the worst margin feasible
    assert all(m >= 1.0 - 1e-6 for m in margins)


def test_reported_energy_matches_recomputation():
    sc = default_scenario(x_max=2, n_max=5, r_max=4)
    res = run_algorithm1(sc)
    recomputed = system_energy(sc, res.flight)
    assert res.energy.total == pytest.approx(recomputed.total, rel=1e-9)
    assert res.total_energy == pytest.approx(recomputed.total, rel=1e-9)
    phi = np.array([np.array(row) for row in res.reflection.phi])
    assert max(audit_exact_constraints(sc, res.flight, phi).values()) <= 0.01


def test_outer_fluctuation_is_bounded():
    sc = default_scenario(x_max=4, n_max=6, r_max=5)
    res = run_algorithm1(sc)
    outer = [row for row in res.trace if row.get("stage") == "outer"]
    assert outer
    for row in outer:
        assert row["fluctuation_vs_best"] <= 0.05


def test_deterministic_given_seed():
    sc = default_scenario(x_max=1, n_max=3, r_max=3)
    a = run_algorithm1(sc, seed=5, jitter=1.0)
    b = run_algorithm1(sc, seed=5, jitter=1.0)
    assert a.total_energy == b.total_energy
    assert a.flight.hover_positions == b.flight.hover_positions
    c = run_algorithm1(sc, seed=6, jitter=1.0)
    assert c.flight.hover_positions != a.flight.hover_positions
