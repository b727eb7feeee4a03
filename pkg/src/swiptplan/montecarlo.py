"""Sampling estimators and exhaustive search used to validate closed forms.

Every estimator draws from a counter-based generator seeded through
``SeedSequence(seed, spawn_key=...)`` so that streams are independent per
(user, hover) pair and bit-reproducible regardless of evaluation order or
chunking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import harvested_power, pathloss
from .scenario import FlightPlan, ReflectionPlan, Scenario, link_distances

__all__ = [
    "McEstimate",
    "mc_second_moment",
    "mc_ris_reflected_noise",
    "mc_ris_output_power",
    "mc_ergodic_rate",
    "brute_force_phase_oracle",
    "PhaseGrid",
]

_CHUNK = 20000


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def z_score(self, reference: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.std_error


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _cn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly-symmetric complex normal with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _estimate(total: float, total_sq: float, n: int, seed: int) -> McEstimate:
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0) * n / (n - 1)
    return McEstimate(mean, math.sqrt(var / n), n, seed)


def _los_components(sc: Scenario, q: complex, k: int):
    """Deterministic parts of the three links at hover position ``q``."""
    d_d, d_t, d_r, cos_t, cos_r = link_distances(sc, q, k)
    lam, spacing, m = sc.wavelength, sc.element_spacing, sc.num_elements
    idx = np.arange(m)
    g_d_los = np.exp(-1j * 2.0 * np.pi * d_d / lam)
    g_t_los = np.exp(-1j * 2.0 * np.pi * (d_t + idx * spacing * cos_t) / lam)
    g_r_los = np.exp(-1j * 2.0 * np.pi * (d_r + idx * spacing * cos_r) / lam)
    beta_d = pathloss(sc.reference_gain, d_d, sc.tau_direct)
    beta_t = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
    beta_r = pathloss(sc.reference_gain, d_r, sc.tau_ris_user)
    return (beta_d, beta_t, beta_r), (g_d_los, g_t_los, g_r_los)


def _sample_links(sc, betas, los, rng, n):
    """Draw ``n`` joint realizations of (g_d, g_t, g_r)."""
    beta_d, beta_t, beta_r = betas
    g_d_los, g_t_los, g_r_los = los
    mu_d, mu_t, mu_r = sc.mu_direct, sc.mu_uav_ris, sc.mu_ris_user
    m = sc.num_elements
    g_d = math.sqrt(beta_d) * (
        math.sqrt(mu_d / (mu_d + 1.0)) * g_d_los + math.sqrt(1.0 / (mu_d + 1.0)) * _cn(rng, n)
    )
    g_t = math.sqrt(beta_t) * (
        math.sqrt(mu_t / (mu_t + 1.0)) * g_t_los[None, :]
        + math.sqrt(1.0 / (mu_t + 1.0)) * _cn(rng, n, m)
    )
    g_r = math.sqrt(beta_r) * (
        math.sqrt(mu_r / (mu_r + 1.0)) * g_r_los[None, :]
        + math.sqrt(1.0 / (mu_r + 1.0)) * _cn(rng, n, m)
    )
    return g_d, g_t, g_r


def mc_second_moment(
    sc: Scenario, q: complex, k: int, phi: np.ndarray, n_samples: int, seed: int
) -> McEstimate:
    """Sampled mean of the squared end-to-end channel magnitude."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = _rng(seed, k)
    betas, los = _los_components(sc, q, k)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        g_d, g_t, g_r = _sample_links(sc, betas, los, rng, n)
        g = np.einsum("nm,m,nm->n", g_r.conj(), phi, g_t) + g_d
        val = np.abs(g) ** 2
        total += float(val.sum())
        total_sq += float((val**2).sum())
        done += n
    return _estimate(total, total_sq, n_samples, seed)


def mc_ris_reflected_noise(
    sc: Scenario, q: complex, k: int, phi: np.ndarray, n_samples: int, seed: int
) -> McEstimate:
    """Sampled mean of the amplified-noise power term for user ``k``."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = _rng(seed, k, 1)
    betas, los = _los_components(sc, q, k)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        _, _, g_r = _sample_links(sc, betas, los, rng, n)
        val = sc.ris_noise_w * np.abs(g_r.conj() * phi[None, :]) ** 2 @ np.ones(sc.num_elements)
        total += float(val.sum())
        total_sq += float((val**2).sum())
        done += n
    return _estimate(total, total_sq, n_samples, seed)


def mc_ris_output_power(
    sc: Scenario, q: complex, phi: np.ndarray, n_samples: int, seed: int
) -> McEstimate:
    """Sampled mean emitted power of the surface (signals plus own noise)."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = _rng(seed, 0, 2)
    betas, los = _los_components(sc, q, 0)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        _, g_t, _ = _sample_links(sc, betas, los, rng, n)
        x = _cn(rng, n, sc.num_users)
        noise = math.sqrt(sc.ris_noise_w) * _cn(rng, n, sc.num_elements)
        amps = np.sqrt(np.asarray(sc.tx_power))
        # all users share the same feeder-side channel g_t at a given hover
        incident = g_t * (x @ amps)[:, None]
        val = np.abs(phi[None, :] * (incident + noise)) ** 2 @ np.ones(sc.num_elements)
        total += float(val.sum())
        total_sq += float((val**2).sum())
        done += n
    return _estimate(total, total_sq, n_samples, seed)


def mc_ergodic_rate(
    sc: Scenario, q: complex, k: int, phi: np.ndarray, n_samples: int, seed: int
) -> McEstimate:
    """Sampled mean of ``log2(1 + instantaneous SINR)`` for user ``k``."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = _rng(seed, k, 3)
    betas, los = _los_components(sc, q, k)
    eta = sc.split_ratio
    p_k = sc.tx_power[k]
    p_other = sc.total_tx_power - p_k
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(_CHUNK, n_samples - done)
        g_d, g_t, g_r = _sample_links(sc, betas, los, rng, n)
        g2 = np.abs(np.einsum("nm,m,nm->n", g_r.conj(), phi, g_t) + g_d) ** 2
        refl_noise = sc.ris_noise_w * (np.abs(g_r.conj() * phi[None, :]) ** 2).sum(axis=1)
        sinr = eta * p_k * g2 / (eta * p_other * g2 + refl_noise + sc.noise_user)
        val = np.log2(1.0 + sinr)
        total += float(val.sum())
        total_sq += float((val**2).sum())
        done += n
    return _estimate(total, total_sq, n_samples, seed)


# ---------------------------------------------------------------------------
# exhaustive search over tiny reflection plans


@dataclass(frozen=True)
class PhaseGrid:
    n_phase: int = 720
    n_amplitude: int = 200

    def points_per_element(self) -> int:
        return self.n_phase * self.n_amplitude


def _amplitude_cap(sc: Scenario, q: complex, t_l: float) -> float:
    """Per-hover norm cap implied by the surface energy budget."""
    if sc.ris_mode == "passive":
        return 1.0
    _, d_t, _, _, _ = link_distances(sc, q, 0)
    beta_t = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
    draw = sc.total_tx_power * beta_t + sc.ris_noise_w
    if t_l <= 0.0:
        return math.inf
    return math.sqrt(sc.ris_energy_budget / (t_l * draw))


def brute_force_phase_oracle(
    sc: Scenario, plan: FlightPlan, grid: PhaseGrid = PhaseGrid()
) -> tuple[ReflectionPlan, float]:
    """Exhaustive max-min normalized charged energy over a quantized grid.

    Only meaningful for instances with at most two total reflection
    coefficients; larger grids are rejected.  Candidates must satisfy the
    exact per-user SINR thresholds and the per-hover surface energy budget.
    """
    from .channel import compute_stats, sinr  # local import avoids a cycle

    hovers = plan.interior
    n_coeff = len(hovers) * sc.num_elements
    if n_coeff > 2:
        raise ValueError("exhaustive search limited to at most 2 reflection coefficients")
    total_points = grid.points_per_element() ** n_coeff
    if total_points > 10**7:
        raise ValueError(f"grid too large ({total_points} > 1e7 points)")

    stats = compute_stats(sc, hovers)
    passive = sc.ris_mode == "passive"
    caps = [_amplitude_cap(sc, q, t) for q, t in zip(hovers, plan.hover_times)]

    phases = np.linspace(0.0, 2.0 * np.pi, grid.n_phase, endpoint=False)

    def element_candidates(l: int) -> np.ndarray:
        if passive:
            cap = 1.0  # per-element modulus bound, independent of M
        else:
            cap = caps[l] if sc.num_elements == 1 else caps[l] / math.sqrt(sc.num_elements)
            if not math.isfinite(cap):
                cap = 1.0
        amps = np.linspace(cap / grid.n_amplitude, cap, grid.n_amplitude)
        vals = (amps[:, None] * np.exp(1j * phases)[None, :]).ravel()
        return vals

    per_slot = []
    slot_hover = []
    for l in range(len(hovers)):
        for _ in range(sc.num_elements):
            per_slot.append(element_candidates(l))
            slot_hover.append(l)

    eta = sc.split_ratio
    best_obj = -math.inf
    best_phi = None
    n_hov = len(hovers)
    m = sc.num_elements
    for combo in itertools.product(*per_slot):
        phi_by_hover = [
            np.array(combo[l * m : (l + 1) * m], dtype=complex) for l in range(n_hov)
        ]
        ok = True
        for l, phi in enumerate(phi_by_hover):
            if passive:
                if np.max(np.abs(phi)) > 1.0 + 1e-12:
                    ok = False
                    break
            elif math.isfinite(caps[l]) and np.linalg.norm(phi) > caps[l] * (1 + 1e-12):
                ok = False
                break
            for k in range(sc.num_users):
                if sinr(sc, stats, phi, k, l) < sc.sinr_thresholds[k] * (1 - 1e-12):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        worst = math.inf
        for k in range(sc.num_users):
            charged = sum(
                plan.hover_times[l]
                * harvested_power(sc, stats.second_moment(k, l, phi_by_hover[l]), k)
                for l in range(n_hov)
            )
            worst = min(worst, charged / sc.energy_requirements[k])
        if worst > best_obj:
            best_obj = worst
            best_phi = tuple(tuple(p) for p in phi_by_hover)

    if best_phi is None:
        raise ValueError("no grid point satisfies the SINR and energy constraints")
    return ReflectionPlan(best_phi), float(best_obj)
