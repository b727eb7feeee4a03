"""Closed-form channel statistics for the reflected and direct links.

Everything downstream (constraint builders, energy accounting, validation)
consumes the per-(user, hover) quantities computed here:

* large-scale gains ``beta_d``, ``beta_t``, ``beta_r`` (reference gain over
  distance**exponent),
* the cascaded phase profile ``psi``: a unit-modulus M-vector combining the
  excess path length of the reflected route and the element-index phase ramp
  of a uniform linear array,
* the quadratic-form data ``(A, a, beta_d)`` such that the mean received
  power through reflection vector ``phi`` is
  ``D = phi^H A phi + 2 Re{a^H phi} + beta_d``.

All functions are pure and safe to evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, link_distances

__all__ = [
    "ChannelStats",
    "pathloss",
    "cascade_phase_profile",
    "second_moment_components",
    "channel_second_moment",
    "ris_reflected_noise_power",
    "ris_output_power",
    "sinr",
    "harvested_power",
    "compute_stats",
]

TWO_PI = 2.0 * math.pi


def pathloss(beta_0: float, dist: float, tau: float) -> float:
    """Large-scale gain at ``dist`` meters: ``beta_0 / dist**tau``."""
    return beta_0 / dist**tau


def cascade_phase_profile(sc: Scenario, q: complex, k: int) -> np.ndarray:
    """Unit-modulus phase profile of the cascaded reflect path for user ``k``.

    Entry m carries ``exp(-j * psi_m)`` with
    ``psi_m = (2*pi*(d_d + d_r - d_t) + 2*pi*(m-1)*d*(cos_aod - cos_aoa)) / wavelength``.
    """
    d_d, d_t, d_r, cos_aoa, cos_aod = link_distances(sc, q, k)
    m = np.arange(sc.num_elements)
    phase = (
        TWO_PI * (d_d + d_r - d_t)
        + TWO_PI * m * sc.element_spacing * (cos_aod - cos_aoa)
    ) / sc.wavelength
    return np.exp(-1j * phase)


def second_moment_components(
    sc: Scenario, q: complex, k: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadratic-form data ``(A, a, beta_d)`` of the mean received power.

    ``A`` is Hermitian PSD: a rank-1 term along the cascaded profile plus a
    positive multiple of the identity collecting the diffuse cross terms.
    """
    d_d, d_t, d_r, _, _ = link_distances(sc, q, k)
    beta_d = pathloss(sc.reference_gain, d_d, sc.tau_direct)
    beta_t = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
    beta_r = pathloss(sc.reference_gain, d_r, sc.tau_ris_user)

    mu_d, mu_t, mu_r = sc.mu_direct, sc.mu_uav_ris, sc.mu_ris_user
    denom_tr = (mu_r + 1.0) * (mu_t + 1.0)
    psi = cascade_phase_profile(sc, q, k)

    los_coef = mu_r * mu_t * beta_r * beta_t / denom_tr
    diffuse_coef = (mu_r + mu_t + 1.0) * beta_r * beta_t / denom_tr
    a_coef = math.sqrt(
        mu_d * mu_r * mu_t * beta_d * beta_r * beta_t / ((mu_d + 1.0) * denom_tr)
    )

    mat = los_coef * np.outer(psi, psi.conj())
    mat[np.diag_indices_from(mat)] += diffuse_coef
    return mat, a_coef * psi, beta_d


def channel_second_moment(
    mat: np.ndarray, vec: np.ndarray, beta_d: float, phi: np.ndarray
) -> float:
    """Mean received signal power ``D = phi^H A phi + 2 Re{a^H phi} + beta_d``."""
    quad = np.real(np.vdot(phi, mat @ phi))
    cross = 2.0 * np.real(np.vdot(vec, phi))
    return float(quad + cross + beta_d)


def ris_reflected_noise_power(sc: Scenario, k: int, q: complex, phi: np.ndarray) -> float:
    """Mean amplified-noise power landing on user ``k``: ``beta_r * sigma_ris^2 * ||phi||^2``."""
    _, _, d_r, _, _ = link_distances(sc, q, k)
    beta_r = pathloss(sc.reference_gain, d_r, sc.tau_ris_user)
    return float(beta_r * sc.ris_noise_w * np.real(np.vdot(phi, phi)))


def ris_output_power(sc: Scenario, q: complex, phi: np.ndarray) -> float:
    """Mean power emitted by the surface: ``(sum_k p_k beta_t + sigma_ris^2) * ||phi||^2``."""
    _, d_t, _, _, _ = link_distances(sc, q, 0)
    beta_t = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
    return float((sc.total_tx_power * beta_t + sc.ris_noise_w) * np.real(np.vdot(phi, phi)))


@dataclass(frozen=True)
class ChannelStats:
    """Per-(user, hover) channel statistics for a fixed set of hover points.

    Shapes: ``beta_d[k, l]``, ``beta_t[l]``, ``beta_r[k]``, ``psi[k, l, :]``,
    ``quad[k, l, :, :]`` (Hermitian PSD), ``cross[k, l, :]``.
    """

    positions: tuple[complex, ...]
    beta_d: np.ndarray
    beta_t: np.ndarray
    beta_r: np.ndarray
    psi: np.ndarray
    quad: np.ndarray
    cross: np.ndarray

    @property
    def num_users(self) -> int:
        return self.beta_d.shape[0]

    @property
    def num_hovers(self) -> int:
        return self.beta_d.shape[1]

    def second_moment(self, k: int, l: int, phi: np.ndarray) -> float:
        return channel_second_moment(self.quad[k, l], self.cross[k, l], self.beta_d[k, l], phi)


def compute_stats(sc: Scenario, positions) -> ChannelStats:
    """Evaluate the closed-form statistics at each hover position."""
    positions = tuple(positions)
    k_users, n_hov, m = sc.num_users, len(positions), sc.num_elements
    beta_d = np.zeros((k_users, n_hov))
    beta_t = np.zeros(n_hov)
    beta_r = np.zeros(k_users)
    psi = np.zeros((k_users, n_hov, m), dtype=complex)
    quad = np.zeros((k_users, n_hov, m, m), dtype=complex)
    cross = np.zeros((k_users, n_hov, m), dtype=complex)

    for l, q in enumerate(positions):
        _, d_t, _, _, _ = link_distances(sc, q, 0)
        beta_t[l] = pathloss(sc.reference_gain, d_t, sc.tau_uav_ris)
        for k in range(k_users):
            mat, vec, bd = second_moment_components(sc, q, k)
            quad[k, l] = mat
            cross[k, l] = vec
            beta_d[k, l] = bd
            psi[k, l] = cascade_phase_profile(sc, q, k)
    for k in range(k_users):
        _, _, d_r, _, _ = link_distances(sc, positions[0], k)
        beta_r[k] = pathloss(sc.reference_gain, d_r, sc.tau_ris_user)
    return ChannelStats(positions, beta_d, beta_t, beta_r, psi, quad, cross)


def sinr(sc: Scenario, stats: ChannelStats, phi: np.ndarray, k: int, l: int) -> float:
    """Mean-power SINR of user ``k`` at hover ``l`` for reflection vector ``phi``."""
    d = stats.second_moment(k, l, phi)
    eta = sc.split_ratio
    interference = eta * (sc.total_tx_power - sc.tx_power[k]) * d
    noise_refl = stats.beta_r[k] * sc.ris_noise_w * float(np.real(np.vdot(phi, phi)))
    return eta * sc.tx_power[k] * d / (interference + noise_refl + sc.noise_user)


def harvested_power(sc: Scenario, d_kl: float, k: int) -> float:
    """Power routed to the harvester: ``(1 - eta) * p_k * D``."""
    return (1.0 - sc.split_ratio) * sc.tx_power[k] * d_kl
