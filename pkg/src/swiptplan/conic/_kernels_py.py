"""Pure-numpy cone-algebra kernels (fallback for the compiled extension).

All functions operate on stacked cone vectors laid out as ``l`` orthant
entries followed by second-order-cone blocks described by absolute offsets
``starts`` and lengths ``dims``.  The compiled twin in ``_kernels.pyx``
implements the identical signatures; :mod:`swiptplan.conic.kernels` picks
one at import time.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def identity(l: int, starts: np.ndarray, dims: np.ndarray, m: int) -> np.ndarray:
    e = np.zeros(m)
    e[:l] = 1.0
    for s in starts:
        e[s] = 1.0
    return e


def min_eig(u: np.ndarray, l: int, starts: np.ndarray, dims: np.ndarray) -> float:
    """Smallest cone eigenvalue (orthant entries; ``u0 - ||u1||`` per block)."""
    worst = np.inf
    if l:
        worst = float(np.min(u[:l]))
    for s, d in zip(starts, dims):
        worst = min(worst, float(u[s] - np.linalg.norm(u[s + 1 : s + d])))
    return worst


def compute_scaling(
    s: np.ndarray, z: np.ndarray, l: int, starts: np.ndarray, dims: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nesterov-Todd scaling point for the current (s, z) pair.

    Returns ``(d, v, beta, lam)``: positive orthant scalings ``d``, the
    hyperbolic Householder vectors ``v`` (stacked over blocks, unit hyperbolic
    norm), per-block multipliers ``beta``, and the scaled variable
    ``lam = W z = W^{-1} s``.
    """
    d = np.sqrt(s[:l] / z[:l]) if l else np.zeros(0)
    lam = np.empty_like(s)
    lam[:l] = np.sqrt(s[:l] * z[:l])
    v = np.zeros(s.shape[0] - l)
    beta = np.zeros(len(starts))
    for i, (st, dim) in enumerate(zip(starts, dims)):
        sb = s[st : st + dim]
        zb = z[st : st + dim]
        # clamp guards against roundoff right at the cone boundary
        a_s = np.sqrt(max(sb[0] ** 2 - sb[1:] @ sb[1:], 1e-28 * sb[0] ** 2))
        a_z = np.sqrt(max(zb[0] ** 2 - zb[1:] @ zb[1:], 1e-28 * zb[0] ** 2))
        s_bar = sb / a_s
        z_bar = zb / a_z
        gamma = np.sqrt((1.0 + s_bar @ z_bar) / 2.0)
        # NT point (unit hyperbolic norm), then its Jordan square root so
        # that the Householder matrix 2 v v^T - J squares to P(w_bar).
        w0 = (s_bar[0] + z_bar[0]) / (2.0 * gamma)
        w1 = (s_bar[1:] - z_bar[1:]) / (2.0 * gamma)
        vb = np.empty(dim)
        vb[0] = np.sqrt((w0 + 1.0) / 2.0)
        vb[1:] = w1 / (2.0 * vb[0])
        beta[i] = np.sqrt(a_s / a_z)
        # lam = beta * (2 v (v.z) - J z)
        lb = 2.0 * vb * (vb @ zb)
        lb[0] -= zb[0]
        lb[1:] += zb[1:]
        lam[st : st + dim] = beta[i] * lb
        v[st - l : st - l + dim] = vb
    return d, v, beta, lam


def apply_w(
    x: np.ndarray,
    d: np.ndarray,
    v: np.ndarray,
    beta: np.ndarray,
    l: int,
    starts: np.ndarray,
    dims: np.ndarray,
    inverse: bool,
) -> np.ndarray:
    """Apply the NT scaling ``W`` (or its inverse) to a stacked vector."""
    y = np.empty_like(x)
    if l:
        y[:l] = x[:l] / d if inverse else x[:l] * d
    for i, (st, dim) in enumerate(zip(starts, dims)):
        vb = v[st - l : st - l + dim]
        xb = x[st : st + dim]
        if inverse:
            # W^{-1} = (1/beta) (2 (Jv)(Jv)^T - J)
            jv0 = vb[0]
            coef = 2.0 * (jv0 * xb[0] - vb[1:] @ xb[1:])
            yb = np.empty(dim)
            yb[0] = coef * jv0 - xb[0]
            yb[1:] = -coef * vb[1:] + xb[1:]
            y[st : st + dim] = yb / beta[i]
        else:
            coef = 2.0 * (vb @ xb)
            yb = coef * vb
            yb[0] -= xb[0]
            yb[1:] += xb[1:]
            y[st : st + dim] = beta[i] * yb
    return y


def apply_w_mat(
    x: np.ndarray,
    d: np.ndarray,
    v: np.ndarray,
    beta: np.ndarray,
    l: int,
    starts: np.ndarray,
    dims: np.ndarray,
    inverse: bool,
) -> np.ndarray:
    """Apply ``W`` (or ``W^{-1}``) to every column of a dense (m, n) matrix."""
    y = np.empty_like(x)
    if l:
        scale = (1.0 / d if inverse else d)[:, None]
        y[:l] = x[:l] * scale
    for i, (st, dim) in enumerate(zip(starts, dims)):
        vb = v[st - l : st - l + dim]
        xb = x[st : st + dim]
        if inverse:
            jv0 = vb[0]
            coef = 2.0 * (jv0 * xb[0] - vb[1:].T @ xb[1:])
            yb = np.empty_like(xb)
            yb[0] = coef * jv0 - xb[0]
            yb[1:] = -np.outer(vb[1:], coef) + xb[1:]
            y[st : st + dim] = yb / beta[i]
        else:
            coef = 2.0 * (vb @ xb)
            yb = np.outer(vb, coef)
            yb[0] -= xb[0]
            yb[1:] += xb[1:]
            y[st : st + dim] = beta[i] * yb
    return y


def jordan_mul(
    u: np.ndarray, w: np.ndarray, l: int, starts: np.ndarray, dims: np.ndarray
) -> np.ndarray:
    out = np.empty_like(u)
    out[:l] = u[:l] * w[:l]
    for st, dim in zip(starts, dims):
        ub = u[st : st + dim]
        wb = w[st : st + dim]
        out[st] = ub @ wb
        out[st + 1 : st + dim] = ub[0] * wb[1:] + wb[0] * ub[1:]
    return out


def jordan_solve(
    lam: np.ndarray, w: np.ndarray, l: int, starts: np.ndarray, dims: np.ndarray
) -> np.ndarray:
    """Solve ``lam o x = w`` block-wise (lam must be in the cone interior)."""
    out = np.empty_like(w)
    out[:l] = w[:l] / lam[:l]
    for st, dim in zip(starts, dims):
        lb = lam[st : st + dim]
        wb = w[st : st + dim]
        det = lb[0] ** 2 - lb[1:] @ lb[1:]
        x0 = (lb[0] * wb[0] - lb[1:] @ wb[1:]) / det
        out[st] = x0
        out[st + 1 : st + dim] = (wb[1:] - x0 * lb[1:]) / lb[0]
    return out


def max_step(
    u: np.ndarray, du: np.ndarray, l: int, starts: np.ndarray, dims: np.ndarray
) -> float:
    """Largest ``t`` with ``u + t*du`` still in the cone (inf when unbounded)."""
    t_max = np.inf
    if l:
        neg = du[:l] < 0
        if np.any(neg):
            t_max = float(np.min(u[:l][neg] / -du[:l][neg]))
    for st, dim in zip(starts, dims):
        ub = u[st : st + dim]
        db = du[st : st + dim]
        # roots of (u0 + t d0)^2 = ||u1 + t d1||^2 with u0 + t d0 >= 0
        a = db[0] ** 2 - db[1:] @ db[1:]
        b = ub[0] * db[0] - ub[1:] @ db[1:]
        c = ub[0] ** 2 - ub[1:] @ ub[1:]
        if c < 0.0:
            return 0.0
        roots = []
        if abs(a) > 1e-14:
            disc = b * b - a * c
            if disc >= 0.0:
                sq = np.sqrt(disc)
                roots = [(-b - sq) / a, (-b + sq) / a]
        elif abs(b) > 1e-14:
            roots = [-c / (2.0 * b)]
        block_t = np.inf
        for r in roots:
            if r > 1e-14 and ub[0] + r * db[0] >= -1e-12 * max(1.0, abs(ub[0])):
                block_t = min(block_t, r)
        t_max = min(t_max, block_t)
    return float(t_max)
