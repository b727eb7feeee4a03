"""Homogeneous self-dual interior-point solver for the conic IR.

The program is lowered to the standard form

    minimize    c @ x
    subject to  A @ x == b                (zero-cone rows)
                G @ x + s == h, s in K    (orthant + second-order blocks)

with rotated cones mapped to plain second-order cones through an orthogonal
change of rows.  A Mehrotra predictor-corrector iteration runs on the
self-dual embedding, so primal/dual infeasibility come out as certificates
instead of failures.  Termination is measured against the *original* problem
data (residuals are recomputed outside the internal equilibration), which is
what the reported :class:`ConicSolution` fields mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels
from .program import Cone, ConicProgram, ConicSolution

__all__ = ["solve", "SolverOptions"]

_SQRT1_2 = np.sqrt(0.5)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    equilibrate_rounds: int = 6
    regularization: float = 1e-11
    refinement_steps: int = 2
    step_fraction: float = 0.99


@dataclass
class _StandardForm:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    g: np.ndarray
    h: np.ndarray
    l: int
    soc_starts: np.ndarray
    soc_dims: np.ndarray

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def p(self) -> int:
        return self.a_eq.shape[0]

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def degree(self) -> int:
        return self.l + len(self.soc_dims)


def _lower(prog: ConicProgram) -> _StandardForm:
    """Stack the IR into standard form (orthant rows first, then SOC blocks)."""
    n = prog.n_vars
    eq_a, eq_b = [], []
    lp_a, lp_b = [], []
    soc = []

    if prog.lower is not None:
        for j, lb in enumerate(np.asarray(prog.lower, dtype=float)):
            if np.isfinite(lb):
                row = np.zeros(n)
                row[j] = 1.0
                lp_a.append(row)
                lp_b.append(-lb)
    if prog.upper is not None:
        for j, ub in enumerate(np.asarray(prog.upper, dtype=float)):
            if np.isfinite(ub):
                row = np.zeros(n)
                row[j] = -1.0
                lp_a.append(row)
                lp_b.append(ub)

    for blk in prog.blocks:
        if blk.cone == Cone.ZERO:
            eq_a.append(blk.a)
            eq_b.append(blk.b)
        elif blk.cone == Cone.NONNEG:
            lp_a.append(blk.a)
            lp_b.append(blk.b)
        elif blk.cone == Cone.SOC:
            soc.append((blk.a, blk.b))
        else:  # rotated: (u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w) in SOC
            a2 = blk.a.copy()
            b2 = blk.b.copy()
            a2[0] = (blk.a[0] + blk.a[1]) * _SQRT1_2
            a2[1] = (blk.a[0] - blk.a[1]) * _SQRT1_2
            b2[0] = (blk.b[0] + blk.b[1]) * _SQRT1_2
            b2[1] = (blk.b[0] - blk.b[1]) * _SQRT1_2
            soc.append((a2, b2))

    a_eq = np.vstack(eq_a) if eq_a else np.zeros((0, n))
    # A x + b = 0  ->  A x = -b
    b_eq = -np.concatenate(eq_b) if eq_b else np.zeros(0)

    g_rows, h_rows, dims = [], [], []
    for a, b in zip(lp_a, lp_b):
        g_rows.append(np.atleast_2d(a))
        h_rows.append(np.atleast_1d(b))
    l = int(sum(r.shape[0] for r in g_rows))
    for a, b in soc:
        g_rows.append(a)
        h_rows.append(b)
        dims.append(a.shape[0])

    if g_rows:
        # membership A x + b in K  <=>  s = h - G x in K with G = -A, h = b
        g = -np.vstack(g_rows)
        h = np.concatenate(h_rows)
    else:
        g = np.zeros((0, n))
        h = np.zeros(0)

    dims_arr = np.asarray(dims, dtype=np.int64)
    starts = l + np.concatenate([[0], np.cumsum(dims_arr)[:-1]]) if dims else np.zeros(0, dtype=np.int64)
    return _StandardForm(prog.c.astype(float).copy(), a_eq, b_eq, g, h, l, starts.astype(np.int64), dims_arr)


def _equilibrate(sf: _StandardForm, rounds: int):
    """Cone-aware Ruiz scaling; returns (scaled form, recovery data)."""
    n, p, m = sf.n, sf.p, sf.m
    col = np.ones(n)
    row_eq = np.ones(p)
    row_in = np.ones(m)
    a, g = sf.a_eq.copy(), sf.g.copy()
    b, h, c = sf.b_eq.copy(), sf.h.copy(), sf.c.copy()

    blocks = [(int(s), int(s + d)) for s, d in zip(sf.soc_starts, sf.soc_dims)]
    for _ in range(rounds):
        if p:
            ra = np.sqrt(np.maximum(np.max(np.abs(a), axis=1), 1e-12))
            a /= ra[:, None]
            b /= ra
            row_eq /= ra
        if m:
            rg = np.sqrt(np.maximum(np.max(np.abs(g), axis=1), 1e-12))
            for lo, hi in blocks:
                rg[lo:hi] = np.max(rg[lo:hi])  # uniform scaling keeps the cone
            g /= rg[:, None]
            h /= rg
            row_in /= rg
        stack = np.vstack([a, g]) if p else g
        if stack.shape[0]:
            cs = np.sqrt(np.maximum(np.max(np.abs(stack), axis=0), 1e-12))
        else:
            cs = np.ones(n)
        a /= cs[None, :]
        g /= cs[None, :]
        c /= cs
        col /= cs
    c_scale = max(1.0, float(np.linalg.norm(c, np.inf)))
    c = c / c_scale
    scaled = _StandardForm(c, a, b, g, h, sf.l, sf.soc_starts, sf.soc_dims)
    return scaled, (col, row_eq, row_in, c_scale)


def _w_squared(sf: _StandardForm, scaling) -> np.ndarray:
    """Dense ``W^T W`` assembled per cone block."""
    d, v, beta, _ = scaling
    m = sf.m
    w2 = np.zeros((m, m))
    if sf.l:
        w2[: sf.l, : sf.l] = np.diag(d**2)
    for i, (st, dim) in enumerate(zip(sf.soc_starts, sf.soc_dims)):
        vb = v[st - sf.l : st - sf.l + dim]
        # W^2 = beta^2 (2 wbar wbar^T - J) with wbar the Jordan square of v
        wbar = np.empty(dim)
        wbar[0] = vb @ vb
        wbar[1:] = 2.0 * vb[0] * vb[1:]
        blk = 2.0 * np.outer(wbar, wbar)
        blk[0, 0] -= 1.0
        blk[1:, 1:] += np.eye(dim - 1)
        w2[st : st + dim, st : st + dim] = beta[i] ** 2 * blk
    return w2


class _KKT:
    """LU factorization of the (regularized) augmented Newton system."""

    def __init__(self, sf: _StandardForm, scaling, delta: float):
        self.sf = sf
        self.scaling = scaling
        n, p, m = sf.n, sf.p, sf.m
        self.w2 = _w_squared(sf, scaling) if m else np.zeros((0, 0))
        k = n + p + m
        mmat = np.zeros((k, k))
        mmat[:n, :n] = delta * np.eye(n)
        if p:
            mmat[:n, n : n + p] = sf.a_eq.T
            mmat[n : n + p, :n] = sf.a_eq
            mmat[n : n + p, n : n + p] = -delta * np.eye(p)
        if m:
            mmat[:n, n + p :] = sf.g.T
            mmat[n + p :, :n] = sf.g
            mmat[n + p :, n + p :] = -(self.w2 + delta * np.eye(m))
        self.lu = sla.lu_factor(mmat)

    def solve(self, rx, ry, rz, refine: int = 2):
        sf = self.sf
        n, p, m = sf.n, sf.p, sf.m
        rhs = np.concatenate([rx, ry, rz])
        sol = sla.lu_solve(self.lu, rhs)
        for _ in range(refine):
            dx, dy, dz = sol[:n], sol[n : n + p], sol[n + p :]
            res = rhs - np.concatenate(
                [
                    sf.a_eq.T @ dy + sf.g.T @ dz,
                    sf.a_eq @ dx,
                    sf.g @ dx - self.w2 @ dz,
                ]
            )
            sol = sol + sla.lu_solve(self.lu, res)
        return sol[:n], sol[n : n + p], sol[n + p :]


def _cone_violation(u: np.ndarray, sf: _StandardForm) -> float:
    if not sf.m:
        return 0.0
    return max(0.0, -kernels.min_eig(u, sf.l, sf.soc_starts, sf.soc_dims))


def solve(prog: ConicProgram, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
    """Solve the program to relative tolerance ``tol``.

    ``status == "optimal"`` guarantees the reported primal/dual residuals and
    relative duality gap are below ``tol``; infeasibility and unboundedness
    are reported as statuses, and numerical breakdown degrades to
    ``max_iter`` with the best iterate found.
    """
    prog.validate()
    opts = SolverOptions(tol=tol, max_iter=max_iter)
    sf0 = _lower(prog)
    sf, (col, row_eq, row_in, c_scale) = _equilibrate(sf0, opts.equilibrate_rounds)

    n, p, m = sf.n, sf.p, sf.m
    l, starts, dims = sf.l, sf.soc_starts, sf.soc_dims
    deg = sf.degree + 1

    if m == 0:
        # No inequalities: fall back to a tiny equality-constrained LP solve.
        return _solve_equality_only(prog, sf0, opts)

    e = kernels.identity(l, starts, dims, m)
    norm_b = max(1.0, float(np.linalg.norm(sf0.b_eq))) if p else 1.0
    norm_h = max(1.0, float(np.linalg.norm(sf0.h)))
    norm_c = max(1.0, float(np.linalg.norm(sf0.c)))
    data_scale = max(
        1.0,
        float(np.max(np.abs(sf0.g), initial=0.0)),
        float(np.max(np.abs(sf0.a_eq), initial=0.0)),
    )

    # identity scaling (W = I): v is the cone identity restricted to SOC blocks
    v_id = np.zeros(m - l)
    for st in starts:
        v_id[st - l] = 1.0
    ident = (np.ones(l), v_id, np.ones(len(dims)), e.copy())

    delta = opts.regularization
    kkt = _KKT(sf, ident, delta)
    # primal init: least-norm slack; dual init: least-norm multiplier
    x0, _, z0 = kkt.solve(np.zeros(n), sf.b_eq, sf.h, refine=1)
    s = sf.h - sf.g @ x0
    shift = -kernels.min_eig(s, l, starts, dims)
    if shift >= 0:
        s = s + (1.0 + shift) * e
    xd, yd, zd = kkt.solve(-sf.c, np.zeros(p), np.zeros(m), refine=1)
    z = zd.copy()
    shift = -kernels.min_eig(z, l, starts, dims)
    if shift >= 0:
        z = z + (1.0 + shift) * e
    x, y = x0, np.zeros(p)
    tau, kappa = 1.0, 1.0

    best = None
    best_score = np.inf

    def descale(xv, yv, zv, sv, tauv):
        x_o = col * xv / tauv
        y_o = row_eq * yv * c_scale / tauv if p else yv
        z_o = row_in * zv * c_scale / tauv
        s_o = sv / row_in / tauv
        return x_o, y_o, z_o, s_o

    status = "max_iter"
    iters = 0
    for it in range(opts.max_iter):
        iters = it + 1
        # -- original-space convergence test
        x_o, y_o, z_o, s_o = descale(x, y, z, s, tau)
        r_pe = sf0.a_eq @ x_o - sf0.b_eq if p else np.zeros(0)
        r_pi = sf0.g @ x_o + s_o - sf0.h
        r_d = (sf0.a_eq.T @ y_o if p else 0.0) + sf0.g.T @ z_o + sf0.c
        pres = max(
            float(np.linalg.norm(r_pe)) / norm_b,
            float(np.linalg.norm(r_pi)) / norm_h,
        )
        dres = float(np.linalg.norm(r_d)) / norm_c
        pcost = float(sf0.c @ x_o)
        dcost = -float(sf0.b_eq @ y_o + sf0.h @ z_o)
        gap = float(s_o @ z_o)
        relgap = gap / max(1.0, min(abs(pcost), abs(dcost)))
        score = max(pres, dres, relgap)
        if score < best_score:
            best_score = score
            best = (x_o, pcost, pres, dres, relgap)
        if pres <= opts.tol and dres <= opts.tol and relgap <= opts.tol:
            status = "optimal"
            break

        # -- infeasibility certificates (original space)
        y_cert = row_eq * y * c_scale
        z_cert = row_in * z * c_scale
        ip_combo = float(sf0.b_eq @ y_cert + sf0.h @ z_cert)
        if ip_combo < -1e-12:
            cert = (sf0.a_eq.T @ y_cert + sf0.g.T @ z_cert) / (-ip_combo)
            if float(np.linalg.norm(cert)) <= opts.tol * data_scale:
                status = "infeasible"
                break
        ctx = float(sf0.c @ (col * x))
        if ctx < -1e-12:
            x_c = col * x / (-ctx)
            ray_eq = float(np.linalg.norm(sf0.a_eq @ x_c)) if p else 0.0
            ray_s = -sf0.g @ x_c
            ray_viol = _cone_violation(ray_s, sf0) + ray_eq
            if ray_viol <= opts.tol * data_scale:
                status = "unbounded"
                break

        # -- Newton steps
        mu = (float(s @ z) + tau * kappa) / deg
        scaling = kernels.compute_scaling(s, z, l, starts, dims)
        lam = scaling[3]
        try:
            kkt = _KKT(sf, scaling, delta)
        except (sla.LinAlgError, ValueError):
            try:
                kkt = _KKT(sf, scaling, delta * 1e4)
            except (sla.LinAlgError, ValueError):
                break

        r1 = (sf.a_eq.T @ y if p else 0.0) + sf.g.T @ z + sf.c * tau
        r2 = sf.a_eq @ x - sf.b_eq * tau if p else np.zeros(0)
        r3 = sf.g @ x + s - sf.h * tau
        r4 = -float(sf.c @ x) - float(sf.b_eq @ y) - float(sf.h @ z) - kappa

        dx1, dy1, dz1 = kkt.solve(-sf.c, sf.b_eq, sf.h, refine=opts.refinement_steps)
        s1 = float(sf.c @ dx1) + float(sf.b_eq @ dy1) + float(sf.h @ dz1)

        def direction(d_s, d_tk, rmult):
            # rmult scales the linear-residual targets: 1 for the predictor,
            # (1 - sigma) for the combined step (residuals shrink with mu
            # along the central path of the self-dual embedding)
            v_s = kernels.jordan_solve(lam, d_s, l, starts, dims)
            wv = kernels.apply_w(v_s, *scaling[:3], l, starts, dims, False)
            dx0, dy0, dz0 = kkt.solve(
                -rmult * r1, -rmult * r2, -rmult * r3 - wv, refine=opts.refinement_steps
            )
            s0 = float(sf.c @ dx0) + float(sf.b_eq @ dy0) + float(sf.h @ dz0)
            denom = kappa - tau * s1
            if abs(denom) < 1e-300:
                denom = np.copysign(1e-300, denom)
            dtau = (d_tk - tau * rmult * r4 + tau * s0) / denom
            dx = dx0 + dtau * dx1
            dy = dy0 + dtau * dy1
            dz = dz0 + dtau * dz1
            dz_t = kernels.apply_w(dz, *scaling[:3], l, starts, dims, False)
            ds_t = v_s - dz_t
            ds = kernels.apply_w(ds_t, *scaling[:3], l, starts, dims, False)
            dkappa = rmult * r4 - (s0 + dtau * s1)
            return dx, dy, dz, ds, dtau, dkappa, ds_t, dz_t

        lam_sq = kernels.jordan_mul(lam, lam, l, starts, dims)

        aff = direction(-lam_sq, -tau * kappa, 1.0)
        step_z = kernels.max_step(lam, aff[7], l, starts, dims)
        step_s = kernels.max_step(lam, aff[6], l, starts, dims)
        step_t = tau / -aff[4] if aff[4] < 0 else np.inf
        step_k = kappa / -aff[5] if aff[5] < 0 else np.inf
        alpha_aff = min(1.0, step_z, step_s, step_t, step_k)
        sigma = max(0.0, min(1.0, 1.0 - alpha_aff)) ** 3

        corr = kernels.jordan_mul(aff[6], aff[7], l, starts, dims)
        d_s = -lam_sq - corr + sigma * mu * e
        d_tk = -tau * kappa - aff[4] * aff[5] + sigma * mu
        dx, dy, dz, ds, dtau, dkappa, ds_t, dz_t = direction(d_s, d_tk, 1.0 - sigma)

        step_z = kernels.max_step(lam, dz_t, l, starts, dims)
        step_s = kernels.max_step(lam, ds_t, l, starts, dims)
        step_t = tau / -dtau if dtau < 0 else np.inf
        step_k = kappa / -dkappa if dkappa < 0 else np.inf
        alpha = opts.step_fraction * min(step_z, step_s, step_t, step_k)
        alpha = min(1.0, alpha)
        if not np.isfinite(alpha) or alpha <= 0:
            break

        # backtrack until the trial point is strictly interior (protects the
        # scaling computation from roundoff at the boundary)
        accepted = False
        for _ in range(40):
            s_new = s + alpha * ds
            z_new = z + alpha * dz
            tau_new = tau + alpha * dtau
            kappa_new = kappa + alpha * dkappa
            if (
                tau_new > 0.0
                and kappa_new > 0.0
                and kernels.min_eig(s_new, l, starts, dims) > 0.0
                and kernels.min_eig(z_new, l, starts, dims) > 0.0
            ):
                accepted = True
                break
            alpha *= 0.8
        if not accepted:
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z, s = z_new, s_new
        tau, kappa = tau_new, kappa_new

    if status == "optimal":
        x_o, y_o, z_o, s_o = descale(x, y, z, s, tau)
        return ConicSolution("optimal", x_o, float(sf0.c @ x_o), pres, dres, relgap, iters)
    if status in ("infeasible", "unbounded"):
        x_best = best[0] if best is not None else np.zeros(n)
        return ConicSolution(status, x_best, np.nan, np.inf, np.inf, np.inf, iters)
    x_best, pcost_b, pres_b, dres_b, gap_b = best if best is not None else (
        np.zeros(n), np.nan, np.inf, np.inf, np.inf)
    return ConicSolution("max_iter", x_best, pcost_b, pres_b, dres_b, gap_b, iters)


def _solve_equality_only(prog: ConicProgram, sf: _StandardForm, opts: SolverOptions) -> ConicSolution:
    """Degenerate case: linear objective with only equality rows."""
    n, p = sf.n, sf.p
    if p == 0:
        if np.allclose(sf.c, 0.0):
            return ConicSolution("optimal", np.zeros(n), 0.0, 0.0, 0.0, 0.0, 0)
        return ConicSolution("unbounded", np.zeros(n), np.nan, np.inf, np.inf, np.inf, 0)
    x, res, rank, _ = np.linalg.lstsq(sf.a_eq, sf.b_eq, rcond=None)
    if np.linalg.norm(sf.a_eq @ x - sf.b_eq) > opts.tol * max(1.0, np.linalg.norm(sf.b_eq)):
        return ConicSolution("infeasible", x, np.nan, np.inf, np.inf, np.inf, 0)
    # objective unbounded unless c lies in the row space
    y, *_ = np.linalg.lstsq(sf.a_eq.T, -sf.c, rcond=None)
    if np.linalg.norm(sf.a_eq.T @ y + sf.c) > opts.tol * max(1.0, np.linalg.norm(sf.c)):
        return ConicSolution("unbounded", x, np.nan, np.inf, np.inf, np.inf, 0)
    return ConicSolution("optimal", x, float(sf.c @ x), 0.0, 0.0, 0.0, 1)
