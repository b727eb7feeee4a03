"""Language-neutral second-order-cone program representation.

A :class:`ConicProgram` minimizes ``c @ x`` subject to a list of cone
memberships ``A_i @ x + b_i in K_i`` with ``K_i`` one of:

* ``zero``      : the affine map must vanish (equality rows),
* ``nonneg``    : every entry nonnegative,
* ``soc``       : ``s[0] >= norm(s[1:])``, dimension >= 2,
* ``rsoc``      : ``2*s[0]*s[1] >= norm(s[2:])^2, s[0] >= 0, s[1] >= 0``,
  dimension >= 3.

The rotated-cone convention carries the factor two (``2*u*v >= ||w||^2``);
builders and the solver all target it.  Optional per-variable bounds are
sugar lowered to ``nonneg`` rows at solve time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = ["Cone", "ConeBlock", "ConicProgram", "ConicSolution", "complex_embed"]


class Cone(str, Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"
    RSOC = "rsoc"


@dataclass(frozen=True)
class ConeBlock:
    a: np.ndarray  # (dim, n_vars)
    b: np.ndarray  # (dim,)
    cone: Cone

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass
class ConicProgram:
    """Minimize ``c @ x`` over the intersection of cone memberships."""

    n_vars: int
    c: np.ndarray
    blocks: list[ConeBlock] = field(default_factory=list)
    lower: np.ndarray | None = None  # optional per-variable bounds (nan = free)
    upper: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).reshape(self.n_vars)

    def add(self, a, b, cone: Cone) -> None:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.shape != (b.shape[0], self.n_vars):
            raise ValueError(f"block shape mismatch: A {a.shape}, b {b.shape}, n={self.n_vars}")
        if cone == Cone.SOC and b.shape[0] < 2:
            raise ValueError("second-order cone blocks need dimension >= 2")
        if cone == Cone.RSOC and b.shape[0] < 3:
            raise ValueError("rotated second-order cone blocks need dimension >= 3")
        self.blocks.append(ConeBlock(a, b, cone))

    def add_zero(self, a, b) -> None:
        self.add(a, b, Cone.ZERO)

    def add_nonneg(self, a, b) -> None:
        self.add(a, b, Cone.NONNEG)

    def add_soc(self, a, b) -> None:
        self.add(a, b, Cone.SOC)

    def add_rsoc(self, a, b) -> None:
        self.add(a, b, Cone.RSOC)

    def validate(self) -> None:
        if self.c.shape != (self.n_vars,):
            raise ValueError("objective length does not match n_vars")
        for i, blk in enumerate(self.blocks):
            if blk.a.shape[1] != self.n_vars:
                raise ValueError(f"block {i} references {blk.a.shape[1]} variables, program has {self.n_vars}")
            if not (np.all(np.isfinite(blk.a)) and np.all(np.isfinite(blk.b))):
                raise ValueError(f"block {i} contains non-finite data")
            if blk.cone == Cone.SOC and blk.dim < 2:
                raise ValueError(f"block {i}: second-order cone needs dim >= 2")
            if blk.cone == Cone.RSOC and blk.dim < 3:
                raise ValueError(f"block {i}: rotated cone needs dim >= 3")
        for bound in (self.lower, self.upper):
            if bound is not None and np.asarray(bound).shape != (self.n_vars,):
                raise ValueError("variable bounds must have one entry per variable")

    def residual(self, x: np.ndarray) -> float:
        """Worst cone-membership violation of ``x`` (diagnostics only)."""
        worst = 0.0
        for blk in self.blocks:
            s = blk.a @ x + blk.b
            if blk.cone == Cone.ZERO:
                worst = max(worst, float(np.max(np.abs(s), initial=0.0)))
            elif blk.cone == Cone.NONNEG:
                worst = max(worst, float(np.max(-s, initial=0.0)))
            elif blk.cone == Cone.SOC:
                worst = max(worst, float(np.linalg.norm(s[1:]) - s[0]))
            else:
                worst = max(worst, max(-s[0], -s[1], float(s[2:] @ s[2:]) - 2.0 * s[0] * s[1]))
        return worst

    def dump(self) -> str:
        """Structured-text dump for external cross-checking."""
        doc = {
            "n_vars": self.n_vars,
            "objective": self.c.tolist(),
            "blocks": [
                {"cone": blk.cone.value, "A": blk.a.tolist(), "b": blk.b.tolist()}
                for blk in self.blocks
            ],
        }
        if self.lower is not None:
            doc["lower"] = [None if not np.isfinite(v) else float(v) for v in self.lower]
        if self.upper is not None:
            doc["upper"] = [None if not np.isfinite(v) else float(v) for v in self.upper]
        return json.dumps(doc, indent=2)


@dataclass(frozen=True)
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | max_iter
    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def complex_embed(hermitian: np.ndarray, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real embedding of the complex quadratic form ``phi^H H phi + 2 Re{u^H phi}``.

    Returns ``(H_real, u_real)`` over ``x = [Re(phi); Im(phi)]`` such that
    ``x @ H_real @ x + 2 * u_real @ x`` reproduces the complex value for every
    ``phi``; positive semidefiniteness carries over.  Rejects non-Hermitian
    input.
    """
    hermitian = np.asarray(hermitian, dtype=complex)
    vec = np.asarray(vec, dtype=complex).ravel()
    m = vec.shape[0]
    if hermitian.shape != (m, m):
        raise ValueError("matrix/vector shapes disagree")
    scale = max(1.0, float(np.max(np.abs(hermitian), initial=0.0)))
    if np.max(np.abs(hermitian - hermitian.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix must be Hermitian")
    p, q = hermitian.real, hermitian.imag
    h_real = np.block([[p, -q], [q, p]])
    u_real = np.concatenate([vec.real, vec.imag])
    return h_real, u_real
