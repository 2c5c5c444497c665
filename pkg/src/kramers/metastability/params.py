"""Problem parameters shared by the recurrence, escape and exit computations."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError, StructureError
from ..mathkit import spectral_norm
from ..spectral import check_antisymmetric, critical_constant, lambda1_j

__all__ = ["MODES", "ProblemParams", "ULD_CRITICAL", "ULD_SMALL", "NLD_MODE", "resolve_mode"]

ULD_CRITICAL = "ULD-critical"
ULD_SMALL = "ULD-small-friction"
NLD_MODE = "NLD"
MODES = (ULD_CRITICAL, ULD_SMALL, NLD_MODE)


@dataclass(frozen=True)
class ProblemParams:
    """Smoothness constants plus the targets of a recurrence/escape statement.

    ``C_H`` is needed for critical friction, ``CJ``/``mJ``/``J_norm`` for the
    non-reversible mode. ``gamma`` defaults to ``2 sqrt(m)``.
    """

    m: float
    M: float
    L: float
    A: float
    B: float
    C: float
    b: float
    d: int
    r: float
    eps: float
    delta: float
    T: float
    gamma: float | None = None
    C_H: float | None = None
    CJ: float | None = None
    mJ: float | None = None
    J_norm: float = 0.0
    v0_norm: float = 0.0

    def __post_init__(self):
        if not self.m > 0 or not self.M >= self.m:
            raise DomainError("need 0 < m <= M")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if not (self.eps > 0 and self.r > 0 and self.T > 0):
            raise DomainError("eps, r and T must be positive")
        if min(self.L, self.A, self.B, self.C, self.b, self.J_norm, self.v0_norm) < 0:
            raise DomainError("smoothness constants must be nonnegative")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("dimension must be a positive integer")
        if self.gamma is not None and not self.gamma > 0:
            raise DomainError("friction must be positive")

    @property
    def R(self) -> float:
        return math.sqrt(self.b / self.m)

    @property
    def friction(self) -> float:
        return 2 * math.sqrt(self.m) if self.gamma is None else float(self.gamma)

    def with_(self, **changes) -> "ProblemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["R"] = self.R
        return out

    @classmethod
    def from_objective(cls, obj, *, r, eps, delta, T, gamma=None, J=None, hessian=None,
                       v0_norm: float = 0.0, eps_tilde=None) -> "ProblemParams":
        """Read ``m, b, M, L, A, B, C`` from ``obj.meta``.

        ``hessian`` (default: the Hessian at ``obj.minimizer`` when it exists)
        supplies ``C_H`` and, with ``J``, the non-reversible envelope constants.
        """
        meta = obj.meta
        if hessian is None and hasattr(obj, "minimizer"):
            hessian = obj.hessian(obj.minimizer)
        kw = {}
        if hessian is not None:
            kw["C_H"] = critical_constant(hessian)
            if J is not None:
                J = check_antisymmetric(J, obj.dim)
                spec = lambda1_j(hessian, J, eps_tilde)
                kw.update(CJ=spec.CJ, mJ=spec.m_J, J_norm=spectral_norm(J))
        return cls(m=meta.m, M=meta.M, L=meta.L, A=meta.A, B=meta.B, C=meta.C, b=meta.b, d=obj.dim,
                   r=r, eps=eps, delta=delta, T=T, gamma=gamma, v0_norm=v0_norm, **kw)


def resolve_mode(params: ProblemParams, mode: str) -> str:
    """Map ``"ULD"`` to the critical or small-friction variant and validate inputs."""
    crit = 2 * math.sqrt(params.m)
    g = params.friction
    if mode == "ULD":
        if abs(g - crit) <= 1e-12 * crit:
            mode = ULD_CRITICAL
        elif g < crit:
            mode = ULD_SMALL
        else:
            raise StructureError("no recurrence theory above critical friction")
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES + ('ULD',)}, got {mode!r}")
    if mode == ULD_CRITICAL:
        if abs(g - crit) > 1e-12 * crit:
            raise DomainError(f"critical mode needs gamma = 2 sqrt(m) = {crit!r}, got {g!r}")
        if params.C_H is None:
            raise DomainError("critical mode needs C_H")
    elif mode == ULD_SMALL and not g < crit:
        raise DomainError("small-friction mode needs gamma < 2 sqrt(m)")
    elif mode == NLD_MODE and (params.CJ is None or params.mJ is None or not params.mJ > 0):
        raise DomainError("NLD mode needs CJ and a positive mJ")
    return mode


def quadratic_hessian(H) -> np.ndarray:
    return np.asarray(H, dtype=float)
