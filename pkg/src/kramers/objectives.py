"""Objective families with smoothness metadata.

Two families are provided: strongly convex quadratics and a quartic
double well in the first coordinate with quadratic transverse directions.
Values and gradients accept batches of points with shape ``(..., d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StructureError

__all__ = [
    "DoubleWell",
    "DoubleWellLandscape",
    "Objective",
    "QuadraticObjective",
    "SmoothnessMeta",
    "SmoothnessReport",
    "dissipativity_margin",
    "double_well",
    "quadratic",
    "verify_smoothness",
]


@dataclass(frozen=True)
class SmoothnessMeta:
    """Constants of the standing smoothness and dissipativity assumptions.

    ``m`` and ``b`` form a dissipativity pair, ``<x, grad F(x)> >= m|x|^2 - b``.
    ``M`` and ``L`` are Lipschitz constants of the gradient and Hessian, and
    ``A``, ``B``, ``C`` bound the value, gradient and Hessian at the origin.
    For non-quadratic families the Lipschitz constants hold on the ball of
    radius ``working_radius``.
    """

    m: float
    b: float
    M: float
    L: float
    A: float
    B: float
    C: float
    working_radius: float = math.inf

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"dissipativity slope must be positive, got {self.m}")
        if self.b < 0:
            raise DomainError(f"dissipativity offset must be nonnegative, got {self.b}")

    @property
    def R(self) -> float:
        return math.sqrt(self.b / self.m)


class Objective:
    """Base class: a twice differentiable energy on R^d with metadata."""

    dim: int
    meta: SmoothnessMeta

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DomainError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return x


class QuadraticObjective(Objective):
    """``F(x) = x^T H x / 2 - b1^T x + c1`` with ``H`` symmetric positive definite."""

    def __init__(self, H, b1=None, c1: float = 0.0):
        H = np.array(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DomainError("H must be square")
        if np.abs(H - H.T).max() > 1e-12 * max(1.0, np.abs(H).max()):
            raise DomainError("H must be symmetric")
        H = 0.5 * (H + H.T)
        eig = np.linalg.eigvalsh(H)
        if eig[0] <= 0:
            raise DomainError(f"H must be positive definite (smallest eigenvalue {eig[0]:.3g})")
        self.dim = H.shape[0]
        self.H = H
        self.b1 = np.zeros(self.dim) if b1 is None else np.array(b1, dtype=float).reshape(self.dim)
        self.c1 = float(c1)
        self.eigenvalues = eig
        self.minimizer = np.linalg.solve(H, self.b1)
        lo, hi = float(eig[0]), float(eig[-1])
        nb = float(np.linalg.norm(self.b1))
        if nb == 0.0:
            m_diss, b_diss = lo, 0.0
        else:
            m_diss, b_diss = lo / 2.0, nb ** 2 / (2.0 * lo)
        self.meta = SmoothnessMeta(m=m_diss, b=b_diss, M=hi, L=0.0,
                                   A=abs(self.c1), B=nb, C=float(np.linalg.norm(H, 2)))

    @property
    def m(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def M(self) -> float:
        return float(self.eigenvalues[-1])

    def value(self, x):
        x = self._check_point(x)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.H, x) - x @ self.b1 + self.c1

    def gradient(self, x):
        x = self._check_point(x)
        return x @ self.H - self.b1

    def hessian(self, x=None) -> np.ndarray:
        return self.H.copy()


def quadratic(H, b1=None, c1: float = 0.0) -> QuadraticObjective:
    return QuadraticObjective(H, b1, c1)


@dataclass(frozen=True)
class DoubleWellLandscape:
    """Critical points and barrier of a double well.

    ``a1`` is the left minimum (the start of exit experiments), ``a2`` the
    right one and ``sigma`` the saddle between them.
    """

    c: float
    omega: np.ndarray
    tilt: float
    a1: np.ndarray
    a2: np.ndarray
    sigma: np.ndarray
    deltaF: float
    mu_star_sigma: float
    hess_a1: np.ndarray
    hess_a2: np.ndarray
    hess_sigma: np.ndarray

    @property
    def dim(self) -> int:
        return self.a1.size


class DoubleWell(Objective):
    r"""``F(x) = c (x_1^4/4 - x_1^2/2) + \sum_i \omega_i^2 x_i^2 / 2 - tilt x_1``."""

    def __init__(self, dim: int, c: float = 1.0, omega=None, tilt: float = 0.0,
                 working_radius: float = 2.0):
        if dim < 1:
            raise DomainError("dimension must be at least 1")
        if not c > 0:
            raise DomainError("quartic scale c must be positive")
        omega = np.ones(dim - 1) if omega is None else np.atleast_1d(np.asarray(omega, dtype=float))
        if omega.size == 1 and dim > 2:
            omega = np.full(dim - 1, float(omega[0]))
        if omega.size != dim - 1:
            raise DomainError(f"need {dim - 1} transverse frequencies, got {omega.size}")
        if np.any(omega <= 0):
            raise DomainError("transverse frequencies must be positive")
        if not working_radius > 0:
            raise DomainError("working radius must be positive")
        self.dim = int(dim)
        self.c = float(c)
        self.omega = omega
        self.tilt = float(tilt)
        self._w2 = omega ** 2
        rho = float(working_radius)
        w2max = float(self._w2.max()) if omega.size else 0.0
        w2min = float(self._w2.min()) if omega.size else math.inf
        m_diss = 0.5 * min(self.c, w2min)
        self.meta = SmoothnessMeta(
            m=m_diss,
            b=self._dissipativity_offset(m_diss),
            M=max(self.c * max(3 * rho ** 2 - 1, 1.0), w2max),
            L=6 * self.c * rho,
            A=0.0,
            B=abs(self.tilt),
            C=max(self.c, w2max),
            working_radius=rho,
        )

    def _dissipativity_offset(self, m):
        # b = max over s of m s^2 - s F_1'(s); the transverse part is covered since m <= omega^2
        c, t = self.c, self.tilt
        roots = np.roots([-4 * c, 0.0, 2 * (m + c), t])
        s = roots[np.abs(roots.imag) < 1e-9].real
        vals = m * s ** 2 - (c * (s ** 4 - s ** 2) - t * s)
        b = max(0.0, float(vals.max()))
        return b * (1 + 1e-12) + 1e-12

    def value(self, x):
        x = self._check_point(x)
        x1 = x[..., 0]
        v = self.c * (x1 ** 4 / 4 - x1 ** 2 / 2) - self.tilt * x1
        if self.dim > 1:
            v = v + 0.5 * (x[..., 1:] ** 2 @ self._w2)
        return v

    def gradient(self, x):
        x = self._check_point(x)
        g = np.empty_like(x)
        x1 = x[..., 0]
        g[..., 0] = self.c * (x1 ** 3 - x1) - self.tilt
        g[..., 1:] = x[..., 1:] * self._w2
        return g

    def hessian(self, x) -> np.ndarray:
        x = self._check_point(x)
        h = np.zeros((self.dim, self.dim))
        h[0, 0] = self.c * (3 * x[0] ** 2 - 1)
        h[range(1, self.dim), range(1, self.dim)] = self._w2
        return h

    def landscape(self) -> DoubleWellLandscape:
        c, t = self.c, self.tilt
        if t == 0.0:
            xs = [-1.0, 0.0, 1.0]
        else:
            if abs(t) >= 2 * c / (3 * math.sqrt(3)):
                raise StructureError(f"tilt {t} leaves a single critical point")
            xs = [_newton_cubic(c, t, s) for s in (-1.0, 0.0, 1.0)]
            if not (xs[0] < xs[1] < xs[2]):
                raise StructureError("Newton iteration did not separate the critical points")
        pts = []
        for s in xs:
            p = np.zeros(self.dim)
            p[0] = s
            pts.append(p)
        a1, sig, a2 = pts
        h1, hs, h2 = (self.hessian(p) for p in pts)
        for h, name in ((h1, "a1"), (h2, "a2")):
            if np.linalg.eigvalsh(h)[0] <= 0:
                raise StructureError(f"Hessian at {name} is not positive definite")
        ev = np.linalg.eigvalsh(hs)
        if not (ev[0] < 0 < ev[1] if self.dim > 1 else ev[0] < 0):
            raise StructureError("Hessian at the saddle must have exactly one negative eigenvalue")
        dF = float(self.value(sig) - self.value(a1))
        if dF <= 0:
            raise StructureError("barrier height must be positive")
        return DoubleWellLandscape(c=c, omega=self.omega.copy(), tilt=t, a1=a1, a2=a2, sigma=sig,
                                   deltaF=dF, mu_star_sigma=float(-ev[0]),
                                   hess_a1=h1, hess_a2=h2, hess_sigma=hs)


def _newton_cubic(c, t, s, tol=1e-12, max_iter=100):
    for _ in range(max_iter):
        g = c * (s ** 3 - s) - t
        if abs(g) <= tol:
            return s
        s -= g / (c * (3 * s ** 2 - 1))
    raise StructureError("Newton iteration for a critical point did not converge")


def double_well(dim: int = 1, c: float = 1.0, omega=None, tilt: float = 0.0,
                working_radius: float = 2.0):
    """Build a double-well objective and its landscape summary."""
    obj = DoubleWell(dim, c, omega, tilt, working_radius)
    return obj, obj.landscape()


def _ball_samples(rng, n, d, radius):
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * radius * rng.random((n, 1)) ** (1.0 / d)


@dataclass
class SmoothnessReport:
    gradient_ratio: float
    hessian_ratio: float
    gradient_violation: bool
    hessian_violation: bool
    n_samples: int
    radius: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not (self.gradient_violation or self.hessian_violation)


def verify_smoothness(obj: Objective, n_samples: int = 1000, radius: float = 1.0,
                      seed: int = 0) -> SmoothnessReport:
    """Empirical Lipschitz ratios of gradient and Hessian over random pairs in a ball.

    A violation is flagged when an empirical ratio exceeds the metadata by more than 1%.
    """
    if n_samples < 10:
        raise DomainError("need at least 10 samples")
    rng = np.random.default_rng(seed)
    x = _ball_samples(rng, n_samples, obj.dim, radius)
    y = _ball_samples(rng, n_samples, obj.dim, radius)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 1e-12
    gr = np.linalg.norm(obj.gradient(x) - obj.gradient(y), axis=1)[keep] / dist[keep]
    hr = np.array([np.linalg.norm(obj.hessian(a) - obj.hessian(b), 2)
                   for a, b in zip(x[keep], y[keep])]) / dist[keep]
    g_max = float(gr.max())
    h_max = float(hr.max())
    return SmoothnessReport(
        gradient_ratio=g_max,
        hessian_ratio=h_max,
        gradient_violation=g_max > 1.01 * obj.meta.M,
        hessian_violation=h_max > 1.01 * obj.meta.L + 1e-12,
        n_samples=n_samples,
        radius=radius,
    )


def dissipativity_margin(obj: Objective, n_samples: int = 1000, radius: float = 1.0,
                         seed: int = 0, m: float | None = None, b: float | None = None) -> float:
    """``min <x, grad F(x)> - m |x|^2 + b`` over points sampled in a ball.

    ``m`` and ``b`` default to the objective's metadata.
    """
    if n_samples < 10:
        raise DomainError("need at least 10 samples")
    m = obj.meta.m if m is None else m
    b = obj.meta.b if b is None else b
    rng = np.random.default_rng(seed)
    x = _ball_samples(rng, n_samples, obj.dim, radius)
    inner = np.einsum("ij,ij->i", x, obj.gradient(x))
    return float(np.min(inner - m * np.einsum("ij,ij->i", x, x) + b))
