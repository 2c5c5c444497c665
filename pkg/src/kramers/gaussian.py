"""Exact Gaussian laws of the linear dynamics on quadratic objectives.

On ``F(x) = x^T H x / 2 - b1^T x + c1`` all three dynamics are
Ornstein-Uhlenbeck processes. Laws are expressed in the centered
coordinate ``Y = X - x*``; the underdamped joint law is ordered
(velocity, position). The stationary position law is ``N(0, H^{-1} / beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import LD, NLD, ULD
from .errors import DomainError
from .mathkit import DecayFit, decay_rate_fit, lyapunov_integral, matrix_exp, psd_sqrt
from .objectives import QuadraticObjective
from .spectral import build_h_gamma, lambda1_j, uld_spectral

__all__ = [
    "GaussianState",
    "MixingCurve",
    "initial_distance_bound",
    "ld_law",
    "mixing_curve",
    "nld_law",
    "stationary_position_law",
    "uld_law",
    "uld_stationary_law",
    "w2_gaussian",
]


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal(self, idx) -> "GaussianState":
        idx = np.asarray(idx)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def position(self) -> "GaussianState":
        """Second half of a (velocity, position) joint law."""
        d = self.dim // 2
        return self.marginal(np.arange(d, 2 * d))


def _check_time(t):
    t = float(t)
    if not t >= 0:
        raise DomainError(f"time must be nonnegative, got {t!r}")
    return t


def _check_beta(beta):
    if not beta > 0:
        raise DomainError("inverse temperature must be positive")
    return float(beta)


def uld_law(q: QuadraticObjective, gamma: float, beta: float, x0, v0=None, t: float = 0.0) -> GaussianState:
    """Joint law of (V(t), X(t) - x*) for the underdamped diffusion started at (v0, x0)."""
    t = _check_time(t)
    beta = _check_beta(beta)
    d = q.dim
    v0 = np.zeros(d) if v0 is None else np.asarray(v0, dtype=float)
    Hg = build_h_gamma(q.H, gamma)
    z0 = np.r_[v0, np.asarray(x0, dtype=float) - q.minimizer]
    mean = matrix_exp(-t * Hg) @ z0
    Q = np.zeros((2 * d, 2 * d))
    Q[:d, :d] = (2 * gamma / beta) * np.eye(d)
    return GaussianState(mean, lyapunov_integral(Hg, Q, t))


def uld_stationary_law(q: QuadraticObjective, beta: float) -> GaussianState:
    beta = _check_beta(beta)
    d = q.dim
    cov = np.zeros((2 * d, 2 * d))
    cov[:d, :d] = np.eye(d) / beta
    cov[d:, d:] = np.linalg.inv(q.H) / beta
    return GaussianState(np.zeros(2 * d), cov)


def nld_law(q: QuadraticObjective, J, beta: float, x0, t: float = 0.0) -> GaussianState:
    """Law of X(t) - x* for the non-reversible overdamped diffusion with drift ``(I + J)``."""
    t = _check_time(t)
    beta = _check_beta(beta)
    d = q.dim
    J = NLD(J).J
    A = (np.eye(d) + J) @ q.H
    mean = matrix_exp(-t * A) @ (np.asarray(x0, dtype=float) - q.minimizer)
    return GaussianState(mean, lyapunov_integral(A, (2 / beta) * np.eye(d), t))


def ld_law(q: QuadraticObjective, beta: float, x0, t: float = 0.0) -> GaussianState:
    return nld_law(q, np.zeros((q.dim, q.dim)), beta, x0, t)


def stationary_position_law(q: QuadraticObjective, beta: float) -> GaussianState:
    beta = _check_beta(beta)
    return GaussianState(np.zeros(q.dim), np.linalg.inv(q.H) / beta)


def _order_key(g: GaussianState):
    return (float(np.trace(g.cov)), g.cov.tobytes(), g.mean.tobytes())


def w2_gaussian(g1: GaussianState, g2: GaussianState) -> float:
    r"""2-Wasserstein distance between two Gaussian laws.

    The covariance part ``Tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`` is
    evaluated as ``||S1^{1/2} - S2^{1/2} U||_F^2`` with ``U`` the orthogonal
    polar factor of ``S2^{1/2} S1^{1/2}``. The two expressions agree exactly,
    and the second one does not cancel when the covariances are close.
    Arguments are put in a canonical order so the result is exactly symmetric.
    """
    if g1.dim != g2.dim:
        raise DomainError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    if _order_key(g2) < _order_key(g1):
        g1, g2 = g2, g1
    R1 = psd_sqrt(g1.cov)
    R2 = psd_sqrt(g2.cov)
    W, _, Vt = np.linalg.svd(R2.T @ R1)
    U = W @ Vt
    cov_part = float(np.sum((R1 - R2 @ U) ** 2))
    mean_part = float(np.sum((g1.mean - g2.mean) ** 2))
    return math.sqrt(mean_part + cov_part)


def initial_distance_bound(q: QuadraticObjective, beta: float, x0) -> float:
    """Upper bound on the distance from a point mass at ``x0`` to the Gibbs law."""
    m = q.m
    x0 = np.asarray(x0, dtype=float)
    nb2 = float(q.b1 @ q.b1)
    return math.sqrt(2 * float(x0 @ x0) + (4 / m) * (nb2 / (2 * m) + q.dim / beta))


@dataclass
class MixingCurve:
    """Distance of the position law to equilibrium along a time grid.

    ``bound`` is the theoretical envelope times the exact initial distance
    ``init_exact``; it is ``nan`` when no envelope constant exists.
    """

    dynamics: str
    times: np.ndarray
    w2: np.ndarray
    bound: np.ndarray
    fit: DecayFit
    init_bound: float
    init_exact: float
    theory_rate: float

    def fitted_model(self) -> np.ndarray:
        return self.fit.model(self.times)

    def rows(self):
        fm = self.fitted_model()
        return [(t, w, b, f) for t, w, b, f in zip(self.times, self.w2, self.bound, fm)]


def mixing_curve(dynamics, q: QuadraticObjective, beta: float, x0, v0=None, t_grid=None) -> MixingCurve:
    """Exact W2 mixing curve of the position marginal for LD, ULD or NLD on a quadratic."""
    beta = _check_beta(beta)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 8 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("time grid must be increasing with at least 8 points")
    x0 = np.asarray(x0, dtype=float)
    target = stationary_position_law(q, beta)
    init_exact = w2_gaussian(GaussianState(x0 - q.minimizer, np.zeros((q.dim, q.dim))), target)

    if isinstance(dynamics, ULD):
        spec = uld_spectral(q.H, dynamics.gamma, verify=False)
        laws = [uld_law(q, dynamics.gamma, beta, x0, v0, t).position() for t in t_grid]
        envelope = spec.envelope(t_grid)
        rate = spec.rate
    elif isinstance(dynamics, NLD):
        spec = lambda1_j(q.H, dynamics.J)
        laws = [nld_law(q, dynamics.J, beta, x0, t) for t in t_grid]
        envelope = spec.poly_envelope(t_grid)
        rate = spec.lambda1J
    elif isinstance(dynamics, LD):
        laws = [ld_law(q, beta, x0, t) for t in t_grid]
        envelope = np.exp(-q.m * t_grid)
        rate = q.m
    else:
        raise DomainError(f"unknown dynamics {dynamics!r}")
    w2 = np.array([w2_gaussian(g, target) for g in laws])
    positive = w2 > 0
    fit = decay_rate_fit(t_grid[positive], w2[positive])
    return MixingCurve(
        dynamics=dynamics.name,
        times=t_grid,
        w2=w2,
        bound=envelope * init_exact,
        fit=fit,
        init_bound=initial_distance_bound(q, beta, x0),
        init_exact=init_exact,
        theory_rate=float(rate),
    )
