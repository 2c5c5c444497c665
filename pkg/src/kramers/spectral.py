"""Eigen-structure behind the mixing and exit rates.

Covers the underdamped drift matrix ``H_gamma = [[gamma I, H], [-I, 0]]``
(velocity block first), the non-reversible drift ``(I + J) H``, and the
exit exponents of the linearized dynamics at a saddle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, StructureError
from .mathkit import matrix_exp, spectral_norm

__all__ = [
    "NonreversibleSpectral",
    "OptimalRate",
    "SaddleExponents",
    "UnderdampedSpectral",
    "build_h_gamma",
    "check_antisymmetric",
    "check_condition_c1",
    "critical_constant",
    "h_gamma_norm_bound",
    "lambda1_j",
    "optimal_rate",
    "saddle_exponents",
    "search_j",
    "uld_spectral",
]

SUB_CRITICAL = "sub-critical"
CRITICAL = "critical"
SUPER_CRITICAL = "super-critical"


def _check_spd(H) -> tuple[np.ndarray, np.ndarray]:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError("H must be square")
    if np.abs(H - H.T).max() > 1e-12 * max(1.0, np.abs(H).max()):
        raise DomainError("H must be symmetric")
    H = 0.5 * (H + H.T)
    eig = np.linalg.eigvalsh(H)
    if eig[0] <= 0:
        raise DomainError("H must be positive definite")
    return H, eig


def check_antisymmetric(J, d: int | None = None, tol: float = 1e-12) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or (d is not None and J.shape[0] != d):
        raise DomainError(f"J must be a square matrix of size {d}")
    if np.abs(J + J.T).max() > tol * max(1.0, np.abs(J).max()):
        raise DomainError("J must be antisymmetric")
    return 0.5 * (J - J.T)


def build_h_gamma(H, gamma: float) -> np.ndarray:
    """Block drift matrix ``[[gamma I, H], [-I, 0]]`` acting on (velocity, position)."""
    H = np.asarray(H, dtype=float)
    d = H.shape[0]
    out = np.zeros((2 * d, 2 * d))
    out[:d, :d] = gamma * np.eye(d)
    out[:d, d:] = H
    out[d:, :d] = -np.eye(d)
    return out


def h_gamma_norm_bound(H, gamma: float) -> float:
    """Upper bound ``sqrt(gamma^2 + M^2 + 1)`` on the spectral norm of ``H_gamma``."""
    _, eig = _check_spd(H)
    return math.sqrt(gamma ** 2 + eig[-1] ** 2 + 1.0)


@dataclass
class UnderdampedSpectral:
    """Decay envelope of ``exp(-t H_gamma)``.

    ``C_eps_hat`` is only defined below critical friction and ``C_H`` only
    at critical friction; both are ``nan`` elsewhere. Above critical
    friction no envelope constant is available and ``envelope`` returns
    ``nan``.
    """

    gamma: float
    m: float
    M: float
    regime: str
    eps_hat: float
    C_eps_hat: float
    C_H: float
    rate: float
    eigenvalues: np.ndarray = field(repr=False)
    verified: bool | None = None
    max_envelope_ratio: float | None = None

    @property
    def has_constants(self) -> bool:
        return self.regime != SUPER_CRITICAL

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.regime == SUB_CRITICAL:
            return self.C_eps_hat * np.exp(-self.rate * t)
        if self.regime == CRITICAL:
            m = self.m
            return np.sqrt(self.C_H + 2 + (m + 1) ** 2 * t ** 2) * np.exp(-math.sqrt(m) * t)
        return np.full_like(t, np.nan)


def _critical_constant(eig, m):
    above = eig[eig > m * (1 + 1e-12)]
    if above.size == 0:
        return 0.0
    return float(np.max((1 + above) ** 2 / (above - m)))


def critical_constant(H) -> float:
    """``C_H = max over eigenvalues mu > m of (1 + mu)^2 / (mu - m)``; zero when all equal ``m``."""
    _, eig = _check_spd(H)
    return _critical_constant(eig, float(eig[0]))


def uld_spectral(H, gamma: float, *, verify: bool = True, n_grid: int = 200) -> UnderdampedSpectral:
    """Classify the friction regime and evaluate the norm envelope of ``exp(-t H_gamma)``.

    With ``verify`` the envelope is compared with the exact norm on
    ``n_grid`` times up to ``20 / rate``.
    """
    H, eig = _check_spd(H)
    if not gamma > 0:
        raise DomainError("friction must be positive")
    m, M = float(eig[0]), float(eig[-1])
    crit = 2 * math.sqrt(m)
    nan = math.nan
    if abs(gamma - crit) <= 1e-12 * max(1.0, crit):
        regime, eps_hat, C_eps, rate = CRITICAL, 0.0, nan, math.sqrt(m)
        C_H = _critical_constant(eig, m)
    elif gamma < crit:
        regime = SUB_CRITICAL
        eps_hat = 1 - gamma / crit
        C_eps = (1 + M) / math.sqrt(m * (1 - (1 - eps_hat) ** 2))
        rate = math.sqrt(m) * (1 - eps_hat)
        C_H = nan
    else:
        regime, eps_hat, C_eps, C_H = SUPER_CRITICAL, nan, nan, nan
        rate = (gamma - math.sqrt(gamma ** 2 - 4 * m)) / 2
    Hg = build_h_gamma(H, gamma)
    spec = UnderdampedSpectral(gamma=float(gamma), m=m, M=M, regime=regime, eps_hat=eps_hat,
                               C_eps_hat=C_eps, C_H=C_H, rate=rate,
                               eigenvalues=np.linalg.eigvals(Hg))
    if verify and spec.has_constants:
        ts = np.linspace(0.0, 20.0 / rate, n_grid)
        norms = np.array([spectral_norm(matrix_exp(-t * Hg)) for t in ts])
        ratio = norms / spec.envelope(ts)
        spec.max_envelope_ratio = float(ratio.max())
        spec.verified = bool(np.all(ratio <= 1 + 1e-9))
    return spec


@dataclass
class NonreversibleSpectral:
    """Slowest mode of ``A = (I + J) H`` and envelopes of ``exp(-t A)``.

    Two envelopes are reported: ``CJ * exp(-m_J t)`` with
    ``m_J = lambda1J - eps_tilde``, and the polynomial form
    ``CJ_poly * (1 + t^(n1-1)) * exp(-lambda1J t)``. Both constants are
    empirical suprema over a time grid plus 5% headroom.
    """

    lambda1J: float
    n1: int
    CJ: float
    eps_tilde: float
    c1_holds: bool
    CJ_poly: float
    m: float
    M: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def m_J(self) -> float:
        return self.lambda1J - self.eps_tilde

    def envelope(self, t):
        return self.CJ * np.exp(-self.m_J * np.asarray(t, dtype=float))

    def poly_envelope(self, t):
        t = np.asarray(t, dtype=float)
        return self.CJ_poly * (1 + t ** (self.n1 - 1)) * np.exp(-self.lambda1J * t)


def _jordan_index(A, mu, k, tol):
    n = A.shape[0]
    B = A - mu * np.eye(n)
    P = np.eye(n, dtype=B.dtype)
    for p in range(1, k + 1):
        P = P @ B
        s = np.linalg.svd(P, compute_uv=False)
        nullity = int(np.sum(s <= max(tol, 1e-300) ** p * 10 ** p))
        if nullity >= k:
            return p
    return k


def _jordan_degree(A, eigvals, lam1, scale):
    tol = 1e-6 * scale
    slow = [z for z in eigvals if abs(z.real - lam1) <= tol]
    best = 1
    seen = []
    for z in slow:
        if any(abs(z - s) <= tol for s in seen):
            continue
        group = eigvals[np.abs(eigvals - z) <= tol]
        seen.append(z)
        mu = group.mean()
        best = max(best, _jordan_index(A.astype(complex), mu, group.size, tol))
    return best


def lambda1_j(H, J, eps_tilde: float | None = None, *, t_max: float | None = None,
              n_grid: int = 400, c1_tol: float = 1e-7) -> NonreversibleSpectral:
    """Slowest real part of ``(I + J) H`` with its Jordan degree and envelope constants.

    Parameters
    ----------
    H : (d, d) array
        Symmetric positive definite.
    J : (d, d) array
        Antisymmetric.
    eps_tilde : float, optional
        Rate slack, default ``0.05 * lambda1J``.
    t_max : float, optional
        Horizon of the constant-fitting grid, default ``40 / lambda1J``.
    """
    H, eig = _check_spd(H)
    d = H.shape[0]
    J = check_antisymmetric(J, d)
    A = (np.eye(d) + J) @ H
    ev = np.linalg.eigvals(A)
    lam1 = float(ev.real.min())
    scale = max(1.0, spectral_norm(A))
    n1 = _jordan_degree(A, ev, lam1, scale)
    if eps_tilde is None:
        eps_tilde = 0.05 * lam1
    if not 0 <= eps_tilde < lam1:
        raise DomainError("eps_tilde must lie in [0, lambda1J)")
    t_max = 40.0 / lam1 if t_max is None else t_max
    ts = np.linspace(0.0, t_max, n_grid)
    with np.errstate(divide="ignore"):
        log_norms = np.log([spectral_norm(matrix_exp(-t * A)) for t in ts])
    CJ = 1.05 * float(np.exp(np.max(log_norms + (lam1 - eps_tilde) * ts)))
    CJ_poly = 1.05 * float(np.exp(np.max(log_norms + lam1 * ts - np.log1p(ts ** (n1 - 1)))))
    return NonreversibleSpectral(
        lambda1J=lam1, n1=n1, CJ=max(CJ, 1.0), eps_tilde=float(eps_tilde),
        c1_holds=check_condition_c1(H, J, c1_tol), CJ_poly=CJ_poly,
        m=float(eig[0]), M=float(eig[-1]), eigenvalues=ev,
    )


def check_condition_c1(H, J, tol: float = 1e-7) -> bool:
    """Whether the bottom eigenspace of ``H`` contains an eigenvector of ``J``.

    Such a vector ``u + iv`` with ``J(u + iv) = i rho (u + iv)`` and
    ``H(u + iv) = m (u + iv)`` is an eigenvector of ``(I + J) H`` with real
    part ``m``. This is exactly the case in which the drift ``J`` fails to
    speed up the slowest mode.
    """
    H, eig = _check_spd(H)
    d = H.shape[0]
    J = check_antisymmetric(J, d)
    m = eig[0]
    scale = max(1.0, float(eig[-1]), spectral_norm(J))
    Hm = (H - m * np.eye(d)).astype(complex)
    for z in np.unique(np.round(np.linalg.eigvals(J).imag, 12)):
        K = np.vstack([Hm, J - 1j * z * np.eye(d)])
        if np.linalg.svd(K, compute_uv=False)[-1] <= tol * scale:
            return True
    return False


class OptimalRate(NamedTuple):
    rate: float
    speedup_bound: float


def optimal_rate(H) -> OptimalRate:
    """Best attainable slowest real part ``Tr(H)/d`` and the speedup bound ``(M(d-1)+m)/(md)``."""
    H, eig = _check_spd(H)
    d = H.shape[0]
    m, M = eig[0], eig[-1]
    return OptimalRate(float(np.trace(H) / d), float((M * (d - 1) + m) / (m * d)))


def search_j(H, iters: int = 500, seed: int = 0, step: float | None = None):
    """Random-perturbation hill climbing on the slowest real part of ``(I + J) H``.

    A proposal is accepted when it raises the rate, or keeps it within
    ``1e-9`` while shrinking the Frobenius norm of ``J``. The second rule
    steers the search to the smallest drift on a rate plateau.

    Returns
    -------
    J : ndarray
        Best antisymmetric matrix found (zero if nothing improved).
    lambda1J : float
        Its slowest real part.
    """
    if iters < 1:
        raise DomainError("iters must be at least 1")
    H, eig = _check_spd(H)
    d = H.shape[0]
    rng = np.random.default_rng(seed)
    ident = np.eye(d)

    def score(J):
        return float(np.linalg.eigvals((ident + J) @ H).real.min())

    J = np.zeros((d, d))
    best = score(J)
    step = (eig[-1] / eig[0]) ** 0.5 if step is None else step
    if d == 1:
        return J, best
    for _ in range(iters):
        K = rng.standard_normal((d, d))
        K = K - K.T
        K /= np.linalg.norm(K)
        cand = J + step * K
        val = score(cand)
        if val > best + 1e-12:
            J, best = cand, val
            step *= 1.5
        elif val >= best - 1e-9 and np.linalg.norm(cand) < np.linalg.norm(J):
            J, best = cand, max(best, val)
        else:
            step *= 0.95
    return J, best


@dataclass
class SaddleExponents:
    """Exit exponents at a saddle point with Hessian ``L``.

    ``mu_star_sigma`` is the reversible exponent, ``mu_star_uld`` the
    underdamped one (``nan`` without a friction) and ``mu_J_star`` the
    non-reversible one. ``u`` is the unit unstable direction of ``(I+J) L``.
    """

    mu_star_sigma: float
    mu_star_uld: float
    mu_J_star: float
    u: np.ndarray
    quotient: float
    mu_star_uld_eig: float = math.nan

    @property
    def ratio_uld(self) -> float:
        return self.mu_star_sigma / self.mu_star_uld

    @property
    def ratio_nld(self) -> float:
        return self.mu_star_sigma / self.mu_J_star


def saddle_exponents(L_sigma, gamma: float | None = None, J=None) -> SaddleExponents:
    L = np.asarray(L_sigma, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DomainError("saddle Hessian must be square")
    if np.abs(L - L.T).max() > 1e-12 * max(1.0, np.abs(L).max()):
        raise DomainError("saddle Hessian must be symmetric")
    L = 0.5 * (L + L.T)
    d = L.shape[0]
    mu, Q = np.linalg.eigh(L)
    zero_tol = 1e-12 * max(1.0, abs(mu).max())
    if np.sum(mu < -zero_tol) != 1 or np.any(np.abs(mu) <= zero_tol):
        raise DomainError("saddle Hessian must have exactly one negative and no zero eigenvalue")
    mu_star = float(-mu[0])

    mu_uld = mu_uld_eig = math.nan
    if gamma is not None:
        if not gamma > 0:
            raise DomainError("friction must be positive")
        mu_uld = (math.sqrt(gamma ** 2 + 4 * mu_star) - gamma) / 2
        aug = np.block([[-gamma * np.eye(d), -L], [np.eye(d), np.zeros((d, d))]])
        ev = np.linalg.eigvals(aug)
        pos = ev[ev.real > 1e-12]
        if pos.size != 1 or abs(pos[0].imag) > 1e-8:
            raise StructureError("augmented saddle matrix must have a unique positive eigenvalue")
        mu_uld_eig = float(pos[0].real)
        if abs(mu_uld_eig - mu_uld) > 1e-9 * max(1.0, mu_uld):
            raise StructureError("closed-form and eigenvalue underdamped exponents disagree")

    J = np.zeros((d, d)) if J is None else check_antisymmetric(J, d)
    ev, V = np.linalg.eig((np.eye(d) + J) @ L)
    neg = np.flatnonzero(ev.real < 0)
    if neg.size != 1 or abs(ev[neg[0]].imag) > 1e-8:
        raise StructureError("(I + J) L must have exactly one eigenvalue with negative real part")
    k = neg[0]
    mu_J = float(-ev[k].real)
    v = V[:, k]
    v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
    u = v.real / np.linalg.norm(v.real)
    Su = Q.T @ u
    quotient = float(np.sum(mu ** 2 * Su ** 2) / np.sum(-mu * Su ** 2))
    return SaddleExponents(mu_star_sigma=mu_star, mu_star_uld=mu_uld, mu_J_star=mu_J,
                           u=u, quotient=quotient, mu_star_uld_eig=mu_uld_eig)
