"""Dense numerical kernels: matrix exponential, PSD square root, Lambert W,
Gramian integrals, spectral norm and exponential decay fitting.

All functions are pure and operate on small dense ``numpy`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MatrixOverflowError

__all__ = [
    "DecayFit",
    "decay_rate_fit",
    "lambert_w_minus1",
    "lyapunov_integral",
    "matrix_exp",
    "psd_sqrt",
    "spectral_norm",
]

# Pade coefficients and backward-error thresholds for degrees 3..13
# (Higham, "The scaling and squaring method for the matrix exponential revisited").
_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _as_square(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def _pade_low(A, ident, degree):
    b = _PADE_B[degree]
    A2 = A @ A
    powers = [ident, A2]
    for _ in range(degree // 2 - 1):
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    V = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return U, V


def _pade13(A, ident):
    b = _PADE_B[13]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def matrix_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Safe for defective matrices (no eigendecomposition is used).

    Raises
    ------
    MatrixOverflowError
        If the result cannot be represented in double precision.
    """
    A = _as_square(A)
    n = A.shape[0]
    ident = np.eye(n)
    norm1 = np.linalg.norm(A, 1)
    if norm1 == 0.0:
        return ident
    with np.errstate(over="ignore", invalid="ignore"):
        for degree in (3, 5, 7, 9):
            if norm1 <= _THETA[degree]:
                U, V = _pade_low(A, ident, degree)
                E = np.linalg.solve(V - U, V + U)
                break
        else:
            s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
            if s > 1000:
                raise MatrixOverflowError(f"matrix exponential overflows (1-norm {norm1:.3g})")
            As = A / 2.0 ** s
            U, V = _pade13(As, ident)
            E = np.linalg.solve(V - U, V + U)
            for _ in range(s):
                E = E @ E
                if not np.all(np.isfinite(E)):
                    break
    if not np.all(np.isfinite(E)):
        raise MatrixOverflowError(f"matrix exponential overflows (1-norm {norm1:.3g})")
    return E


def psd_sqrt(S, *, sym_tol: float = 1e-12, psd_tol: float = 1e-10) -> np.ndarray:
    """Principal square root of a symmetric positive semidefinite matrix.

    Eigenvalues in ``[-psd_tol * ||S||, 0)`` are treated as rounding noise and clipped.
    """
    S = _as_square(S, "S")
    scale = max(np.abs(S).max(), np.finfo(float).tiny)
    if np.abs(S - S.T).max() > sym_tol * scale:
        raise DomainError("matrix is not symmetric")
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    if w[0] < -psd_tol * max(abs(w[-1]), abs(w[0])):
        raise DomainError(f"matrix is indefinite (smallest eigenvalue {w[0]:.3g})")
    R = (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T
    return 0.5 * (R + R.T)


def lambert_w_minus1(x: float, *, max_iter: int = 50, tol: float = 1e-14) -> float:
    """Lower real branch ``W_{-1}`` of the Lambert W function.

    Parameters
    ----------
    x : float
        Argument in ``[-1/e, 0)``.

    Returns
    -------
    float
        ``w <= -1`` with ``w * exp(w) == x`` to relative accuracy ``tol``.
    """
    x = float(x)
    branch = -math.exp(-1.0)
    if not (x < 0.0) or x < branch - 4 * np.finfo(float).eps:
        raise DomainError(f"W_-1 is defined on [-1/e, 0), got {x!r}")
    if x <= branch:
        return -1.0
    if x < -0.25:
        # series about the branch point
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        L1 = math.log(-x)
        L2 = math.log(-L1)
        w = L1 - L2 + L2 / L1
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol * abs(x):
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * abs(w):
            break
    return min(w, -1.0)


def lyapunov_integral(A, Q, t: float) -> np.ndarray:
    r"""Finite-horizon Gramian :math:`\int_0^t e^{-sA} Q e^{-sA^T} ds`.

    Short horizons use the block exponential of ``[[-A, Q], [0, A^T]]``.
    Long horizons are reached by doubling,
    ``S(2h) = S(h) + e^{-hA} S(h) e^{-hA^T}``, which avoids the growth of
    ``e^{tA^T}``. ``t = inf`` solves ``A S + S A^T = Q`` directly.
    """
    A = _as_square(A)
    Q = _as_square(Q, "Q")
    if Q.shape != A.shape:
        raise DomainError("A and Q must have the same shape")
    t = float(t)
    if not t >= 0.0:
        raise DomainError(f"horizon must be nonnegative, got {t!r}")
    n = A.shape[0]
    if t == 0.0:
        return np.zeros((n, n))
    if math.isinf(t):
        from scipy.linalg import solve_continuous_lyapunov

        S = solve_continuous_lyapunov(A, Q)
        return 0.5 * (S + S.T)
    norm = max(np.linalg.norm(A, 1), np.linalg.norm(Q, 1) / max(1.0, np.linalg.norm(A, 1)))
    k = max(0, int(math.ceil(math.log2(max(t * norm, 1e-300) / 0.5))))
    h = t / 2.0 ** k
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A
    block[:n, n:] = Q
    block[n:, n:] = A.T
    E = matrix_exp(h * block)
    Phi = E[:n, :n]
    S = E[:n, n:] @ Phi.T
    S = 0.5 * (S + S.T)
    for _ in range(k):
        S = S + Phi @ S @ Phi.T
        S = 0.5 * (S + S.T)
        Phi = Phi @ Phi
    return S


def spectral_norm(A) -> float:
    """Largest singular value of ``A``."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class DecayFit:
    """Result of fitting ``log v = log_prefactor + poly_degree*log(1+t) - rate*t``."""

    rate: float
    log_prefactor: float
    poly_degree: int
    residual: float

    def model(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(self.log_prefactor + self.poly_degree * np.log1p(t) - self.rate * t)


def decay_rate_fit(times, values, max_degree: int = 4) -> DecayFit:
    """Fit an exponential rate with a polynomial prefactor to a decaying series.

    Only the trailing half of the samples enters the fit. The polynomial
    degree is the one in ``0..max_degree`` with the smallest RMS residual,
    ties going to the lower degree.

    Parameters
    ----------
    times : array_like
        Strictly increasing sample times, at least 8 of them.
    values : array_like
        Positive samples.
    """
    t = np.asarray(times, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    if t.size != v.size:
        raise DomainError("times and values differ in length")
    if t.size < 8:
        raise DomainError(f"need at least 8 samples, got {t.size}")
    if np.any(np.diff(t) <= 0):
        raise DomainError("sample times must be strictly increasing")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError("values must be finite and positive")
    tail = slice(t.size // 2, None)
    tt, lv = t[tail], np.log(v[tail])
    design = np.column_stack([np.ones_like(tt), -tt])
    best = None
    for p in range(max_degree + 1):
        y = lv - p * np.log1p(tt)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        res = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
        if best is None or res < best.residual - 1e-12:
            best = DecayFit(rate=float(coef[1]), log_prefactor=float(coef[0]),
                            poly_degree=p, residual=res)
    return best
