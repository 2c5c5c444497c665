"""Lyapunov drift condition and the Brownian increment tail bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .params import ProblemParams

__all__ = [
    "BrownianCheck",
    "DriftReport",
    "brownian_tail_bound",
    "brownian_tail_mc",
    "drift_constants",
    "lyapunov_and_drift_check",
    "lyapunov_function",
]


def drift_constants(params: ProblemParams, gamma: float | None = None) -> tuple[float, float]:
    """``(lambda, A_bar / beta)``; the second entry does not depend on beta."""
    p = params
    g = p.friction if gamma is None else float(gamma)
    s = 2 * p.M + g ** 2
    lam = min(1 / 8, p.m / s)
    return lam, p.m / s * (p.B ** 2 / s + (p.b / p.m) * (p.M + g ** 2 / 2) + p.A)


def lyapunov_function(obj, x, v, beta: float, gamma: float, lam: float):
    """``beta F(x) + (beta gamma^2 / 4)(|x + v/gamma|^2 + |v/gamma|^2 - lam |x|^2)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w = v / gamma
    quad = np.sum((x + w) ** 2, axis=-1) + np.sum(w ** 2, axis=-1) - lam * np.sum(x ** 2, axis=-1)
    return beta * obj.value(x) + 0.25 * beta * gamma ** 2 * quad


@dataclass
class DriftReport:
    min_slack: float
    argmin: np.ndarray
    lam: float
    A_bar_over_beta: float
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.min_slack >= 0


def _ball(rng, n, d, radius):
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * (radius * rng.random(n) ** (1 / d))[:, None]


def lyapunov_and_drift_check(obj, params: ProblemParams, gamma: float | None = None, n_samples: int = 1000,
                             radius: float = 1.0, seed: int = 0, *, A_bar_scale: float = 1.0) -> DriftReport:
    """Minimum over sampled ``x`` of ``x.grad F - 2 lam (F + gamma^2 |x|^2 / 4) + 2 A_bar / beta``.

    Samples are uniform in the ball of ``radius`` plus the origin. ``A_bar_scale``
    rescales the offset, which is how a deliberately weakened constant is probed.
    """
    g = params.friction if gamma is None else float(gamma)
    if not g > 0:
        raise DomainError("friction must be positive")
    lam, a_over_beta = drift_constants(params, g)
    a_over_beta *= A_bar_scale
    rng = np.random.default_rng(seed)
    xs = np.vstack([np.zeros((1, obj.dim)), _ball(rng, n_samples, obj.dim, radius)])
    F = obj.value(xs)
    lhs = np.sum(xs * obj.gradient(xs), axis=1)
    slack = lhs - 2 * lam * (F + 0.25 * g ** 2 * np.sum(xs ** 2, axis=1)) + 2 * a_over_beta
    i = int(np.argmin(slack))
    return DriftReport(float(slack[i]), xs[i], lam, a_over_beta, xs.shape[0])


def brownian_tail_bound(u: float, d: int, eta: float) -> float:
    """Bound on ``P(sup_{t <= eta} |B_t - B_0| >= u)`` for ``d``-dimensional Brownian motion."""
    if u < 0 or not eta > 0 or d < 1:
        raise DomainError("need u >= 0, eta > 0 and d >= 1")
    return 2 ** 0.25 * math.exp(0.25) * math.exp(-u * u / (4 * d * eta))


@dataclass
class BrownianCheck:
    bound: float
    estimate: float
    stderr: float
    n_paths: int

    @property
    def ok(self) -> bool:
        return self.estimate <= self.bound


def brownian_tail_mc(u: float, d: int, eta: float, n_paths: int = 100_000, n_sub: int = 64,
                     seed: int = 0, chunk: int = 20_000) -> BrownianCheck:
    """Monte Carlo estimate of the excursion probability.

    Paths are sampled on ``n_sub`` sub-intervals. In ``d = 1`` the chance of
    crossing ``+-u`` between grid points is added in closed form from the
    Brownian bridge, so the estimator has no discretization bias to first
    order. For ``d > 1`` the grid maximum is used, which slightly underestimates.
    """
    if n_paths < 2:
        raise DomainError("need at least two paths")
    bound = brownian_tail_bound(u, d, eta)
    rng = np.random.default_rng(seed)
    dt = eta / n_sub
    vals = []
    done = 0
    while done < n_paths:
        n = min(chunk, n_paths - done)
        inc = rng.standard_normal((n, n_sub, d)) * math.sqrt(dt)
        path = np.concatenate([np.zeros((n, 1, d)), np.cumsum(inc, axis=1)], axis=1)
        if d == 1:
            a, b = path[:, :-1, 0], path[:, 1:, 0]
            with np.errstate(over="ignore"):
                up = np.where((a < u) & (b < u), np.exp(-2 * (u - a) * (u - b) / dt), 1.0)
                dn = np.where((a > -u) & (b > -u), np.exp(-2 * (u + a) * (u + b) / dt), 1.0)
            stay = np.prod((1 - up) * (1 - dn), axis=1)
            vals.append(1 - np.clip(stay, 0.0, 1.0))
        else:
            vals.append((np.linalg.norm(path, axis=2).max(axis=1) >= u).astype(float))
        done += n
    vals = np.concatenate(vals)
    return BrownianCheck(bound, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), vals.size)
