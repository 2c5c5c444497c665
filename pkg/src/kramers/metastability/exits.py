"""Eyring-Kramers predictions and Monte Carlo exit-time experiments on a double well."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import LD, NLD, ULD
from ..errors import DomainError
from ..samplers import VIA_BOUNDARY, VIA_STOP, Ball, SamplerConfig, batch_hitting
from ..spectral import saddle_exponents

__all__ = [
    "ExitPrediction",
    "ExitResult",
    "RefinementTable",
    "config_for",
    "ek_prediction",
    "exit_experiment",
    "paired_ratio",
    "stepsize_refinement",
]

Z95 = 1.959963984540054
EXIT_LABELS = {VIA_STOP: "a2", VIA_BOUNDARY: "boundary"}


@dataclass(frozen=True)
class ExitPrediction:
    """Leading-order mean exit time from ``a1``; the ``1 + o(1)`` factor is dropped.

    ``heuristic`` marks the underdamped formula in dimension above one.
    """

    dynamics: str
    beta: float
    mean_exit: float
    prefactor: float
    barrier_factor: float
    hessian_factor: float
    exponent: float
    exponent_name: str
    heuristic: bool = False
    asymptotic: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def ek_prediction(landscape, beta: float, dynamics) -> ExitPrediction:
    """``(2 pi / kappa) exp(beta dF) sqrt(|det Hess F(sigma)| / det Hess F(a1))``."""
    if not beta > 0 or math.isinf(beta):
        raise DomainError("beta must be positive and finite")
    L = landscape.hess_sigma
    if isinstance(dynamics, ULD):
        kappa = saddle_exponents(L, gamma=dynamics.gamma).mu_star_uld
        name = "mu_star_uld"
    elif isinstance(dynamics, NLD):
        kappa = saddle_exponents(L, J=dynamics.J).mu_J_star
        name = "mu_J_star"
    elif isinstance(dynamics, LD):
        kappa = saddle_exponents(L).mu_star_sigma
        name = "mu_star_sigma"
    else:
        raise DomainError(f"unknown dynamics {dynamics!r}")
    hess = math.sqrt(abs(np.linalg.det(L)) / np.linalg.det(landscape.hess_a1))
    pref = 2 * math.pi / kappa
    barrier = math.exp(beta * landscape.deltaF)
    return ExitPrediction(
        dynamics=dynamics.name, beta=float(beta), mean_exit=pref * barrier * hess, prefactor=pref,
        barrier_factor=barrier, hessian_factor=hess, exponent=float(kappa), exponent_name=name,
        heuristic=isinstance(dynamics, ULD) and landscape.dim > 1,
    )


def config_for(dynamics, base: SamplerConfig) -> SamplerConfig:
    """``base`` with the algorithm, friction and drift matrix taken from ``dynamics``."""
    if isinstance(dynamics, ULD):
        return dataclasses.replace(base, algorithm="ULD", gamma=dynamics.gamma, J=None)
    if isinstance(dynamics, NLD):
        return dataclasses.replace(base, algorithm="NLD", gamma=None, J=dynamics.J)
    if isinstance(dynamics, LD):
        return dataclasses.replace(base, algorithm="LD", gamma=None, J=None)
    raise DomainError(f"unknown dynamics {dynamics!r}")


def paired_ratio(a_steps, b_steps) -> tuple[float, float, int]:
    """Ratio of means ``E[a] / E[b]`` over pairs where both finished, with delta-method stderr.

    Returns ``(ratio, stderr, n_pairs)``; timeouts are marked by negative steps.
    """
    a = np.asarray(a_steps, dtype=float)
    b = np.asarray(b_steps, dtype=float)
    ok = (a >= 0) & (b >= 0)
    n = int(ok.sum())
    if n < 2:
        raise DomainError("need at least two paired exits")
    a, b = a[ok], b[ok]
    ratio = a.mean() / b.mean()
    z = (a - ratio * b) / b.mean()
    return float(ratio), float(z.std(ddof=1) / math.sqrt(n)), n


@dataclass
class ExitResult:
    """Exit statistics in continuous time (steps times eta) with the matching prediction."""

    dynamics: str
    eta: float
    beta: float
    n_paths: int
    mean_time: float
    stderr_time: float
    counts: dict
    steps: np.ndarray
    via: np.ndarray
    prediction: ExitPrediction | None
    baseline: "ExitResult | None" = None
    ratio: float = math.nan
    ratio_stderr: float = math.nan
    n_pairs: int = 0

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean_time - Z95 * self.stderr_time, self.mean_time + Z95 * self.stderr_time

    @property
    def ratio_to_prediction(self) -> float:
        return math.nan if self.prediction is None else self.mean_time / self.prediction.mean_exit

    @property
    def ratio_ci(self) -> tuple[float, float]:
        return self.ratio - Z95 * self.ratio_stderr, self.ratio + Z95 * self.ratio_stderr

    @property
    def predicted_ratio(self) -> float:
        if self.baseline is None or self.prediction is None or self.baseline.prediction is None:
            return math.nan
        return self.prediction.mean_exit / self.baseline.prediction.mean_exit

    def rows(self):
        """``(path, exit_steps, exit_time, exited_via)`` per path; timeouts have empty times."""
        out = []
        for i, (k, v) in enumerate(zip(self.steps, self.via)):
            if k < 0:
                out.append((i, "", "", "timeout"))
            else:
                out.append((i, int(k), float(k) * self.eta, EXIT_LABELS[v]))
        return out

    def summary(self) -> dict:
        out = {
            "dynamics": self.dynamics, "eta": self.eta, "beta": self.beta, "n_paths": self.n_paths,
            "mean_time": self.mean_time, "stderr_time": self.stderr_time, "ci95": list(self.ci),
            "counts": dict(self.counts), "ratio_to_prediction": self.ratio_to_prediction,
            "prediction": None if self.prediction is None else self.prediction.to_dict(),
        }
        if self.baseline is not None:
            out.update(ratio_to_reversible=self.ratio, ratio_stderr=self.ratio_stderr,
                       ratio_ci95=list(self.ratio_ci), n_pairs=self.n_pairs,
                       predicted_ratio=self.predicted_ratio, baseline=self.baseline.summary())
        return out


def _run(obj, land, dynamics, config, n_paths, neighborhood_radius, domain_radius, threads):
    cfg = config_for(dynamics, config)
    res = batch_hitting(obj, land.a1, Ball(land.a2, neighborhood_radius), cfg, n_paths,
                        domain_radius=domain_radius, threads=threads)
    pred = None if cfg.noiseless else ek_prediction(land, cfg.beta, dynamics)
    counts = {"a2": res.counts[VIA_STOP], "boundary": res.counts[VIA_BOUNDARY], "timeout": res.counts["timeout"]}
    return ExitResult(dynamics=dynamics.name, eta=cfg.eta, beta=cfg.beta, n_paths=n_paths,
                      mean_time=res.mean_time, stderr_time=res.stderr_time, counts=counts,
                      steps=res.steps, via=res.via, prediction=pred)


def exit_experiment(obj, dynamics, config: SamplerConfig, n_paths: int, *, neighborhood_radius: float = 0.2,
                    domain_radius: float = 5.0, baseline: bool | None = None,
                    threads: int | None = None) -> ExitResult:
    """Exit from ``a1`` of a double well until the ball around ``a2`` or the domain boundary.

    For ULD and NLD the reversible dynamics is run as a baseline with the same
    seed (common random numbers), and ``ratio`` is the paired ratio of mean
    exit times, dynamics over baseline.
    """
    if not (neighborhood_radius > 0 and domain_radius > 0):
        raise DomainError("radii must be positive")
    land = obj.landscape()
    if baseline is None:
        baseline = not isinstance(dynamics, LD)
    result = _run(obj, land, dynamics, config, n_paths, neighborhood_radius, domain_radius, threads)
    if baseline:
        base = _run(obj, land, LD(), config, n_paths, neighborhood_radius, domain_radius, threads)
        result.baseline = base
        result.ratio, result.ratio_stderr, result.n_pairs = paired_ratio(result.steps, base.steps)
    return result


@dataclass
class RefinementTable:
    etas: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    extrapolated: float
    extrapolated_stderr: float
    prediction: ExitPrediction
    results: list = field(default_factory=list, repr=False)

    @property
    def differences(self) -> np.ndarray:
        return np.abs(np.diff(self.means))

    @property
    def differences_shrink(self) -> bool:
        return bool(np.all(np.diff(self.differences) < 0))

    @property
    def gap_to_prediction(self) -> float:
        return abs(self.extrapolated - self.prediction.mean_exit)

    def rows(self):
        return [(e, m, s) for e, m, s in zip(self.etas, self.means, self.stderrs)]

    def summary(self) -> dict:
        return {
            "etas": self.etas.tolist(), "means": self.means.tolist(), "stderrs": self.stderrs.tolist(),
            "differences": self.differences.tolist(), "differences_shrink": self.differences_shrink,
            "extrapolated": self.extrapolated, "extrapolated_stderr": self.extrapolated_stderr,
            "prediction": self.prediction.mean_exit, "gap_to_prediction": self.gap_to_prediction,
        }


def stepsize_refinement(obj, dynamics, config_base: SamplerConfig, eta_ladder, n_paths: int, *,
                        neighborhood_radius: float = 0.2, domain_radius: float = 5.0,
                        threads: int | None = None) -> RefinementTable:
    """Mean exit time along a decreasing stepsize ladder, extrapolated linearly to ``eta -> 0``.

    The extrapolation is a weighted least-squares line in ``eta``; with two
    rungs at ratio 2 it reduces to the Richardson value ``2 m(eta/2) - m(eta)``.
    """
    etas = np.asarray(eta_ladder, dtype=float)
    if etas.ndim != 1 or etas.size < 3:
        raise DomainError("stepsize ladder needs at least three rungs")
    if np.any(np.diff(etas) >= 0) or np.any(etas <= 0):
        raise DomainError("stepsize ladder must be positive and strictly decreasing")
    if config_base.noiseless:
        raise DomainError("refinement needs finite beta (zero noise never exits from a1)")
    results = [exit_experiment(obj, dynamics, dataclasses.replace(config_base, eta=float(e)), n_paths,
                               neighborhood_radius=neighborhood_radius, domain_radius=domain_radius,
                               baseline=False, threads=threads) for e in etas]
    means = np.array([r.mean_time for r in results])
    se = np.array([r.stderr_time for r in results])
    w = 1 / np.maximum(se, 1e-300) ** 2
    X = np.column_stack([np.ones_like(etas), etas])
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    coef = cov @ (X.T @ (w * means))
    return RefinementTable(etas=etas, means=means, stderrs=se, extrapolated=float(coef[0]),
                           extrapolated_stderr=float(math.sqrt(cov[0, 0])),
                           prediction=results[0].prediction, results=results)
