"""Discrete-time LD, ULD and NLD iterations with reproducible noise.

Every path draws its Gaussian increments from its own Philox stream keyed
by ``(seed, path)``; the ``k``-th draw of that stream drives step ``k``.
Paths are advanced together as a numpy batch, in blocks of steps, and the
result for a path never depends on which other paths share its batch, on
the block length, or on the number of threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllTimeoutError, DivergenceError, DomainError
from .spectral import check_antisymmetric

__all__ = [
    "Ball",
    "HittingResult",
    "SamplerConfig",
    "Trajectory",
    "batch_hitting",
    "hitting_time",
    "ld_step",
    "nld_step",
    "path_rng",
    "simulate",
    "stream",
    "uld_step",
]

ALGORITHMS = ("LD", "ULD", "NLD")
DEFAULT_BLOCK = 512
VIA_TIMEOUT, VIA_STOP, VIA_BOUNDARY = "timeout", "stop", "boundary"


# -- single steps -----------------------------------------------------------

def ld_step(x, grad, eta, beta, xi):
    """``x - eta grad + sqrt(2 eta / beta) xi``."""
    return x - eta * grad + math.sqrt(2 * eta / beta) * xi


def uld_step(x, v, grad, eta, gamma, beta, xi):
    """Velocity update, then position update with the old velocity."""
    v_new = v - eta * (gamma * v + grad) + math.sqrt(2 * gamma * eta / beta) * xi
    return x + eta * v, v_new


def nld_step(x, grad, eta, beta, J, xi):
    """``x - eta (I + J) grad + sqrt(2 eta / beta) xi``; works on row batches."""
    return x - eta * (grad + grad @ np.asarray(J).T) + math.sqrt(2 * eta / beta) * xi


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    """Discretization parameters.

    ``beta = inf`` runs the noiseless iteration. ``v0`` is the initial
    velocity for ULD and defaults to zero.
    """

    algorithm: str
    eta: float
    beta: float
    gamma: float | None = None
    J: np.ndarray | None = field(default=None, compare=False)
    max_steps: int = 1_000_000
    seed: int = 0
    record_stride: int = 1
    v0: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.eta > 0 or not math.isfinite(self.eta):
            raise DomainError("stepsize must be positive and finite")
        if not self.beta > 0:
            raise DomainError("inverse temperature must be positive")
        if self.algorithm == "ULD" and not (self.gamma is not None and self.gamma > 0):
            raise DomainError("ULD needs a positive friction")
        if self.algorithm == "NLD":
            if self.J is None:
                raise DomainError("NLD needs an antisymmetric J")
            object.__setattr__(self, "J", check_antisymmetric(self.J))
        if not (0 <= int(self.seed) < 2 ** 64):
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.max_steps < 0 or self.record_stride < 1:
            raise DomainError("max_steps must be >= 0 and record_stride >= 1")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.beta)

    def echo(self) -> dict:
        out = {"algorithm": self.algorithm, "eta": self.eta, "beta": self.beta,
               "max_steps": self.max_steps, "seed": int(self.seed), "record_stride": self.record_stride}
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.J is not None:
            out["J"] = np.asarray(self.J).tolist()
        if self.v0 is not None:
            out["v0"] = np.asarray(self.v0).tolist()
        return out


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Counter-based stream for one path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(path),))))


class Ball:
    """Predicate ``||x - center|| <= radius`` on row batches."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def __call__(self, x):
        return np.linalg.norm(np.asarray(x) - self.center, axis=-1) <= self.radius


# -- batched engine ---------------------------------------------------------

class _Batch:
    """State of a set of paths advanced together."""

    def __init__(self, obj, cfg: SamplerConfig, starts, path_ids):
        self.obj = obj
        self.cfg = cfg
        self.x = np.array(starts, dtype=float)
        n, d = self.x.shape
        self.d = d
        self.path_ids = np.asarray(path_ids)
        self.rngs = [path_rng(cfg.seed, p) for p in self.path_ids]
        self.v = None
        if cfg.algorithm == "ULD":
            v0 = np.zeros(d) if cfg.v0 is None else np.asarray(cfg.v0, dtype=float)
            self.v = np.broadcast_to(v0, (n, d)).copy()
        R = getattr(getattr(obj, "meta", None), "R", 0.0)
        self.limit = 1e6 * (1 + (R if math.isfinite(R) else 0.0))
        self.JT = None if cfg.J is None else np.asarray(cfg.J).T
        self.noise_scale = 0.0 if cfg.noiseless else (
            math.sqrt(2 * cfg.gamma * cfg.eta / cfg.beta) if cfg.algorithm == "ULD"
            else math.sqrt(2 * cfg.eta / cfg.beta))

    def draw(self, K):
        n = len(self.rngs)
        if self.cfg.noiseless:
            return np.zeros((K, n, self.d))
        out = np.empty((K, n, self.d))
        for i, g in enumerate(self.rngs):
            out[:, i, :] = g.standard_normal((K, self.d))
        return out

    def step(self, xi):
        cfg = self.cfg
        grad = self.obj.gradient(self.x)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("non-finite gradient")
        if cfg.algorithm == "LD":
            self.x = self.x - cfg.eta * grad + self.noise_scale * xi
        elif cfg.algorithm == "NLD":
            self.x = self.x - cfg.eta * (grad + grad @ self.JT) + self.noise_scale * xi
        else:
            v = self.v
            self.v = v - cfg.eta * (cfg.gamma * v + grad) + self.noise_scale * xi
            self.x = self.x + cfg.eta * v

    def check(self, k):
        norms = np.linalg.norm(self.x, axis=1)
        if not np.all(norms <= self.limit):
            bad = int(self.path_ids[np.argmax(~(norms <= self.limit))])
            raise DivergenceError(f"path {bad} left the ball of radius {self.limit:.3g} at step {k}")
        return norms

    def keep(self, mask):
        self.x = self.x[mask]
        if self.v is not None:
            self.v = self.v[mask]
        self.path_ids = self.path_ids[mask]
        self.rngs = [g for g, m in zip(self.rngs, mask) if m]


def _starts(start, n):
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.ndim == 1:
        start = np.broadcast_to(start, (n, start.size))
    if start.shape[0] != n or not np.all(np.isfinite(start)):
        raise DomainError("start must be a finite point or one point per path")
    return start


def stream(obj, start, config: SamplerConfig, n_steps: int, n_paths: int = 1, *,
           first_path: int = 0, block: int = DEFAULT_BLOCK):
    """Yield ``(k0, positions)`` blocks for ``n_paths`` paths.

    ``positions`` has shape ``(K, n_paths, d)`` and holds ``X_{k0}`` to
    ``X_{k0+K-1}``. The first block is the initial state alone; all
    ``n_steps + 1`` states are covered.
    """
    b = _Batch(obj, config, _starts(start, n_paths), np.arange(first_path, first_path + n_paths))
    b.check(0)
    yield 0, b.x[None].copy()
    k = 0
    while k < n_steps:
        K = min(block, n_steps - k)
        xi = b.draw(K)
        out = np.empty((K, n_paths, b.d))
        for j in range(K):
            b.step(xi[j])
            b.check(k + j + 1)
            out[j] = b.x
        yield k + 1, out
        k += K


@dataclass
class Trajectory:
    """Recorded iterates of one path; ``velocities`` is ``None`` except for ULD."""

    positions: np.ndarray
    velocities: np.ndarray | None
    step_indices: np.ndarray
    config: dict

    def __post_init__(self):
        n = len(self.step_indices)
        if self.positions.shape[0] != n or (self.velocities is not None and self.velocities.shape[0] != n):
            raise DomainError("trajectory arrays must have equal length")

    def rows(self):
        parts = [self.step_indices[:, None].astype(float), self.positions]
        if self.velocities is not None:
            parts.append(self.velocities)
        return np.hstack(parts)

    def header(self):
        d = self.positions.shape[1]
        cols = ["step"] + [f"x_{i}" for i in range(d)]
        if self.velocities is not None:
            cols += [f"v_{i}" for i in range(d)]
        return cols


def simulate(obj, start, config: SamplerConfig, *, path: int = 0, block: int = DEFAULT_BLOCK) -> Trajectory:
    """Run ``config.max_steps`` steps of one path and record every ``record_stride``-th state."""
    b = _Batch(obj, config, _starts(start, 1), [path])
    b.check(0)
    stride = config.record_stride
    xs, vs, ks = [b.x[0].copy()], [] if b.v is None else [b.v[0].copy()], [0]
    k = 0
    while k < config.max_steps:
        K = min(block, config.max_steps - k)
        xi = b.draw(K)
        for j in range(K):
            b.step(xi[j])
            k += 1
            b.check(k)
            if k % stride == 0:
                xs.append(b.x[0].copy())
                ks.append(k)
                if b.v is not None:
                    vs.append(b.v[0].copy())
    return Trajectory(np.array(xs), None if b.v is None else np.array(vs), np.array(ks), config.echo())


# -- hitting times ----------------------------------------------------------

def _hit_group(obj, starts, path_ids, stop, config, domain_radius, block):
    n = len(path_ids)
    steps = np.full(n, -1, dtype=np.int64)
    via = np.full(n, VIA_TIMEOUT, dtype=object)
    b = _Batch(obj, config, starts, path_ids)
    index = np.arange(n)

    def classify(norms):
        hit = np.asarray(stop(b.x), dtype=bool)
        out = np.zeros_like(hit) if domain_radius is None else norms > domain_radius
        return hit, out & ~hit

    def record(k, mask, hit, out):
        steps[index[mask]] = k
        via[index[mask & hit]] = VIA_STOP
        via[index[mask & out]] = VIA_BOUNDARY

    hit, out = classify(b.check(0))
    done = hit | out
    record(0, done, hit, out)
    k = 0
    while k < config.max_steps and not done.all():
        b.keep(~done)
        index = index[~done]
        K = min(block, config.max_steps - k)
        xi = b.draw(K)
        done = np.zeros(len(index), dtype=bool)
        for j in range(K):
            frozen = done.any()
            if frozen:
                x_old, v_old = b.x, b.v
            b.step(xi[j])
            k += 1
            if frozen:
                # finished paths stay put until the batch is compacted
                b.x[done] = x_old[done]
                if b.v is not None:
                    b.v[done] = v_old[done]
            live = ~done
            norms = np.linalg.norm(b.x, axis=1)
            if not np.all(norms[live] <= b.limit):
                bad = int(b.path_ids[live][np.argmax(~(norms[live] <= b.limit))])
                raise DivergenceError(f"path {bad} left the ball of radius {b.limit:.3g} at step {k}")
            hit, out = classify(norms)
            new = (hit | out) & live
            if new.any():
                record(k, new, hit, out)
                done |= new
                if done.all():
                    break
    return steps, via


def hitting_time(obj, start, stop, config: SamplerConfig, *, domain_radius: float | None = None,
                 path: int = 0, block: int = DEFAULT_BLOCK):
    """First step where ``stop`` holds or the domain ball is left.

    Returns ``(steps, via)``; ``steps`` is ``None`` on timeout and ``via``
    is ``"stop"``, ``"boundary"`` or ``"timeout"``.
    """
    steps, via = _hit_group(obj, _starts(start, 1), np.array([path]), stop, config, domain_radius, block)
    return (None if steps[0] < 0 else int(steps[0])), str(via[0])


@dataclass
class HittingResult:
    """Batch statistics; ``mean`` and ``stderr`` are in steps over non-timeout paths."""

    mean: float
    stderr: float
    counts: dict
    timeout_fraction: float
    steps: np.ndarray
    via: np.ndarray
    eta: float

    @property
    def mean_time(self) -> float:
        return self.mean * self.eta

    @property
    def stderr_time(self) -> float:
        return self.stderr * self.eta

    @property
    def times(self) -> np.ndarray:
        return np.where(self.steps >= 0, self.steps * self.eta, np.nan)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("KRAMERS_THREADS", "1")))
    except ValueError:
        return 1


def batch_hitting(obj, start, stop, config: SamplerConfig, n_paths: int, *,
                  domain_radius: float | None = None, threads: int | None = None,
                  block: int = DEFAULT_BLOCK) -> HittingResult:
    """Hitting times of ``n_paths`` independent paths.

    Paths are split into contiguous chunks, one per thread; path ``p``
    always uses stream ``(config.seed, p)``.
    """
    if n_paths < 2:
        raise DomainError("n_paths must be at least 2")
    threads = default_threads() if threads is None else max(1, int(threads))
    starts = _starts(start, n_paths)
    bounds = np.linspace(0, n_paths, min(threads, n_paths) + 1).astype(int)
    chunks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def run(chunk):
        lo, hi = chunk
        return _hit_group(obj, starts[lo:hi], np.arange(lo, hi), stop, config, domain_radius, block)

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    steps = np.concatenate([p[0] for p in parts])
    via = np.concatenate([p[1] for p in parts])
    ok = steps >= 0
    if not ok.any():
        raise AllTimeoutError(f"all {n_paths} paths timed out after {config.max_steps} steps")
    vals = steps[ok].astype(float)
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    counts = {key: int(np.sum(via == key)) for key in (VIA_STOP, VIA_BOUNDARY, VIA_TIMEOUT)}
    return HittingResult(mean=float(vals.mean()), stderr=stderr, counts=counts,
                         timeout_fraction=float(np.mean(~ok)), steps=steps, via=via.astype(str),
                         eta=config.eta)
