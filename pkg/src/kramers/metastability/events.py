"""Recurrence/escape verdicts for discrete trajectories.

With ``env(k) = eps + r exp(-rate k eta)`` a trajectory is classified as

* ``Event1`` if ``|X_k - x*| >= env(k)/2`` for some ``k <= T_rec/eta``,
* ``Event2`` otherwise, if ``|X_k - x*| <= env(k)`` for all integer ``k`` in
  ``[T_rec/eta, T_esc/eta]``,
* ``Neither`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CoverageError, DomainError
from ..samplers import SamplerConfig, stream
from .constants import contraction_rate, recurrence_time
from .params import ProblemParams, resolve_mode

__all__ = ["EVENT1", "EVENT2", "NEITHER", "EnsembleSummary", "EventMonitor", "EventWindow",
           "MetastabilityVerdict", "classify", "classify_ensemble"]

EVENT1 = "Event1"
EVENT2 = "Event2"
NEITHER = "Neither"


@dataclass(frozen=True)
class EventWindow:
    """Envelope parameters and integer step bounds of the two events."""

    eps: float
    r: float
    rate: float
    eta: float
    k_rec_last: int  # last step of the recurrence phase
    k_win_first: int
    k_win_last: int

    @classmethod
    def from_times(cls, eps, r, rate, eta, T_rec, T_esc) -> "EventWindow":
        if not eta > 0:
            raise DomainError("eta must be positive")
        # tiny relative slack so that T/eta landing on an integer is not lost to rounding
        lo, hi = T_rec / eta, T_esc / eta
        tol = 1e-12
        return cls(eps=float(eps), r=float(r), rate=float(rate), eta=float(eta),
                   k_rec_last=int(math.floor(lo * (1 + tol))),
                   k_win_first=int(math.ceil(lo * (1 - tol))),
                   k_win_last=int(math.floor(hi * (1 + tol))))

    @classmethod
    def from_params(cls, params: ProblemParams, mode: str, eta: float) -> "EventWindow":
        mode = resolve_mode(params, mode)
        T_rec = recurrence_time(params, mode, check=False)
        return cls.from_times(params.eps, params.r, contraction_rate(params, mode), eta, T_rec, T_rec + params.T)

    def envelope(self, k):
        return self.eps + self.r * np.exp(-self.rate * np.asarray(k, dtype=float) * self.eta)

    @property
    def n_steps(self) -> int:
        """Number of steps a trajectory must cover."""
        return self.k_win_last


@dataclass(frozen=True)
class MetastabilityVerdict:
    """Outcome for one trajectory.

    ``first_violation_step`` is the step that decided ``Event1`` or ``Neither``.
    """

    event: str
    first_violation_step: int | None
    window: EventWindow

    def envelope(self, k):
        return self.window.envelope(k)


class EventMonitor:
    """Streaming classifier for a batch of paths fed as ``(k0, (K, n, d))`` blocks."""

    def __init__(self, window: EventWindow, x_star, n_paths: int):
        self.window = window
        self.x_star = np.asarray(x_star, dtype=float)
        self.n = int(n_paths)
        self.event1 = np.full(self.n, -1, dtype=np.int64)
        self.window_fail = np.full(self.n, -1, dtype=np.int64)
        self.covered = -1

    def feed(self, k0: int, block) -> None:
        block = np.asarray(block, dtype=float)
        if block.ndim == 2:
            block = block[:, None, :]
        if k0 != self.covered + 1:
            raise DomainError(f"blocks must be contiguous: expected step {self.covered + 1}, got {k0}")
        K = block.shape[0]
        ks = np.arange(k0, k0 + K)
        self.covered = k0 + K - 1
        w = self.window
        dist = np.linalg.norm(block - self.x_star, axis=-1)  # (K, n)
        env = w.envelope(ks)[:, None]
        self._first(ks <= w.k_rec_last, dist >= env / 2, ks, self.event1)
        in_win = (ks >= w.k_win_first) & (ks <= w.k_win_last)
        self._first(in_win, dist > env, ks, self.window_fail)

    def _first(self, rows, bad, ks, store):
        if not rows.any():
            return
        rows_bad = bad[rows]
        hit = rows_bad.any(axis=0) & (store < 0)
        if hit.any():
            store[hit] = ks[rows][np.argmax(rows_bad[:, hit], axis=0)]

    @property
    def done(self) -> bool:
        return self.covered >= self.window.k_win_last

    def verdicts(self) -> list[MetastabilityVerdict]:
        if not self.done:
            raise CoverageError(f"trajectory covers {self.covered} steps, window ends at {self.window.k_win_last}")
        out = []
        for e1, wf in zip(self.event1, self.window_fail):
            if e1 >= 0:
                out.append(MetastabilityVerdict(EVENT1, int(e1), self.window))
            elif wf < 0:
                out.append(MetastabilityVerdict(EVENT2, None, self.window))
            else:
                out.append(MetastabilityVerdict(NEITHER, int(wf), self.window))
        return out


def classify(traj, x_star, params: ProblemParams, mode: str, *, eta: float | None = None) -> MetastabilityVerdict:
    """Verdict for a recorded trajectory (every step must be recorded).

    ``traj`` is a :class:`~kramers.samplers.Trajectory` or an array of
    positions ``X_0, X_1, ...``; for a bare array ``eta`` is required.
    """
    if hasattr(traj, "positions"):
        steps = np.asarray(traj.step_indices)
        if steps.size and not np.array_equal(steps, np.arange(steps.size)):
            raise DomainError("classification needs every step recorded (record_stride = 1)")
        positions = traj.positions
        eta = traj.config["eta"] if eta is None else eta
    else:
        positions = np.atleast_2d(np.asarray(traj, dtype=float))
        if eta is None:
            raise DomainError("eta is required for a bare position array")
    window = EventWindow.from_params(params, mode, eta)
    if positions.shape[0] - 1 < window.k_win_last:
        raise CoverageError(f"trajectory has {positions.shape[0] - 1} steps, window ends at {window.k_win_last}")
    mon = EventMonitor(window, x_star, 1)
    mon.feed(0, positions[: window.k_win_last + 1])
    return mon.verdicts()[0]


@dataclass
class EnsembleSummary:
    verdicts: list[MetastabilityVerdict]
    window: EventWindow
    config: SamplerConfig

    @property
    def counts(self) -> dict[str, int]:
        out = {EVENT1: 0, EVENT2: 0, NEITHER: 0}
        for v in self.verdicts:
            out[v.event] += 1
        return out

    def fraction(self, event: str) -> float:
        return self.counts[event] / len(self.verdicts)

    @property
    def neither_fraction(self) -> float:
        return self.fraction(NEITHER)


def classify_ensemble(obj, start, x_star, params: ProblemParams, mode: str, config: SamplerConfig,
                      n_paths: int, *, block: int = 1024) -> EnsembleSummary:
    """Simulate ``n_paths`` seeded paths (path ids ``0..n-1``) and classify each."""
    if n_paths < 1:
        raise DomainError("need at least one path")
    window = EventWindow.from_params(params, mode, config.eta)
    mon = EventMonitor(window, x_star, n_paths)
    for k0, blk in stream(obj, start, config, window.k_win_last, n_paths=n_paths, block=block):
        mon.feed(k0, blk)
    return EnsembleSummary(mon.verdicts(), window, config)
