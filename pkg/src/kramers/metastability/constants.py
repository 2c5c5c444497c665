"""Explicit recurrence/escape constants and admissibility of (eta, beta).

Three variants are tabulated: underdamped with critical friction
``gamma = 2 sqrt(m)``, underdamped with small friction ``gamma < 2 sqrt(m)``,
and non-reversible overdamped. A component whose denominator vanishes
(e.g. ``B = 0`` in ``eta1``) does not constrain anything and is ``+inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import AdmissibilityError, DomainError
from ..mathkit import lambert_w_minus1
from .params import NLD_MODE, ULD_CRITICAL, ULD_SMALL, ProblemParams, resolve_mode

__all__ = [
    "AdmissibilityReport",
    "ComponentCheck",
    "ConstantsTable",
    "admissibility",
    "constants_table",
    "contraction_rate",
    "eps_components",
    "recurrence_time",
    "suggest_parameters",
]

_LOG_TAIL = 0.25 * math.log(2) + 0.25  # log(2^{1/4} e^{1/4})


def _div(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


def _small_friction(p: ProblemParams):
    """(eps_hat, C_eps_hat, rate) for gamma < 2 sqrt(m)."""
    eps_hat = 1 - p.friction / (2 * math.sqrt(p.m))
    C = (1 + p.M) / math.sqrt(p.m * (1 - (1 - eps_hat) ** 2))
    return eps_hat, C, math.sqrt(p.m) * (1 - eps_hat)


def contraction_rate(params: ProblemParams, mode: str) -> float:
    """Exponent of the deterministic envelope used to classify trajectories."""
    mode = resolve_mode(params, mode)
    if mode == ULD_CRITICAL:
        return math.sqrt(params.m)
    if mode == ULD_SMALL:
        return _small_friction(params)[2]
    return float(params.mJ)


def _critical_S(p: ProblemParams) -> float:
    return p.C_H + 2 + (p.m + 1) ** 2


def eps_components(params: ProblemParams, mode: str) -> dict[str, float]:
    """Upper thresholds on the target radius ``eps`` (independent of eta, beta)."""
    p = params
    mode = resolve_mode(p, mode)
    if mode == ULD_CRITICAL:
        m, CH = p.m, p.C_H
        S = _critical_S(p)
        e1 = math.sqrt(S / ((CH + 2) * m + (m + 1) ** 2)) * p.r
        e2 = 2 * math.sqrt(2) * S ** 0.25 * math.exp(-0.5) * p.r / m ** 0.25
        inner = math.sqrt(CH + 2) + (m + 1) / math.sqrt(m) + (math.sqrt((CH + 2) * m) + m + 1) / (8 * math.sqrt(S))
        e3 = _div(math.sqrt(m), 4 * p.L * inner)
        return {"eps1": e1, "eps2": e2, "eps3": e3}
    if mode == ULD_SMALL:
        _, C, rate = _small_friction(p)
        return {"eps1": _div(rate, 4 * C * p.L * (1 + 1 / (64 * C ** 2))), "eps2": 8 * p.r * C}
    a = 1 + p.J_norm
    CJ = p.CJ
    return {
        "eps1": _div(p.mJ, 4 * CJ * a * p.L * (1 + 1 / (64 * CJ ** 2))),
        "eps2": 8 * p.r * CJ,
        # the logarithm in the recurrence time must be positive
        "eps_rec": 8 * p.r / CJ,
    }


def _check_eps(p: ProblemParams, comps: dict) -> None:
    for name, bound in comps.items():
        if not p.eps < bound:
            raise AdmissibilityError(f"eps = {p.eps!r} must be below {name} = {bound!r}", component=name)


def recurrence_time(params: ProblemParams, mode: str, *, check: bool = True) -> float:
    """Recurrence time for the mode; ``check`` enforces ``eps < eps_bar`` first."""
    p = params
    mode = resolve_mode(p, mode)
    if check:
        _check_eps(p, eps_components(p, mode))
    if mode == ULD_CRITICAL:
        sm = math.sqrt(p.m)
        rhs = p.eps ** 2 / (8 * p.r ** 2 * math.sqrt(_critical_S(p)))
        arg = -rhs * sm
        if not -1 / math.e <= arg < 0:
            raise AdmissibilityError(f"Lambert argument {arg!r} outside [-1/e, 0)", component="lambert")
        T = -lambert_w_minus1(arg) / sm
        resid = T * math.exp(-sm * T) - rhs
        if abs(resid) > 1e-10 * rhs or T < 1 / sm * (1 - 1e-12):
            raise AdmissibilityError(f"recurrence identity failed (residual {resid!r})", component="lambert")
        return T
    if mode == ULD_SMALL:
        _, C, rate = _small_friction(p)
        return (2 / rate) * math.log(8 * p.r * C / p.eps)
    return (2 / p.mJ) * math.log(8 * p.r / (p.CJ * p.eps))


@dataclass
class ConstantsTable:
    """Named constants of one mode with their aggregation keys.

    ``eta`` and ``beta`` are the values at which eta/beta dependent entries were
    evaluated.
    """

    mode: str
    values: dict[str, float]
    eps_keys: tuple[str, ...]
    eta_keys: tuple[str, ...]
    beta_keys: tuple[str, ...]
    eta: float
    beta: float
    rate: float

    def __getitem__(self, key):
        return self.values[key]

    @property
    def eps_bar(self) -> float:
        return self.values["eps_bar"]

    @property
    def eta_bar(self) -> float:
        return self.values["eta_bar"]

    @property
    def beta_bar(self) -> float:
        return self.values["beta_bar"]

    @property
    def T_rec(self) -> float:
        return self.values["T_rec"]

    @property
    def T_esc(self) -> float:
        return self.values["T_esc"]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "eta": self.eta, "beta": self.beta, "rate": self.rate, "values": dict(self.values)}


def _uld_entries(p: ProblemParams, beta: float, eta: float, T_rec: float, mode: str) -> tuple[dict, tuple, tuple]:
    m, M, B, A, d, R = p.m, p.M, p.B, p.A, p.d, p.R
    g = p.friction
    T_esc = T_rec + p.T
    lam = min(1 / 8, m / (2 * M + g ** 2))
    A_bar = beta * m / (2 * M + g ** 2) * (B ** 2 / (2 * M + g ** 2) + (p.b / m) * (M + g ** 2 / 2) + A)
    common = (beta * M / 2 + beta * g ** 2 * (2 - lam) / 4) * R ** 2 + beta * B * R + beta * A + 0.75 * beta * p.v0_norm ** 2
    num_c = common + (d + A_bar) / lam
    num_d = common + 4 * (d + A_bar) / lam
    den_x = 0.125 * (1 - 2 * lam) * beta * g ** 2
    den_v = 0.25 * beta * (1 - 2 * lam)
    Cx_c, Cv_c = num_c / den_x, num_c / den_v
    Cx_d, Cv_d = num_d / den_x, num_d / den_v
    K1 = max(32 * M ** 2 * (0.5 + g) / ((1 - 2 * lam) * beta * g ** 2),
             8 * (M / 2 + g ** 2 / 4 - g ** 2 * lam / 4 + g) / (beta * (1 - 2 * lam)))
    K2 = 2 * B ** 2 * (0.5 + g)
    growth = 1 + g + M
    eps = p.eps
    eta1 = _div(eps * math.exp(-growth), 8 * B)
    eta2 = p.delta * eps ** 2 * math.exp(-2 * growth) / (384 * (M ** 2 * Cx_c + (1 + g) ** 2 * Cv_c) * T_rec)
    eta3 = _div(4 * g * p.delta ** 2, 9 * beta * M ** 2 * Cv_d * T_esc)
    eta4 = min(_div(g * (d / beta + A_bar / beta), K2), g * lam / (2 * K1))
    if mode == ULD_CRITICAL:
        beta1 = (256 * (2 * p.C_H * m + 4 * m + (m + 1) ** 2) / (m * eps ** 2)
                 * (d * math.log(2) + math.log((6 * math.sqrt(4 * m + M ** 2 + 1) * p.T + 3) / p.delta)))
        first = "beta1"
    else:
        _, C, rate = _small_friction(p)
        beta1 = (128 * g * C ** 2 / (rate * eps ** 2)
                 * (d * math.log(2) + math.log((6 * math.sqrt(g ** 2 + M ** 2 + 1) * p.T + 3) / p.delta)))
        first = "beta3"
    beta2 = (512 * d * eta * g * (_LOG_TAIL + math.log(6 * T_rec / (p.delta * eta)))
             / (eps ** 2 * math.exp(-2 * growth * eta)))
    vals = {
        "lambda": lam, "A_bar": A_bar,
        "Cx_c": Cx_c, "Cv_c": Cv_c, "Cx_d": Cx_d, "Cv_d": Cv_d, "K1": K1, "K2": K2,
        "eta1": eta1, "eta2": eta2, "eta3": eta3, "eta4": eta4,
        first: beta1, "beta2": beta2,
        "T_rec": T_rec, "T_esc": T_esc,
    }
    return vals, ("eta1", "eta2", "eta3", "eta4"), (first, "beta2")


def _nld_entries(p: ProblemParams, beta: float, eta: float, T_rec: float) -> tuple[dict, tuple, tuple]:
    m, M, B, A, b, d, R = p.m, p.M, p.B, p.A, p.b, p.d, p.R
    a = 1 + p.J_norm
    T_esc = T_rec + p.T
    eps = p.eps
    base = (M * R ** 2 + 2 * B * R + B + 4 * A) / m + (b / m) * math.log(3)
    C_c = base + 2 * b * (M + B) / m ** 2 + 4 * M * d * (M + B) / (beta * m ** 3)
    C_d = base + 8 * (M + B) * M * d / (beta * m ** 3) + 2 * (M + B) * b / m ** 2
    C_1 = 6 * (beta * (a ** 2 * M ** 2 * C_d + B ** 2) + d) * a ** 2 * M ** 2
    eta1 = _div(eps * math.exp(-a * M), 8 * a * B)
    eta2 = p.delta * eps ** 2 * math.exp(-2 * a * M) / (384 * a ** 2 * M ** 2 * C_c * T_rec)
    eta3 = 2 * p.delta ** 2 / (9 * C_1 * T_esc)
    eta4 = 1 / (M * a ** 2)
    beta1 = (128 * p.CJ ** 2 / (p.mJ * eps ** 2)
             * (0.5 * d * math.log(2) + math.log((6 * a * M * p.T + 3) / p.delta)))
    beta2 = (512 * d * eta * (_LOG_TAIL + math.log(6 * T_rec / (p.delta * eta)))
             / (eps ** 2 * math.exp(-2 * a * M * eta)))
    vals = {
        "C_c": C_c, "C_d": C_d, "C_1": C_1,
        "eta1": eta1, "eta2": eta2, "eta3": eta3, "eta4": eta4,
        "beta1": beta1, "beta2": beta2,
        "T_rec": T_rec, "T_esc": T_esc,
    }
    return vals, ("eta1", "eta2", "eta3", "eta4"), ("beta1", "beta2")


def constants_table(params: ProblemParams, mode: str, *, beta: float | None = None,
                    eta: float | None = None) -> ConstantsTable:
    """Evaluate every constant of the mode.

    ``beta`` defaults to the eta-free lower bound and ``eta`` to ``eta_bar`` at
    that ``beta``, which is the first pass of :func:`suggest_parameters`.
    The table is evaluated even when ``eps`` exceeds ``eps_bar``; only a
    nonpositive recurrence time is refused.
    """
    p = params
    mode = resolve_mode(p, mode)
    ecomp = eps_components(p, mode)
    T_rec = recurrence_time(p, mode, check=False)
    if not T_rec > 0:
        raise AdmissibilityError(f"recurrence time {T_rec!r} is not positive", component="eps_rec")
    if beta is None:
        beta = _eta_free_beta(p, mode, T_rec)
    if not beta > 0 or math.isinf(beta):
        raise DomainError("beta must be positive and finite")
    # eta_bar does not involve eta, so evaluate once with a placeholder
    builder = _nld_entries if mode == NLD_MODE else (lambda *a: _uld_entries(*a, mode))
    probe, eta_keys, _ = builder(p, beta, 1.0, T_rec)
    eta_bar = min([1.0] + [probe[k] for k in eta_keys])
    if eta is None:
        eta = eta_bar
    if not eta > 0:
        raise DomainError("eta must be positive")
    vals, eta_keys, beta_keys = builder(p, beta, eta, T_rec)
    out = {k: v for k, v in ecomp.items()}
    out["eps_bar"] = min(ecomp.values())
    out.update(vals)
    out["eta_bar"] = min([1.0] + [vals[k] for k in eta_keys])
    out["beta_bar"] = max(vals[k] for k in beta_keys)
    return ConstantsTable(mode=mode, values=out, eps_keys=tuple(ecomp), eta_keys=eta_keys,
                          beta_keys=beta_keys, eta=float(eta), beta=float(beta),
                          rate=contraction_rate(p, mode))


def _eta_free_beta(p: ProblemParams, mode: str, T_rec: float) -> float:
    builder = _nld_entries if mode == NLD_MODE else (lambda *a: _uld_entries(*a, mode))
    vals, _, beta_keys = builder(p, 1.0, 1.0, T_rec)
    return vals[beta_keys[0]]


@dataclass(frozen=True)
class ComponentCheck:
    name: str
    kind: str  # "eps" (upper), "eta" (upper) or "beta" (lower)
    value: float
    limit: float

    @property
    def ok(self) -> bool:
        if self.kind == "beta":
            return self.value >= self.limit
        if self.kind == "eps":
            return self.value < self.limit
        return self.value <= self.limit

    @property
    def margin(self) -> float:
        """Ratio above 1 when satisfied."""
        return _div(self.value, self.limit) if self.kind == "beta" else _div(self.limit, self.value)


@dataclass
class AdmissibilityReport:
    mode: str
    eta: float
    beta: float
    checks: list[ComponentCheck] = field(default_factory=list)
    table: ConstantsTable | None = None

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.ok]

    @property
    def binding(self) -> str:
        """Component with the smallest margin."""
        return min(self.checks, key=lambda c: c.margin).name

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "eta": self.eta, "beta": self.beta, "ok": self.ok,
            "checks": [{"name": c.name, "kind": c.kind, "value": c.value, "limit": c.limit, "ok": c.ok}
                       for c in self.checks],
        }


def admissibility(params: ProblemParams, eta: float, beta: float, mode: str) -> AdmissibilityReport:
    """Component-wise check of eps, eta and beta against the table of the mode."""
    mode = resolve_mode(params, mode)
    ecomp = eps_components(params, mode)
    checks = [ComponentCheck(k, "eps", params.eps, v) for k, v in ecomp.items()]
    report = AdmissibilityReport(mode, float(eta), float(beta), checks)
    if not all(c.ok for c in checks):
        return report
    table = constants_table(params, mode, beta=beta, eta=eta)
    report.table = table
    checks += [ComponentCheck(k, "eta", eta, table[k]) for k in table.eta_keys]
    checks.append(ComponentCheck("eta_max", "eta", eta, 1.0))
    checks += [ComponentCheck(k, "beta", beta, table[k]) for k in table.beta_keys]
    return report


def suggest_parameters(params: ProblemParams, mode: str, *, beta_factor: float = 1.0,
                       eta_factor: float = 1.0, max_iter: int = 100) -> tuple[float, float]:
    """Admissible ``(eta, beta)``: beta from the eta-free bound, then eta, then recheck beta.

    ``beta_factor >= 1`` and ``eta_factor <= 1`` add safety margins.
    """
    if beta_factor < 1 or not 0 < eta_factor <= 1:
        raise DomainError("need beta_factor >= 1 and 0 < eta_factor <= 1")
    mode = resolve_mode(params, mode)
    beta = constants_table(params, mode).beta * beta_factor
    for _ in range(max_iter):
        eta = constants_table(params, mode, beta=beta).eta_bar * eta_factor
        rep = admissibility(params, eta, beta, mode)
        if rep.ok:
            return eta, beta
        if rep.table is None:
            raise AdmissibilityError(f"eps violates {rep.failures}", component=rep.failures[0])
        beta = max(beta, rep.table.beta_bar) * (1 + 1e-12)
    raise AdmissibilityError("no admissible (eta, beta) found", component=rep.binding)
