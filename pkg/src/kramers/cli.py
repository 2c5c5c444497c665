"""Command line driver: ``kramers <subcommand> --config cfg.json [--out DIR] [--seed N] [--threads N]``.

Every run writes ``results.csv``, ``report.json`` and finally
``manifest.json`` with SHA-256 checksums of all other outputs. Exit status
is 0 on success, 2 for configuration errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .dynamics import LD, NLD, ULD
from .errors import ConfigError, KramersError
from .gaussian import mixing_curve
from .metastability import (
    ProblemParams,
    admissibility,
    classify_ensemble,
    constants_table,
    exit_experiment,
    resolve_mode,
    stepsize_refinement,
    suggest_parameters,
)
from .objectives import double_well, quadratic
from .samplers import SamplerConfig
from .spectral import check_condition_c1, lambda1_j, optimal_rate, search_j, uld_spectral

SUBCOMMANDS = ("mixing", "spectral", "constants", "recurrence", "classify", "exit")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SCHEMA_VERSION = "1"

__all__ = ["SUBCOMMANDS", "emit_plot_data", "load_config", "main", "run", "validate_report"]


def _schema(name: str) -> dict:
    return json.loads(resources.files("kramers").joinpath("schemas", name).read_text())


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def _plot_bytes(series: dict, units: dict | None) -> bytes:
    if not series:
        raise ValueError("series must be nonempty")
    cols = [np.asarray(v).ravel() for v in series.values()]
    if len({c.size for c in cols}) != 1 or cols[0].size == 0:
        raise ValueError("series columns must be nonempty and of equal length")
    units = units or {}
    header = [f"{k} [{units[k]}]" if k in units else k for k in series]
    return _csv_bytes(header, zip(*[c.tolist() for c in cols]))


def emit_plot_data(series: dict, path, units: dict | None = None) -> Path:
    """Write equal-length columns as CSV; the header is ``name`` or ``name [unit]``.

    Parameters
    ----------
    series : dict
        Ordered mapping from column name to a 1-D sequence.
    path : path-like
        Destination file; its directory must exist.
    units : dict, optional
        Unit label per column.
    """
    path = Path(path)
    path.write_bytes(_plot_bytes(series, units))
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no inf/nan literals
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# --------------------------------------------------------------------------- config


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    v = jsonschema.Draft202012Validator(_schema("config.schema.json"))
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {e.message}")


def _matrix(spec, name):
    data = np.asarray(spec["data"], dtype=float)
    if data.size != spec["rows"] * spec["cols"]:
        raise ConfigError(f"{name}: expected {spec['rows']}x{spec['cols']} entries, got {data.size}")
    return data.reshape(spec["rows"], spec["cols"])


def _objective(cfg):
    o = cfg["objective"]
    if o["name"] == "quadratic":
        if "H" not in o:
            raise ConfigError("objective/H is required for a quadratic")
        H = _matrix(o["H"], "objective/H")
        return quadratic(H, o.get("b1"), o.get("c1", 0.0))
    kw = {k: o[k] for k in ("c", "omega", "tilt", "working_radius") if k in o}
    obj, _ = double_well(o.get("dim", 1), **kw)
    return obj


def _drift_matrix(spec, H, d):
    if spec is None:
        raise ConfigError("dynamics/J is required for NLD")
    if "generator" not in spec:
        J = _matrix(spec, "dynamics/J")
    elif spec["generator"] == "search_j":
        if H is None:
            raise ConfigError("the search_j generator needs a quadratic objective")
        J, _ = search_j(H, iters=spec.get("iters", 500), seed=spec.get("seed", 0))
    else:
        if d < 2:
            raise ConfigError("the rotation generator needs dimension at least 2")
        J = np.zeros((d, d))
        a = spec.get("a", 1.0)
        J[0, 1], J[1, 0] = a, -a
    if J.shape != (d, d):
        raise ConfigError(f"dynamics/J must be {d}x{d}")
    return J


def _dynamics(cfg, obj, default="LD"):
    spec = cfg.get("dynamics", {"name": default})
    H = getattr(obj, "H", None)
    if spec["name"] == "ULD":
        if "gamma" not in spec:
            raise ConfigError("dynamics/gamma is required for ULD")
        return ULD(spec["gamma"])
    if spec["name"] == "NLD":
        return NLD(_drift_matrix(spec.get("J"), H, obj.dim))
    return LD()


def _beta(cfg, default=None):
    b = cfg.get("beta", default)
    if b is None:
        raise ConfigError("beta is required")
    return math.inf if b == "inf" else float(b)


def _require(cfg, *keys):
    for k in keys:
        if k not in cfg:
            raise ConfigError(f"{k} is required for this subcommand")


def _problem(cfg, obj, dyn):
    _require(cfg, "problem")
    pr = cfg["problem"]
    J = dyn.J if isinstance(dyn, NLD) else None
    gamma = dyn.gamma if isinstance(dyn, ULD) else None
    hessian = obj.H if hasattr(obj, "H") else None
    if hessian is None and hasattr(obj, "landscape"):
        hessian = obj.landscape().hess_a1
    base = ProblemParams.from_objective(obj, r=pr["r"], eps=pr["eps"], delta=pr["delta"], T=pr["T"], gamma=gamma,
                                        J=J, hessian=hessian, v0_norm=pr.get("v0_norm", 0.0),
                                        eps_tilde=pr.get("eps_tilde"))
    params = base.with_(**pr.get("overrides", {}))
    mode = pr.get("mode", "NLD" if isinstance(dyn, NLD) else "ULD")
    return params, resolve_mode(params, mode)


# --------------------------------------------------------------------------- subcommands


def _cmd_mixing(cfg, ctx):
    obj = _objective(cfg)
    if not hasattr(obj, "H"):
        raise ConfigError("mixing needs a quadratic objective")
    _require(cfg, "x0", "t_grid")
    dyn = _dynamics(cfg, obj)
    beta = _beta(cfg, 1.0)
    g = cfg["t_grid"]
    grid = np.linspace(g.get("start", 0.0), g["stop"], g.get("num", 200))
    curve = mixing_curve(dyn, obj, beta, cfg["x0"], t_grid=grid)
    rows = [(t, w, b, f) for t, w, b, f in curve.rows()]
    ctx.write_csv("results.csv", ["t", "w2", "bound", "fitted_model"], rows)
    ctx.plot("mixing_curve.csv", {"t": curve.times, "w2": curve.w2, "bound": curve.bound},
             {"t": "time", "w2": "distance", "bound": "distance"})
    res = {"dynamics": curve.dynamics, "fitted_rate": curve.fit.rate, "fit_poly_degree": curve.fit.poly_degree,
           "theory_rate": curve.theory_rate, "init_exact": curve.init_exact, "init_bound": curve.init_bound}
    if "gamma_sweep" in cfg:
        gammas = np.asarray(cfg["gamma_sweep"], dtype=float)
        rates = []
        for gm in gammas:
            rate = uld_spectral(obj.H, gm, verify=False).rate
            sweep = mixing_curve(ULD(float(gm)), obj, beta, cfg["x0"], t_grid=np.linspace(0.0, 10.0 / rate, 200))
            rates.append(sweep.fit.rate)
        rates = np.asarray(rates)
        ctx.plot("gamma_sweep.csv", {"gamma": gammas, "rate": rates}, {"gamma": "friction", "rate": "1/time"})
        res["gamma_sweep"] = {"gamma": gammas, "rate": rates, "argmax_gamma": float(gammas[np.argmax(rates)])}
    return res


def _cmd_spectral(cfg, ctx):
    obj = _objective(cfg)
    if not hasattr(obj, "H"):
        raise ConfigError("spectral needs a quadratic objective")
    H = obj.H
    res = {"optimal_rate": optimal_rate(H)._asdict()}
    rows = [("optimal_rate", "rate", res["optimal_rate"]["rate"])]
    spec = cfg.get("dynamics")
    if spec and spec["name"] == "ULD":
        u = uld_spectral(H, _dynamics(cfg, obj).gamma)
        res["uld"] = {k: getattr(u, k) for k in ("gamma", "m", "M", "regime", "eps_hat", "C_eps_hat", "C_H", "rate",
                                                 "verified", "max_envelope_ratio")}
        rows += [("uld", k, res["uld"][k]) for k in ("rate", "eps_hat", "C_eps_hat", "C_H")]
    if spec and spec["name"] == "NLD":
        J = _dynamics(cfg, obj).J
        s = lambda1_j(H, J)
        res["nld"] = {"lambda1J": s.lambda1J, "n1": s.n1, "CJ": s.CJ, "CJ_poly": s.CJ_poly, "eps_tilde": s.eps_tilde,
                      "m_J": s.m_J, "condition_c1": check_condition_c1(H, J), "J": J}
        rows += [("nld", k, res["nld"][k]) for k in ("lambda1J", "n1", "CJ", "CJ_poly", "m_J", "condition_c1")]
    ctx.write_csv("results.csv", ["section", "quantity", "value"], rows)
    return res


def _cmd_constants(cfg, ctx):
    obj = _objective(cfg)
    dyn = _dynamics(cfg, obj, default="ULD")
    params, mode = _problem(cfg, obj, dyn)
    beta = None if "beta" not in cfg else _beta(cfg)
    table = constants_table(params, mode, beta=beta, eta=cfg.get("eta"))
    ctx.write_csv("results.csv", ["name", "value"], list(table.values.items()))
    return {"params": params.to_dict(), "table": table.to_dict()}


def _cmd_recurrence(cfg, ctx):
    obj = _objective(cfg)
    dyn = _dynamics(cfg, obj, default="ULD")
    params, mode = _problem(cfg, obj, dyn)
    if "eta" in cfg and "beta" in cfg:
        eta, beta, source = float(cfg["eta"]), _beta(cfg), "config"
    else:
        (eta, beta), source = suggest_parameters(params, mode), "recipe"
    rep = admissibility(params, eta, beta, mode)
    rows = [(c.name, c.kind, c.value, c.limit, c.ok) for c in rep.checks]
    ctx.write_csv("results.csv", ["component", "kind", "value", "limit", "ok"], rows)
    out = {"mode": mode, "eta": eta, "beta": beta, "source": source, "admissibility": rep.to_dict()}
    if rep.table is not None:
        out.update(T_rec=rep.table.T_rec, T_esc=rep.table.T_esc, rate=rep.table.rate)
    return out


def _cmd_classify(cfg, ctx):
    obj = _objective(cfg)
    if not hasattr(obj, "minimizer"):
        raise ConfigError("classify needs a quadratic objective")
    dyn = _dynamics(cfg, obj, default="ULD")
    params, mode = _problem(cfg, obj, dyn)
    _require(cfg, "x0")
    if "eta" in cfg and "beta" in cfg:
        eta, beta = float(cfg["eta"]), _beta(cfg)
    else:
        eta, beta = suggest_parameters(params, mode)
    sc = SamplerConfig(dyn.name, eta, beta, gamma=getattr(dyn, "gamma", None), J=getattr(dyn, "J", None),
                       seed=ctx.seed)
    s = classify_ensemble(obj, cfg["x0"], obj.minimizer, params, mode, sc, cfg.get("n_paths", 200))
    rows = [(i, v.event, v.first_violation_step) for i, v in enumerate(s.verdicts)]
    ctx.write_csv("results.csv", ["path", "event", "first_violation_step"], rows)
    w = s.window
    return {"mode": mode, "eta": eta, "beta": beta, "counts": s.counts, "neither_fraction": s.neither_fraction,
            "delta": params.delta, "window": {"k_rec_last": w.k_rec_last, "k_win_first": w.k_win_first,
                                              "k_win_last": w.k_win_last, "rate": w.rate}}


def _cmd_exit(cfg, ctx):
    obj = _objective(cfg)
    if not hasattr(obj, "landscape"):
        raise ConfigError("exit needs a double_well objective")
    dyn = _dynamics(cfg, obj)
    _require(cfg, "eta", "beta")
    ex = cfg.get("exit", {})
    radii = dict(neighborhood_radius=ex.get("neighborhood_radius", 0.2), domain_radius=ex.get("domain_radius", 5.0))
    base = SamplerConfig("LD", float(cfg["eta"]), _beta(cfg), seed=ctx.seed, max_steps=cfg.get("max_steps", 10 ** 7))
    n = cfg.get("n_paths", 1000)
    res = exit_experiment(obj, dyn, base, n, threads=ctx.threads, **radii)
    ctx.write_csv("results.csv", ["path", "exit_steps", "exit_time", "exited_via"], res.rows())
    if res.baseline is not None:
        ctx.write_csv("baseline.csv", ["path", "exit_steps", "exit_time", "exited_via"], res.baseline.rows())
    times = res.steps[res.steps >= 0] * res.eta
    counts, edges = np.histogram(times, bins=ex.get("hist_bins", 40))
    ctx.plot("exit_hist.csv", {"bin_left": edges[:-1], "count": counts}, {"bin_left": "time"})
    out = {"experiment": res.summary()}
    if ex.get("eta_ladder"):
        tab = stepsize_refinement(obj, dyn, base, ex["eta_ladder"], n, threads=ctx.threads, **radii)
        ctx.write_csv("refinement.csv", ["eta", "mean_time", "stderr_time"], tab.rows())
        out["refinement"] = tab.summary()
    return out


COMMANDS = {
    "mixing": _cmd_mixing, "spectral": _cmd_spectral, "constants": _cmd_constants,
    "recurrence": _cmd_recurrence, "classify": _cmd_classify, "exit": _cmd_exit,
}


# --------------------------------------------------------------------------- driver


class _Context:
    def __init__(self, out: Path, seed: int, threads: int | None):
        self.out = out
        self.seed = seed
        self.threads = threads
        self.files: dict[str, bytes] = {}

    def write_csv(self, name, header, rows):
        self.files[name] = _csv_bytes(header, rows)

    def plot(self, name, series, units=None):
        self.files[name] = _plot_bytes(series, units)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, _schema("report.schema.json"))


def run(subcommand: str, cfg: dict, out_dir, *, seed: int | None = None, threads: int | None = None) -> dict:
    """Execute one subcommand and write its outputs; returns the report."""
    if subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    validate_config(cfg)
    if cfg.get("subcommand", subcommand) != subcommand:
        raise ConfigError(f"config is for {cfg['subcommand']!r}, not {subcommand!r}")
    seed = cfg.get("seed", 0) if seed is None else seed
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if threads is None and "KRAMERS_THREADS" not in os.environ:
        threads = cfg.get("threads")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    ctx = _Context(out, seed, threads)
    results = COMMANDS[subcommand](cfg, ctx)
    report = {"schema_version": SCHEMA_VERSION, "package_version": __version__, "subcommand": subcommand,
              "seed": seed, "results": _jsonable(results)}
    validate_report(report)
    ctx.files["report.json"] = (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()
    for name, data in ctx.files.items():
        (out / name).write_bytes(data)
    manifest = {
        "package_version": __version__, "subcommand": subcommand, "seed": seed, "config": cfg,
        "wall_time_s": time.perf_counter() - start,
        "outputs": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(ctx.files.items())},
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kramers", description="Langevin mixing, metastability and exit-time experiments")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed overriding the config")
    p.add_argument("--threads", type=int, help="worker threads for Monte Carlo batches")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        run(args.subcommand, cfg, args.out, seed=args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"kramers: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KramersError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"kramers: numerical failure in {args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
