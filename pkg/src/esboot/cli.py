"""Command-line interface.

Subcommands mirror the library pipeline: ``simulate`` writes a GARCH path,
``fit`` estimates the model from a returns CSV, ``es`` adds the tail
estimate with its asymptotic interval, ``bootstrap`` runs the fixed-design
residual bootstrap on one sample, ``study`` runs a Monte Carlo coverage
study, and ``density`` emits the simulated-vs-bootstrap KDE comparison.

Every run is configured by a single JSON document (``--config``) whose
keys are validated strictly: unknown keys are rejected so typos fail loudly
instead of silently falling back to defaults.  ``--seed`` overrides the
config seed, ``--workers`` sets the thread count, ``--out`` picks the
output directory, and ``--full-scale`` bumps study/density runs to
S = B = 2000.

Seeding contract: a single 64-bit master seed drives everything.  The
simulate command draws from the stream (seed, "simulate", 0); a study
trajectory i draws from (seed, "trajectory", i) and its bootstrap from the
seed derived at (seed, "bootstrap", i).  The mixing function lives in
:mod:`esboot.rng`, so identical configs reproduce identical files bit for
bit regardless of worker count.

All emitted floats use 17 significant digits, which round-trips IEEE
doubles losslessly.  Exit code 0 on success; 1 with an ``esboot: error:``
line on stderr otherwise (2 is argparse's own usage-error code).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Any, Optional

import numpy as np

from . import bootstrap as _bootstrap
from . import es_estimation, experiments, qmle, rng, volatility
from .distributions import NORMAL, STUDENT_T, InnovationDist, QuadratureError, normal, student_t
from .es_estimation import EstimationError
from .experiments import Scenario, StudyError
from .volatility import GarchParams

__all__ = ["main", "ConfigError"]

FULL_SCALE_SIZE = 2000


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


# ---------------------------------------------------------------------------
# serialization helpers


def _fmt(x: float) -> str:
    v = float(x)
    if not math.isfinite(v):
        raise ValueError("refusing to serialize non-finite value %r" % x)
    return format(v, ".17g")


def _json_text(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            '%s  %s: %s' % (pad, json.dumps(str(k)), _json_text(v, indent + 1))
            for k, v in obj.items()
        )
        return "{\n%s\n%s}" % (items, pad)
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = ",\n".join("%s  %s" % (pad, _json_text(v, indent + 1)) for v in seq)
        return "[\n%s\n%s]" % (items, pad)
    raise TypeError("cannot serialize %r" % type(obj))


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_json_text(obj))
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) if isinstance(c, (float, np.floating)) else c
                             for c in row])


# ---------------------------------------------------------------------------
# config parsing


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config %s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _check_keys(obj: dict, required: set, optional: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError("%s must be a JSON object" % where)
    missing = required - set(obj)
    unknown = set(obj) - required - optional
    if missing:
        raise ConfigError("%s: missing required key(s) %s" % (where, sorted(missing)))
    if unknown:
        raise ConfigError("%s: unknown key(s) %s" % (where, sorted(unknown)))


def _as_float(obj: dict, key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("%s: %r must be a number, got %r" % (where, key, v))
    return float(v)


def _as_int(obj: dict, key: str, where: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("%s: %r must be an integer, got %r" % (where, key, v))
    return v


def _as_str(obj: dict, key: str, where: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise ConfigError("%s: %r must be a string, got %r" % (where, key, v))
    return v


def _parse_theta(obj: Any, where: str) -> GarchParams:
    _check_keys(obj, {"omega", "alpha", "beta"}, set(), where)
    try:
        return GarchParams(
            _as_float(obj, "omega", where),
            _as_float(obj, "alpha", where),
            _as_float(obj, "beta", where),
        )
    except ValueError as exc:
        raise ConfigError("%s: %s" % (where, exc)) from exc


def _parse_dist(obj: Any, where: str) -> InnovationDist:
    _check_keys(obj, {"kind"}, {"nu"}, where)
    kind = _as_str(obj, "kind", where)
    if kind == NORMAL:
        if "nu" in obj:
            raise ConfigError("%s: 'nu' is only meaningful for kind='student_t'" % where)
        return normal()
    if kind == STUDENT_T:
        if "nu" not in obj:
            raise ConfigError("%s: kind='student_t' requires 'nu'" % where)
        try:
            return student_t(_as_float(obj, "nu", where))
        except ValueError as exc:
            raise ConfigError("%s: %s" % (where, exc)) from exc
    raise ConfigError("%s: kind must be %r or %r, got %r" % (where, NORMAL, STUDENT_T, kind))


def _parse_init(obj: dict, where: str):
    v = obj.get("init", "mean_square")
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise ConfigError("%s: 'init' must be a scheme name or a positive number" % where)
    return v


def _parse_scenario(obj: Any, where: str, seed_override: Optional[int],
                    full_scale: bool) -> Scenario:
    required = {"label", "theta0", "dist", "alpha", "n"}
    optional = {"gamma", "B", "S", "burn_in", "seed"}
    _check_keys(obj, required, optional, where)
    size = {"B": obj.get("B", 500), "S": obj.get("S", 500)}
    for key in size:
        if key in obj:
            size[key] = _as_int(obj, key, where)
    if full_scale:
        size = {"B": FULL_SCALE_SIZE, "S": FULL_SCALE_SIZE}
    seed = _as_int(obj, "seed", where) if "seed" in obj else 20260814
    if seed_override is not None:
        seed = seed_override
    try:
        return Scenario(
            label=_as_str(obj, "label", where),
            theta0=_parse_theta(obj["theta0"], where + ".theta0"),
            dist=_parse_dist(obj["dist"], where + ".dist"),
            alpha=_as_float(obj, "alpha", where),
            n=_as_int(obj, "n", where),
            gamma=_as_float(obj, "gamma", where) if "gamma" in obj else 0.10,
            B=size["B"],
            S=size["S"],
            burn_in=_as_int(obj, "burn_in", where) if "burn_in" in obj else 1000,
            master_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError("%s: %s" % (where, exc)) from exc


# ---------------------------------------------------------------------------
# input data


def _read_returns(path: str) -> np.ndarray:
    """Load a returns series from a single-column CSV or a simulate file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ConfigError("cannot read input %s: %s" % (path, exc)) from exc
    if len(rows) < 2:
        raise ConfigError("input %s has no data rows" % path)
    header = rows[0]
    if "epsilon" in header:
        col = header.index("epsilon")
    elif len(header) == 1:
        col = 0
    else:
        raise ConfigError(
            "input %s must have an 'epsilon' column or be single-column" % path
        )
    values = []
    for i, row in enumerate(rows[1:], start=2):
        cell = row[col].strip() if col < len(row) else ""
        if cell == "":
            continue
        try:
            values.append(float(cell))
        except ValueError as exc:
            raise ConfigError("input %s line %d: %r is not a number" % (path, i, cell)) from exc
    if not values:
        raise ConfigError("input %s has no numeric values in the returns column" % path)
    return np.array(values)


# ---------------------------------------------------------------------------
# shared result blocks


def _fit_block(fit: qmle.FitResult) -> dict:
    th = fit.theta_hat
    return {
        "theta_hat": {"omega": th.omega, "alpha": th.alpha, "beta": th.beta},
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "n": fit.n,
    }


def _fit_from_config(cfg: dict, where: str) -> tuple[np.ndarray, qmle.FitResult]:
    arr = _read_returns(_as_str(cfg, "input", where))
    options = qmle.default_options(arr, init=_parse_init(cfg, where))
    return arr, qmle.fit(arr, options)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"theta0", "dist", "n"}, {"burn_in", "seed"}, "simulate config")
    theta = _parse_theta(cfg["theta0"], "simulate config.theta0")
    dist = _parse_dist(cfg["dist"], "simulate config.dist")
    n = _as_int(cfg, "n", "simulate config")
    burn_in = _as_int(cfg, "burn_in", "simulate config") if "burn_in" in cfg else 1000
    seed = args.seed if args.seed is not None else (
        _as_int(cfg, "seed", "simulate config") if "seed" in cfg else 0)

    stream = rng.stream(seed, "simulate", 0)
    eps, sig2 = volatility.simulate(theta, dist, n, burn_in, stream)

    rows = [[t + 1, float(eps[t]), float(sig2[t])] for t in range(n)]
    rows.append([n + 1, "", float(sig2[n])])
    out = os.path.join(args.out, "simulated.csv")
    _write_csv(out, ["t", "epsilon", "sigma2_true"], rows)
    print(out)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"input"}, {"init"}, "fit config")
    _, fit = _fit_from_config(cfg, "fit config")
    out = os.path.join(args.out, "fit.json")
    _write_json(out, _fit_block(fit))
    print(out)
    return 0


def cmd_es(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"input", "alpha"}, {"gamma", "init"}, "es config")
    alpha = _as_float(cfg, "alpha", "es config")
    gamma = _as_float(cfg, "gamma", "es config") if "gamma" in cfg else 0.10
    _, fit = _fit_from_config(cfg, "es config")

    es = es_estimation.conditional_es(fit, alpha)
    gh = es_estimation.gamma_hat(fit, alpha)
    lo, hi = es_estimation.asymptotic_interval(fit, es, gh, gamma)
    out = os.path.join(args.out, "es.json")
    _write_json(out, {
        "fit": _fit_block(fit),
        "es": {
            "alpha": es.alpha,
            "xi_hat": es.xi_hat,
            "mu_hat": es.mu_hat,
            "sigma_next": es.sigma_next,
            "es_hat": es.es_hat,
            "tail_count": es.tail_count,
        },
        "gamma_hat": {
            "kappa_hat": gh.kappa_hat,
            "p_hat": gh.p_hat,
            "q_hat": gh.q_hat,
            "xi_hat": gh.xi_hat,
            "mu_hat": gh.mu_hat,
            "sigma2_alpha_hat": gh.sigma2_alpha_hat,
            "x_alpha_hat": gh.x_alpha_hat,
            "phi_alpha_hat": gh.phi_alpha_hat,
            "nu_alpha_hat": gh.nu_alpha_hat,
            "Omega_hat": gh.Omega_hat,
            "J_hat": gh.J_hat,
            "Gamma": gh.Gamma,
        },
        "asymptotic_interval": {"gamma": gamma, "lo": lo, "hi": hi},
    })
    print(out)
    return 0


def cmd_bootstrap(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"input", "alpha", "B"}, {"gamma", "seed", "init"}, "bootstrap config")
    alpha = _as_float(cfg, "alpha", "bootstrap config")
    gamma = _as_float(cfg, "gamma", "bootstrap config") if "gamma" in cfg else 0.10
    B = _as_int(cfg, "B", "bootstrap config")
    seed = args.seed if args.seed is not None else (
        _as_int(cfg, "seed", "bootstrap config") if "seed" in cfg else 0)

    arr, fit = _fit_from_config(cfg, "bootstrap config")
    es = es_estimation.conditional_es(fit, alpha)
    ctx = _bootstrap.BootstrapContext(returns=arr, fit=fit, alpha=alpha, es_hat=es.es_hat)
    replicates = _bootstrap.run(ctx, B, seed, workers=args.workers)
    ivs = _bootstrap.intervals(replicates, es.es_hat, fit.n, gamma)

    out_json = os.path.join(args.out, "bootstrap.json")
    _write_json(out_json, {
        "es_hat": es.es_hat,
        "alpha": alpha,
        "gamma": ivs.gamma,
        "B": B,
        "B_effective": ivs.B_effective,
        "intervals": {
            "ep": {"lo": ivs.ep[0], "hi": ivs.ep[1], "length": ivs.ep_length},
            "rt": {"lo": ivs.rt[0], "hi": ivs.rt[1], "length": ivs.rt_length},
            "sy": {"lo": ivs.sy[0], "hi": ivs.sy[1], "length": ivs.sy_length},
        },
    })
    out_csv = os.path.join(args.out, "replicates.csv")
    _write_csv(
        out_csv,
        ["b", "converged", "omega_star", "alpha_star", "beta_star", "mu_star", "es_star"],
        [[b, int(r.converged), r.theta_star.omega, r.theta_star.alpha,
          r.theta_star.beta, r.mu_star, r.es_star]
         for b, r in enumerate(replicates)],
    )
    print(out_json)
    print(out_csv)
    return 0


STUDY_HEADER = ["scenario id", "n", "interval_type", "avg_coverage_pct",
                "below_pct", "above_pct", "avg_length", "excluded_count"]


def _study_rows(summary: experiments.StudySummary, kinds) -> list[list]:
    rows = []
    for kind in kinds:
        st = summary.stats[kind]
        rows.append([
            summary.scenario.label,
            summary.scenario.n,
            kind.upper(),
            st.coverage_pct,
            st.below_pct,
            st.above_pct,
            st.avg_length,
            summary.excluded_count,
        ])
    return rows


def cmd_study(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"scenarios"}, set(), "study config")
    if not isinstance(cfg["scenarios"], list) or not cfg["scenarios"]:
        raise ConfigError("study config: 'scenarios' must be a nonempty list")
    scenarios = [
        _parse_scenario(s, "study scenario %d" % i, args.seed, args.full_scale)
        for i, s in enumerate(cfg["scenarios"])
    ]
    rows, asym_rows = [], []
    for sc in scenarios:
        summary = experiments.run_study(sc, workers=args.workers)
        rows.extend(_study_rows(summary, experiments.BOOTSTRAP_INTERVAL_TYPES))
        asym_rows.extend(_study_rows(summary, ("asym",)))
        print("done: %s (n=%d, S=%d, B=%d, excluded=%d)"
              % (sc.label, sc.n, sc.S, sc.B, summary.excluded_count), file=sys.stderr)

    out = os.path.join(args.out, "study.csv")
    _write_csv(out, STUDY_HEADER, rows)
    out_asym = os.path.join(args.out, "study_asym.csv")
    _write_csv(out_asym, STUDY_HEADER, asym_rows)
    print(out)
    print(out_asym)
    return 0


def cmd_density(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _check_keys(cfg, {"scenario"}, {"n_grid"}, "density config")
    scenario = _parse_scenario(cfg["scenario"], "density scenario", args.seed,
                               args.full_scale)
    n_grid = _as_int(cfg, "n_grid", "density config") if "n_grid" in cfg else 512
    comp = experiments.density_comparison(scenario, n_grid=n_grid, workers=args.workers)

    out_csv = os.path.join(args.out, "density.csv")
    _write_csv(
        out_csv,
        ["x", "mc_density", "bootstrap_density"],
        [[float(x), float(s), float(b)]
         for x, s, b in zip(comp.grid, comp.sim_density, comp.boot_density)],
    )
    out_json = os.path.join(args.out, "density.json")
    _write_json(out_json, {
        "ks_distance": comp.ks_distance,
        "sim_bandwidth": comp.sim_bandwidth,
        "boot_bandwidth": comp.boot_bandwidth,
        "base_index": comp.base_index,
        "n_sim_values": int(comp.sim_values.size),
        "n_boot_values": int(comp.boot_values.size),
    })
    print(out_csv)
    print(out_json)
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esboot",
        description="Conditional expected shortfall estimation for GARCH models "
                    "with residual-bootstrap confidence intervals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "simulate": (cmd_simulate, "simulate a GARCH path to CSV"),
        "fit": (cmd_fit, "fit the model to a returns CSV"),
        "es": (cmd_es, "estimate conditional ES with its asymptotic interval"),
        "bootstrap": (cmd_bootstrap, "bootstrap intervals on one sample"),
        "study": (cmd_study, "run a Monte Carlo coverage study"),
        "density": (cmd_density, "emit the simulated-vs-bootstrap density data"),
    }
    for name, (func, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override (64-bit unsigned)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads for bootstrap/study parallelism")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--full-scale", action="store_true",
                       help="use S = B = 2000 for study/density runs")
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("esboot: error: --workers must be at least 1", file=sys.stderr)
        return 1
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except (ConfigError, ValueError, EstimationError, _bootstrap.BootstrapError,
            StudyError, QuadratureError, OSError) as exc:
        print("esboot: error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
