"""Command-line experiment harness.

Usage::

    chenstein --config run.cfg [--seed N] [--workers N] [--out DIR] [--format csv|jsonl]

The config is a flat ``key = value`` file; ``#`` starts a comment. Every
experiment accepts ``experiment``, ``reps``, ``seed``, ``workers`` and
``output``; the remaining keys are listed in ``EXPERIMENT_KEYS``.

Exit codes: 0 all checks pass, 1 runtime error, 2 config error, 3 a bound
check failed. Outputs are ``results.csv`` (or ``results.jsonl``) and
``summary.json`` in the output directory. The results file depends only on
the config and seed, never on the worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from . import apps_interpoint, apps_runs, apps_voronoi, selftest, ustat
from .coupling import sizebias_wald_test
from .discrete_dist import empirical_pmf
from .pointproc import Box, SeedSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENTS",
    "COLUMNS",
    "parse_config",
    "run_experiment",
    "emit_report",
    "format_value",
    "parse_jsonl",
    "main",
]

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BOUND = 0, 1, 2, 3

CHECK_COLUMNS = ("u", "check", "empirical", "target", "bound", "mc_error", "kind", "pass")
REPORT_COLUMNS = ("check", "lhs", "bound", "slack", "pass")
COLUMNS = {
    "interpoint": CHECK_COLUMNS,
    "voronoi_circ": CHECK_COLUMNS,
    "voronoi_inradius": CHECK_COLUMNS,
    "runs": ("n", "k", "p", "v", "lambda", "lhs_tv", "bound_tv", "lhs_exact", "bound_uniform",
             "p_zero", "bound_zero", "sizebias_residual", "pass"),
    "ustat_binomial": REPORT_COLUMNS,
    "ustat_poisson": REPORT_COLUMNS,
    "core_selftest": ("suite", "case", "value", "tolerance", "pass"),
}
EXPERIMENTS = tuple(COLUMNS)

COMMON_KEYS = ("experiment", "reps", "seed", "workers", "output")
EXPERIMENT_KEYS = {
    "interpoint": ("d", "t", "u_max", "u_grid"),
    "voronoi_circ": ("d", "t", "p_reps", "u_grid"),
    "voronoi_inradius": ("d", "t", "u_grid"),
    "runs": ("n", "k", "p", "v"),
    "ustat_binomial": ("kernel", "delta", "lower", "upper", "n", "m", "v", "lr_reps"),
    "ustat_poisson": ("kernel", "delta", "lower", "upper", "t", "m", "v", "lr_reps"),
    "core_selftest": (),
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    reps: int = 1000
    master_seed: int = 0
    workers: int = 1
    output_path: str = "out"


@dataclass
class ExperimentResult:
    experiment: str
    columns: tuple[str, ...]
    rows: list[dict]
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(r["pass"]) for r in self.rows)


# ------------------------------------------------------------------ parsing


def _int(key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if not math.isfinite(value) or value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(value)


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int_list(key, text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(_int(key, a), _int(key, b) + 1))
        elif part:
            out.append(_int(key, part))
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def _float_list(key, text):
    out = [_float(key, p.strip()) for p in text.split(",") if p.strip()]
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def _read_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _kernel_params(p, raw):
    kind = raw.get("kernel", "distance")
    if kind == "distance":
        delta = _float("delta", raw.get("delta", "0.05"))
        if not 0 < delta <= 0.5:
            raise ConfigError("delta must satisfy 0 < delta <= 1/2")
        p["kernel"] = ("distance", delta)
    elif kind == "region":
        lo, hi = _float("lower", raw.get("lower", "0")), _float("upper", raw.get("upper", "0.2"))
        if not 0 <= lo < hi <= 1:
            raise ConfigError("region kernel needs 0 <= lower < upper <= 1")
        p["kernel"] = ("region", lo, hi)
    else:
        raise ConfigError(f"kernel must be 'distance' or 'region', got {kind!r}")
    p["m"] = _int("m", raw.get("m", "2"))
    p["v"] = _int("v", raw.get("v", "1"))
    if p["m"] < 0:
        raise ConfigError("m must be >= 0")
    if p["v"] < 1:
        raise ConfigError("v must be >= 1")
    p["lr_reps"] = _int("lr_reps", raw.get("lr_reps", "100000"))


def _validate(experiment: str, raw: dict[str, str], reps: int) -> dict:
    p: dict = {}
    if experiment in ("interpoint", "voronoi_circ", "voronoi_inradius"):
        p["d"] = _int("d", raw.get("d", "1"))
        p["t"] = _float("t", raw.get("t", "100"))
        if "u_grid" in raw:
            p["u_grid"] = tuple(_float_list("u_grid", raw["u_grid"]))
    if experiment == "interpoint":
        p["u_max"] = _float("u_max", raw.get("u_max", "4"))
        if not 0 < p["u_max"] < p["t"]:
            raise ConfigError("interpoint needs 0 < u_max < t")
        if reps < 100:
            raise ConfigError("interpoint needs reps >= 100")
        try:
            _interpoint_cfg(p, reps, 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif experiment == "voronoi_circ":
        p["p_reps"] = _int("p_reps", raw.get("p_reps", "1000000"))
        if p["d"] not in (1, 2):
            raise ConfigError("voronoi_circ needs d in {1, 2}")
        if not p["t"] >= 1:
            raise ConfigError("voronoi_circ needs t >= 1")
        if p["d"] == 2 and p["p_reps"] < 10_000:
            raise ConfigError("p_reps must be >= 10000")
    elif experiment == "voronoi_inradius":
        if not p["t"] > math.e**2:
            raise ConfigError("voronoi_inradius needs t > e^2")
        try:
            _voronoi_cfg("inradius", p, reps, 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif experiment == "runs":
        p["n"] = _int_list("n", raw.get("n", "2-16"))
        k_text = raw.get("k", "all")
        p["k"] = "all" if k_text == "all" else _int_list("k", k_text)
        p["p"] = _float_list("p", raw.get("p", "0.1,0.3,0.5"))
        p["v"] = _int_list("v", raw.get("v", "0,1,2"))
        if min(p["n"]) < 1 or max(p["n"]) > apps_runs.MAX_EXHAUSTIVE_N:
            raise ConfigError(f"runs needs 1 <= n <= {apps_runs.MAX_EXHAUSTIVE_N}")
        if p["k"] != "all" and (min(p["k"]) < 1 or max(p["k"]) > min(p["n"])):
            raise ConfigError("runs needs 1 <= k ≤ n for every configured n (k ≤ n violated)")
        if not all(0 < q <= 0.5 for q in p["p"]):
            raise ConfigError("runs needs 0 < p <= 1/2")
        if min(p["v"]) < 0:
            raise ConfigError("runs needs v >= 0")
    elif experiment == "ustat_binomial":
        _kernel_params(p, raw)
        p["n"] = _int("n", raw.get("n", "20"))
        arity = 2 if p["kernel"][0] == "distance" else 1
        if p["n"] < 2 * arity:
            raise ConfigError(f"ustat_binomial needs n >= 2l = {2 * arity}")
    elif experiment == "ustat_poisson":
        _kernel_params(p, raw)
        p["t"] = _float("t", raw.get("t", "20"))
        if not p["t"] > 0:
            raise ConfigError("ustat_poisson needs t > 0")
    return p


def parse_config(text: str, seed: int | None = None, workers: int | None = None,
                 output: str | None = None) -> ExperimentConfig:
    """Parse and validate a flat ``key = value`` config; flags override keys."""
    raw = _read_pairs(text)
    experiment = raw.get("experiment")
    if experiment not in COLUMNS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    allowed = set(COMMON_KEYS) | set(EXPERIMENT_KEYS[experiment])
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    reps = _int("reps", raw.get("reps", "1000"))
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    master = seed if seed is not None else _int("seed", raw.get("seed", "0"))
    if not 0 <= master < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    nworkers = workers if workers is not None else _int("workers", raw.get("workers", "1"))
    if nworkers < 1:
        raise ConfigError("workers must be >= 1")
    params = _validate(experiment, raw, reps)
    out = output if output is not None else raw.get("output", "out")
    return ExperimentConfig(experiment, params, reps, int(master), int(nworkers), out)


# ---------------------------------------------------------------- execution


def _interpoint_cfg(p, reps, master):
    return apps_interpoint.InterpointConfig(p["d"], p["t"], p["u_max"], reps, SeedSpec(master),
                                            u_grid=p.get("u_grid"))


def _voronoi_cfg(kind, p, reps, master):
    return apps_voronoi.VoronoiConfig(kind, p["d"], p["t"], reps, SeedSpec(master),
                                      u_grid=p.get("u_grid"))


def _check_rows(rows) -> list[dict]:
    return [{"u": r.u, "check": r.check, "empirical": r.empirical, "target": r.target,
             "bound": r.bound, "mc_error": r.mc_error, "kind": r.kind, "pass": r.passed}
            for r in rows]


def _run_interpoint(cfg: ExperimentConfig, mapper):
    icfg = _interpoint_cfg(cfg.parameters, cfg.reps, cfg.master_seed)
    res = apps_interpoint.check_interpoint_bounds(icfg, mapper=mapper)
    return _check_rows(res.rows), {"sup_gap": res.sup_gap, "sup_bound": res.sup_bound}


def _run_voronoi_circ(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    seed = SeedSpec(cfg.master_seed)
    est = None if p["d"] == 1 else apps_voronoi.estimate_p(p["d"], p["p_reps"], seed)
    constants = apps_voronoi.voronoi_constants(p["d"], est)
    vcfg = _voronoi_cfg("circumradius", p, cfg.reps, cfg.master_seed)
    res = apps_voronoi.simulate_circum(vcfg, constants, mapper)
    return _check_rows(res.rows), {"constants": constants.as_dict(), "ks_distance": res.ks_distance,
                                   "ks_bound": res.ks_bound}


def _run_voronoi_inradius(cfg: ExperimentConfig, mapper):
    vcfg = _voronoi_cfg("inradius", cfg.parameters, cfg.reps, cfg.master_seed)
    res = apps_voronoi.simulate_inradius(vcfg, mapper)
    return _check_rows(res.rows), {"gumbel_constant": apps_voronoi.gumbel_constant(vcfg.d),
                                   "ks_distance": res.ks_distance, "ks_bound": res.ks_bound}


def _run_runs(cfg: ExperimentConfig, mapper):
    p = cfg.parameters
    rows = []
    for n in p["n"]:
        ks = range(1, n + 1) if p["k"] == "all" else p["k"]
        for k in ks:
            for prob in p["p"]:
                rc = apps_runs.RunsConfig(n, k, prob)
                resid = (apps_runs.sizebias_runs_check(rc).max_residual
                         if n <= apps_runs.MAX_SIZEBIAS_N else None)
                for v in p["v"]:
                    rep = apps_runs.bounds_runs(rc, v)
                    uni = rep.get("uniform")
                    ok = all(r.satisfied for r in rep.values())
                    rows.append({
                        "n": n, "k": k, "p": prob, "v": v, "lambda": rc.lam,
                        "lhs_tv": rep["tv"].exact_lhs, "bound_tv": rep["tv"].bound,
                        "lhs_exact": uni.exact_lhs if uni else None,
                        "bound_uniform": uni.bound if uni else None,
                        "p_zero": rep["remark_zero"].exact_lhs, "bound_zero": rep["remark_zero"].bound,
                        "sizebias_residual": resid, "pass": bool(ok),
                    })
    return rows, {}


def _kernel_from(spec) -> ustat.Kernel:
    if spec[0] == "distance":
        return ustat.distance_kernel(spec[1], dim=1)
    return ustat.region_kernel([spec[1]], [spec[2]])


def _closed_form(spec, scale_pairs: float, scale_triples: float, scale_single: float) -> ustat.LambdaR:
    """Exact ``lam`` and ``r`` for the two one-dimensional kernels on ``[0, 1]``."""
    if spec[0] == "distance":
        delta = spec[1]
        p_pair = 2 * delta - delta**2
        overlap = 4 * delta**2 - 10 * delta**3 / 3
        return ustat.LambdaR(scale_pairs * p_pair, scale_triples * overlap, method="closed-form")
    return ustat.LambdaR(scale_single * (spec[2] - spec[1]), 0.0, method="closed-form")


def _ustat_binomial_draw(kspec, n, master, replication):
    kern = _kernel_from(kspec)
    seed = SeedSpec(master).child("ustat_binomial", replication)
    return ustat.sample_sizebias_binomial(kern, n, Box.unit(1), seed)


def _ustat_poisson_draw(kspec, t, master, replication):
    kern = _kernel_from(kspec)
    seed = SeedSpec(master).child("ustat_poisson", replication)
    return ustat.sample_sizebias_poisson(kern, t, Box.unit(1), seed)


def _report_rows(reports, wald) -> list[dict]:
    rows = []
    for key, rep in reports.items():
        rows.append({"check": key, "lhs": rep.exact_lhs, "bound": rep.bound, "slack": rep.slack,
                     "pass": True if rep.satisfied is None else rep.satisfied})
    stat, df, pvalue = wald
    rows.append({"check": "sizebias_pvalue", "lhs": pvalue, "bound": 1e-3, "slack": 0.0,
                 "pass": bool(pvalue >= 1e-3)})
    return rows


def _run_ustat(cfg: ExperimentConfig, mapper, process: str):
    p = cfg.parameters
    kspec = p["kernel"]
    kern = _kernel_from(kspec)
    box = Box.unit(1)
    if process == "binomial":
        n = p["n"]
        lr = _closed_form(kspec, n * (n - 1) / 2, n * (n - 1) * (n - 2), n)
        draws = list(mapper(partial(_ustat_binomial_draw, kspec, n, cfg.master_seed), range(cfg.reps)))
        s, sp, st = (np.array(col) for col in zip(*draws))
        spec = ustat.UStatSpec.build(kern, "binomial", n, box, lr)
        reports = ustat.bounds_ustat_binomial(spec, empirical_pmf(st), p["m"], p["v"], empirical_pmf(s))
    else:
        t = p["t"]
        lr = _closed_form(kspec, t**2 / 2, t**3, t)
        draws = list(mapper(partial(_ustat_poisson_draw, kspec, t, cfg.master_seed), range(cfg.reps)))
        s, sp = (np.array(col) for col in zip(*draws))
        spec = ustat.UStatSpec.build(kern, "poisson", t, box, lr)
        reports = ustat.bounds_ustat_poisson(spec, empirical_pmf(s), p["m"], p["v"])
    wald = sizebias_wald_test(s, sp, lr.lam)
    summary = {"lambda": lr.lam, "r": lr.r, "wald_statistic": wald[0], "wald_df": wald[1],
               "reports": {k: r.to_dict() for k, r in reports.items()}}
    return _report_rows(reports, wald), summary


def _run_selftest(cfg: ExperimentConfig, mapper):
    rows = selftest.run_all(SeedSpec(cfg.master_seed))
    return [r.as_dict() for r in rows], {}


_RUNNERS: dict[str, Callable] = {
    "interpoint": _run_interpoint,
    "voronoi_circ": _run_voronoi_circ,
    "voronoi_inradius": _run_voronoi_inradius,
    "runs": _run_runs,
    "ustat_binomial": partial(_run_ustat, process="binomial"),
    "ustat_poisson": partial(_run_ustat, process="poisson"),
    "core_selftest": _run_selftest,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment; replications are spread over ``cfg.workers`` processes.

    Results are reduced in replication order, so they do not depend on the
    number of workers.
    """
    start = time.perf_counter()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            mapper = partial(pool.map, chunksize=max(1, cfg.reps // (8 * cfg.workers)))
            rows, extra = _RUNNERS[cfg.experiment](cfg, mapper)
    else:
        rows, extra = _RUNNERS[cfg.experiment](cfg, map)
    summary = {
        "experiment": cfg.experiment,
        "parameters": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.parameters.items()},
        "reps": cfg.reps,
        "master_seed": cfg.master_seed,
        "workers": cfg.workers,
        "n_rows": len(rows),
        "n_failed": sum(1 for r in rows if not r["pass"]),
        "wall_time_s": time.perf_counter() - start,
        **extra,
    }
    result = ExperimentResult(cfg.experiment, COLUMNS[cfg.experiment], rows, summary)
    summary["passed"] = result.passed
    return result


# ------------------------------------------------------------------ output


def format_value(value) -> str:
    """CSV cell text: floats with 17 significant digits, booleans lower case."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return format(x, ".17g") if math.isfinite(x) else json.dumps(repr(x))
    return json.dumps(str(value))


def _jsonl_record(experiment: str, index: int, row: dict, columns) -> str:
    body = ", ".join(f"{json.dumps(c)}: {_json_value(row.get(c))}" for c in columns)
    return f'{{"experiment": {json.dumps(experiment)}, "index": {index}, "row": {{{body}}}}}'


def _restore_nonfinite(obj):
    if isinstance(obj, dict):
        return {k: _restore_nonfinite(v) for k, v in obj.items()}
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    return obj


def parse_jsonl(text: str) -> list[dict]:
    """Inverse of the JSONL emitter: one ``{"experiment", "index", "row"}`` per line."""
    return [_restore_nonfinite(json.loads(line)) for line in text.splitlines() if line.strip()]


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_value(row.get(c)) for c in result.columns])
    return buf.getvalue()


def render_jsonl(result: ExperimentResult) -> str:
    return "".join(_jsonl_record(result.experiment, i, row, result.columns) + "\n"
                   for i, row in enumerate(result.rows))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def emit_report(result: ExperimentResult, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write ``results.csv`` or ``results.jsonl`` plus ``summary.json``."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError("format must be 'csv' or 'jsonl'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = out / f"results.{fmt}"
    results.write_text(render_csv(result) if fmt == "csv" else render_jsonl(result), encoding="utf-8")
    summary = out / "summary.json"
    summary.write_text(json.dumps(result.summary, indent=2, sort_keys=True, default=_json_default) + "\n",
                       encoding="utf-8")
    return [results, summary]


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chenstein", description="Run a Poisson approximation experiment.")
    ap.add_argument("--config", required=True, help="flat key = value config file")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker processes (overrides the config)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--format", choices=("csv", "jsonl"), default="csv", help="results file format")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.seed, args.workers, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg)
        emit_report(result, cfg.output_path, args.format)
    except Exception as exc:  # surfaced verbatim, mapped to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = result.summary["n_failed"]
    print(f"{cfg.experiment}: {len(result.rows) - failed}/{len(result.rows)} checks passed "
          f"-> {cfg.output_path}")
    return EXIT_OK if result.passed else EXIT_BOUND


if __name__ == "__main__":
    sys.exit(main())
