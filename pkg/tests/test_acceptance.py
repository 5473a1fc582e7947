"""Acceptance criteria 1-10 at their stated sizes and tolerances.

Each test records one ``criterion N: PASS|FAIL`` line, printed at the end
of the session, and fails when its criterion fails.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from chenstein import apps_runs, selftest
from chenstein.apps_interpoint import InterpointConfig, check_interpoint_bounds
from chenstein.apps_voronoi import (
    VoronoiConfig,
    alpha2,
    circumradius_1d,
    circumradius_2d,
    estimate_p,
    gumbel_constant,
    simulate_circum,
    simulate_inradius,
    voronoi_constants,
)
from chenstein.cli import parse_config, render_csv, run_experiment
from chenstein.pointproc import SeedSpec
from chenstein.poisson_stein import (
    IntervalSet,
    magic_factors,
    stein_f_indicator_values,
    stein_f_lipschitz_values,
)
from chenstein.ustat import exact_binomial_sizebias

from geometry_oracle import oracle_circumradius_1d, oracle_circumradius_2d, random_configuration

pytestmark = pytest.mark.slow


@contextmanager
def criterion(log, number, limit_s):
    """Time the block, enforce the runtime limit and record one verdict line."""
    info = {"detail": ""}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < limit_s
        verdict = "PASS" if ok and within else "FAIL"
        note = info["detail"] + ("" if within else f"; runtime limit {limit_s:g}s exceeded")
        line = f"criterion {number}: {verdict} ({elapsed:.1f}s) {note}".rstrip()
        log[number] = line
        print(line)
    assert within, f"runtime {elapsed:.1f}s exceeds {limit_s}s"


def test_criterion_1_stein_machinery(criteria_log):
    with criterion(criteria_log, 1, 10) as info:
        rows = selftest.stein_residual_suite(SeedSpec(1), n_sets=50, imax=200)
        worst = max(r.value for r in rows if r.suite == "stein_residual")
        excess = _other_magic_excess(200)
        info["detail"] = (f"max residual {worst:.2e}, {sum(r.passed for r in rows)}/{len(rows)} rows, "
                          f"other factors max excess {max(excess.values()):.1e}")
        assert all(r.passed for r in rows), [r for r in rows if not r.passed]
        assert max(excess.values()) <= 1e-12, excess


def _other_magic_excess(imax):
    """Largest excess of each remaining magic-factor domination over its bound."""
    out = {"f0_at_1": -1.0, "f0_from_2": -1.0, "delta_f0": -1.0, "delta_f0v": -1.0,
           "sup_f_g": -1.0, "sup_delta_f_g": -1.0}
    rng = np.random.default_rng(11)
    for lam in selftest.STEIN_LAMBDAS:
        mf = magic_factors(lam)
        f0 = stein_f_indicator_values(lam, [0], imax + 1)
        out["f0_at_1"] = max(out["f0_at_1"], abs(f0[1]) - mf.f0_at_1)
        out["f0_from_2"] = max(out["f0_from_2"], np.abs(f0[2:]).max() - mf.f0_from_2)
        for n in range(1, 51):
            bound = magic_factors(lam, n=n).delta_f0
            out["delta_f0"] = max(out["delta_f0"], np.abs(np.diff(f0)[n:]).max() - bound)
        for v in range(1, int(lam) + 1):
            fv = stein_f_indicator_values(lam, IntervalSet(0, v), imax + 1)
            bound = magic_factors(lam, v=v).delta_f0v
            out["delta_f0v"] = max(out["delta_f0v"], np.diff(fv)[v + 2:].max() - bound)
        for _ in range(20):
            slopes = rng.uniform(-1, 1, imax + 400)
            vals = np.concatenate([[0.0], np.cumsum(slopes)])
            fg = stein_f_lipschitz_values(lam, lambda k: vals[np.asarray(k)], imax)
            out["sup_f_g"] = max(out["sup_f_g"], np.abs(fg).max() - mf.sup_f_g)
            out["sup_delta_f_g"] = max(out["sup_delta_f_g"], np.abs(np.diff(fg[1:])).max() - mf.sup_delta_f_g)
    return out


def test_criterion_2_discrepancy_identity(criteria_log):
    with criterion(criteria_log, 2, 10) as info:
        (row,) = selftest.discrepancy_identity_suite(SeedSpec(2), n_laws=100)
        info["detail"] = f"max gap {row.value:.2e} over 100 laws"
        assert row.value < 1e-10


def test_criterion_3_bernoulli_tables(criteria_log):
    with criterion(criteria_log, 3, 5) as info:
        rows = []
        for m, v in itertools.product(range(0, 4), range(1, 4)):
            rows += selftest.bernoulli_bounds_suite(m=m, v=v)
        q_rows = [r for r in rows if r.suite == "bernoulli_q_zero"]
        info["detail"] = (f"{sum(r.passed for r in rows)}/{len(rows)} rows, "
                          f"max |q| {max(r.value for r in q_rows):.1e}")
        assert all(r.passed for r in rows)
        assert all(r.value <= 1e-12 for r in q_rows)


def test_criterion_4_runs(criteria_log):
    with criterion(criteria_log, 4, 300) as info:
        n_checks = worst_resid = 0
        failures = []
        n1_gap = None
        for n in range(1, 17):
            for k in range(1, n + 1):
                for p in (0.1, 0.3, 0.5):
                    cfg = apps_runs.RunsConfig(n, k, p)
                    if n <= 14:
                        worst_resid = max(worst_resid, apps_runs.sizebias_runs_check(cfg).max_residual)
                    for v in (0, 1, 2):
                        reps = apps_runs.bounds_runs(cfg, v)
                        for key, rep in reps.items():
                            n_checks += 1
                            if not rep.satisfied:
                                failures.append((n, k, p, v, key))
                        if n == 1:
                            law = apps_runs.brute_force_dist(cfg)
                            from chenstein.poisson_stein import cdf
                            gap = abs(float(law.cdf(v)) - cdf(cfg.lam, v))
                            n1_gap = gap if n1_gap is None else max(n1_gap, gap)
        info["detail"] = (f"{n_checks - len(failures)}/{n_checks} bound checks, size-bias residual "
                          f"{worst_resid:.1e}; uniform bound checked for n >= 2 "
                          f"(n = 1: bound 0, max |dCDF| {n1_gap:.3f})")
        assert not failures, failures[:10]
        assert worst_resid <= 1e-12


def test_criterion_5_interpoint(criteria_log):
    with criterion(criteria_log, 5, 600) as info:
        parts, bad = [], []
        for d, t in itertools.product((1, 2), (50.0, 100.0)):
            cfg = InterpointConfig(d, t, 4.0, 10_000, SeedSpec(5))
            res = check_interpoint_bounds(cfg)
            bad += [(d, t, r.check, r.u) for r in res.rows if not r.passed]
            parts.append(f"d={d} t={t:g} sup gap {res.sup_gap:.3f}")
        info["detail"] = "; ".join(parts)
        assert not bad, bad


def test_criterion_6_ustat(criteria_log):
    with criterion(criteria_log, 6, 600) as info:
        region = run_experiment(parse_config(
            "experiment = ustat_poisson\nreps = 100000\nt = 3\nkernel = region\nlower = 0\nupper = 0.2\n",
            seed=6))
        tv_row = next(r for r in region.rows if r["check"] == "tv")
        assert tv_row["bound"] == 0.0 and tv_row["pass"]
        assert tv_row["lhs"] < 0.01
        worst = 0.0
        kernels = {"equal": lambda tp: int(tp[0] == tp[1]), "both_first": lambda tp: int(tp == (0, 0))}
        for n in range(4, 9):
            for w0 in (0.3, 0.5):
                for h in kernels.values():
                    laws = exact_binomial_sizebias([w0, 1 - w0], h, n, 2)
                    for k in range(int(laws.s.max_value) + 2):
                        worst = max(worst, abs(k * laws.s.prob(k) - laws.lam * laws.s_prime.prob(k - 1)))
        assert worst < 1e-12
        pairs = run_experiment(parse_config(
            "experiment = ustat_poisson\nreps = 100000\nt = 20\nkernel = distance\ndelta = 0.05\n", seed=6))
        pval = next(r for r in pairs.rows if r["check"] == "sizebias_pvalue")["lhs"]
        info["detail"] = (f"region TV {tv_row['lhs']:.4f}; two-atom max residual {worst:.1e}; "
                          f"Poisson size-bias p-value {pval:.3f}")
        assert pval >= 1e-3


def test_criterion_7_voronoi_constants(criteria_log):
    with criterion(criteria_log, 7, 600) as info:
        e1 = estimate_p(1, 1_000_000, SeedSpec(71))
        assert abs(e1.estimate - 0.5) <= 3 * e1.stderr
        assert alpha2(1, 0.5) == 1.0
        a, b = estimate_p(2, 1_000_000, SeedSpec(72)), estimate_p(2, 1_000_000, SeedSpec(73))
        joint = 3 * math.hypot(a.stderr, b.stderr)
        assert abs(a.estimate - b.estimate) <= joint
        c1 = voronoi_constants(1)
        assert (c1.c_tv, c1.c_k, c1.c_gumbel) == (96.0, 561.0, 65)
        c2 = voronoi_constants(2, a)
        lo = a.estimate - a.ci_halfwidth
        a_lo = (2**6 * lo / 6) ** (1 / 3)
        checks = [
            (c2.alpha2, (2**6 * a.estimate / 6) ** (1 / 3)),
            (c2.c_tv, 3 * 2**10 / (a_lo * lo)),
            (c2.c_k, 1 + 2**14 / (a_lo * lo) + 2**7 / a_lo + 16**2 / a_lo**2),
        ]
        rel = max(abs(x - y) / abs(y) for x, y in checks)
        assert rel <= 1e-12
        assert gumbel_constant(1) == 65 and gumbel_constant(2) == 353 and c2.c_gumbel == 353
        info["detail"] = (f"p2 {e1.estimate:.4f}; p3 {a.estimate:.6f} vs {b.estimate:.6f} "
                          f"(|diff| {abs(a.estimate - b.estimate):.1e} <= {joint:.1e}); "
                          f"C_TV {c2.c_tv:.4g}, C_K {c2.c_k:.4g}, plug-in rel err {rel:.1e}")


def test_criterion_8_circumradius(criteria_log):
    with criterion(criteria_log, 8, 1800) as info:
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(1000):
            x, nb = random_configuration(rng, 2)
            got, want = circumradius_2d(x, nb), oracle_circumradius_2d(x, nb)
            assert (got == want == math.inf) or abs(got - want) <= 1e-6, (nb, got, want)
            if math.isfinite(want):
                worst = max(worst, abs(got - want))
            x1, nb1 = random_configuration(rng, 1)
            g1, w1 = circumradius_1d(x1[0], nb1[:, 0]), oracle_circumradius_1d(x1[0], nb1[:, 0])
            assert (g1 == w1 == math.inf) or abs(g1 - w1) <= 1e-6
        parts, bad = [f"oracle max gap {worst:.1e}"], []
        for d in (1, 2):
            est = None if d == 1 else estimate_p(2, 1_000_000, SeedSpec(8))
            cfg = VoronoiConfig("circumradius", d, 1e4, 1000, SeedSpec(8))
            res = simulate_circum(cfg, voronoi_constants(d, est))
            rows = [r for r in res.rows if r.check in ("one_sided", "mean_cap")]
            assert len({r.u for r in rows}) == 10
            bad += [(d, r.check, r.u) for r in rows if not r.passed]
            other = [r.check for r in res.rows if not r.passed and r.check not in ("one_sided", "mean_cap")]
            parts.append(f"d={d}: {sum(r.passed for r in rows)}/{len(rows)} criterion rows"
                         + (f", other failing rows {other}" if other else ""))
        info["detail"] = "; ".join(parts)
        assert not bad, bad


def test_criterion_9_inradius(criteria_log):
    with criterion(criteria_log, 9, 1800) as info:
        ks, parts, bad = {}, [], []
        for d in (1, 2):
            for t in (1e3, 1e4):
                res = simulate_inradius(VoronoiConfig("inradius", d, t, 10_000, SeedSpec(9)))
                rows = [r for r in res.rows if r.check in ("intensity", "kolmogorov")]
                bad += [(d, t, r.check, r.u) for r in rows if not r.passed]
                ks[d, t] = res.ks_distance
                parts.append(f"d={d} t={t:g} KS {res.ks_distance:.4f} (bound {res.ks_bound:.3g})")
        mono = {d: ks[d, 1e3] > ks[d, 1e4] for d in (1, 2)}
        info["detail"] = "; ".join(parts) + f"; decreasing {mono}"
        assert not bad, bad
        assert all(mono.values()), ks


DETERMINISM_CONFIGS = {
    "core_selftest": "experiment = core_selftest\n",
    "runs": "experiment = runs\nn = 2-10\n",
    "interpoint": "experiment = interpoint\nreps = 400\nd = 2\nt = 50\n",
    "voronoi_circ": "experiment = voronoi_circ\nreps = 40\nd = 2\nt = 10000\np_reps = 100000\n",
    "voronoi_inradius": "experiment = voronoi_inradius\nreps = 200\nd = 2\nt = 1000\n",
    "ustat_binomial": "experiment = ustat_binomial\nreps = 2000\nn = 20\ndelta = 0.05\n",
    "ustat_poisson": "experiment = ustat_poisson\nreps = 2000\nt = 20\ndelta = 0.05\n",
}


def test_criterion_10_determinism(criteria_log):
    with criterion(criteria_log, 10, 1800) as info:
        differ = []
        for name, text in DETERMINISM_CONFIGS.items():
            outs = [render_csv(run_experiment(parse_config(text, seed=10, workers=w))) for w in (1, 1, 8)]
            if len(set(outs)) != 1:
                differ.append(name)
        info["detail"] = f"{len(DETERMINISM_CONFIGS) - len(differ)}/{len(DETERMINISM_CONFIGS)} experiments identical"
        assert not differ, differ
