import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chenstein.apps_runs import (
    RunsConfig,
    bounds_runs,
    brute_force_dist,
    count_runs,
    remark_zero_bound,
    runs_mean,
    simulate_runs,
    sizebias_runs_check,
)
from chenstein.coupling import q_sequence
from chenstein.discrete_dist import tv_distance
from chenstein.pointproc import SeedSpec


def test_count_examples():
    assert count_runs([1, 1, 1], 1) == 1
    assert count_runs([0, 1, 0, 1], 1) == 2
    assert count_runs([1, 1, 0, 1, 1, 1], 3) == 1
    assert count_runs([1, 1, 0, 1, 1, 1], 2) == 2
    with pytest.raises(ValueError):
        count_runs([1, 0], 3)


def test_config_validation():
    with pytest.raises(ValueError):
        RunsConfig(3, 4, 0.2)
    with pytest.raises(ValueError):
        RunsConfig(3, 1, 0.7)
    with pytest.raises(ValueError):
        RunsConfig(0, 1, 0.2)


def test_exact_laws_match_frozen_dp(oracles):
    for case in oracles["runs"]:
        law = brute_force_dist(RunsConfig(case["n"], case["k"], case["p"]))
        for s, want in case["law"].items():
            assert law.prob(int(s)) == pytest.approx(want, rel=1e-12, abs=1e-17)


def test_length_two_law():
    p = 0.3
    law = brute_force_dist(RunsConfig(2, 1, p))
    assert law.prob(0) == pytest.approx((1 - p) ** 2)
    assert law.prob(1) == pytest.approx(1 - (1 - p) ** 2)


def test_k_equal_to_n():
    law = brute_force_dist(RunsConfig(6, 6, 0.4))
    assert law.prob(1) == pytest.approx(0.4**6)


def test_tiny_p():
    cfg = RunsConfig(10, 2, 1e-9)
    law = brute_force_dist(cfg)
    assert law.mean() == pytest.approx(cfg.lam, rel=1e-9)
    assert all(r.satisfied for r in bounds_runs(cfg, 1).values())


@settings(max_examples=40, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=18), k=st.integers(1, 18))
def test_count_agrees_with_run_lengths(bits, k):
    if k > len(bits):
        return
    lengths = [len(list(g)) for v, g in itertools.groupby(bits) if v == 1]
    assert count_runs(bits, k) == sum(1 for L in lengths if L >= k)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 14), data=st.data(), p=st.floats(0.01, 0.5))
def test_mean_formula(n, data, p):
    k = data.draw(st.integers(1, n))
    assert brute_force_dist(RunsConfig(n, k, p)).mean() == pytest.approx(runs_mean(n, k, p), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 12), data=st.data(), p=st.floats(0.05, 0.5))
def test_sizebias_coupling_is_exact(n, data, p):
    k = data.draw(st.integers(1, n))
    res = sizebias_runs_check(RunsConfig(n, k, p))
    assert res.max_residual < 1e-12
    assert q_sequence(res.coupling).is_zero(1e-12)
    assert res.coupling.mean_x() == pytest.approx(res.lam, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 16), data=st.data(), p=st.floats(0.01, 0.5), v=st.integers(0, 3))
def test_bounds_hold(n, data, p, v):
    k = data.draw(st.integers(1, n))
    cfg = RunsConfig(n, k, p)
    reps = bounds_runs(cfg, v)
    assert all(r.satisfied for r in reps.values())
    assert reps["remark_zero"].bound == pytest.approx(remark_zero_bound(cfg))


def test_uniform_bound_example():
    rep = bounds_runs(RunsConfig(100, 3, 0.3), 0)
    assert rep["uniform"].bound == pytest.approx(160 * math.log(100) / 100)
    assert "remark_zero" not in rep
    assert "uniform" not in bounds_runs(RunsConfig(1, 1, 0.3), 0)


def test_oversized_enumeration_refused():
    with pytest.raises(ValueError):
        sizebias_runs_check(RunsConfig(15, 2, 0.3))
    with pytest.raises(ValueError):
        brute_force_dist(RunsConfig(21, 2, 0.3))


def test_simulation_agrees_with_exact_law():
    cfg = RunsConfig(12, 3, 0.3)
    emp = simulate_runs(cfg, 100_000, SeedSpec(6))
    assert tv_distance(emp, brute_force_dist(cfg)) < 0.01
