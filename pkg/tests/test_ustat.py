import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chenstein.coupling import sizebias_wald_test
from chenstein.discrete_dist import empirical_pmf, tv_distance
from chenstein.pointproc import Box, SeedSpec, sample_poisson
from chenstein.poisson_stein import PoissonLaw
from chenstein.ustat import (
    DegenerateKernelWarning,
    Kernel,
    KernelError,
    LambdaR,
    UStatSpec,
    bounds_ustat_binomial,
    bounds_ustat_poisson,
    constant_kernel,
    distance_kernel,
    eval_ustat,
    exact_binomial_sizebias,
    lambda_r_binomial,
    lambda_r_poisson,
    region_kernel,
    sample_sizebias_binomial,
    sample_sizebias_poisson,
)


def literal_ustat(pts, h, arity):
    return sum(int(h(np.array(sub))) for sub in itertools.combinations(pts, arity))


def test_examples():
    assert eval_ustat(np.zeros((4, 1)), constant_kernel(2)) == 6
    assert eval_ustat(np.array([[0.0], [0.05], [0.5]]), distance_kernel(0.1)) == 1
    assert eval_ustat(np.zeros((1, 1)), distance_kernel(0.1)) == 0


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(st.floats(0, 1), min_size=0, max_size=25), delta=st.floats(0.01, 0.5))
def test_vectorised_count_matches_literal_loop(pts, delta):
    arr = np.asarray(pts, dtype=float).reshape(-1, 1)
    k = distance_kernel(delta)
    want = literal_ustat(list(arr[:, 0]), lambda s: abs(s[0] - s[1]) <= delta, 2)
    assert eval_ustat(arr, k) == want


@settings(max_examples=20, deadline=None)
@given(pts=st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), max_size=12))
def test_three_point_kernel_matches_literal_loop(pts):
    def ev(t):
        span = t.max(axis=1) - t.min(axis=1)
        return (span.max(axis=1) <= 0.3).astype(np.int64)

    k = Kernel(3, 2, ev, name="cluster")
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    want = sum(int(ev(np.asarray(sub)[None])[0]) for sub in itertools.combinations(arr, 3))
    assert eval_ustat(arr, k) == want


def test_kernel_validation():
    bad = Kernel(2, 1, lambda t: (t[:, 0, 0] < t[:, 1, 0]).astype(np.int64), name="ordered")
    with pytest.raises(KernelError):
        bad.check_symmetry(Box.unit(1))
    two = Kernel(1, 1, lambda t: np.full(t.shape[0], 2), name="two")
    with pytest.raises(KernelError):
        two(np.zeros((3, 1, 1)))


def test_closed_forms_match_monte_carlo():
    delta, n = 0.1, 12
    lr = lambda_r_binomial(distance_kernel(delta), n, Box.unit(1), reps=200_000, seed=4)
    p = 2 * delta - delta**2
    over = 4 * delta**2 - 10 * delta**3 / 3
    assert abs(lr.lam - n * (n - 1) / 2 * p) < 4 * lr.lam_se
    assert abs(lr.r - n * (n - 1) * (n - 2) * over) < 4 * lr.r_se
    lp = lambda_r_poisson(region_kernel([0.2], [0.5]), 3.0, Box.unit(1), reps=100_000, seed=5)
    assert abs(lp.lam - 0.9) < 4 * lp.lam_se and lp.r == 0.0


def test_degenerate_kernel_warns():
    with pytest.warns(DegenerateKernelWarning):
        lambda_r_poisson(constant_kernel(2, value=0), 5.0, Box.unit(1), reps=1000, seed=0)


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_two_atom_binomial_identity_is_exact(n):
    laws = exact_binomial_sizebias([0.3, 0.7], lambda tp: int(tp[0] == tp[1]), n, 2)
    for k in range(int(laws.s.max_value) + 2):
        assert abs(k * laws.s.prob(k) - laws.lam * laws.s_prime.prob(k - 1)) < 1e-12
    assert laws.s.mean() == pytest.approx(laws.lam, abs=1e-12)


def test_arity_one_poisson_spec():
    k = region_kernel([0.0], [0.2])
    spec = UStatSpec.build(k, "poisson", 3.0, Box.unit(1), LambdaR(0.6, 0.0))
    assert spec.lam == pytest.approx(0.6)
    with pytest.raises(ValueError):
        UStatSpec.build(k, "poisson", 3.0, Box.unit(1), LambdaR(0.6, 1.0))


def test_arity_one_count_is_poisson():
    k = region_kernel([0.0], [0.2])
    s = [eval_ustat(sample_poisson(Box.unit(1), 3.0, SeedSpec(2, r)), k) for r in range(20_000)]
    law = empirical_pmf(s)
    assert tv_distance(law, PoissonLaw(0.6)) < 0.02
    spec = UStatSpec.build(k, "poisson", 3.0, Box.unit(1), LambdaR(0.6, 0.0))
    reps = bounds_ustat_poisson(spec, law, 2, 1)
    assert reps["tv"].bound == 0.0
    assert all(r.satisfied for r in reps.values() if r.exact_lhs is not None)


def test_poisson_sizebias_pairs_pass_wald_test():
    k = distance_kernel(0.05)
    draws = [sample_sizebias_poisson(k, 10.0, Box.unit(1), SeedSpec(8, r)) for r in range(3000)]
    s, sp = map(np.array, zip(*draws))
    lam = 50.0 * (2 * 0.05 - 0.05**2)
    assert sizebias_wald_test(s, sp, lam)[2] > 1e-3


def test_binomial_bounds_hold_on_exact_tables():
    k = distance_kernel(0.1)
    n = 6
    # Exact laws on a fine lattice are too costly; use sampled laws instead.
    draws = [sample_sizebias_binomial(k, n, Box.unit(1), SeedSpec(11, r)) for r in range(4000)]
    s, sp, st_ = map(np.array, zip(*draws))
    p = 0.2 - 0.01
    lr = LambdaR(15 * p, n * (n - 1) * (n - 2) * (4 * 0.01 - 10 * 0.001 / 3))
    spec = UStatSpec.build(k, "binomial", n, Box.unit(1), lr)
    reps = bounds_ustat_binomial(spec, empirical_pmf(st_), 2, 1, empirical_pmf(s))
    assert all(r.satisfied for r in reps.values() if r.exact_lhs is not None)
    with pytest.raises(ValueError):
        sample_sizebias_binomial(k, 3, Box.unit(1), SeedSpec(1))


def test_two_atom_construction_needs_enough_points():
    with pytest.raises(ValueError):
        exact_binomial_sizebias([0.5, 0.5], lambda tp: 1, 3, 2)
