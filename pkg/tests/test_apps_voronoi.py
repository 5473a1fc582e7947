import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from chenstein.apps_voronoi import (
    GridIndex,
    PEstimate,
    UndefinedStatisticError,
    UnsupportedDimensionError,
    VoronoiConfig,
    VoronoiConstants,
    _circum_candidates_2d,
    alpha2,
    circum_buffer,
    circum_replication,
    circumradius_1d,
    circumradius_2d,
    estimate_p,
    gumbel_cdf,
    gumbel_constant,
    inradius_replication,
    inradius_stat,
    inradius_tv_bound,
    mhat_theta,
    simulate_circum,
    simulate_inradius,
    voronoi_constants,
    weibull_cdf,
)
from chenstein.pointproc import Box, PointPattern, SeedSpec

from geometry_oracle import oracle_circumradius_1d, oracle_circumradius_2d, random_configuration

coords = st.floats(-1.0, 1.0, allow_nan=False)
point2 = st.tuples(coords, coords).filter(lambda p: math.hypot(*p) > 1e-6)


def test_circumradius_examples():
    assert circumradius_2d([0, 0], [[2, 0], [-2, 0], [0, 2], [0, -2]]) == pytest.approx(math.sqrt(2))
    assert circumradius_2d([0, 0], [[1, 0]]) == math.inf
    assert circumradius_2d([0, 0], []) == math.inf
    with pytest.raises(ValueError):
        circumradius_2d([0, 0], [[0, 0], [1, 1]])
    assert circumradius_1d(0.0, [-1.0, 3.0]) == 1.5
    assert circumradius_1d(0.0, [1.0, 3.0]) == math.inf


def test_circumradius_equilateral():
    ang = np.array([0, 2 * np.pi / 3, 4 * np.pi / 3])
    nb = 2.0 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # The cell is a triangle with inradius 1, so its circumradius is 2.
    assert circumradius_2d([0, 0], nb) == pytest.approx(2.0, rel=1e-12)


def test_geometry_matches_oracle_on_random_configurations():
    rng = np.random.default_rng(20)
    for _ in range(200):
        x, nb = random_configuration(rng, 2)
        got, want = circumradius_2d(x, nb), oracle_circumradius_2d(x, nb)
        assert (got == want == math.inf) or abs(got - want) <= 1e-6
        x1, nb1 = random_configuration(rng, 1)
        assert circumradius_1d(x1[0], nb1[:, 0]) == pytest.approx(
            oracle_circumradius_1d(x1[0], nb1[:, 0]), rel=1e-12)


MAX_CONDITIONED_RADIUS = 1e4


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(point2, min_size=3, max_size=10), extra=st.lists(point2, min_size=1, max_size=4))
def test_adding_points_never_grows_the_cell(pts, extra):
    a = circumradius_2d([0, 0], pts)
    b = circumradius_2d([0, 0], pts + extra)
    assert b <= a * (1 + 1e-9) or a == math.inf


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(point2, min_size=3, max_size=10), far=st.lists(
    st.tuples(st.floats(0, 2 * math.pi), st.floats(1.0, 5.0)), min_size=1, max_size=4))
def test_points_beyond_twice_the_radius_are_irrelevant(pts, far):
    c = circumradius_2d([0, 0], pts)
    if not math.isfinite(c):
        return
    assume(c < MAX_CONDITIONED_RADIUS)
    extra = [((2 * c * s + 1e-9) * math.cos(a), (2 * c * s + 1e-9) * math.sin(a)) for a, s in far]
    assert circumradius_2d([0, 0], pts + extra) == pytest.approx(c, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(pts=st.lists(point2, min_size=3, max_size=10), scale=st.floats(0.1, 10.0),
       shift=st.tuples(coords, coords))
def test_circumradius_scales_and_translates(pts, scale, shift):
    c = circumradius_2d([0, 0], pts)
    # near-parallel bisectors put vertices at ~1/angle; float loses eps * c / spread
    assume(not math.isfinite(c) or c < MAX_CONDITIONED_RADIUS)
    s = np.asarray(shift)
    moved = circumradius_2d(s, np.asarray(pts) * scale + s)
    if math.isfinite(c):
        assert moved == pytest.approx(c * scale, rel=1e-8)
    else:
        assert moved == math.inf


def test_grid_index_matches_kdtree():
    rng = np.random.default_rng(4)
    for d in (1, 2, 3):
        pts = rng.random((500, d))
        idx = GridIndex(pts)
        tree = cKDTree(pts)
        for q in rng.uniform(-0.3, 1.3, (100, d)):
            dist, j = idx.nearest(q)
            want, _ = tree.query(q)
            assert dist == pytest.approx(want, rel=1e-12)
    assert GridIndex(np.zeros((1, 2))).nearest([0, 0]) == (math.inf, -1)


def test_inradius_statistic():
    pp = PointPattern(np.array([[0.5], [0.6]]), Box.unit(1), ("poisson", 10.0))
    assert inradius_stat([0.5], pp, 10.0) == pytest.approx(2.0 - math.log(10.0))
    with pytest.raises(UndefinedStatisticError):
        inradius_stat([0.5], np.array([[0.5]]), 10.0)


def test_prefilter_is_lossless():
    rng = np.random.default_rng(9)
    for _ in range(5):
        pts = rng.random((3000, 2)) * 1.2 - 0.1
        inside = np.nonzero(Box.unit(2).contains(pts))[0]
        r_max = 0.02
        cand, rad = _circum_candidates_2d(pts, inside, r_max)
        tree = cKDTree(pts)
        want = []
        for i in inside:
            nb = [k for k in tree.query_ball_point(pts[i], 2 * r_max) if k != i]
            if circumradius_2d(pts[i], pts[nb]) <= r_max:
                want.append(i)
        assert sorted(cand.tolist()) == sorted(want)


def test_constants_for_dimension_one():
    c = voronoi_constants(1)
    assert alpha2(1, 0.5) == 1.0
    assert (c.c_tv, c.c_k, c.c_gumbel) == (96.0, 561.0, 65)
    assert gumbel_constant(2) == 353


@settings(max_examples=30, deadline=None)
@given(p=st.floats(1e-4, 0.9), frac=st.floats(0.0, 0.5))
def test_constants_reproduce_plug_in_arithmetic(p, frac):
    c = VoronoiConstants(2, p, p * frac)
    lo = p - p * frac
    a_lo = (2**6 * lo / 6.0) ** (1 / 3)
    assert c.alpha2 == pytest.approx((2**6 * p / 6.0) ** (1 / 3), rel=1e-12)
    assert c.c_tv == pytest.approx(3 * 2**10 / (a_lo * lo), rel=1e-12)
    assert c.c_k == pytest.approx(1 + 2**14 / (a_lo * lo) + 2**7 / a_lo + 256 / a_lo**2, rel=1e-12)


def test_mhat_example():
    vals = mhat_theta(1, 1.0, 1.0, VoronoiConstants(1, 0.5))
    assert [round(v, 7) for v in vals] == [0.0183156, 32.0, 2.0]


def test_p_estimate_dimension_one():
    est = estimate_p(1, 100_000, SeedSpec(1))
    assert abs(est.estimate - 0.5) <= 3 * est.stderr
    with pytest.raises(UnsupportedDimensionError):
        estimate_p(3, 100_000, SeedSpec(1))
    with pytest.raises(ValueError):
        estimate_p(1, 10, SeedSpec(1))


def test_p_trials_agree_with_clipping_geometry():
    from chenstein.apps_voronoi import _p_trials_2d, _uniform_ball
    rng = np.random.default_rng(2)
    y = _uniform_ball(rng, 3 * 3000, 2, 2.0).reshape(3000, 3, 2)
    fast = _p_trials_2d(y)
    slow = np.array([circumradius_2d([0, 0], yy) < 1.0 for yy in y])
    assert np.array_equal(fast, slow)


def test_limit_cdfs():
    assert weibull_cdf(0.0, 1) == 0.0
    assert weibull_cdf(1.0, 2) == pytest.approx(1 - math.exp(-1))
    assert gumbel_cdf(0.0) == pytest.approx(math.exp(-1))


def test_config_validation():
    with pytest.raises(UnsupportedDimensionError):
        VoronoiConfig("circumradius", 3, 100.0, 10, SeedSpec(0))
    with pytest.raises(ValueError):
        VoronoiConfig("inradius", 1, 5.0, 10, SeedSpec(0))
    with pytest.raises(ValueError):
        VoronoiConfig("inradius", 2, 20.0, 10, SeedSpec(0))
    cfg = VoronoiConfig("inradius", 1, 1000.0, 10, SeedSpec(0))
    assert len(cfg.u_grid) == 10 and len(cfg.ks_grid) == 60
    with pytest.raises(ValueError):
        VoronoiConfig("circumradius", 1, 1000.0, 10, SeedSpec(0)).buffer


def test_inradius_tv_bound_formula():
    t, u = 1000.0, 1.0
    a = u + math.log(t)
    want = 2 * a / (math.exp(0.5) * math.sqrt(t)) + a / (math.e * t)
    assert inradius_tv_bound(1, t, u) == pytest.approx(want)


def test_replications_are_deterministic():
    cfg = VoronoiConfig("inradius", 1, 1000.0, 5, SeedSpec(3))
    np.testing.assert_array_equal(inradius_replication(cfg, 2), inradius_replication(cfg, 2))
    ccfg = VoronoiConfig("circumradius", 1, 1000.0, 5, SeedSpec(3))
    c = voronoi_constants(1)
    np.testing.assert_array_equal(circum_replication(ccfg, c, 1).marks, circum_replication(ccfg, c, 1).marks)


def test_small_runs_pass():
    res = simulate_inradius(VoronoiConfig("inradius", 1, 1000.0, 300, SeedSpec(5)))
    assert res.passed and len(res.rows) == 21
    cres = simulate_circum(VoronoiConfig("circumradius", 1, 1000.0, 300, SeedSpec(5)), voronoi_constants(1))
    assert cres.passed and len(cres.rows) == 41


def test_circum_buffer_guard():
    est = PEstimate(2, 0.001, 0.0001, 10**6)
    cfg = VoronoiConfig("circumradius", 2, 50.0, 5, SeedSpec(0))
    with pytest.raises(ValueError):
        simulate_circum(cfg, voronoi_constants(2, est))
    assert circum_buffer(cfg, voronoi_constants(2, est)) > 0.2
