from chenstein.pointproc import SeedSpec
from chenstein.selftest import bernoulli_bounds_suite, discrepancy_identity_suite, run_all


def test_all_rows_pass():
    rows = run_all(SeedSpec(0))
    assert len(rows) == 110
    assert all(r.passed for r in rows)


def test_suites_are_seed_stable():
    a = discrepancy_identity_suite(SeedSpec(4), 20)
    b = discrepancy_identity_suite(SeedSpec(4), 20)
    assert a == b


def test_bernoulli_rows_are_non_positive():
    assert all(r.value <= r.tolerance for r in bernoulli_bounds_suite(m=3, v=2))
