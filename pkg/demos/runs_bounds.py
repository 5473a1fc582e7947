"""Exact head-run laws against the TV, uniform and zero-probability bounds."""

from chenstein.apps_runs import RunsConfig, bounds_runs, sizebias_runs_check

print(f"{'n':>3} {'k':>3} {'p':>4} {'lambda':>8} {'TV':>9} {'TV bound':>9} {'P(S=0)':>8} {'zero bound':>10}")
for n, k, p in [(8, 2, 0.3), (12, 3, 0.5), (16, 4, 0.5), (16, 2, 0.1)]:
    cfg = RunsConfig(n, k, p)
    rep = bounds_runs(cfg, v=1)
    print(f"{n:>3} {k:>3} {p:>4} {cfg.lam:>8.4f} {rep['tv'].exact_lhs:>9.5f} {rep['tv'].bound:>9.5f}"
          f" {rep['remark_zero'].exact_lhs:>8.5f} {rep['remark_zero'].bound:>10.5f}")

res = sizebias_runs_check(RunsConfig(12, 3, 0.3))
print("size-bias identity residual (n=12, k=3, p=0.3):", res.max_residual)
