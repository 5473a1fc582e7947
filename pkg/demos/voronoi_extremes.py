"""Small inradius and circumradius runs in one dimension."""

from chenstein.apps_voronoi import VoronoiConfig, simulate_circum, simulate_inradius, voronoi_constants
from chenstein.pointproc import SeedSpec

res = simulate_inradius(VoronoiConfig("inradius", 1, 1000.0, 500, SeedSpec(1)))
print(f"inradius: KS {res.ks_distance:.4f} vs bound {res.ks_bound:.3f}; all rows pass: {res.passed}")
for row in res.rows[:4]:
    print(" ", row.check, round(row.u, 3), round(row.empirical, 4), round(row.target, 4), row.passed)

cres = simulate_circum(VoronoiConfig("circumradius", 1, 1000.0, 500, SeedSpec(1)), voronoi_constants(1))
print(f"circumradius: KS {cres.ks_distance:.4f}; all rows pass: {cres.passed}")
