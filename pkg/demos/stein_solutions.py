"""Stein solutions, magic factors and the discrepancy identity on a small law."""

import numpy as np

from chenstein import IntegerPMF, PoissonLaw, magic_factors, tv_distance
from chenstein.discrete_dist import stein_discrepancy
from chenstein.poisson_stein import stein_f_indicator_values

lam = 2.0
A = [0, 3, 4]
f = stein_f_indicator_values(lam, A, 12)
print("f_A(0..12):", np.round(f, 6))
mf = magic_factors(lam)
print(f"sup|f_A| = {np.abs(f).max():.4f} <= {mf.sup_f_A:.4f}")
print(f"sup|Delta f_A| = {np.abs(np.diff(f[1:])).max():.4f} <= {mf.sup_delta_f_A:.4f}")

law = IntegerPMF.from_mapping({0: 0.1, 1: 0.3, 2: 0.3, 3: 0.2, 4: 0.1})
print("sum f_A(i) D(i)        =", stein_discrepancy(law, lam, A))
print("P(P in A) - P(X in A)  =", float(PoissonLaw(lam).pmf(np.array(A)).sum()) - law.prob_of_set(A))
print("TV(law, Poisson(2))    =", tv_distance(law, PoissonLaw(lam)))
