"""Poisson approximation via the Chen-Stein method and size-bias couplings.

Core modules: :mod:`poisson_stein` (Stein solutions and magic factors),
:mod:`discrete_dist` (integer laws and distances), :mod:`coupling` (bounds
from a coupling), :mod:`pointproc` (seeded point processes) and
:mod:`ustat` (U-statistics). Applications: :mod:`apps_interpoint`,
:mod:`apps_runs` and :mod:`apps_voronoi`. :mod:`cli` runs experiments.
"""

from .coupling import BoundReport, CouplingLaw, bounds_approximate, bounds_exact
from .discrete_dist import IntegerPMF, kolmogorov_distance, tv_distance, wasserstein_distance
from .poisson_stein import PoissonLaw, magic_factors, stein_f_indicator, stein_f_lipschitz
from .pointproc import Box, SeedSpec

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "Box",
    "CouplingLaw",
    "IntegerPMF",
    "PoissonLaw",
    "SeedSpec",
    "bounds_approximate",
    "bounds_exact",
    "kolmogorov_distance",
    "magic_factors",
    "stein_f_indicator",
    "stein_f_lipschitz",
    "tv_distance",
    "wasserstein_distance",
]
