"""Zero sets of trigonometric systems and their summation formulas.

Submodules
----------
polytope
    Exact lattice polytopes, mixed volumes, the unfolded test.
exposys
    Laurent systems, exponent maps, composition, periodic factorization.
zerofind
    Zeros of Laurent systems (exact BKK check) and of trigonometric systems.
spectral
    Direct and spectral sides of the summation formula, vertex expansions,
    rational approximation of aperiodic systems, certificates.
stability
    Amoeba sampling, stability screening, realness by density.
builders
    Canned example systems.
"""

from .exposys import (ExponentMap, LaurentSystem, PeriodicFactorization, SystemFormatError, TrigSystem, compose,
                      load_system, period_group, periodic_factorization)
from .polytope import LatticePolytope, PolytopeTuple, bkk_number, convex_hull, is_unfolded, mixed_volume, volume
from .zerofind import density, laurent_zeros, trig_zeros_box

__version__ = "0.1.0"

__all__ = [
    "ExponentMap",
    "LaurentSystem",
    "PeriodicFactorization",
    "SystemFormatError",
    "TrigSystem",
    "compose",
    "load_system",
    "period_group",
    "periodic_factorization",
    "LatticePolytope",
    "PolytopeTuple",
    "bkk_number",
    "convex_hull",
    "is_unfolded",
    "mixed_volume",
    "volume",
    "density",
    "laurent_zeros",
    "trig_zeros_box",
]
