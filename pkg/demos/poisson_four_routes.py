"""Four ways to evaluate one summation formula, on the simplest system.

The zeros of F(x) = e^{2 pi i x} - 1 are the integers, so summing a test
function's Fourier transform over them should equal summing the function
over the integers (classical Poisson summation).  fqlab reaches the right-hand
side three ways: directly from the lattice spectrum, as a residue sum over the
zeros of Q(z) = z - 1, and from vertex expansions of 1/Q.  All four must agree.

Run:  python demos/poisson_four_routes.py
"""

from fqlab.builders import poisson
from fqlab.exposys import compose, periodic_factorization
from fqlab.spectral import (default_family, direct_side, residue_sum, solve_combinatorial_coefficients,
                            spectral_side, vertex_spectrum)

P, M = poisson()
F = compose(P, M)
pf = periodic_factorization(P, M)
pf.populate_cosets()
print(f"period matrix B = {pf.B}, cosets = {pf.L}")

# the vertex route needs integer weights k_v, fitted once from power sums
fit = solve_combinatorial_coefficients(pf)
print(f"vertex weights {fit.coefficients}, held-out residual {fit.heldout_residual:.1e}")

for h in default_family(1):
    direct, tail, _ = direct_side(F, h, pf)
    lattice = spectral_side(pf, h)
    residue = residue_sum(pf, h)
    vs = vertex_spectrum(pf, h.half_width + 1e-9, fit=fit)
    vertex = sum(a * w for a, w in zip(vs.a, h.h(vs.s)))
    print(f"\ntest function centred at {h.center}:")
    for name, v in [("direct", direct), ("lattice", lattice), ("residue", residue), ("vertex", vertex)]:
        print(f"  {name:8s} {v.real:+.15f} {v.imag:+.1e}j")
    print(f"  tail estimate of the direct sum: {tail:.1e}")
