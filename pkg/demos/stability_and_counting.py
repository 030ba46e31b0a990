"""When are all zeros real, and how many are there?

Counting: the zeros of a Laurent system with unfolded Newton data number
exactly n! times the mixed volume of its Newton polytopes.  Realness: a
polynomial stable along the image of the frequency matrix gives only real
zeros; when that fails a nonreal zero can be exhibited.

Run:  python demos/stability_and_counting.py
"""

from fqlab.builders import ex41, ex42, sine_pair
from fqlab.exposys import compose, periodic_factorization
from fqlab.polytope import bkk_number, is_unfolded, mixed_volume
from fqlab.stability import halfspace_row_test, m_stability_check, realness_by_density
from fqlab.zerofind import laurent_zeros

# counting on a periodic stand-in (rational last row of M)
pf = periodic_factorization(*ex42(b=("-1/4", "-1/4")))
T = pf.Q.newton_tuple()
# Q lives on the torus of the period lattice, which covers |det B| fundamental cells of F
print(f"ex42 stand-in, factor Q: unfolded {bool(is_unfolded(T))}, mixed volume {mixed_volume(T)}, "
      f"BKK {bkk_number(T)}, zeros found {laurent_zeros(pf.Q).total_multiplicity}, "
      f"zeros per unit area of F = BKK / |det B| = {bkk_number(T) / abs(pf.det_B)}")

# realness by density for the irrational system
F = compose(*ex42())
rep = realness_by_density(F, R=8)
print(f"ex42 on |x| <= 8: real density {rep['density']:.3f} vs {rep['predicted_density']:.0f}, "
      f"verdict '{rep['verdict']}'")

# the half-space test behind stability, and a case where stability fails
P, M = ex41()
print("\nex41 rows of M in a closed half-space:", halfspace_row_test(M))
print("ex41 stability screen:", m_stability_check(P, M)["verdict"])
for omega2 in ("2/3", "3/2"):
    rep = m_stability_check(*sine_pair(omega=("1", omega2)))
    line = f"sine-pair omega = (1, {omega2}): {rep['verdict']}"
    if rep["verdict"] == "violated":
        re, im = rep["witness"]["x"][0]
        line += f", nonreal zero at {re:.6f} + {im:.6f}i"
    print(line)
