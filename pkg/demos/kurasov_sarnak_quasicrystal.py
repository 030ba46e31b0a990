"""A one-dimensional aperiodic zero set with a discrete spectrum.

f(x) = P(e^{2 pi i x}, e^{2 pi i sqrt(2) x}) with a stable P has only real
zeros, spaced irregularly but with density 1 + 2 sqrt(2).  Its spectrum is
reached through rational approximations of sqrt(2): each approximation is
periodic, so its spectrum is a lattice sum, and the spectral sides converge
to the direct sum over the true zeros.

Run:  python demos/kurasov_sarnak_quasicrystal.py
"""

import math

import numpy as np

from fqlab.builders import kurasov_sarnak
from fqlab.exposys import compose, period_group
from fqlab.spectral import default_family, direct_side, growth_fit, rational_approx_spectrum
from fqlab.stability import ap_scan, m_stability_check
from fqlab.zerofind import trig_zeros_box

P, M = kurasov_sarnak()
f = compose(P, M)
print("period group:", period_group(f))

zs = trig_zeros_box(f, [(0.0, 60.0)])
X = np.array([z.location[0] for z in zs])
print(f"{len(X)} zeros in [0, 60], max |Im| = {np.max(np.abs(X.imag)):.1e}")
print(f"density {len(X) / 60:.4f} vs predicted {1 + 2 * math.sqrt(2):.4f}")
print("first gaps:", np.round(np.diff(np.sort(X.real))[:8], 4))
print("arithmetic progressions of length >= 6:", len(ap_scan(X.real, min_len=6)))
print("stability screen:", m_stability_check(P, M)["verdict"])

h = default_family(1)[0]
direct, tail, _ = direct_side(f, h, None)
steps, gaps = rational_approx_spectrum(P, M, [10, 100, 1000], h, cutoff=8.0)
print(f"\ndirect side {direct.real:.10f} (tail {tail:.0e})")
for st in steps:
    print(f"  sqrt(2) ~ {st.M.rational_matrix()[1][0]}: spectral side {st.value.real:.10f}, "
          f"|det B| = {st.det_B}, gap to direct {abs(st.value - direct):.1e}")
g = growth_fit(steps[-1].spectrum)
print(f"growth of sum |a(s)| over balls: C = {g['C']:.3g}, N = {g['N']:.3g}")
