import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqlab.builders import ex42, kurasov_sarnak
from fqlab.exposys import LaurentSystem, TrigSystem, compose, periodic_factorization
from fqlab.polytope import bkk_number
from fqlab.zerofind import (argument_count, density, laurent_zeros, multiplicity, predicted_density, torus_zeros,
                            trig_zeros_box, write_zeros_csv)

F = Fraction


def trig1(terms):
    return TrigSystem.from_terms(1, [[((w,), c) for w, c in terms]])


def reals(zs):
    return sorted(float(z.location[0].real) for z in zs)


# -- Laurent zeros -----------------------------------------------------------------


def test_laurent_linear():
    zs = laurent_zeros(LaurentSystem(1, ((((1,), 1), ((0,), -1)),)))
    assert len(zs) == 1 and abs(zs[0].location[0] - 1) < 1e-14 and zs[0].multiplicity == 1


def test_laurent_z_minus_inverse():
    zs = laurent_zeros(LaurentSystem(1, ((((1,), 1), ((-1,), -1)),)))
    assert sorted(z.location[0].real for z in zs) == pytest.approx([-1, 1])
    assert zs.total_multiplicity == 2


def test_laurent_double_root():
    zs = laurent_zeros(LaurentSystem(1, ((((2,), 1), ((1,), -2), ((0,), 1)),)))
    assert zs.total_multiplicity == 2


def test_laurent_ex42_stand_in_matches_bkk():
    pf = periodic_factorization(*ex42(b=("-1/4", "-1/4")))
    zs = laurent_zeros(pf.Q)
    assert zs.total_multiplicity == bkk_number(pf.Q.newton_tuple())
    for z in zs:
        assert np.max(np.abs(pf.Q.to_double().evaluate(z.location))) < 1e-10


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000))
def test_laurent_2d_random_matches_bkk(seed):
    rng = np.random.default_rng(seed)
    polys = []
    for _ in range(2):
        exps = {tuple(int(x) for x in rng.integers(-2, 3, 2)) for _ in range(4)}
        polys.append(tuple((k, complex(*rng.normal(size=2))) for k in sorted(exps)))
    Q = LaurentSystem(2, tuple(polys))
    try:
        zs = laurent_zeros(Q)
    except ValueError:
        return  # folded Newton data, outside the contract
    assert zs.total_multiplicity == bkk_number(Q.newton_tuple())


def test_torus_scan_agrees_with_elimination():
    pf = periodic_factorization(*ex42(b=("-1/3", "-3/8")))
    a = laurent_zeros(pf.Q)
    b = torus_zeros(pf.Q)
    assert a.total_multiplicity == b.total_multiplicity == 96
    A = np.array([z.location for z in a])
    for z in b:
        assert np.min(np.linalg.norm(A - z.location, axis=1)) < 1e-8


# -- trigonometric zeros -----------------------------------------------------------


def test_trig_integers():
    zs = trig_zeros_box(trig1([(1, 1), (0, -1)]), [(-2.5, 2.5)])
    assert reals(zs) == pytest.approx([-2, -1, 0, 1, 2], abs=1e-12)


def test_trig_half_integers_half_open():
    zs = trig_zeros_box(trig1([(2, 1), (0, -1)]), [(0, 1)], half_open=True)
    assert reals(zs) == pytest.approx([0, 0.5], abs=1e-12)


def test_kurasov_sarnak_zeros_real():
    f = compose(*kurasov_sarnak())
    zs = trig_zeros_box(f, [(0, 10)])
    assert len(zs) > 30
    assert max(abs(z.location[0].imag) for z in zs) < 1e-9
    # argument principle over a rectangle that avoids zeros on its edges
    a, b = 0.05, 9.95
    inside = sum(z.multiplicity for z in zs if a < z.location[0].real < b)
    assert argument_count(f, a, b, 1.0) == inside


def test_periodic_scan_equals_coset_expansion():
    P, M = ex42(b=("-1/4", "-1/4"))
    pf = periodic_factorization(P, M)
    f = compose(P, M)
    lo, hi = [-3.1, -2.9], [3.05, 3.2]
    zs = trig_zeros_box(f, list(zip(lo, hi)), im_band=1.0)
    pts, _ = pf.zeros_in_box(lo, hi)
    X = np.array([z.location for z in zs])
    assert len(X) == len(pts)
    for p in pts:
        assert np.min(np.linalg.norm(X - p, axis=1)) < 1e-8


# -- multiplicity ---------------------------------------------------------------------


def test_multiplicity_simple_and_double():
    assert multiplicity(trig1([(1, 1), (0, -1)]), [0]) == 1
    # (e(x) - 1)^2 = e(2x) - 2 e(x) + 1
    assert multiplicity(trig1([(2, 1), (1, -2), (0, 1)]), [0]) == 2


def test_multiplicity_degenerate_jacobian_is_estimated():
    # f = (x-like, y^2-like) has a double zero; the perturbed count is 2
    G = TrigSystem.from_terms(2, [[((1, 0), 1), ((0, 0), -1)],
                                  [((0, 2), 1), ((0, 1), -2), ((0, 0), 1)]])
    m, info = multiplicity(G, [0, 0], return_info=True)
    assert info["estimated"] and m == 2
    # simple zero where the Jacobian determinant is tiny but nonzero: e(x)-1, e(y)-1 scaled
    H = TrigSystem.from_terms(2, [[((1, 0), 1e-5), ((0, 0), -1e-5)], [((0, 1), 1e-5), ((0, 0), -1e-5)]])
    m, info = multiplicity(H, [0, 0], return_info=True)
    assert info["estimated"] and m == 1


# -- density ------------------------------------------------------------------------


def test_density_integers():
    f = trig1([(1, 1), (0, -1)])
    est = density(f, [10, 50])
    assert est.predicted == 1
    assert est.relative_gap < 0.05


def test_density_kurasov_sarnak_prediction():
    f = compose(*kurasov_sarnak())
    pred, _, exact = predicted_density(f)
    assert pred == pytest.approx(1 + 2 * np.sqrt(2), rel=1e-12) and not exact
    est = density(f, [100, 200])
    assert est.relative_gap < 0.02
    assert est.counts[0] <= est.counts[1]


def test_density_ex42_prediction():
    f = compose(*ex42())
    assert predicted_density(f)[0] == pytest.approx(4.0, rel=1e-12)


def test_density_from_cosets():
    P, M = ex42(b=("-1/4", "-1/4"))
    pf = periodic_factorization(P, M)
    est = density(compose(P, M), [10, 40], pf=pf)
    assert est.relative_gap < 0.05 and est.nonreal == 0


def test_zero_scan_needs_positive_volume():
    with pytest.raises(ValueError):
        trig_zeros_box(trig1([(0, 1)]), [(0, 1)], density_hint=0.0)


def test_zeros_csv_columns():
    zs = trig_zeros_box(trig1([(1, 1), (0, -1)]), [(-1.5, 1.5)])
    buf = io.StringIO()
    write_zeros_csv(zs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "re_1,im_1,multiplicity,residual"
    assert len(lines) == 4
