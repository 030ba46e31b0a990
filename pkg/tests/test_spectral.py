import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, reject, settings, strategies as st
from scipy.integrate import quad

from fqlab.builders import ex41, ex42, kurasov_sarnak, sine_pair, poisson
from fqlab.exposys import ExponentMap, LaurentSystem, compose, periodic_factorization
from fqlab.spectral import (AtomicMeasure, CoefficientFitError, TailBoundError, TestFunction, compare_spectra,
                            direct_side, fq_certificate, growth_fit, lattice_spectrum, rational_approx_spectrum,
                            residue_sum, solve_combinatorial_coefficients, spectral_side, vertex_constant_term,
                            vertex_spectrum)

F = Fraction


def lsys(*polys, m=None):
    m = m or len(next(iter(polys[0])))
    return LaurentSystem(m, tuple(tuple(p.items()) for p in polys))


def pf_of(Q):
    return periodic_factorization(Q, ExponentMap.identity(Q.n))


Z_MINUS_1 = lsys({(1,): 1, (0,): -1})
Z2_MINUS_1 = lsys({(2,): 1, (0,): -1})


def random_periodic_2d(rng):
    """Two random Laurent polynomials with at most three terms each, unfolded and generic."""
    from fqlab.polytope import is_unfolded
    while True:
        polys = []
        for _ in range(2):
            exps = {tuple(int(x) for x in rng.integers(-1, 2, 2)) for _ in range(3)}
            polys.append({k: complex(*rng.normal(size=2)) for k in sorted(exps)})
        Q = lsys(*polys)
        T = Q.newton_tuple()
        from fqlab.polytope import mixed_volume
        if mixed_volume(T) > 0 and is_unfolded(T):
            return Q


# -- test functions ------------------------------------------------------------------


@pytest.mark.parametrize("h", [TestFunction.bspline(4, 1.0), TestFunction.bspline(6, 0.7, center=(0.3,)),
                               TestFunction.gaussian(0.8, center=(-0.2,))])
def test_hhat_matches_quadrature(h):
    lo, hi = (h.center[0] - h.half_width, h.center[0] + h.half_width)
    for xi in [0.0, 0.37, 1.3, -2.1]:
        re = quad(lambda x: h.h([x])[0] * math.cos(2 * math.pi * x * xi), lo, hi, limit=200, epsabs=1e-13)[0]
        im = quad(lambda x: -h.h([x])[0] * math.sin(2 * math.pi * x * xi), lo, hi, limit=200, epsabs=1e-13)[0]
        assert abs(h.hhat([xi])[0] - complex(re, im)) < 1e-10


def test_bspline_support_and_sign():
    h = TestFunction.bspline(6, 1.0, n=2)
    x = np.random.default_rng(0).uniform(-5, 5, (2000, 2))
    v = h.h(x)
    assert np.all(v >= 0)
    assert np.all(v[np.max(np.abs(x), axis=1) > h.half_width] == 0)


def test_bspline_decay_certificate():
    h = TestFunction.bspline(6, 0.8)
    N, C = h.decay_constant
    rng = np.random.default_rng(1)
    z = rng.normal(scale=20, size=500) + 1j * rng.uniform(-2, 2, 500)
    bound = C * (1 + np.abs(z)) ** (-N) * np.exp(h.gamma * np.abs(z.imag))
    assert np.all(np.abs(h.hhat(z[:, None])) <= bound)


def test_order_below_four_rejected():
    with pytest.raises(ValueError):
        TestFunction.bspline(3)


# -- direct side --------------------------------------------------------------------


def test_direct_side_is_classical_poisson():
    F1 = compose(*poisson())
    h = TestFunction.bspline(6, 1.0)
    val, tail, _ = direct_side(F1, h)
    classical = sum(h.h([k])[0] for k in range(-4, 5))
    assert abs(val - classical) < 1e-10 + tail


def test_direct_side_half_lattice():
    F2 = compose(Z2_MINUS_1, ExponentMap.identity(1))
    h = TestFunction.bspline(6, 1.0)
    val, tail, info = direct_side(F2, h)
    ks = [k for k in range(-400, 401) if abs(k / 2) < info["radius"]]
    explicit = sum(h.hhat([k / 2])[0] for k in ks)
    assert abs(val - explicit) < 1e-12
    assert abs(val - 2 * sum(h.h([2 * k])[0] for k in range(-3, 4))) < 1e-10 + tail


def test_tail_estimate_brackets_refined_value():
    F1 = compose(*kurasov_sarnak())
    h = TestFunction.bspline(6, 1.0)
    v1, t1, i1 = direct_side(F1, h, tol=1e-6)
    v2, _, _ = direct_side(F1, h, radius=2 * i1["radius"])
    assert abs(v1 - v2) <= t1


def test_direct_side_supplied_zeros_need_radius():
    F1 = compose(*poisson())
    with pytest.raises(ValueError):
        direct_side(F1, TestFunction.bspline(6), AtomicMeasure(np.zeros((1, 1)), np.ones(1)))


def test_tail_target_unreachable():
    with pytest.raises(TailBoundError):
        TestFunction.bspline(4, 1.0).radius_for_tail(1e6, tol=1e-300)


def test_kurasov_sarnak_gaussian_two_sided():
    P, M = kurasov_sarnak()
    h = TestFunction.gaussian(1.0)
    direct, tail, _ = direct_side(compose(P, M), h)
    assert np.isfinite(direct)
    steps, gaps = rational_approx_spectrum(P, M, [10, 100], h)
    assert abs(steps[-1].value - direct) < 1e-3
    assert abs(steps[-1].value - direct) < abs(steps[0].value - direct)


# -- lattice route ----------------------------------------------------------------------


def test_lattice_spectrum_examples():
    a = lattice_spectrum(pf_of(Z_MINUS_1), 5)
    assert np.allclose(a.a, 1) and len(a) == 11
    b = lattice_spectrum(pf_of(Z2_MINUS_1), 6)
    assert np.allclose(b.s.ravel() % 2, 0) and np.allclose(b.a, 2)
    assert b.dropped == 6
    c = lattice_spectrum(pf_of(lsys({(1, 0): 1, (0, 0): -1}, {(0, 1): 1, (0, 0): -1})), 3)
    assert np.allclose(c.a, 1) and len(c) == sum(1 for i in range(-3, 4) for j in range(-3, 4) if i * i + j * j <= 9)


def test_spectral_side_poisson():
    pf = pf_of(Z_MINUS_1)
    h = TestFunction.bspline(6, 1.0, center=(0.3,))
    assert abs(spectral_side(pf, h) - sum(h.h([k])[0] for k in range(-5, 6))) < 1e-14


# -- residue route ---------------------------------------------------------------------


def test_residue_examples():
    h = TestFunction.bspline(6, 1.0, center=(0.2,))
    for Q in (Z_MINUS_1, Z2_MINUS_1):
        pf = pf_of(Q)
        direct, tail, _ = direct_side(pf.F, h, pf)
        assert abs(residue_sum(pf, h) - direct) < 1e-8 + tail


def test_residue_rejects_gaussian():
    with pytest.raises(ValueError):
        residue_sum(pf_of(Z_MINUS_1), TestFunction.gaussian())


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_three_routes_agree_random_2d(seed):
    Q = random_periodic_2d(np.random.default_rng(seed))
    pf = pf_of(Q)
    h = TestFunction.bspline(8, 1.0, center=(0.1, -0.3), n=2)
    try:
        direct, tail, _ = direct_side(pf.F, h, pf)
    except TailBoundError:
        reject()  # zeros far off the real axis: the direct sum needs millions of terms
    assert abs(residue_sum(pf, h) - direct) < 1e-8 + tail
    assert abs(spectral_side(pf, h) - direct) < 1e-8 + tail


# -- vertex route ---------------------------------------------------------------------


def test_vertex_constant_terms_z_minus_1():
    # 1/(z - 1) at v=1: z^-1 (1 + z^-1 + ...), so z * that has constant term 1;
    # at v=0: -(1 + z + ...), constant term of z * that is 0
    g = {(1,): 1}
    assert vertex_constant_term(Z_MINUS_1, (1,), g)[0] == pytest.approx(1)
    assert vertex_constant_term(Z_MINUS_1, (0,), g)[0] == pytest.approx(0)


def test_vertex_constant_term_monomial():
    # q = z has no zeros; J/q = 1 and its constant term is 1, weighted by k_v = 0
    Q = lsys({(1,): 1})
    assert vertex_constant_term(Q, (1,))[0] == pytest.approx(1)
    fit = solve_combinatorial_coefficients(Q)
    assert all(k == 0 for k in fit.coefficients.values())


def test_vertex_constant_term_z2_minus_1_matches_residues():
    fit = solve_combinatorial_coefficients(Z2_MINUS_1)
    assert fit.coefficients == {(0,): 1, (2,): -1}
    for e in range(-5, 6):
        g = {(e,): 1}
        total = sum(k * vertex_constant_term(Z2_MINUS_1, v, g)[0] for v, k in fit.coefficients.items())
        residues = sum(z ** e for z in (1, -1))
        assert abs(-total - residues) < 1e-12


def test_vertex_constant_term_rejects_non_vertex_and_small_degree():
    with pytest.raises(ValueError):
        vertex_constant_term(Z2_MINUS_1, (1,))
    with pytest.raises(TailBoundError):
        vertex_constant_term(Z2_MINUS_1, (2,), {(10,): 1}, D=1)


@pytest.mark.parametrize("Q", [
    lsys({(1,): 1, (0,): -2}),
    Z2_MINUS_1,
    # unit square paired with a diamond (two unit squares would be folded)
    lsys({(1, 0): 1, (0, 1): F(1, 3), (1, 1): 2, (0, 0): -1}, {(1, 0): -1, (0, 1): 2, (-1, 0): F(1, 2), (0, -1): 3}),
])
def test_fit_examples(Q):
    fit = solve_combinatorial_coefficients(Q)
    assert all(isinstance(k, int) for k in fit.coefficients.values())
    assert fit.heldout_residual < 1e-9


def test_fit_rejects_folded_unit_squares():
    Q = lsys({(1, 0): 1, (0, 1): F(1, 3), (1, 1): 2, (0, 0): -1}, {(1, 0): -1, (0, 1): 2, (1, 1): F(1, 2), (0, 0): 3})
    with pytest.raises(ValueError, match="unfolded"):
        solve_combinatorial_coefficients(Q)


def test_fit_strict_failure_is_reported():
    # wrong zero list: the identity cannot hold
    from fqlab.zerofind import Zero
    with pytest.raises(CoefficientFitError):
        solve_combinatorial_coefficients(Z2_MINUS_1, zeros=[Zero(np.array([0.5 + 0j]), 1)])


def test_vertex_spectrum_one_dimensional():
    for Q in (Z_MINUS_1, Z2_MINUS_1):
        pf = pf_of(Q)
        worst, ok = compare_spectra(vertex_spectrum(pf, 6), lattice_spectrum(pf, 6))
        assert ok and worst < 1e-7


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_vertex_spectrum_matches_lattice_random_2d(seed):
    pf = pf_of(random_periodic_2d(np.random.default_rng(seed)))
    worst, ok = compare_spectra(vertex_spectrum(pf, 3), lattice_spectrum(pf, 3))
    assert ok and worst < 1e-7


# -- approximations, growth, certificate ---------------------------------------------------


def test_rational_map_gives_constant_sequence():
    P, M = ex42(b=("-1/4", "-1/4"))
    steps, gaps = rational_approx_spectrum(P, M, [10, 50], TestFunction.bspline(8, 1.0, n=2))
    assert len(steps) == 2 and gaps == [0.0]


def test_folded_approximation_needs_a_complete_zero_count():
    # both parallelograms of this example share an edge direction, so the data is folded
    P, M = ex41()
    h = TestFunction.bspline(8, 1.0, n=2)
    assert rational_approx_spectrum(P, M, [10], h)[0] == []
    steps, _ = rational_approx_spectrum(P, M, [10], h, folded="count")
    assert len(steps) == 1 and steps[0].zero_set == "bkk_count_attained"
    assert sum(steps[0].pf.multiplicities) == 41
    st0 = steps[0]
    dval, _, _ = direct_side(compose(P, st0.M), h, st0.pf)
    assert abs(st0.value - dval) < 1e-8


def test_growth_fit_poisson_is_linear():
    # partial sums are 2R + 1, so a finite window biases N slightly above 1
    fit = growth_fit(lattice_spectrum(pf_of(Z_MINUS_1), 40))
    assert fit["N"] == pytest.approx(1, abs=0.15) and fit["margin"] >= 0


def test_certificate_poisson_passes():
    rep = fq_certificate(*poisson())
    assert rep["verdict"] == "pass"
    assert rep["growth_fit"]["N"] == pytest.approx(1, abs=0.15)
    assert rep["abs_gap"] < 1e-8


def test_certificate_refused_for_complex_zeros():
    rep = fq_certificate(*sine_pair(omega=("1", "3/2")))
    assert rep["verdict"] == "refused"


def test_certificate_refused_when_realness_not_confirmed():
    rep = fq_certificate(*poisson(), realness={"verdict": "nonreal zeros present or undecided"})
    assert rep["verdict"] == "refused"
