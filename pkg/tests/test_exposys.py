import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqlab.builders import ex41, ex42, kurasov_sarnak, poisson
from fqlab.exposys import (ExponentMap, GaussianRational, LaurentSystem, SystemFormatError, TrigSystem, compose,
                           group_basis, load_system, period_group, periodic_factorization)
from fqlab.polytope import PolytopeTuple, linear_image

F = Fraction


def zminus1():
    return LaurentSystem(1, ((((1,), 1), ((0,), -1)),), "exact")


def random_laurent(rng, m, n, terms=4, span=2):
    polys = []
    for _ in range(n):
        exps = {tuple(int(x) for x in rng.integers(-span, span + 1, m)) for _ in range(terms)}
        polys.append(tuple((k, complex(*rng.normal(size=2))) for k in sorted(exps)))
    return LaurentSystem(m, tuple(polys))


# -- compose -------------------------------------------------------------------


def test_compose_trivial():
    f = compose(zminus1(), ExponentMap.identity(1))
    assert sorted(f.freqs[0].ravel().tolist()) == [0.0, 1.0]
    assert abs(f.evaluate([0.3])[0] - (np.exp(2j * np.pi * 0.3) - 1)) < 1e-15


def test_compose_kurasov_sarnak_frequencies():
    f = compose(*kurasov_sarnak())
    r2 = np.sqrt(2)
    assert sorted(f.freqs[0].ravel().tolist()) == pytest.approx(sorted([0, 1, 2 * r2, 1 + 2 * r2]), abs=1e-15)


def test_compose_ex42_frequencies():
    f = compose(*ex42(b=("-1/4", "-1/4")))
    got = {tuple(w) for w in np.round(np.concatenate(f.freqs), 12).tolist()}
    assert got == {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (-0.25, -0.25), (0.25, 0.25)}


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose(zminus1(), ExponentMap.identity(2))


def test_compose_newton_data_is_image_under_transpose():
    P, M = ex42(b=("-1/4", "-1/3"))
    f = compose(P, M)
    Mt = [list(r) for r in zip(*M.rational_matrix())]
    expect = PolytopeTuple(tuple(linear_image(Q, Mt) for Q in P.newton_polytopes()))
    got = f.newton_tuple()
    assert [set(a.vertices) for a in got] == [set(b.vertices) for b in expect]


# -- group basis -----------------------------------------------------------------


def test_group_basis_integer_frequencies():
    G = TrigSystem.from_terms(2, [[((0, 0), 1), ((1, 0), -1)], [((0, 0), 1), ((0, 1), 2)]])
    M, P = group_basis(G)
    assert M.m == 2 and M.rank == 2


def test_group_basis_over_declared_generators():
    f = compose(*kurasov_sarnak())
    M, P = group_basis(f, [[(1, 0)], [(0, 1)]])
    assert M.m == 2
    assert {k for k, _ in P.polys[0]} == {(0, 0), (1, 0), (0, 2), (1, 2)}
    g = compose(P, M)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(100, 1)) + 0.3j * rng.normal(size=(100, 1))
    assert np.max(np.abs(g.evaluate(x) - f.evaluate(x))) < 1e-12


def test_group_basis_redundant_generators_collapse():
    G = TrigSystem.from_terms(1, [[((0,), 1), ((1,), -1)]])
    M, P = group_basis(G, [[1], [2]])
    assert M.m == 1


def test_group_basis_rejects_unrepresentable():
    G = TrigSystem.from_terms(1, [[((0,), 1), ((F(1, 2),), -1)]])
    with pytest.raises(ValueError):
        group_basis(G, [[1]])


# -- exponent maps -------------------------------------------------------------


def test_rationality_rank():
    assert ExponentMap.from_rows([[1], ["1.41421356237309504880"]]).rationality_rank == 0
    _, M = ex42()
    # (x, y, b.(x, y)) is integral only at 0 when 1, b_1, b_2 are independent
    assert M.rank == 2 and M.rationality_rank == 0
    _, M = ex42(b=("-1/4", "-1/4"))
    assert M.rationality_rank == 2
    assert ExponentMap.from_rows([[F(1, 2)], [F(1, 3)]]).rationality_rank == 1


def test_convergent_approximation_sqrt2():
    _, M = kurasov_sarnak()
    A = M.rational_approximation(convergent_den=1000)
    assert A.rational_matrix()[1][0] == F(1393, 985)


def test_negative_entries_keep_their_sign():
    _, M = ex42()
    A = M.rational_approximation(convergent_den=10)
    b = A.rational_matrix()[2]
    assert b == [F(-1, 3), F(-3, 8)]


# -- periodic factorization ------------------------------------------------------


def test_factorization_identity_map():
    P = zminus1()
    pf = periodic_factorization(P, ExponentMap.identity(1))
    assert pf.B == [[1]] and pf.Q.polys == P.polys


def test_factorization_half_third():
    P = LaurentSystem(2, ((((1, 0), 1), ((0, 1), 2), ((0, 0), -1)),), "exact")
    pf = periodic_factorization(P, ExponentMap.from_rows([[F(1, 2)], [F(1, 3)]]))
    assert pf.B == [[6]] and pf.N == [[3], [2]]
    assert {k for k, _ in pf.Q.polys[0]} == {(3,), (2,), (0,)}
    assert pf.check_identity() < 1e-12


def test_factorization_ex42_stand_in():
    pf = periodic_factorization(*ex42(b=("-1/4", "-1/4")))
    assert all(float(x).is_integer() for r in pf.N for x in r)
    assert abs(pf.det_B) == 4


def test_factorization_needs_full_rationality_rank():
    with pytest.raises(ValueError):
        periodic_factorization(*kurasov_sarnak())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_factorization_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    m = n + int(rng.integers(0, 2))
    while True:
        rows = [[F(int(rng.integers(-3, 4)), int(rng.integers(1, 4))) for _ in range(n)] for _ in range(m)]
        M = ExponentMap.from_rows(rows)
        if M.rank == n:
            break
    P = random_laurent(rng, m, n)
    try:
        pf = periodic_factorization(P, M)
    except ValueError:
        return  # pushforward cancelled a polynomial
    assert pf.check_identity(n_points=1000, seed=seed) < 1e-10
    N = np.array([[float(x) for x in r] for r in pf.N])
    assert np.allclose(M.float_matrix() @ pf.B_float, N)


# -- period group ----------------------------------------------------------------


def test_period_group_examples():
    assert period_group(compose(zminus1(), ExponentMap.identity(1))) == [[1]]
    assert period_group(compose(*kurasov_sarnak())) == "aperiodic"
    f = compose(zminus1(), ExponentMap.from_rows([[F(1, 2)]]))
    assert period_group(f) == [[2]]
    x = np.array([[0.3 + 0.1j]])
    assert abs(f.evaluate(x + 2) - f.evaluate(x)).max() < 1e-14


# -- evaluation ------------------------------------------------------------------


def test_evaluate_examples():
    P = zminus1()
    assert P.evaluate([1])[0] == 0
    assert P.jacobian([1])[0, 0] == 1
    P41, _ = ex41(n=2, s=("1/2", "-1/3"), b=("-1/4", "-1/5"))
    assert np.allclose(P41.evaluate([1, 1, 1]), 0)


def test_evaluate_rejects_zero_coordinate():
    with pytest.raises(ZeroDivisionError):
        zminus1().evaluate([0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_jacobians_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    P = random_laurent(rng, 2, 2)
    z = np.exp(rng.normal(size=2) * 0.3 + 1j * rng.uniform(0, 6, 2))
    J = P.jacobian(z)
    # central differences: O(h^2) error, forward ones are too crude for large second derivatives
    h = 1e-6
    for i in range(2):
        dz = np.zeros(2, complex)
        dz[i] = h
        fd = (P.evaluate(z + dz) - P.evaluate(z - dz)) / (2 * h)
        assert np.max(np.abs(fd - J[:, i])) <= 1e-6 * (1 + np.max(np.abs(J)))
    f = compose(P, ExponentMap.from_rows([[1, F(1, 2)], [F(-1, 3), 1]]))
    x = rng.normal(size=2) + 0.2j * rng.normal(size=2)
    Jf = f.jacobian(x)
    for i in range(2):
        dx = np.zeros(2, complex)
        dx[i] = h
        fd = (f.evaluate(x + dx) - f.evaluate(x - dx)) / (2 * h)
        assert np.max(np.abs(fd - Jf[:, i])) <= 1e-6 * (1 + np.max(np.abs(Jf)))


def test_evaluation_matches_compensated_sum():
    import math
    P, _ = ex42(b=("-1/4", "-1/4"))
    z = np.array([1.1 + 0.2j, 0.7 - 0.5j, 1.3j])
    got = P.to_double().evaluate(z)
    for j, p in enumerate(P.polys):
        terms = [complex(c) * np.prod(z ** np.array(k)) for k, c in p]
        ref = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
        assert abs(got[j] - ref) <= 1e-13 * max(1.0, max(abs(t) for t in terms))


# -- Laurent system invariants and JSON -------------------------------------------


def test_duplicate_exponents_and_zero_coefficients_rejected():
    with pytest.raises(ValueError):
        LaurentSystem(1, ((((1,), 1), ((1,), 2)),))
    with pytest.raises(ValueError):
        LaurentSystem(1, ((((1,), 0), ((0,), 2)),))


def test_gaussian_rational_arithmetic():
    a = GaussianRational(F(1, 2), F(1, 3))
    b = GaussianRational(F(2), F(-1))
    assert complex(a * b) == pytest.approx(complex(0.5 + 1j / 3) * (2 - 1j))
    assert not (a - a)


def test_load_system_roundtrip(tmp_path):
    doc = {"m": 3, "n": 2,
           "polys": [{"terms": [{"exp": [1, 0, 0], "coef": ["1", "0"]}, {"exp": [0, 0, 1], "coef": ["-1/2", "0"]}]},
                     {"terms": [{"exp": [0, 1, 0], "coef": [1, 0]}, {"exp": [0, 0, 0], "coef": [0, 1]}]}],
           "M": {"rows": [["1", "0"], ["0", "1"], ["-0.31830988618379067153776752674502872406891929148091",
                                                   "-1/3"]]}}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    P, M, gens = load_system(str(path), mode="exact")
    assert P.m == 3 and P.n == 2 and M.m == 3 and gens is None
    # only x = 0, y in 3Z gives an integral third coordinate
    assert M.rationality_rank == 1
    assert not M.is_rational


@pytest.mark.parametrize("doc, where", [
    ({"n": 1, "polys": []}, "$.m"),
    ({"m": 1, "n": 1, "polys": [{"terms": []}]}, "terms"),
    ({"m": 1, "n": 1, "polys": [{"terms": [{"exp": [1, 2], "coef": [1, 0]}]}]}, "exp"),
    ({"m": 1, "n": 1, "polys": [{"terms": [{"exp": [1], "coef": [0, 0]}]}]}, "coef"),
    ({"m": 2, "n": 1, "polys": [{"terms": [{"exp": [1, 0], "coef": [1, 0]}]}]}, "$.M"),
])
def test_load_system_errors_name_the_field(doc, where):
    with pytest.raises(SystemFormatError) as info:
        load_system(doc)
    assert where in str(info.value)


def test_load_system_malformed_json():
    with pytest.raises(SystemFormatError):
        load_system('{"m": 1,')


def test_poisson_builder_period():
    P, M = poisson(period=2)
    assert period_group(compose(P, M)) == [[2]]
