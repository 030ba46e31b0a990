from fractions import Fraction
from itertools import permutations
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from fqlab.polytope import (LatticePolytope, PolytopeError, PolytopeTuple, bkk_number, box, convex_hull,
                            is_unfolded, is_unfolded_lp, linear_image, minkowski_sum, mixed_volume, scale,
                            segment, volume)

F = Fraction


def verts(P):
    return set(P.vertices)


# -- hulls -------------------------------------------------------------------


def test_interior_point_dropped():
    P = convex_hull([(0,), (1,), (F(1, 2),)])
    assert verts(P) == {(F(0),), (F(1),)}


def test_unit_square_and_rectangle():
    sq = convex_hull([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert len(sq.vertices) == 4
    rect = convex_hull([(0, 0), (1, 0), (0, 2), (1, 2)])
    assert len(rect.vertices) == 4 and volume(rect) == 2


def test_vertices_are_extreme():
    pts = [(0, 0), (4, 0), (0, 4), (4, 4), (1, 1), (2, 3), (4, 2)]
    P = convex_hull(pts)
    for v in P.vertices:
        rest = [w for w in P.vertices if w != v]
        assert verts(convex_hull(rest)) != verts(P)


def test_hull_is_integral_for_laurent_data():
    P = convex_hull([(-1, 2), (3, -1), (0, 0), (2, 2)])
    assert P.is_integral


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10_000))
def test_volume_matches_float_hull(d, seed):
    # oracle: scipy's Qhull on the same points
    rng = np.random.default_rng(seed)
    pts = rng.integers(-6, 7, size=(d + 6, d))
    if np.linalg.matrix_rank(pts[1:] - pts[0]) < d:
        return
    P = convex_hull([tuple(int(x) for x in p) for p in pts])
    H = ConvexHull(pts)
    assert float(volume(P)) == pytest.approx(H.volume, rel=1e-9)
    assert len(P.vertices) == len(H.vertices)


# -- Minkowski sums and volumes ----------------------------------------------


def test_minkowski_examples():
    assert verts(minkowski_sum(segment((0,), (1,)), segment((0,), (1,)))) == {(F(0),), (F(2),)}
    sq = minkowski_sum(segment((0, 0), (1, 0)), segment((0, 0), (0, 1)))
    assert verts(sq) == verts(box([1, 1]))


def test_rhombus_is_sum_of_two_segments():
    b = (F(1, 4), F(1, 4))
    rhombus = convex_hull([(1, 0), (-1, 0), b, (-b[0], -b[1])])
    s = minkowski_sum(segment((0, 0), (1 + b[0], b[1])), segment((0, 0), (1 - b[0], -b[1])))
    shift = (F(-1), F(0))
    assert verts(s.translate(shift)) == verts(rhombus)


def test_volume_examples():
    assert volume(box([1, 1])) == 1
    assert volume(segment((0, 0), (3, 1))) == 0
    assert volume(convex_hull([(0, 0), (2, 0), (0, 3)])) == 3


# -- mixed volumes ---------------------------------------------------------------


def test_mixed_volume_examples():
    sq = box([1, 1])
    assert mixed_volume(PolytopeTuple((sq, sq))) == 1
    assert mixed_volume(PolytopeTuple((box([2, 3]), box([5, 7])))) == F(29, 2)
    assert mixed_volume(PolytopeTuple((segment((0, 0), (1, 0)), segment((0, 0), (0, 1))))) == F(1, 2)


def test_bkk_examples():
    assert bkk_number(PolytopeTuple((segment((0,), (1,)),))) == 1
    assert bkk_number(PolytopeTuple((segment((-1,), (1,)),))) == 2
    rect = convex_hull([(0, 0), (1, 0), (0, 2), (1, 2)])
    assert bkk_number(PolytopeTuple((rect, rect))) == 4


def test_tuple_length_must_match_dimension():
    with pytest.raises(PolytopeError):
        PolytopeTuple((box([1, 1]),))


lattice_pts = st.lists(st.tuples(*[st.integers(-3, 3)] * 2), min_size=1, max_size=5)


def _tuple(pts_list):
    return PolytopeTuple(tuple(convex_hull(p) for p in pts_list))


@settings(max_examples=60, deadline=None)
@given(st.lists(lattice_pts, min_size=2, max_size=2))
def test_symmetry_2d(pl):
    T = _tuple(pl)
    assert mixed_volume(T) == mixed_volume(PolytopeTuple(T.polytopes[::-1]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_permanent_identity_for_boxes(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 5, size=(n, n))
    T = PolytopeTuple(tuple(box([int(x) for x in row]) for row in A))
    perm = sum(np.prod([A[i, s[i]] for i in range(n)]) for s in permutations(range(n)))
    assert factorial(n) * mixed_volume(T) == int(perm)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_segment_determinant(n, seed):
    rng = np.random.default_rng(seed)
    D = rng.integers(-3, 4, size=(n, n))
    T = PolytopeTuple(tuple(segment((0,) * n, tuple(int(x) for x in r)) for r in D))
    det = round(abs(np.linalg.det(D)))
    assert mixed_volume(T) == F(det, factorial(n))


@settings(max_examples=30, deadline=None)
@given(lattice_pts, lattice_pts, lattice_pts, st.fractions(0, 3, max_denominator=4),
       st.fractions(0, 3, max_denominator=4))
def test_minkowski_linearity(p, q, r, lam, mu):
    K, L, K2 = convex_hull(p), convex_hull(q), convex_hull(r)
    lhs = mixed_volume(PolytopeTuple((minkowski_sum(scale(K, lam), scale(L, mu)), K2)))
    rhs = lam * mixed_volume(PolytopeTuple((K, K2))) + mu * mixed_volume(PolytopeTuple((L, K2)))
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(st.lists(lattice_pts, min_size=2, max_size=2))
def test_bkk_is_nonnegative_integer(pl):
    b = bkk_number(_tuple(pl))
    assert isinstance(b, int) and b >= 0


def test_positivity_needs_independent_segments():
    parallel = PolytopeTuple((segment((0, 0), (1, 1)), segment((0, 0), (2, 2))))
    assert mixed_volume(parallel) == 0
    indep = PolytopeTuple((segment((0, 0), (1, 1)), segment((0, 0), (2, -1))))
    assert mixed_volume(indep) > 0
    point = PolytopeTuple((convex_hull([(1, 1)]), box([2, 2])))
    assert mixed_volume(point) == 0


# -- unfolded ------------------------------------------------------------------


def test_unfolded_examples():
    assert is_unfolded(PolytopeTuple((segment((-1,), (1,)),)))
    vert = segment((0, 0), (0, 1))
    cert = is_unfolded(PolytopeTuple((vert, vert)))
    assert not cert
    y = cert.witness
    assert y[1] == 0 and y[0] != 0


def test_unfolded_example_rhombus_data():
    b = (F(1, 4), F(1, 4))
    polys = []
    for j in range(2):
        e = tuple(F(int(i == j)) for i in range(2))
        polys.append(convex_hull([e, tuple(-x for x in e), b, tuple(-x for x in b)]))
    T = PolytopeTuple(tuple(polys))
    assert is_unfolded(T) and is_unfolded_lp(T)


def _witness_ties(T, y):
    for P in T:
        vals = [sum(a * b for a, b in zip(y, v)) for v in P.vertices]
        if vals.count(min(vals)) < 2:
            return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.tuples(*[st.integers(-2, 2)] * 2), min_size=1, max_size=4), min_size=2, max_size=2))
def test_unfolded_agrees_with_lp_oracle(pl):
    T = _tuple(pl)
    a, b = is_unfolded(T), is_unfolded_lp(T)
    assert bool(a) == bool(b)
    if not a:
        assert _witness_ties(T, a.witness)


@settings(max_examples=25, deadline=None)
@given(st.lists(lattice_pts, min_size=2, max_size=2), st.integers(0, 1000))
def test_unfolded_invariant_under_linear_maps(pl, seed):
    rng = np.random.default_rng(seed)
    while True:
        A = rng.integers(-2, 3, size=(2, 2))
        if round(np.linalg.det(A)) != 0:
            break
    T = _tuple(pl)
    TA = PolytopeTuple(tuple(linear_image(P, A.tolist()) for P in T))
    assert bool(is_unfolded(T)) == bool(is_unfolded(TA))


def test_unfolded_3d():
    T = PolytopeTuple((box([1, 1, 1]), box([1, 2, 1]), convex_hull([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])))
    assert bool(is_unfolded(T)) == bool(is_unfolded_lp(T))


def test_polytope_json_roundtrip_strings():
    P = convex_hull([(0, F(1, 2)), (1, 0), (0, 0)])
    js = P.to_json()
    assert js["ambient_dim"] == 2
    assert ["0", "1/2"] in js["vertices"]
    assert isinstance(P, LatticePolytope)
