"""Exact lattice polytopes: hulls, Minkowski sums, volumes, mixed volumes.

All arithmetic is over the rationals.  Internally a point set is rescaled to
integer coordinates and its convex hull is found by recursive gift wrapping
(every facet carries the hull of its own points, one dimension down), which
gives the face structure needed for vertices and pulling-fan volumes without
any floating point.

Desk-scale limits: ambient dimension at most 4, and the unfolded test
enumerates candidate directions from pairs of vertex differences, which is
comfortable up to about 12 vertices per polytope in dimension 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from itertools import combinations
from math import factorial, gcd, lcm
from typing import Iterable, Sequence

from . import _exact

__all__ = [
    "LatticePolytope",
    "PolytopeTuple",
    "UnfoldedCertificate",
    "convex_hull",
    "minkowski_sum",
    "volume",
    "mixed_volume",
    "bkk_number",
    "is_unfolded",
    "is_unfolded_lp",
    "scale",
    "linear_image",
    "segment",
    "box",
]

MAX_MIXED_DIM = 4


class PolytopeError(ValueError):
    pass


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _primitive_int(v):
    g = reduce(gcd, v, 0)
    if g == 0:
        return tuple(v)
    return tuple(x // g for x in v)


# ---------------------------------------------------------------------------
# integer gift wrapping


class _Hull:
    """Face structure of a full-dimensional integer point set in R^d.

    ``facets`` holds ``(normal, offset, drop, sub)`` with ``normal . p <= offset``
    for all points, ``drop`` the coordinate removed to project the facet into
    R^(d-1), and ``sub`` the hull of the facet points in those coordinates.
    """

    __slots__ = ("d", "ids", "coords", "facets", "_verts")

    def __init__(self, d, ids, coords):
        self.d = d
        self.ids = ids
        self.coords = coords
        self.facets = []
        self._verts = None

    def vertices(self):
        if self._verts is None:
            if self.d == 0:
                self._verts = frozenset(self.ids)
            else:
                self._verts = frozenset().union(*(f[3].vertices() for f in self.facets))
        return self._verts

    def volume(self, key):
        """d-volume via the pulling fan from the key-smallest vertex."""
        if self.d == 0:
            return Fraction(1)
        v0 = min(self.vertices(), key=key)
        p0 = self.coords[v0]
        total = Fraction(0)
        for normal, offset, drop, sub in self.facets:
            if v0 in sub.ids:
                continue
            height = offset - _dot(normal, p0)
            total += height * sub.volume(key) / abs(normal[drop])
        return total / self.d


def _affine_rank(pts):
    if len(pts) <= 1:
        return 0
    p0 = pts[0]
    return _exact.rank([[a - b for a, b in zip(p, p0)] for p in pts[1:]])


def _build_hull(ids, coords, d):
    h = _Hull(d, tuple(ids), coords)
    if d == 0:
        return h
    if d == 1:
        lo = min(ids, key=lambda i: coords[i][0])
        hi = max(ids, key=lambda i: coords[i][0])
        h.facets = [
            ((-1,), -coords[lo][0], 0, _Hull(0, (lo,), {lo: ()})),
            ((1,), coords[hi][0], 0, _Hull(0, (hi,), {hi: ()})),
        ]
        return h
    normal, offset = _initial_facet(ids, coords, d)
    seen = {normal}
    queue = [(normal, offset)]
    ridges_done = set()
    facets = []
    while queue:
        normal, offset = queue.pop()
        members = [i for i in ids if _dot(normal, coords[i]) == offset]
        drop = next(k for k, x in enumerate(normal) if x != 0)
        sub_coords = {i: coords[i][:drop] + coords[i][drop + 1:] for i in members}
        sub = _build_hull(members, sub_coords, d - 1)
        facets.append((normal, offset, drop, sub))
        for rn, _ro, _rd, ridge in sub.facets:
            key = frozenset(ridge.ids)
            if key in ridges_done:
                continue
            ridges_done.add(key)
            c = rn[:drop] + (0,) + rn[drop:]
            nn, no = _pivot(ids, coords, key, coords[ridge.ids[0]], normal, c)
            if nn not in seen:
                seen.add(nn)
                queue.append((nn, no))
    facets.sort(key=lambda f: f[0])
    h.facets = facets
    return h


def _pivot(ids, coords, ridge, r0, a, c):
    """Rotate the supporting hyperplane ``a`` about ``ridge`` towards ``c``."""
    bestC = bestA = None
    for i in ids:
        if i in ridge:
            continue
        p = coords[i]
        diff = [x - y for x, y in zip(p, r0)]
        A = _dot(a, diff)
        if A == 0:
            continue
        C = _dot(c, diff)
        negA = -A
        if bestC is None or C * bestA > bestC * negA:
            bestC, bestA = C, negA
    n = _primitive_int([bestC * x + bestA * y for x, y in zip(a, c)])
    return n, _dot(n, r0)


def _initial_facet(ids, coords, d):
    if d == 1:
        lo = min(coords[i][0] for i in ids)
        return (-1,), -lo
    proj = {}
    for i in ids:
        proj.setdefault(coords[i][:-1], i)
    pids = list(proj.values())
    pcoords = {i: coords[i][:-1] for i in pids}
    pn, po = _initial_facet(pids, pcoords, d - 1)
    a = pn + (0,)
    face = [i for i in ids if _dot(a, coords[i]) == po]
    fpts = [coords[i] for i in face]
    if _affine_rank(fpts) == d - 1:
        return a, po
    g0 = fpts[0]
    diffs = [[x - y for x, y in zip(p, g0)] for p in fpts[1:]]
    comp = _exact.nullspace(diffs, d) if diffs else _exact.nullspace([], d)
    c = None
    for v in comp:
        vi = _exact.primitive(v)
        if _exact.rank([list(a), list(vi)]) == 2:
            c = vi
            break
    return _pivot(ids, coords, frozenset(face), g0, a, c)


def _int_frame(points):
    """Rescale rational points to integers and project to affine-hull coordinates.

    Returns ``(coords, dim, scale, cols)`` where ``coords`` maps point index to
    an integer tuple in R^dim.
    """
    den = reduce(lcm, (x.denominator for p in points for x in p), 1)
    ints = [tuple(int(x * den) for x in p) for p in points]
    p0 = ints[0]
    diffs = [[a - b for a, b in zip(p, p0)] for p in ints[1:]]
    if diffs:
        _, cols = _exact.rref(diffs)
    else:
        cols = []
    coords = {i: tuple(p[c] for c in cols) for i, p in enumerate(ints)}
    return coords, len(cols), den, cols


# ---------------------------------------------------------------------------
# public types


def _as_point(p):
    return tuple(_exact.to_fraction(x) for x in p)


@dataclass(frozen=True)
class LatticePolytope:
    """Convex polytope given by its (exact rational) vertices.

    Build it with :func:`convex_hull`; the constructor trusts that the given
    vertices are already extreme and only normalises their order.
    """

    vertices: tuple
    ambient_dim: int

    def __post_init__(self):
        verts = tuple(sorted({_as_point(v) for v in self.vertices}))
        if len(verts) != len(self.vertices):
            raise PolytopeError("duplicate vertices")
        if not verts:
            raise PolytopeError("empty polytope")
        if any(len(v) != self.ambient_dim for v in verts):
            raise PolytopeError("vertex dimension mismatch")
        object.__setattr__(self, "vertices", verts)

    def __repr__(self):
        vs = ", ".join("(" + ",".join(str(x) for x in v) + ")" for v in self.vertices)
        return f"LatticePolytope(dim={self.dim}, vertices=[{vs}])"

    @cached_property
    def _frame(self):
        return _int_frame(self.vertices)

    @cached_property
    def _hull(self):
        coords, d, _, _ = self._frame
        return _build_hull(list(range(len(self.vertices))), coords, d)

    @property
    def dim(self) -> int:
        return self._frame[1]

    @property
    def is_integral(self) -> bool:
        return all(x.denominator == 1 for v in self.vertices for x in v)

    @cached_property
    def facet_normals(self):
        """Outward primitive normals (only for full-dimensional polytopes)."""
        if self.dim != self.ambient_dim:
            return ()
        return tuple(tuple(Fraction(x) for x in f[0]) for f in self._hull.facets)

    def support(self, y) -> Fraction:
        """``min_v y . v`` over the vertices."""
        y = _as_point(y)
        return min(_dot(y, v) for v in self.vertices)

    def face(self, y):
        """Vertices minimising ``y . v``."""
        y = _as_point(y)
        vals = [_dot(y, v) for v in self.vertices]
        lo = min(vals)
        return tuple(v for v, s in zip(self.vertices, vals) if s == lo)

    def translate(self, t):
        t = _as_point(t)
        return LatticePolytope(tuple(tuple(a + b for a, b in zip(v, t)) for v in self.vertices),
                               self.ambient_dim)

    def to_json(self):
        return {"ambient_dim": self.ambient_dim,
                "vertices": [[_frac_str(x) for x in v] for v in self.vertices]}


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class PolytopeTuple:
    polytopes: tuple

    def __post_init__(self):
        polys = tuple(self.polytopes)
        object.__setattr__(self, "polytopes", polys)
        if not polys:
            raise PolytopeError("empty tuple")
        n = polys[0].ambient_dim
        if any(p.ambient_dim != n for p in polys):
            raise PolytopeError("ambient dimensions differ")
        if len(polys) != n:
            raise PolytopeError(f"tuple length {len(polys)} != ambient dimension {n}")

    @property
    def n(self):
        return len(self.polytopes)

    def __iter__(self):
        return iter(self.polytopes)

    def __len__(self):
        return len(self.polytopes)

    def __getitem__(self, i):
        return self.polytopes[i]


@dataclass(frozen=True)
class UnfoldedCertificate:
    verdict: bool
    witness: tuple | None = None
    checked_directions: int = 0

    def __bool__(self):
        return self.verdict


# ---------------------------------------------------------------------------
# operations


def convex_hull(points: Iterable[Sequence]) -> LatticePolytope:
    """Vertices of the convex hull of a finite set of rational points."""
    pts = sorted({_as_point(p) for p in points})
    if not pts:
        raise PolytopeError("convex hull of an empty set")
    n = len(pts[0])
    if any(len(p) != n for p in pts):
        raise PolytopeError("points of mixed dimension")
    coords, d, _, _ = _int_frame(pts)
    hull = _build_hull(list(range(len(pts))), coords, d)
    verts = [pts[i] for i in sorted(hull.vertices())]
    poly = LatticePolytope(tuple(verts), n)
    if len(verts) == len(pts):
        # vertex indices coincide with point indices; reuse the hull
        poly.__dict__["_hull"] = hull
    return poly


def segment(a, b) -> LatticePolytope:
    return convex_hull([a, b])


def box(lengths, origin=None) -> LatticePolytope:
    """Axis-parallel box ``prod [o_i, o_i + lengths_i]``."""
    lengths = [_exact.to_fraction(x) for x in lengths]
    origin = [Fraction(0)] * len(lengths) if origin is None else [_exact.to_fraction(x) for x in origin]
    corners = []
    for bits in range(2 ** len(lengths)):
        corners.append([o + (l if bits >> i & 1 else 0) for i, (o, l) in enumerate(zip(origin, lengths))])
    return convex_hull(corners)


def minkowski_sum(A: LatticePolytope, B: LatticePolytope) -> LatticePolytope:
    if A.ambient_dim != B.ambient_dim:
        raise PolytopeError("Minkowski sum of polytopes in different dimensions")
    return convex_hull(tuple(a + b for a, b in zip(u, v)) for u in A.vertices for v in B.vertices)


def scale(P: LatticePolytope, lam) -> LatticePolytope:
    lam = _exact.to_fraction(lam)
    if lam == 0:
        return LatticePolytope(((Fraction(0),) * P.ambient_dim,), P.ambient_dim)
    return convex_hull(tuple(lam * x for x in v) for v in P.vertices)


def linear_image(P: LatticePolytope, A) -> LatticePolytope:
    """Image of ``P`` under the rational matrix ``A`` (rows = output coordinates)."""
    A = [[_exact.to_fraction(x) for x in row] for row in A]
    return convex_hull(tuple(_dot(row, v) for row in A) for v in P.vertices)


def volume(P: LatticePolytope) -> Fraction:
    """Exact n-dimensional volume (zero for lower-dimensional polytopes)."""
    coords, d, den, _ = P._frame
    if d < P.ambient_dim:
        return Fraction(0)
    if P.ambient_dim == 0:
        return Fraction(1)
    key = lambda i: P.vertices[i]
    return P._hull.volume(key) / Fraction(den) ** d


def _as_tuple(T) -> PolytopeTuple:
    return T if isinstance(T, PolytopeTuple) else PolytopeTuple(tuple(T))


def mixed_volume(T) -> Fraction:
    """Mixed volume by the polarization identity.

    ``n! V(K_1..K_n) = sum over nonempty S of (-1)^(n-|S|) vol(sum_{i in S} K_i)``.
    """
    T = _as_tuple(T)
    n = T.n
    if n > MAX_MIXED_DIM:
        raise PolytopeError(f"mixed volume limited to n <= {MAX_MIXED_DIM}")
    sums = {}
    total = Fraction(0)
    for size in range(1, n + 1):
        for S in combinations(range(n), size):
            if size == 1:
                K = T[S[0]]
            else:
                K = minkowski_sum(sums[S[:-1]], T[S[-1]])
            sums[S] = K
            total += (-1) ** (n - size) * volume(K)
    return total / factorial(n)


def bkk_number(T) -> int:
    """``n! V(T)``: torus root count of a Laurent system with this Newton data."""
    T = _as_tuple(T)
    val = factorial(T.n) * mixed_volume(T)
    if val.denominator != 1 or val < 0:
        if all(P.is_integral for P in T):
            raise ArithmeticError(f"non-integral BKK number {val} for lattice polytopes")
        raise PolytopeError("BKK number requires integer vertices")
    return int(val)


def _ties(P: LatticePolytope, y) -> bool:
    """True if ``y`` has more than one minimising vertex on ``P``."""
    best = None
    count = 0
    for v in P.vertices:
        s = _dot(y, v)
        if best is None or s < best:
            best, count = s, 1
        elif s == best:
            count += 1
    return count > 1


def _candidate_directions(T: PolytopeTuple):
    """Rays of the common refinement of the normal fans (superset)."""
    n = T.n
    dirs = set()
    for P in T:
        den = reduce(lcm, (x.denominator for v in P.vertices for x in v), 1)
        verts = [tuple(int(x * den) for x in v) for v in P.vertices]
        for u, w in combinations(verts, 2):
            d = _primitive_int([a - b for a, b in zip(u, w)])
            if d[next(k for k, x in enumerate(d) if x)] < 0:
                d = tuple(-x for x in d)
            dirs.add(d)
    dirs = sorted(dirs)
    out = []
    seen = set()

    def emit(v):
        p = _exact.primitive(v)
        for s in (p, tuple(-x for x in p)):
            if any(s) and s not in seen:
                seen.add(s)
                out.append(s)

    r = _exact.rank(dirs) if dirs else 0
    if r < n:
        for v in _exact.nullspace(dirs, n) if dirs else _exact.nullspace([], n):
            emit(v)
    if n == 1:
        emit([1])
    for sub in combinations(dirs, n - 1):
        if n - 1 == 0:
            continue
        ns = _exact.nullspace(list(sub), n)
        if len(ns) == 1:
            emit(ns[0])
    return out


def is_unfolded(T) -> UnfoldedCertificate:
    """Decide whether every direction ``y != 0`` has a unique minimising vertex in some ``N_j``.

    The bad set of each polytope is a union of cones of its normal fan, so a
    common bad direction exists iff one exists among the rays of the common
    refinement; those rays are orthogonal to ``n - 1`` independent vertex
    differences, which we enumerate exactly.
    """
    T = _as_tuple(T)
    if any(len(P.vertices) == 1 for P in T):
        # a singleton vertex set satisfies the strict inequality vacuously
        return UnfoldedCertificate(True, None, 0)
    checked = 0
    for y in _candidate_directions(T):
        checked += 1
        if all(_ties(P, y) for P in T):
            return UnfoldedCertificate(False, tuple(Fraction(x) for x in y), checked)
    return UnfoldedCertificate(True, None, checked)


def is_unfolded_lp(T) -> UnfoldedCertificate:
    """Reference decision by exact LP over pairs of vertex cones.

    For every choice of one vertex pair ``(u_j, w_j)`` per polytope, test whether
    ``{y != 0 : y.u_j = y.w_j <= y.x for all x in V_j}`` is nonempty.  Much
    slower than :func:`is_unfolded`; kept as an independent oracle.
    """
    from ._lp import nonzero_cone_point

    T = _as_tuple(T)
    if any(len(P.vertices) == 1 for P in T):
        return UnfoldedCertificate(True, None, 0)
    n = T.n
    pair_lists = [list(combinations(P.vertices, 2)) for P in T]
    checked = 0

    def rec(j, ge, eq):
        nonlocal checked
        if j == n:
            checked += 1
            return nonzero_cone_point(ge, eq, n)
        P = T[j]
        for u, w in pair_lists[j]:
            ge2 = ge + [[x - a for x, a in zip(v, u)] for v in P.vertices if v != u]
            eq2 = eq + [[a - b for a, b in zip(u, w)]]
            if nonzero_cone_point(ge2, eq2, n) is None:
                continue
            y = rec(j + 1, ge2, eq2)
            if y is not None:
                return y
        return None

    y = rec(0, [], [])
    if y is None:
        return UnfoldedCertificate(True, None, checked)
    return UnfoldedCertificate(False, tuple(y), checked)
