"""Laurent systems, trigonometric systems and the maps between them.

A Laurent system ``P = (p_1..p_n)`` on the torus ``C*^m`` becomes a
trigonometric system on ``C^n`` by composing with ``x -> exp(2 pi i M x)``.
When the exponent map ``M`` is rational with a full-rank rational kernel
lattice, the result is periodic and factors as ``F(Bx) = Q(exp(2 pi i x))``
with ``Q`` a square Laurent system; :func:`periodic_factorization` computes
``B`` and ``Q`` exactly.

Real numbers that are not rational enter only as *declared constants*:
decimal strings carried at 50 significant digits.  A matrix entry is stored
as rational coordinates over the basis ``(1, c_1, c_2, ...)`` of declared
constants, and any independence of the constants is an input assumption.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from math import lcm
from typing import Sequence

import mpmath
import numpy as np

from . import _exact
from .polytope import PolytopeTuple, convex_hull

__all__ = [
    "GaussianRational",
    "LaurentSystem",
    "ExponentMap",
    "TrigSystem",
    "PeriodicFactorization",
    "compose",
    "group_basis",
    "periodic_factorization",
    "period_group",
    "evaluate",
    "jacobian",
    "load_system",
    "SystemFormatError",
]

CONST_DIGITS = 50
_MP_DPS = 60


class SystemFormatError(ValueError):
    """Malformed system description; ``path`` names the offending field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class GaussianRational:
    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", _exact.to_fraction(self.re))
        object.__setattr__(self, "im", _exact.to_fraction(self.im))

    @classmethod
    def coerce(cls, x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        return cls(_exact.to_fraction(x))

    def __add__(self, o):
        o = GaussianRational.coerce(o)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, o):
        return self + (-GaussianRational.coerce(o))

    def __mul__(self, o):
        o = GaussianRational.coerce(o)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return str(self.re)
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _coef(x, mode):
    if mode == "exact":
        return GaussianRational.coerce(x)
    return complex(x)


def _parse_coef(raw, path, mode):
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise SystemFormatError(path, "coefficient must be [re, im]")
        re_, im_ = raw
    else:
        re_, im_ = raw, 0
    try:
        if mode == "exact":
            return GaussianRational(_exact.to_fraction(re_), _exact.to_fraction(im_))
        return complex(float(Fraction(re_) if isinstance(re_, str) else re_),
                       float(Fraction(im_) if isinstance(im_, str) else im_))
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise SystemFormatError(path, f"bad coefficient {raw!r}") from exc


# ---------------------------------------------------------------------------
# Laurent systems


def _merge_terms(terms, mode):
    acc = {}
    for k, c in terms:
        k = tuple(int(x) for x in k)
        acc[k] = acc[k] + c if k in acc else c
    out = []
    for k in sorted(acc):
        c = acc[k]
        if mode == "exact":
            if c:
                out.append((k, c))
        elif c != 0:
            out.append((k, c))
    return tuple(out)


@dataclass(frozen=True)
class LaurentSystem:
    """``n`` Laurent polynomials in ``m`` torus variables.

    ``polys[j]`` is a tuple of ``(exponent, coefficient)`` pairs with distinct
    integer exponents (sorted) and nonzero coefficients.  ``mode`` is
    ``"exact"`` (GaussianRational) or ``"double"`` (complex).
    """

    m: int
    polys: tuple
    mode: str = "double"

    def __post_init__(self):
        if self.mode not in ("exact", "double"):
            raise ValueError(f"unknown coefficient mode {self.mode!r}")
        polys = []
        for j, p in enumerate(self.polys):
            terms = [(k, _coef(c, self.mode)) for k, c in (p.items() if isinstance(p, dict) else p)]
            for k, _ in terms:
                if len(k) != self.m:
                    raise ValueError(f"poly {j}: exponent {k} not in Z^{self.m}")
            if len({tuple(k) for k, _ in terms}) != len(terms):
                raise ValueError(f"poly {j}: duplicate exponents")
            merged = _merge_terms(terms, self.mode)
            if len(merged) != len(terms):
                raise ValueError(f"poly {j}: zero coefficient")
            polys.append(merged)
        object.__setattr__(self, "polys", tuple(polys))

    @property
    def n(self):
        return len(self.polys)

    def spectrum(self, j):
        return [k for k, _ in self.polys[j]]

    def newton_polytopes(self):
        return tuple(convex_hull(self.spectrum(j)) for j in range(self.n))

    def newton_tuple(self) -> PolytopeTuple:
        if self.m != self.n:
            raise ValueError("Newton tuple needs a square system (m == n)")
        return PolytopeTuple(self.newton_polytopes())

    def to_double(self) -> "LaurentSystem":
        if self.mode == "double":
            return self
        return LaurentSystem(self.m, tuple(tuple((k, complex(c)) for k, c in p) for p in self.polys), "double")

    @cached_property
    def _arrays(self):
        return [(np.array([k for k, _ in p], dtype=np.int64).reshape(len(p), self.m),
                 np.array([complex(c) for _, c in p], dtype=complex)) for p in self.polys]

    def _monomials(self, Z, E):
        # Z: (N, m), E: (T, m) -> (N, T)
        out = np.ones((Z.shape[0], E.shape[0]), dtype=complex)
        for i in range(self.m):
            col = E[:, i]
            if np.any(col):
                out *= Z[:, i:i + 1] ** col[None, :]
        return out

    def evaluate(self, z):
        """Values at ``z`` (shape ``(m,)`` or ``(N, m)``)."""
        Z = np.asarray(z, dtype=complex)
        single = Z.ndim == 1
        Z = Z.reshape(-1, self.m)
        if np.any(Z == 0):
            raise ZeroDivisionError("Laurent evaluation at a point with a zero coordinate")
        out = np.empty((Z.shape[0], self.n), dtype=complex)
        for j, (E, c) in enumerate(self._arrays):
            out[:, j] = self._monomials(Z, E) @ c
        return out[0] if single else out

    def jacobian(self, z):
        """``d p_j / d z_i`` at ``z``; shape ``(n, m)`` or ``(N, n, m)``."""
        Z = np.asarray(z, dtype=complex)
        single = Z.ndim == 1
        Z = Z.reshape(-1, self.m)
        if np.any(Z == 0):
            raise ZeroDivisionError("Laurent evaluation at a point with a zero coordinate")
        out = np.empty((Z.shape[0], self.n, self.m), dtype=complex)
        for j, (E, c) in enumerate(self._arrays):
            mono = self._monomials(Z, E)
            for i in range(self.m):
                out[:, j, i] = (mono * E[None, :, i]) @ c / Z[:, i]
        return out[0] if single else out

    def pushforward(self, N) -> "LaurentSystem":
        """``P(z^{N})``: substitute ``z_i = prod_j w_j^{N_ij}``; exponent ``k -> N^T k``."""
        Nt = _exact.transpose(N)
        polys = []
        for p in self.polys:
            terms = [(tuple(int(sum(a * b for a, b in zip(row, k))) for row in Nt), c) for k, c in p]
            polys.append(_merge_terms(terms, self.mode))
        if any(len(p) == 0 for p in polys):
            raise ValueError("pushforward cancelled a whole polynomial")
        return LaurentSystem(len(Nt), tuple(polys), self.mode)

    def to_json(self):
        def c(x):
            if isinstance(x, GaussianRational):
                return [str(x.re), str(x.im)]
            return [repr(float(x.real)), repr(float(x.imag))]
        return {"m": self.m, "n": self.n,
                "polys": [{"terms": [{"exp": list(k), "coef": c(v)} for k, v in p]} for p in self.polys]}


# ---------------------------------------------------------------------------
# exponent maps over declared constants


def _normalise_decimal(s):
    with mpmath.workdps(_MP_DPS):
        return mpmath.nstr(abs(mpmath.mpf(s)), CONST_DIGITS, strip_zeros=False)


def _parse_entry(x):
    """Return ``(sign*Fraction, None)`` for rationals or ``(sign, const_string)``."""
    if isinstance(x, Fraction) or isinstance(x, int):
        return Fraction(x), None
    if isinstance(x, float):
        return Fraction(x), None
    s = str(x).strip()
    if any(ch in s for ch in ".eE") and "/" not in s:
        sign = -1 if s.startswith("-") else 1
        return Fraction(sign), _normalise_decimal(s.lstrip("+-"))
    return Fraction(s), None


@dataclass(frozen=True)
class ExponentMap:
    """Real ``m x n`` matrix with exact coordinates over declared constants.

    ``coords[i][j]`` is a tuple of Fractions ``(a_0, a_1, ...)`` meaning
    ``a_0 + a_1 c_1 + ...`` where ``c_k = float(basis[k])``; ``basis[0]`` is
    ``"1"``.
    """

    coords: tuple
    basis: tuple = ("1",)

    def __post_init__(self):
        b = len(self.basis)
        coords = tuple(tuple(tuple(Fraction(a) for a in e) + (Fraction(0),) * (b - len(e)) for e in row)
                       for row in self.coords)
        object.__setattr__(self, "coords", coords)
        if self.basis[0] != "1":
            raise ValueError("basis[0] must be '1'")
        ncols = {len(r) for r in coords}
        if len(ncols) > 1:
            raise ValueError("ragged exponent map")

    @classmethod
    def from_rows(cls, rows, basis=None):
        """Entries: ints, Fractions, floats (taken exactly), ``"p/q"`` strings,
        or decimal strings (declared constants)."""
        basis = list(basis or ["1"])
        index = {s: i for i, s in enumerate(basis)}
        parsed = []
        for row in rows:
            prow = []
            for x in row:
                val, const = _parse_entry(x)
                if const is None:
                    prow.append({0: val})
                else:
                    if const not in index:
                        index[const] = len(basis)
                        basis.append(const)
                    prow.append({index[const]: val})
            parsed.append(prow)
        b = len(basis)
        coords = tuple(tuple(tuple(e.get(k, Fraction(0)) for k in range(b)) for e in row) for row in parsed)
        return cls(coords, tuple(basis))

    @classmethod
    def identity(cls, n):
        return cls(tuple(tuple((Fraction(int(i == j)),) for j in range(n)) for i in range(n)))

    @property
    def m(self):
        return len(self.coords)

    @property
    def n(self):
        return len(self.coords[0]) if self.coords else 0

    @property
    def is_rational(self):
        return all(not any(e[1:]) for row in self.coords for e in row)

    def rational_matrix(self):
        if not self.is_rational:
            raise ValueError("exponent map has irrational entries")
        return [[e[0] for e in row] for row in self.coords]

    @cached_property
    def _const_values(self):
        with mpmath.workdps(_MP_DPS):
            return tuple(mpmath.mpf(1) if i == 0 else mpmath.mpf(s) for i, s in enumerate(self.basis))

    def mp_matrix(self):
        vals = self._const_values
        with mpmath.workdps(_MP_DPS):
            return mpmath.matrix([[mpmath.fsum(mpmath.mpf(a.numerator) / a.denominator * v
                                               for a, v in zip(e, vals) if a)
                                   for e in row] for row in self.coords])

    def float_matrix(self):
        vals = [float(v) for v in self._const_values]
        return np.array([[float(sum(float(a) * v for a, v in zip(e, vals))) for e in row]
                         for row in self.coords], dtype=float).reshape(self.m, self.n)

    def _sympy_matrix(self):
        import sympy as sp
        syms = [sp.Integer(1)] + [sp.Symbol(f"c{k}") for k in range(1, len(self.basis))]
        return sp.Matrix([[sum(sp.Rational(a.numerator, a.denominator) * s for a, s in zip(e, syms))
                           for e in row] for row in self.coords]), syms[1:]

    @cached_property
    def rank(self) -> int:
        if self.is_rational:
            return _exact.rank(self.rational_matrix())
        M, _ = self._sympy_matrix()
        return M.rank(simplify=True)

    @cached_property
    def rationality_rank(self) -> int:
        """``rank(Z^m intersect M R^n)``.

        A rational vector lies in the column space iff it is orthogonal to the
        left kernel of ``M``.  Declared constants are treated as algebraically
        independent, so kernel vectors split into rational parts per monomial.
        """
        if self.is_rational:
            return self.rank
        import sympy as sp
        M, syms = self._sympy_matrix()
        kernel = M.T.nullspace(simplify=True)
        rows = []
        for u in kernel:
            den = reduce(sp.lcm, [sp.fraction(sp.together(x))[1] for x in u], sp.Integer(1))
            polys = [sp.Poly(sp.expand(sp.cancel(x * den)), *syms) for x in u]
            monos = sorted({mono for p in polys for mono in p.as_dict()})
            for mono in monos:
                rows.append([Fraction(str(p.as_dict().get(mono, 0))) for p in polys])
        if not rows:
            return self.m
        return self.m - _exact.rank(rows)

    def apply_transpose(self, k):
        """``M^T k`` as exact coordinate tuples (one per output coordinate)."""
        b = len(self.basis)
        out = []
        for j in range(self.n):
            acc = [Fraction(0)] * b
            for i, ki in enumerate(k):
                if ki:
                    for t in range(b):
                        acc[t] += ki * self.coords[i][j][t]
            out.append(tuple(acc))
        return tuple(out)

    def coord_value(self, e):
        vals = self._const_values
        with mpmath.workdps(_MP_DPS):
            return mpmath.fsum(mpmath.mpf(a.numerator) / a.denominator * v for a, v in zip(e, vals) if a)

    def rational_approximation(self, q=None, *, convergent_den=None):
        """Rational map close to this one.

        With ``q`` each entry is rounded to ``round(q x)/q``; with
        ``convergent_den`` each entry becomes the best rational approximation
        with denominator at most that bound (a continued-fraction convergent
        or semiconvergent).
        """
        rows = []
        with mpmath.workdps(_MP_DPS):
            for row in self.coords:
                r = []
                for e in row:
                    if not any(e[1:]):
                        r.append(e[0])
                        continue
                    x = self.coord_value(e)
                    exact = _mpf_to_fraction(x)
                    if convergent_den is not None:
                        r.append(exact.limit_denominator(convergent_den))
                    else:
                        r.append(Fraction(round(exact * q), q))
                rows.append(r)
        return ExponentMap.from_rows(rows)

    def entry_strings(self):
        def s(e):
            parts = []
            for a, name in zip(e, self.basis):
                if a:
                    parts.append(str(a) if name == "1" else f"{a}*{name}")
            return " + ".join(parts) if parts else "0"
        return [[s(e) for e in row] for row in self.coords]

    def to_json(self):
        return {"rows": self.entry_strings(), "basis": list(self.basis),
                "rank": self.rank, "rationality_rank": self.rationality_rank}


# ---------------------------------------------------------------------------
# trigonometric systems


@dataclass(frozen=True)
class TrigSystem:
    """``f_j(x) = sum_w c_w exp(2 pi i w . x)`` on ``C^n``.

    ``freqs[j]`` is a float array ``(T_j, n)``; ``coefs[j]`` a complex array.
    When built by :func:`compose` the factored form ``(laurent, emap)`` is kept
    together with exact frequency coordinates over ``emap.basis``.
    """

    n: int
    freqs: tuple
    coefs: tuple
    laurent: LaurentSystem | None = None
    emap: ExponentMap | None = None
    exact_freqs: tuple | None = None
    basis: tuple = ("1",)

    def __post_init__(self):
        object.__setattr__(self, "freqs", tuple(np.asarray(w, dtype=float).reshape(-1, self.n) for w in self.freqs))
        object.__setattr__(self, "coefs", tuple(np.asarray(c, dtype=complex).ravel() for c in self.coefs))
        for j, (w, c) in enumerate(zip(self.freqs, self.coefs)):
            if w.shape[0] != c.shape[0]:
                raise ValueError(f"f_{j}: {w.shape[0]} frequencies but {c.shape[0]} coefficients")
            if np.any(c == 0):
                raise ValueError(f"f_{j}: zero coefficient")
        if len(self.freqs) != self.n:
            raise ValueError("TrigSystem needs n component functions")

    @classmethod
    def from_terms(cls, n, polys):
        """``polys[j]`` = list of ``(frequency, coefficient)``; frequencies exact or float."""
        exact = []
        all_exact = True
        freqs, coefs = [], []
        for p in polys:
            freqs.append([[float(x) for x in w] for w, _ in p])
            coefs.append([complex(c) for _, c in p])
            try:
                exact.append(tuple(tuple((_exact.to_fraction(x),) for x in w) for w, _ in p))
            except (TypeError, ValueError):
                all_exact = False
            if any(isinstance(x, float) for w, _ in p for x in w):
                all_exact = False
        return cls(n, tuple(freqs), tuple(coefs), exact_freqs=tuple(exact) if all_exact else None)

    @property
    def is_factored(self):
        return self.laurent is not None

    def newton_tuple(self) -> PolytopeTuple:
        """Exact when frequencies are rational; otherwise from exact coordinates.

        Irrational frequencies have no exact rational hull, so the tuple is
        built from the Laurent data pushed through ``M^T`` in float-free form
        only when ``M`` is rational; else a ``ValueError`` asks for
        :meth:`newton_tuple_approx`.
        """
        if self.exact_freqs is not None and len(self.basis) == 1:
            return PolytopeTuple(tuple(convex_hull([tuple(e[0] for e in w) for w in fw])
                                       for fw in self.exact_freqs))
        raise ValueError("irrational frequencies: use newton_tuple_approx")

    def newton_tuple_approx(self, den=10 ** 30) -> PolytopeTuple:
        """Newton tuple of a 30-digit rational rounding of the frequencies."""
        if self.exact_freqs is not None:
            polys = []
            for fw in self.exact_freqs:
                pts = []
                for w in fw:
                    pts.append(tuple(_round_mp(_coord_value(e, self.basis), den) for e in w))
                polys.append(convex_hull(pts))
            return PolytopeTuple(tuple(polys))
        return PolytopeTuple(tuple(convex_hull([tuple(Fraction(x).limit_denominator(den) for x in row)
                                                for row in w]) for w in self.freqs))

    def evaluate(self, x):
        X = np.asarray(x, dtype=complex)
        single = X.ndim == 1
        X = X.reshape(-1, self.n)
        out = np.empty((X.shape[0], self.n), dtype=complex)
        for j, (w, c) in enumerate(zip(self.freqs, self.coefs)):
            out[:, j] = np.exp(2j * np.pi * (X @ w.T)) @ c
        return out[0] if single else out

    def jacobian(self, x):
        X = np.asarray(x, dtype=complex)
        single = X.ndim == 1
        X = X.reshape(-1, self.n)
        out = np.empty((X.shape[0], self.n, self.n), dtype=complex)
        for j, (w, c) in enumerate(zip(self.freqs, self.coefs)):
            E = np.exp(2j * np.pi * (X @ w.T)) * c[None, :]
            out[:, j, :] = 2j * np.pi * (E @ w)
        return out[0] if single else out

    def eval_and_jacobian(self, X):
        """Batched values ``(N, n)`` and Jacobians ``(N, n, n)`` sharing the exponentials."""
        X = np.asarray(X, dtype=complex).reshape(-1, self.n)
        vals = np.empty((X.shape[0], self.n), dtype=complex)
        jac = np.empty((X.shape[0], self.n, self.n), dtype=complex)
        for j, (w, c) in enumerate(zip(self.freqs, self.coefs)):
            E = np.exp(2j * np.pi * (X @ w.T)) * c[None, :]
            vals[:, j] = E.sum(axis=1)
            jac[:, j, :] = 2j * np.pi * (E @ w)
        return vals, jac


def _coord_value(e, basis):
    with mpmath.workdps(_MP_DPS):
        return mpmath.fsum(mpmath.mpf(a.numerator) / a.denominator * (mpmath.mpf(1) if i == 0 else mpmath.mpf(basis[i]))
                           for i, a in enumerate(e) if a)


def _mpf_to_fraction(x):
    x = mpmath.mpf(x)
    man, exp = x.man_exp  # mantissa comes back unsigned
    f = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -f if x < 0 else f


def _round_mp(x, den):
    with mpmath.workdps(_MP_DPS):
        return Fraction(int(mpmath.nint(x * den)), den)


def evaluate(S, point):
    return S.evaluate(point)


def jacobian(S, point):
    return S.jacobian(point)


def compose(P: LaurentSystem, M: ExponentMap) -> TrigSystem:
    """``F = P o exp(2 pi i M x)``: frequencies ``M^T k`` for ``k`` in each spectrum."""
    if P.m != M.m:
        raise ValueError(f"Laurent system lives on C*^{P.m} but M has {M.m} rows")
    if P.n != M.n:
        raise ValueError(f"system has {P.n} equations but M has {M.n} columns")
    freqs, coefs, exact = [], [], []
    for p in P.polys:
        ex = [M.apply_transpose(k) for k, _ in p]
        exact.append(tuple(ex))
        freqs.append(np.array([[float(M.coord_value(e)) for e in w] for w in ex], dtype=float).reshape(len(p), M.n))
        coefs.append(np.array([complex(c) for _, c in p], dtype=complex))
    return TrigSystem(M.n, tuple(freqs), tuple(coefs), laurent=P, emap=M,
                      exact_freqs=tuple(exact), basis=M.basis)


# ---------------------------------------------------------------------------
# group basis


def _flatten(vec_coords, b):
    out = []
    for e in vec_coords:
        out.extend(tuple(e) + (Fraction(0),) * (b - len(e)))
    return out


def group_basis(F: TrigSystem, declared_generators: Sequence | None = None):
    """Integer basis for the frequencies of ``F`` and the matching Laurent data.

    Frequencies are exact vectors over ``F.basis``.  If ``declared_generators``
    (exact vectors over the same basis) are given, every frequency must be an
    integer combination of them and the returned rows of ``M`` form a basis of
    the group they generate; otherwise the rows span the group generated by
    the frequencies themselves.  Rows are independent over Q in both cases.
    """
    if F.exact_freqs is None:
        raise ValueError("group_basis needs exact frequency coordinates")
    n = F.n
    b = len(F.basis)
    flat_freqs = [_flatten(w, b) for fw in F.exact_freqs for w in fw]
    if declared_generators is not None:
        gens = [_flatten([e if isinstance(e, tuple) else (_exact.to_fraction(e),) for e in g], b)
                for g in declared_generators]
    else:
        gens = flat_freqs
    den = reduce(lcm, (x.denominator for r in gens for x in r), 1)
    H = _exact.row_lattice_basis([[int(x * den) for x in r] for r in gens])
    basis_rows = [[Fraction(x, den) for x in r] for r in H]
    m = len(basis_rows)
    # express each frequency in the basis: solve k^T basis = w
    exps = []
    for fw in F.exact_freqs:
        ks = []
        for w in fw:
            flat = _flatten(w, b)
            k = _solve_left(basis_rows, flat)
            if k is None or any(x.denominator != 1 for x in k):
                raise ValueError(f"frequency {w} is not an integer combination of the generators")
            ks.append(tuple(int(x) for x in k))
        exps.append(ks)
    coords = tuple(tuple(tuple(r[j * b:(j + 1) * b]) for j in range(n)) for r in basis_rows)
    M = ExponentMap(coords, F.basis)
    P = LaurentSystem(m, tuple(tuple(zip(ks, c)) for ks, c in zip(exps, F.coefs)), "double")
    return M, P


def _solve_left(rows, target):
    """Solve ``sum_i k_i rows[i] = target`` exactly; None if inconsistent."""
    A = _exact.transpose(rows)
    aug = [list(r) + [t] for r, t in zip(A, target)]
    R, piv = _exact.rref(aug)
    nvar = len(rows)
    if nvar in piv:
        return None
    k = [Fraction(0)] * nvar
    for i, p in enumerate(piv):
        k[p] = R[i][-1]
    return k


# ---------------------------------------------------------------------------
# periodic factorization


@dataclass
class PeriodicFactorization:
    """``F(Bx) = Q(exp(2 pi i x))`` with ``N = M B`` integral.

    Cosets ``mu_l`` (with ``exp(2 pi i mu_l)`` the zeros of ``Q``) and their
    multiplicities are filled lazily by :meth:`populate_cosets`.
    """

    B: list
    N: list
    Q: LaurentSystem
    F: TrigSystem | None = None
    cosets: list | None = None
    multiplicities: list | None = None
    coset_source: str = ""

    @property
    def n(self):
        return len(self.B)

    @cached_property
    def B_float(self):
        return np.array([[float(x) for x in r] for r in self.B], dtype=float).reshape(self.n, self.n)

    @cached_property
    def det_B(self) -> Fraction:
        return _exact.det(self.B)

    @cached_property
    def B_inv_T(self):
        return np.linalg.inv(self.B_float).T

    @property
    def L(self):
        return None if self.cosets is None else len(self.cosets)

    def populate_cosets(self, method="auto"):
        """Fill ``cosets`` from the zeros of ``Q`` (torus zeros mapped by ``log/(2 pi i)``)."""
        if self.cosets is not None:
            return self
        from .zerofind import laurent_zeros, torus_zeros
        if method == "auto":
            method = "laurent" if self.n <= 2 and _degree_size(self.Q) <= 60 else "torus"
        if method == "laurent":
            zs = laurent_zeros(self.Q)
            self.coset_source = "laurent_zeros"
        else:
            zs = torus_zeros(self.Q)
            self.coset_source = "fundamental_domain_scan"
        mus, mults = [], []
        for z in zs:
            mu = np.log(np.asarray(z.location, dtype=complex)) / (2j * np.pi)
            # real parts into [0, 1)
            mu = (mu.real % 1.0) + 1j * mu.imag
            mu = np.where(np.abs(mu.real - 1.0) < 1e-13, mu - 1.0, mu)
            mus.append(mu)
            mults.append(z.multiplicity)
        order = sorted(range(len(mus)), key=lambda i: tuple(np.round(mus[i].real, 12)) + tuple(np.round(mus[i].imag, 12)))
        self.cosets = [mus[i] for i in order]
        self.multiplicities = [mults[i] for i in order]
        return self

    def zeros_in_box(self, lo, hi):
        """Points of ``B Z^n + B mu_l`` with real part in the box ``[lo, hi]``."""
        self.populate_cosets()
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        Binv = np.linalg.inv(self.B_float)
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(self.n, -1).T
        tc = corners @ Binv.T
        kmin = np.floor(tc.min(axis=0)) - 2
        kmax = np.ceil(tc.max(axis=0)) + 2
        grids = np.array(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(kmin, kmax)], indexing="ij")).reshape(self.n, -1).T
        pts, mults = [], []
        for mu, m in zip(self.cosets, self.multiplicities):
            lam = (grids + mu[None, :]) @ self.B_float.T
            re = lam.real
            keep = np.all((re >= lo - 1e-12) & (re <= hi + 1e-12), axis=1)
            pts.append(lam[keep])
            mults.extend([m] * int(keep.sum()))
        if not pts:
            return np.zeros((0, self.n), complex), []
        return np.concatenate(pts), mults

    def check_identity(self, n_points=1000, seed=0, im_scale=1.0):
        """Max ``|F(Bx) - Q(exp(2 pi i x))|`` at random complex points."""
        if self.F is None:
            raise ValueError("no trigonometric system attached")
        rng = np.random.default_rng(seed)
        X = rng.uniform(-3, 3, (n_points, self.n)) + 1j * rng.uniform(-im_scale, im_scale, (n_points, self.n))
        lhs = self.F.evaluate(X @ self.B_float.T)
        rhs = self.Q.to_double().evaluate(np.exp(2j * np.pi * X))
        scale = 1.0 + np.max(np.abs(rhs))
        return float(np.max(np.abs(lhs - rhs)) / scale)


def _degree_size(Q):
    return max(max(abs(x) for k in Q.spectrum(j) for x in k) for j in range(Q.n)) * Q.n


def _lattice_reduce_2d(N):
    """Gauss-reduce the two columns of an integer matrix (same lattice)."""
    cols = [list(c) for c in zip(*N)]
    u, v = cols
    dot = lambda a, b: sum(x * y for x, y in zip(a, b))
    for _ in range(1000):
        if dot(u, u) > dot(v, v):
            u, v = v, u
        q = round(Fraction(dot(u, v), dot(u, u)))
        if q == 0:
            break
        v = [b - q * a for a, b in zip(u, v)]
    return [[u[i], v[i]] for i in range(len(u))]


def periodic_factorization(P: LaurentSystem, M: ExponentMap, reduce_basis=True) -> PeriodicFactorization:
    """Exact ``B``, ``N = M B`` and ``Q = P o N~`` for rational ``M`` with ``r(M) = n``.

    ``N``'s columns are a basis of ``Z^m intersect M R^n``: after clearing
    denominators, the Smith form ``S = U (D M) V`` shows the column space is
    spanned by the first ``n`` columns of ``U^{-1}``, which extend to a
    unimodular basis and so are saturated.
    """
    if not M.is_rational:
        raise ValueError("periodic factorization needs a rational exponent map")
    n, m = M.n, M.m
    if P.m != m or P.n != n:
        raise ValueError("dimension mismatch between system and exponent map")
    Mq = M.rational_matrix()
    if M.rationality_rank != n:
        raise ValueError(f"r(M) = {M.rationality_rank} < n = {n}: no rank-n period lattice")
    den = reduce(lcm, (x.denominator for r in Mq for x in r), 1)
    Mi = [[int(x * den) for x in r] for r in Mq]
    S, U, _ = _exact.smith(Mi)
    Uinv = _exact.integer_inverse(U)
    N = [row[:n] for row in Uinv]
    N, _ = _exact.column_hnf(N)
    N = [row[:n] for row in N]
    if n == 2 and reduce_basis:
        N = _lattice_reduce_2d(N)
    Mt = _exact.transpose(Mq)
    B = _exact.solve(_exact.matmul(Mt, Mq), _exact.matmul(Mt, N))
    if _exact.det(B) < 0:
        N = [r[:-1] + [-r[-1]] for r in N]
        B = [r[:-1] + [-r[-1]] for r in B]
    assert _exact.matmul(Mq, B) == [[Fraction(x) for x in r] for r in N]
    Q = P.pushforward(N)
    F = compose(P, M)
    return PeriodicFactorization(B=[[Fraction(x) for x in r] for r in B], N=N, Q=Q, F=F)


def period_group(F: TrigSystem):
    """Period lattice basis (columns, exact) or the string ``"aperiodic"``.

    For rational frequencies the period group is the dual of the group they
    generate.  With declared irrational constants and ``r(M) < n`` the image
    of ``R^n`` in the torus is not closed and there is no full period lattice.
    """
    n = F.n
    if F.exact_freqs is None:
        raise ValueError("period group needs exact (rational or declared) frequencies")
    if len(F.basis) > 1 and any(any(e[1:]) for fw in F.exact_freqs for w in fw for e in w):
        if F.emap is None:
            raise ValueError("irrational frequencies without a declared exponent map")
        if F.emap.rationality_rank < n:
            return "aperiodic"
        raise ValueError("irrational exponent map with full rationality rank; rescale to rational form")
    vecs = [[e[0] for e in w] for fw in F.exact_freqs for w in fw]
    den = reduce(lcm, (x.denominator for r in vecs for x in r), 1)
    H = _exact.row_lattice_basis([[int(x * den) for x in r] for r in vecs])
    if len(H) < n:
        return "aperiodic"
    G = [[Fraction(x, den) for x in r] for r in H]
    # columns gamma_j with g_i . gamma_j = delta_ij
    return _exact.inverse(G)


# ---------------------------------------------------------------------------
# JSON ingestion


def load_system(source, mode="double"):
    """Parse the system JSON (path, str or dict) into ``(LaurentSystem, ExponentMap, generators)``."""
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if not str(source).lstrip().startswith("{"):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SystemFormatError(f"line {exc.lineno} col {exc.colno}", exc.msg) from exc
    if not isinstance(data, dict):
        raise SystemFormatError("$", "top level must be an object")
    for key in ("m", "n", "polys"):
        if key not in data:
            raise SystemFormatError(f"$.{key}", "missing")
    m, n = data["m"], data["n"]
    if not (isinstance(m, int) and isinstance(n, int) and m >= 1 and n >= 1):
        raise SystemFormatError("$.m/$.n", "must be positive integers")
    polys = data["polys"]
    if not isinstance(polys, list) or len(polys) != n:
        raise SystemFormatError("$.polys", f"expected a list of {n} polynomials")
    parsed = []
    for j, p in enumerate(polys):
        terms = p.get("terms") if isinstance(p, dict) else None
        if not isinstance(terms, list) or not terms:
            raise SystemFormatError(f"$.polys[{j}].terms", "expected a nonempty list")
        tt = []
        seen = set()
        for t, term in enumerate(terms):
            path = f"$.polys[{j}].terms[{t}]"
            if not isinstance(term, dict) or "exp" not in term or "coef" not in term:
                raise SystemFormatError(path, "term needs 'exp' and 'coef'")
            k = term["exp"]
            if not (isinstance(k, list) and len(k) == m and all(isinstance(x, int) for x in k)):
                raise SystemFormatError(path + ".exp", f"expected {m} integers")
            if tuple(k) in seen:
                raise SystemFormatError(path + ".exp", "duplicate exponent")
            seen.add(tuple(k))
            c = _parse_coef(term["coef"], path + ".coef", mode)
            if not (c if mode == "exact" else c != 0):
                raise SystemFormatError(path + ".coef", "coefficients must be nonzero")
            tt.append((tuple(k), c))
        parsed.append(tuple(tt))
    P = LaurentSystem(m, tuple(parsed), mode)
    if "M" in data:
        rows = data["M"].get("rows") if isinstance(data["M"], dict) else None
        if not isinstance(rows, list) or len(rows) != m or any(not isinstance(r, list) or len(r) != n for r in rows):
            raise SystemFormatError("$.M.rows", f"expected {m} rows of {n} entries")
        try:
            M = ExponentMap.from_rows(rows)
        except (ValueError, ZeroDivisionError) as exc:
            raise SystemFormatError("$.M.rows", str(exc)) from exc
    elif m == n:
        M = ExponentMap.identity(n)
    else:
        raise SystemFormatError("$.M", "required when m != n")
    gens = data.get("generators")
    return P, M, gens


def system_to_json(P: LaurentSystem, M: ExponentMap):
    d = P.to_json()
    d["M"] = {"rows": _rows_as_strings(M)}
    return d


def _rows_as_strings(M):
    out = []
    for row in M.coords:
        r = []
        for e in row:
            nz = [i for i, a in enumerate(e) if a]
            if not nz:
                r.append("0")
            elif nz == [0]:
                r.append(str(e[0]))
            elif len(nz) == 1 and abs(e[nz[0]]) == 1:
                r.append(("-" if e[nz[0]] < 0 else "") + M.basis[nz[0]])
            else:
                raise ValueError("entry is not a single constant; cannot serialise as decimal")
        out.append(r)
    return out
