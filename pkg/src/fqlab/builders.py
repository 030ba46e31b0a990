"""Canned systems: the classical Poisson case and the worked examples.

Every builder returns ``(LaurentSystem, ExponentMap)`` with exact Laurent
coefficients.  Irrational exponent-map entries are declared constants given
to 50 significant digits.
"""

from __future__ import annotations

from fractions import Fraction

import mpmath

from .exposys import ExponentMap, LaurentSystem

__all__ = ["build", "EXAMPLES", "decimal_constant", "poisson", "kurasov_sarnak", "sine_pair", "ex41", "ex42"]


def decimal_constant(expr) -> str:
    """50-digit decimal string of an mpmath expression (callable or value)."""
    with mpmath.workdps(60):
        x = expr() if callable(expr) else mpmath.mpf(expr)
        return mpmath.nstr(x, 50, strip_zeros=False)


SQRT2 = decimal_constant(lambda: mpmath.sqrt(2))
DEFAULT_B = (decimal_constant(lambda: -1 / mpmath.pi), decimal_constant(lambda: -1 / mpmath.e))


def _frac(x):
    """Exact coefficient; decimal strings such as ``"0.5"`` are read exactly."""
    if isinstance(x, float):
        raise ValueError(f"coefficient {x!r} must be given exactly (int, Fraction or string)")
    return Fraction(x)


def _in_open_unit(x):
    return -1 < x < 1 and x != 0


def _value(s):
    with mpmath.workdps(60):
        return mpmath.mpf(Fraction(s).numerator) / Fraction(s).denominator if isinstance(s, Fraction) or "/" in str(s) \
            else mpmath.mpf(str(s))


def poisson(period=1):
    """``z - 1`` composed with ``x -> exp(2 pi i x / period)``: zeros ``period * Z``."""
    P = LaurentSystem(1, ((((1,), 1), ((0,), -1)),), "exact")
    M = ExponentMap.from_rows([[Fraction(1) / _frac(period)]])
    return P, M


def kurasov_sarnak(omega=("1", SQRT2)):
    """``1 - z1/3 + z2^2/3 - z1 z2^2`` along ``x -> (omega_1 x, omega_2 x)``."""
    P = LaurentSystem(2, ((((0, 0), 1), ((1, 0), Fraction(-1, 3)), ((0, 2), Fraction(1, 3)), ((1, 2), -1)),), "exact")
    M = ExponentMap.from_rows([[omega[0]], [omega[1]]])
    return P, M


def sine_pair(delta="1/2", omega=("1", SQRT2)):
    """``z1 - 1/z1 + delta (z2 - 1/z2)`` along ``x -> (omega_1 x, omega_2 x)``.

    Composed, this is ``2i (sin(2 pi omega_1 x) + delta sin(2 pi omega_2 x))``.
    """
    d = _frac(delta)
    if d == 0:
        raise ValueError("delta must be nonzero")
    P = LaurentSystem(2, ((((1, 0), 1), ((-1, 0), -1), ((0, 1), d), ((0, -1), -d)),), "exact")
    M = ExponentMap.from_rows([[omega[0]], [omega[1]]])
    return P, M


def _b_vector(b, n):
    if b is None:
        if n > len(DEFAULT_B):
            raise ValueError(f"no default b for n = {n}; pass b explicitly")
        b = DEFAULT_B[:n]
    b = list(b)
    if len(b) != n:
        raise ValueError(f"b needs {n} entries")
    return b


def ex41(n=2, s=None, b=None):
    """``p_j = z_j (1 + s_j z_m) - z_m - s_j`` with ``M = [I_n; b^T]``, ``m = n + 1``.

    Requires ``s_j`` in ``(-1, 1)`` minus 0 and ``b_j < 0``.
    """
    s = [Fraction(1, 2)] * n if s is None else [_frac(x) for x in s]
    if len(s) != n or not all(_in_open_unit(x) for x in s):
        raise ValueError("ex41 needs s_j in (-1, 1) \\ {0}")
    b = _b_vector(b, n)
    if not all(_value(x) < 0 for x in b):
        raise ValueError("ex41 needs b_j < 0")
    m = n + 1
    polys = []
    for j in range(n):
        e_j = tuple(int(i == j) for i in range(m))
        e_m = tuple(int(i == m - 1) for i in range(m))
        both = tuple(a + c for a, c in zip(e_j, e_m))
        polys.append(((e_j, 1), (both, s[j]), (e_m, -1), ((0,) * m, -s[j])))
    P = LaurentSystem(m, tuple(polys), "exact")
    rows = [[int(i == j) for j in range(n)] for i in range(n)] + [b]
    return P, ExponentMap.from_rows(rows)


def ex42(n=2, delta="1/2", b=None):
    """``p_j = z_j - 1/z_j - delta (z_m - 1/z_m)`` with ``M = [I_n; b^T]``.

    Requires ``delta`` in ``(-1, 1)`` minus 0 and ``sum |b_j| < 1``.
    """
    d = _frac(delta)
    if not _in_open_unit(d):
        raise ValueError("ex42 needs delta in (-1, 1) \\ {0}")
    b = _b_vector(b, n)
    if not sum(abs(_value(x)) for x in b) < 1:
        raise ValueError("ex42 needs sum |b_j| < 1")
    m = n + 1
    polys = []
    for j in range(n):
        e_j = tuple(int(i == j) for i in range(m))
        e_m = tuple(int(i == m - 1) for i in range(m))
        neg = lambda v: tuple(-x for x in v)
        polys.append(((e_j, 1), (neg(e_j), -1), (e_m, -d), (neg(e_m), d)))
    P = LaurentSystem(m, tuple(polys), "exact")
    rows = [[int(i == j) for j in range(n)] for i in range(n)] + [b]
    return P, ExponentMap.from_rows(rows)


EXAMPLES = {
    "poisson": poisson,
    "kurasov-sarnak": kurasov_sarnak,
    "sine-pair": sine_pair,
    "ex41": ex41,
    "ex42": ex42,
}


def build(name, **params):
    try:
        fn = EXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
    return fn(**{k: v for k, v in params.items() if v is not None})
